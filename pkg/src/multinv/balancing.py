"""Online randomized cost-balancing policy.

Each location is controlled independently by the same rule.  At stage k
in state x the rule works with two proxy costs as functions of the
candidate order u:

* an expected holding proxy EH(u), charged over every remaining period
  for the ordered units that period's demand would not have consumed
  (over-ordering cannot be undone), and
* a one-step expected backlog proxy EB(u) = b * E max{0, w - max{0, x+u}}
  (under-ordering can be corrected next period).

The balancing quantity u_hat equates EH and EB; its common value is the
balancing cost theta.  With a fixed ordering charge K > 0 two more
quantities enter: u_tilde sets EH(u_tilde) = K, and the probability p
solves p*K = p*EB(u_tilde) + (1-p)*EB(0).  The rule is then: order
u_hat when theta >= K; otherwise order u_tilde with probability p and
nothing with probability 1-p.  With K = 0 the rule is deterministic.

Two readings of the holding proxy's demand term are supported:

* ``printed``  -- each remaining period contributes
  max{0, u - max{0, w_n - x}} with that period's demand alone;
* ``cumulative`` -- period n contributes
  max{0, u - max{0, (w_k + ... + w_n) - x}} with the demand accumulated
  since the order was placed.

Both count the remaining periods k..N-1.  EH is nondecreasing and EB
nonincreasing in u, so all solves are bisections.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

import numpy as np

from .model import DiscreteMarginal, Finite, Problem, UniformMarginal
from .policies import Policy

logger = logging.getLogger(__name__)

VARIANTS = ("printed", "cumulative")


@dataclass
class BalancingState:
    """Per-location data of the balancing rule."""

    periods: int
    a: float
    b: float
    K: float = 0.0
    marginal: object = None  # DiscreteMarginal or UniformMarginal
    u_cap: float = np.inf
    variant: str = "printed"
    tol: float = 1e-9
    max_iter: int = 200

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown balancing variant {self.variant!r}")
        if self.a < 0 or self.b < 0 or self.K < 0:
            raise ValueError("rates and fixed charge must be >= 0")

    def _check_stage(self, k: int):
        if not 0 <= k < self.periods:
            raise IndexError(f"stage {k} out of range")

    def _atoms(self):
        if not isinstance(self.marginal, DiscreteMarginal):
            raise TypeError("discrete demand required here")
        order = np.argsort(np.asarray(self.marginal.values))
        return (np.asarray(self.marginal.values, dtype=float)[order],
                np.asarray(self.marginal.probs, dtype=float)[order])


@functools.lru_cache(maxsize=None)
def _partial_sum_atoms(values: tuple, probs: tuple, horizon: int):
    """Merged (value, weight) atoms of the partial sums w_1+...+w_r over
    r = 1..horizon: each r's pmf enters at full weight and equal values
    from different r coalesce, so the weights sum to ``horizon``."""
    base = {}
    for v, p in zip(values, probs):
        key = round(v, 9)
        base[key] = base.get(key, 0.0) + p
    merged = {}
    current = dict(base)
    for _ in range(horizon):
        for s, ps in current.items():
            merged[s] = merged.get(s, 0.0) + ps
        nxt = {}
        for s, ps in current.items():
            for v, p in base.items():
                key = round(s + v, 9)
                nxt[key] = nxt.get(key, 0.0) + ps * p
        current = nxt
    out_vals = np.array(sorted(merged))
    return out_vals, np.array([merged[v] for v in out_vals])


def _holding_atoms(state: BalancingState, k: int):
    """(values, probs, scale) with EH(u) = scale * sum_j probs_j *
    max{0, u - max{0, values_j - x}}."""
    remaining = state.periods - k
    values, probs = state._atoms()
    if state.variant == "printed":
        return values, probs, state.a * remaining
    vals, ps = _partial_sum_atoms(tuple(values), tuple(probs), remaining)
    return vals, ps, state.a


def _eh_factory(state: BalancingState, k: int, x: np.ndarray):
    """EH(.) at fixed (k, x) with per-state shortfall thresholds
    precomputed; called many times during bisection."""
    if isinstance(state.marginal, UniformMarginal):
        return lambda u: _eh_uniform(state, k, x, u)
    values, probs, scale = _holding_atoms(state, k)
    thresholds = np.maximum(0.0, values[:, None] - np.asarray(x, float)[None, :])

    def eh(u):
        acc = np.zeros(np.shape(u))
        for j in range(len(probs)):
            acc += probs[j] * np.maximum(0.0, u - thresholds[j])
        return scale * acc

    return eh


def _eb_factory(state: BalancingState, k: int, x: np.ndarray):
    if isinstance(state.marginal, UniformMarginal):
        return lambda u: _eb_uniform(state, k, x, u)
    values, probs = state._atoms()
    x = np.asarray(x, float)

    def eb(u):
        post = np.maximum(0.0, x + u)
        acc = np.zeros(np.shape(u))
        for v, p in zip(values, probs):
            acc += p * np.maximum(0.0, v - post)
        return state.b * acc

    return eb


def _eh_batch(state: BalancingState, k: int, x: np.ndarray,
              u: np.ndarray) -> np.ndarray:
    x, u = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)),
                               np.atleast_1d(np.asarray(u, float)))
    return _eh_factory(state, k, x)(u)


def _eb_batch(state: BalancingState, k: int, x: np.ndarray,
              u: np.ndarray) -> np.ndarray:
    x, u = np.broadcast_arrays(np.atleast_1d(np.asarray(x, float)),
                               np.atleast_1d(np.asarray(u, float)))
    return _eb_factory(state, k, x)(u)


def _eh_uniform(state, k, x, u):
    from scipy.integrate import quad
    if state.variant != "printed":
        raise NotImplementedError("cumulative variant needs discrete demand")
    g = state.marginal
    remaining = state.periods - k
    x_arr, u_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
    out = np.empty(x_arr.shape)
    for idx in np.ndindex(x_arr.shape):
        xi, ui = x_arr[idx], u_arr[idx]
        val, _ = quad(lambda w: max(0.0, ui - max(0.0, w - xi)), g.lo, g.hi)
        out[idx] = state.a * remaining * val / (g.hi - g.lo)
    return out


def _eb_uniform(state, k, x, u):
    from scipy.integrate import quad
    g = state.marginal
    x_arr, u_arr = np.broadcast_arrays(np.asarray(x, float), np.asarray(u, float))
    out = np.empty(x_arr.shape)
    for idx in np.ndindex(x_arr.shape):
        post = max(0.0, x_arr[idx] + u_arr[idx])
        val, _ = quad(lambda w: max(0.0, w - post), g.lo, g.hi)
        out[idx] = state.b * val / (g.hi - g.lo)
    return out


def expected_holding_proxy(state: BalancingState, k: int, x: float,
                           u: float) -> float:
    """EH(u) at (k, x); exact atom sums for discrete demand, quadrature
    for uniform demand."""
    if u < 0:
        raise ValueError("order must be >= 0")
    state._check_stage(k)
    return float(_eh_batch(state, k, np.asarray(x, float), np.asarray(u, float)).ravel()[0])


def expected_backlog_proxy(state: BalancingState, k: int, x: float,
                           u: float) -> float:
    """EB(u) at (k, x)."""
    if u < 0:
        raise ValueError("order must be >= 0")
    state._check_stage(k)
    return float(_eb_batch(state, k, np.asarray(x, float), np.asarray(u, float)).ravel()[0])


# A fixed halving count keeps the solve purely elementwise (results never
# depend on what else shares the batch) while overshooting the 1e-9 cost
# tolerance by many orders of magnitude: 64 halvings shrink a bracket of
# width W to W / 2^64, so the residual is below tolerance whenever
# slope * W < ~1e9, far beyond any instance here.
_BISECT_HALVINGS = 64


def _bisect(f, lo: np.ndarray, hi: np.ndarray, max_iter: int):
    """Rootfind a nondecreasing f componentwise on [lo, hi] with
    f(lo) <= 0 <= f(hi) (clamped endpoints otherwise)."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(min(max_iter, _BISECT_HALVINGS)):
        mid = 0.5 * (lo + hi)
        below = f(mid) < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _max_demand(state: BalancingState) -> float:
    g = state.marginal
    return float(max(g.values)) if isinstance(g, DiscreteMarginal) else float(g.hi)


def balancing_order_batch(state: BalancingState, k: int, x: np.ndarray,
                          caps: np.ndarray):
    """(u_hat, theta) arrays for a batch of states.

    The bracket top is min(cap, the order that zeroes the backlog
    proxy), where the balance gap is certainly nonnegative.
    """
    x = np.asarray(x, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), x.shape)
    eh = _eh_factory(state, k, x)
    eb = _eb_factory(state, k, x)
    eb0 = eb(np.zeros_like(x))
    hi = np.minimum(caps, np.maximum(0.0, _max_demand(state) - x))
    u_hat = _bisect(lambda u: eh(u) - eb(u),
                    np.zeros_like(x), hi, state.max_iter)
    u_hat = np.where(eb0 == 0.0, 0.0, u_hat)
    theta = eh(u_hat)
    theta = np.where(eb0 == 0.0, 0.0, theta)
    return u_hat, theta


def balancing_order(state: BalancingState, k: int, x: float):
    """The order equating the two proxies, and their common cost."""
    state._check_stage(k)
    u, theta = balancing_order_batch(state, k, np.asarray([x]),
                                     np.asarray([state.u_cap]))
    return float(u[0]), float(theta[0])


def holding_cost_K_order_batch(state: BalancingState, k: int, x: np.ndarray,
                               caps: np.ndarray):
    if state.K <= 0:
        raise ValueError("the holding-cost-K order exists only for K > 0")
    x = np.asarray(x, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), x.shape).astype(float)
    values, _, scale = _holding_atoms(state, k)
    if scale <= 0 and not np.all(np.isfinite(caps)):
        raise ValueError("zero holding rate with an unbounded cap cannot reach K")
    slack = 0.0 if scale <= 0 else state.K / scale + 1.0
    bound = np.maximum(0.0, float(np.max(values)) - x) + slack
    hi = np.minimum(caps, bound)
    eh = _eh_factory(state, k, x)
    saturated = eh(hi) < state.K  # only possible when hi == caps
    u = _bisect(lambda v: eh(v) - state.K, np.zeros_like(x), hi, state.max_iter)
    u = np.where(saturated, caps, u)
    return u, saturated


def holding_cost_K_order(state: BalancingState, k: int, x: float):
    """(u_tilde, saturated): the order whose holding proxy equals K, or
    the cap with a saturation flag when even the cap stays below K."""
    state._check_stage(k)
    u, sat = holding_cost_K_order_batch(state, k, np.asarray([x]),
                                        np.asarray([state.u_cap]))
    return float(u[0]), bool(sat[0])


def balancing_probability_batch(state: BalancingState, k: int, x: np.ndarray,
                                u_tilde: np.ndarray) -> np.ndarray:
    if state.K <= 0:
        raise ValueError("the balancing probability exists only for K > 0")
    eb0 = _eb_batch(state, k, np.asarray(x, float), np.zeros_like(np.asarray(x, float)))
    ebt = _eb_batch(state, k, np.asarray(x, float), np.asarray(u_tilde, float))
    denom = state.K - ebt + eb0
    bad = denom <= 0
    if np.any(bad):
        logger.warning("balancing probability: nonpositive denominator at "
                       "%d states, forcing p = 1", int(bad.sum()))
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(bad, 1.0, eb0 / np.where(bad, 1.0, denom))
    return np.clip(p, 0.0, 1.0)


def balancing_probability(state: BalancingState, k: int, x: float,
                          u_tilde: float) -> float:
    state._check_stage(k)
    return float(balancing_probability_batch(state, k, np.asarray([x]),
                                             np.asarray([u_tilde]))[0])


def act_balancing_batch(state: BalancingState, k: int, x: np.ndarray,
                        caps: np.ndarray, uniforms) -> np.ndarray:
    """Orders for a batch of states; consumes one uniform per state when
    K > 0 (whether or not the randomized branch is taken)."""
    u_hat, theta = balancing_order_batch(state, k, x, caps)
    if state.K == 0:
        return u_hat
    order = u_hat.copy()
    low = theta < state.K
    if np.any(low):
        caps_b = np.broadcast_to(np.asarray(caps, dtype=float), np.shape(x))
        u_til, _ = holding_cost_K_order_batch(state, k, x[low], caps_b[low])
        p = balancing_probability_batch(state, k, x[low], u_til)
        order[low] = np.where(uniforms[low] < p, u_til, 0.0)
    return order


def act_balancing(state: BalancingState, k: int, x: float,
                  stream=None) -> float:
    """One location's order under the balancing rule."""
    state._check_stage(k)
    uniforms = None
    if state.K > 0:
        if stream is None:
            raise ValueError("K > 0 balancing needs a random stream")
        uniforms = stream.random(1)
    u = act_balancing_batch(state, k, np.asarray([x]),
                            np.asarray([state.u_cap]), uniforms)
    return float(u[0])


class BalancingPolicy(Policy):
    """Decoupled composition of per-location balancing rules."""

    kind = "balancing"

    def __init__(self, states):
        self.states = list(states)

    @property
    def uses_randomness(self):
        return any(s.K > 0 for s in self.states)

    def act_batch(self, problem, k, X, uniforms):
        caps = problem.order_cap(X)
        cols = []
        for i, state in enumerate(self.states):
            u = None if uniforms is None else uniforms[:, i]
            cols.append(act_balancing_batch(state, k, X[:, i], caps[:, i], u))
        return np.stack(cols, axis=1)

    def to_config(self):
        s0 = self.states[0]
        return {"kind": self.kind, "fixed_charge": s0.K, "variant": s0.variant,
                "holding": [s.a for s in self.states],
                "backlog": [s.b for s in self.states],
                "periods": s0.periods}

    def diagnostics(self, problem, k: int, x) -> list:
        """Per-location trace of the rule's quantities at (k, x): the
        balancing order and cost, and for K > 0 also the holding-cost-K
        order and the ordering probability."""
        X = np.asarray(x, dtype=float).reshape(1, -1)
        caps = problem.order_cap(X)
        out = []
        for i, state in enumerate(self.states):
            u_hat, theta = balancing_order_batch(state, k, X[:, i], caps[:, i])
            entry = {"location": i, "u_hat": float(u_hat[0]),
                     "theta": float(theta[0])}
            if state.K > 0:
                u_til, sat = holding_cost_K_order_batch(state, k, X[:, i], caps[:, i])
                p = balancing_probability_batch(state, k, X[:, i], u_til)
                entry.update(u_tilde=float(u_til[0]), saturated=bool(sat[0]),
                             probability=float(p[0]))
            out.append(entry)
        return out


def make_balancing_policy(problem: Problem, K: float | None = None,
                          variant: str = "printed") -> BalancingPolicy:
    """Balancing policy for a finite-horizon problem; the fixed charge
    defaults to the ordering cost's jump at zero."""
    if not isinstance(problem.horizon, Finite):
        raise ValueError("the balancing policy is defined for finite horizons")
    if K is None:
        K = problem.ordering.fixed_charge_at_zero
    states = []
    for i in range(problem.m):
        states.append(BalancingState(
            periods=problem.horizon.periods,
            a=problem.holding.holding[i],
            b=problem.holding.backlog[i],
            K=K,
            marginal=problem.demand.marginals[i],
            u_cap=problem.max_order_per_location,
            variant=variant,
        ))
    return BalancingPolicy(states)
