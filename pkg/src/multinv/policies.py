"""The policy zoo: representations, constructors, and a uniform
action interface.

Every policy answers ``act_batch(problem, k, X, uniforms)`` for a batch
of states X of shape (B, M) and returns feasible orders of shape (B, M);
the scalar ``act`` is the B = 1 special case, so scalar and batched
simulation consume randomness identically.  Deterministic policies
ignore the uniforms.

Orders are always componentwise nonnegative and truncated to the
feasible action box (per-location cap, grid ceiling); truncation at the
grid top is logged because order-up-to levels are defined on the whole
real line while the grid is not.
"""

from __future__ import annotations

import hashlib
import logging

import numpy as np

from . import dp as dp_mod
from .model import (Problem, linear_cost, affine_cost,
                    single_location_problem)

logger = logging.getLogger(__name__)


class Policy:
    """Base class; see the module docstring for the action contract."""

    kind = "policy"
    uses_randomness = False

    # -- acting ------------------------------------------------------------
    def act(self, problem: Problem, k: int, x, stream=None) -> np.ndarray:
        X = np.asarray(x, dtype=float).reshape(1, -1)
        uniforms = None
        if self.uses_randomness:
            if stream is None:
                raise ValueError(f"{self.kind} policy needs a random stream")
            uniforms = stream.random((1, problem.m))
        return self.act_batch(problem, k, X, uniforms)[0]

    def act_batch(self, problem: Problem, k: int, X: np.ndarray,
                  uniforms) -> np.ndarray:
        raise NotImplementedError

    # -- grid tabulation (deterministic grid policies only) ----------------
    def tabulate(self, problem: Problem) -> np.ndarray:
        """Per-stage order tables in grid steps, for exact evaluation."""
        if self.uses_randomness:
            raise ValueError(f"{self.kind} policy is randomized; use Monte Carlo")
        grid = problem.grid
        n, m = grid.count, problem.m
        idx = np.stack([g.ravel() for g in np.indices((n,) * m)], axis=1)
        X = grid.points()[idx]
        periods = problem.periods
        table = np.zeros((periods,) + (n,) * m + (m,), dtype=np.int32)
        for k in range(periods):
            orders = self.act_batch(problem, k, X, None)
            steps = orders / grid.step
            rounded = np.rint(steps).astype(np.int32)
            if np.max(np.abs(steps - rounded)) > 1e-9:
                raise ValueError(f"{self.kind} policy orders leave the grid; "
                                 "exact evaluation is undefined")
            table[k] = rounded.reshape((n,) * m + (m,))
        return table

    # -- bookkeeping --------------------------------------------------------
    def to_config(self) -> dict:
        raise NotImplementedError

    @property
    def tag(self) -> str:
        """Stable identifier entering random-stream derivation."""
        digest = hashlib.sha256(repr(self.to_config()).encode()).hexdigest()[:12]
        return f"{self.kind}:{digest}"


def act(policy: Policy, problem: Problem, k: int, x, stream=None) -> np.ndarray:
    """Uniform action interface: feasible joint order at (k, x)."""
    return policy.act(problem, k, x, stream)


def _truncate(raw: np.ndarray, problem: Problem, X: np.ndarray,
              kind: str) -> np.ndarray:
    cap = problem.order_cap(X)
    clipped = np.clip(raw, 0.0, cap)
    if logger.isEnabledFor(logging.DEBUG) and np.any(raw > cap + 1e-12):
        logger.debug("%s: truncated %d orders to the feasible box",
                     kind, int(np.sum(raw > cap + 1e-12)))
    return clipped


def _stage_row(levels: np.ndarray, k: int, periods_hint: str) -> np.ndarray:
    """Row of a (M,)-stationary or (N, M) stage-indexed parameter array."""
    if levels.ndim == 1:
        return levels
    if not 0 <= k < levels.shape[0]:
        raise IndexError(f"stage {k} out of range for {periods_hint}")
    return levels[k]


class BaseStockPolicy(Policy):
    """Order up to S whenever below it; levels stationary (M,) or
    stage-indexed (N, M)."""

    kind = "base_stock"

    def __init__(self, levels):
        self.levels = np.asarray(levels, dtype=float)
        if self.levels.ndim not in (1, 2):
            raise ValueError("levels must be (M,) or (stages, M)")

    def act_batch(self, problem, k, X, uniforms):
        S = _stage_row(self.levels, k, "base-stock levels")
        return _truncate(S - X, problem, X, self.kind)

    def to_config(self):
        return {"kind": self.kind, "levels": self.levels.tolist()}


class SSPolicy(Policy):
    """Order up to S when strictly below s, otherwise nothing."""

    kind = "sS"

    def __init__(self, small_s, big_s):
        self.small_s = np.asarray(small_s, dtype=float)
        self.big_s = np.asarray(big_s, dtype=float)
        if self.small_s.shape != self.big_s.shape:
            raise ValueError("s and S shapes must match")
        if np.any(self.small_s > self.big_s):
            raise ValueError("every s must be <= its S")

    def act_batch(self, problem, k, X, uniforms):
        s = _stage_row(self.small_s, k, "(s,S) parameters")
        S = _stage_row(self.big_s, k, "(s,S) parameters")
        raw = np.where(X < s, S - X, 0.0)
        return _truncate(raw, problem, X, self.kind)

    def to_config(self):
        return {"kind": self.kind, "small_s": self.small_s.tolist(),
                "big_s": self.big_s.tolist()}


class TabularGridPolicy(Policy):
    """Wraps a DP order table; defined only on grid states."""

    kind = "tabular"

    def __init__(self, table: dp_mod.TabularPolicy):
        self.table = table

    def act_batch(self, problem, k, X, uniforms):
        grid = self.table.grid
        if not 0 <= k < self.table.stages:
            raise IndexError(f"stage {k} out of range")
        idx = np.rint((X - grid.lo) / grid.step).astype(int)
        if np.max(np.abs(X - (grid.lo + idx * grid.step))) > 1e-9:
            raise ValueError("tabular policy queried off the grid")
        steps = self.table.orders[k][tuple(idx[:, i] for i in range(X.shape[1]))]
        return steps * grid.step

    def tabulate(self, problem):
        table = self.table.orders
        expected = (problem.periods,) + (problem.grid.count,) * problem.m + (problem.m,)
        if table.shape != expected:
            raise ValueError("tabular policy does not match the problem's grid/horizon")
        return table

    def to_config(self):
        return {"kind": self.kind, "stages": int(self.table.stages),
                "digest": hashlib.sha256(self.table.orders.tobytes()).hexdigest()[:16]}


class DecoupledPolicy(Policy):
    """Componentwise composition of single-location policies."""

    kind = "decoupled"

    def __init__(self, components):
        self.components = list(components)

    @property
    def uses_randomness(self):
        return any(c.uses_randomness for c in self.components)

    def act_batch(self, problem, k, X, uniforms):
        if len(self.components) != X.shape[1]:
            raise ValueError("component count does not match the location count")
        cols = []
        for i, comp in enumerate(self.components):
            u = None if uniforms is None else uniforms[:, [i]]
            cols.append(comp.act_batch(problem, k, X[:, [i]], u))
        return np.concatenate(cols, axis=1)

    def to_config(self):
        return {"kind": self.kind,
                "components": [c.to_config() for c in self.components]}


class ExplicitVPolicy(Policy):
    """Threshold-and-equalize policy over a finite set of order sizes.

    Orders the smallest available total v that lifts system inventory to
    at least the threshold, split so post-order levels are equal; when
    equal splitting would require a negative component, the lowest
    levels are raised to a common value instead (waterfilling), spending
    exactly v.  At or above the threshold it orders nothing; when no v
    reaches the threshold it falls back to the smallest v.
    """

    kind = "pi_v"

    def __init__(self, v_values, threshold):
        self.v_values = tuple(sorted(float(v) for v in v_values))
        self.threshold = float(threshold)

    def _check_instance(self, problem):
        zs = {z for z, _ in problem.ordering.discounts}
        if not set(self.v_values) <= zs:
            raise ValueError("explicit-v policy requires an instance whose "
                             "discount set contains its order sizes")

    def act_batch(self, problem, k, X, uniforms):
        self._check_instance(problem)
        B, m = X.shape
        sx = X.sum(axis=1)
        total = np.full(B, self.v_values[0])
        for v in reversed(self.v_values):
            total[sx + v >= self.threshold] = v
        total[sx >= self.threshold] = 0.0
        orders = np.zeros_like(X)
        active = total > 0
        if np.any(active):
            orders[active] = _waterfill(X[active], total[active])
        return _truncate(orders, problem, X, self.kind)

    def to_config(self):
        return {"kind": self.kind, "v_values": list(self.v_values),
                "threshold": self.threshold}


def _waterfill(X: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rowwise orders max(L - x, 0) with the common level L chosen so the
    row sums to v.  Reduces to the equal split when feasible."""
    B, m = X.shape
    xs = np.sort(X, axis=1)
    prefix = np.cumsum(xs, axis=1)
    level = (v + prefix[:, m - 1]) / m
    found = np.zeros(B, dtype=bool)
    out_level = np.empty(B)
    for q in range(1, m + 1):
        cand = (v + prefix[:, q - 1]) / q
        ok = cand >= xs[:, q - 1] - 1e-15
        if q < m:
            ok &= cand <= xs[:, q] + 1e-15
        newly = ok & ~found
        out_level[newly] = cand[newly]
        found |= newly
    out_level[~found] = level[~found]
    return np.maximum(out_level[:, None] - X, 0.0)


# ---------------------------------------------------------------------------
# Constructors for the named decoupled policies
# ---------------------------------------------------------------------------

def make_pi_square(problem: Problem, l: float) -> DecoupledPolicy:
    """Decoupled base-stock policy: each location solves its own
    single-location problem under the linear cost l*z and keeps the
    per-stage base-stock levels the DP produces."""
    components = []
    for i in range(problem.m):
        sub = single_location_problem(problem, i, ordering=linear_cost(l))
        _, tab = dp_mod.solve_single_dp(sub)
        levels = np.array([[dp_mod.extract_base_stock(tab, k)]
                           for k in range(tab.stages)])
        components.append(BaseStockPolicy(levels))
    return DecoupledPolicy(components)


def make_pi_diamond(problem: Problem, K_h: float, h: float) -> DecoupledPolicy:
    """Decoupled (s,S) policy: each location solves its own
    single-location problem under the affine cost K_h*1(z) + h*z."""
    components = []
    for i in range(problem.m):
        sub = single_location_problem(problem, i, ordering=affine_cost(K_h, h))
        _, tab = dp_mod.solve_single_dp(sub)
        pairs = [dp_mod.extract_sS(tab, k) for k in range(tab.stages)]
        small = np.array([[p[0]] for p in pairs])
        big = np.array([[p[1]] for p in pairs])
        components.append(SSPolicy(small, big))
    return DecoupledPolicy(components)


def make_pi_v(m: int, delta: float) -> ExplicitVPolicy:
    """Threshold-and-equalize policy over order sizes {M, M(1+delta)}.

    The order sizes are computed once here with the same float
    expressions the matching instance uses for its discount set, so
    discounted prices are hit exactly, never by drifting arithmetic.
    """
    v_values = (float(m), m * (1.0 + delta))
    return ExplicitVPolicy(v_values=v_values, threshold=m * (1.0 + delta))
