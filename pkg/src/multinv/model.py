"""Problem definition for multi-location inventory control.

A problem couples M single-location inventories through one ordering
cost charged on the total order quantity per period.  Inventory follows
x[k+1] = x[k] + u[k] - w[k] per location, with nonnegative orders u and
nonnegative, bounded, independent demand w.  Each period costs

    c(sum_i u_i)  +  sum_i  a_i*max(0, y_i) + b_i*max(0, -y_i)

where y_i = x_i + u_i - w_i is the post-demand level.  States live on a
regular grid; grid coordinates are always produced by index arithmetic
(min + i*step), never by accumulation, so exact dynamic programming
stays drift-free over long horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

GRID_ALIGN_TOL = 1e-9
PROB_SUM_TOL = 1e-12
# Discount points are matched with a tiny absolute tolerance: orders
# constructed from the stored discount values land within a few ulps,
# while continuous demand sums miss the band almost surely.
DISCOUNT_MATCH_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when a problem violates its invariants; carries all messages."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UnsupportedDemandError(ValueError):
    """Raised when an operation needs a demand feature the model lacks."""


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Regular one-dimensional state grid shared by every location."""

    lo: float
    hi: float
    step: float

    def check(self):
        errors = []
        if not self.step > 0:
            errors.append("grid.step: must be > 0")
        if self.lo > self.hi:
            errors.append("grid.lo/hi: lo must not exceed hi")
        if self.step > 0:
            ratio = (self.hi - self.lo) / self.step
            if abs(ratio - round(ratio)) > GRID_ALIGN_TOL:
                errors.append("grid: (hi - lo)/step is not integral")
        return errors

    @property
    def count(self) -> int:
        return int(round((self.hi - self.lo) / self.step)) + 1

    def point(self, i: int) -> float:
        return self.lo + i * self.step

    def points(self) -> np.ndarray:
        return self.lo + self.step * np.arange(self.count)

    def index(self, value: float) -> int:
        """Grid index of ``value``; rejects off-grid values."""
        i = (value - self.lo) / self.step
        j = int(round(i))
        if abs(i - j) > GRID_ALIGN_TOL or j < 0 or j >= self.count:
            raise ValueError(f"value {value} is not on the grid")
        return j

    def to_steps(self, quantity: float) -> int:
        """Express a nonnegative quantity as a whole number of grid steps."""
        s = quantity / self.step
        j = int(round(s))
        if abs(s - j) > GRID_ALIGN_TOL:
            raise ValueError(f"quantity {quantity} is not a multiple of the grid step")
        return j


# ---------------------------------------------------------------------------
# Demand
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteMarginal:
    """Finitely supported per-location demand distribution."""

    values: tuple
    probs: tuple

    def check(self, where: str):
        errors = []
        if len(self.values) != len(self.probs) or not self.values:
            errors.append(f"{where}: values and probs must be nonempty and equal length")
            return errors
        if any(v < 0 for v in self.values):
            errors.append(f"{where}: demand values must be nonnegative")
        if any(p < 0 for p in self.probs):
            errors.append(f"{where}: probabilities must be nonnegative")
        if abs(sum(self.probs) - 1.0) > PROB_SUM_TOL:
            errors.append(f"{where}: probabilities sum to {sum(self.probs)!r}, not 1")
        if len(set(self.values)) != len(self.values):
            errors.append(f"{where}: demand values must be distinct")
        return errors


@dataclass(frozen=True)
class UniformMarginal:
    """Continuous uniform per-location demand on [lo, hi)."""

    lo: float
    hi: float

    def check(self, where: str):
        errors = []
        if not 0 <= self.lo:
            errors.append(f"{where}: uniform lo must be >= 0")
        if not self.lo < self.hi:
            errors.append(f"{where}: uniform needs lo < hi")
        if not math.isfinite(self.hi):
            errors.append(f"{where}: uniform hi must be finite (bounded support)")
        return errors


@dataclass(frozen=True)
class DemandModel:
    """Per-location demand marginals, independent across locations.

    ``iid_across_periods`` records the temporal assumption; everything in
    this package requires it and validation rejects the alternative.
    """

    marginals: tuple
    iid_across_periods: bool = True

    @property
    def m(self) -> int:
        return len(self.marginals)

    @property
    def is_discrete(self) -> bool:
        return all(isinstance(g, DiscreteMarginal) for g in self.marginals)

    def check(self):
        errors = []
        if not self.marginals:
            errors.append("demand: needs at least one location")
        if not self.iid_across_periods:
            errors.append("demand: only i.i.d.-across-periods demand is supported")
        for i, g in enumerate(self.marginals):
            errors.extend(g.check(f"demand[{i}]"))
        return errors

    def max_value(self, i: int) -> float:
        g = self.marginals[i]
        return max(g.values) if isinstance(g, DiscreteMarginal) else g.hi

    def mean(self, i: int) -> float:
        g = self.marginals[i]
        if isinstance(g, DiscreteMarginal):
            return float(sum(v * p for v, p in zip(g.values, g.probs)))
        return 0.5 * (g.lo + g.hi)


def demand_pmf(d: DemandModel, i: int):
    """(values ascending, probs) of location ``i``; discrete demand only."""
    g = d.marginals[i]
    if not isinstance(g, DiscreteMarginal):
        raise UnsupportedDemandError("pmf queries require discrete demand")
    order = np.argsort(np.asarray(g.values))
    return (np.asarray(g.values, dtype=float)[order],
            np.asarray(g.probs, dtype=float)[order])


def transform_uniform_draws(d: DemandModel, raw: np.ndarray) -> np.ndarray:
    """Map uniform [0,1) draws of shape (..., M) onto demand values.

    This is the single place raw randomness becomes demand, so scalar and
    batch simulation paths consume streams identically: one uniform per
    location per period, period-major.
    """
    out = np.empty_like(raw, dtype=float)
    for i, g in enumerate(d.marginals):
        u = raw[..., i]
        if isinstance(g, DiscreteMarginal):
            values, probs = demand_pmf(d, i)
            cum = np.cumsum(probs)
            cum[-1] = 1.0
            out[..., i] = values[np.searchsorted(cum, u, side="right")]
        else:
            out[..., i] = g.lo + u * (g.hi - g.lo)
    return out


def sample_demand(d: DemandModel, k: int, stream: np.random.Generator) -> np.ndarray:
    """One period's demand vector.  ``k`` is accepted for interface
    symmetry; demand is i.i.d. across periods."""
    return transform_uniform_draws(d, stream.random(d.m))


def sample_demand_block(d: DemandModel, periods: int,
                        stream: np.random.Generator) -> np.ndarray:
    """Demand for ``periods`` consecutive periods, shape (periods, M)."""
    return transform_uniform_draws(d, stream.random((periods, d.m)))


# ---------------------------------------------------------------------------
# Costs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Piece:
    """One affine piece c(z) = fixed + slope*z on (lower, upper].

    The lower bound is implied by the previous piece (0 for the first),
    so a piece list structurally partitions (0, inf).
    """

    upper: float  # math.inf for the last piece
    fixed: float
    slope: float


@dataclass(frozen=True)
class OrderingCost:
    """Piecewise-affine cost of the total order, with optional discount
    points where a different slope applies at exactly that quantity."""

    pieces: tuple
    discounts: tuple = ()  # ((z, slope), ...)

    def check(self):
        errors = []
        if not self.pieces:
            errors.append("ordering: needs at least one piece")
            return errors
        prev = 0.0
        for j, piece in enumerate(self.pieces):
            if piece.upper <= prev:
                errors.append(f"ordering.pieces[{j}]: upper bounds must increase")
            if piece.fixed < 0 or piece.slope < 0:
                errors.append(f"ordering.pieces[{j}]: fixed and slope must be >= 0")
            prev = piece.upper
        if not math.isinf(self.pieces[-1].upper):
            errors.append("ordering.pieces: last piece must extend to infinity")
        for j in range(len(self.pieces) - 1):
            b = self.pieces[j].upper
            left = self.pieces[j].fixed + self.pieces[j].slope * b
            right = self.pieces[j + 1].fixed + self.pieces[j + 1].slope * b
            if left > right + 1e-9:
                errors.append(
                    f"ordering.pieces[{j}]: value drops at z={b}; the cost must "
                    "be lower semicontinuous")
        zs = [z for z, _ in self.discounts]
        if any(z <= 0 for z in zs):
            errors.append("ordering.discounts: z values must be > 0")
        if len(set(zs)) != len(zs):
            errors.append("ordering.discounts: z values must be distinct")
        if any(s < 0 for _, s in self.discounts):
            errors.append("ordering.discounts: slopes must be >= 0")
        for z, slope in self.discounts:
            piece = self.piece_at(z)
            if slope * z > piece.fixed + piece.slope * z + 1e-9:
                errors.append(
                    f"ordering.discounts: value at z={z} exceeds the covering "
                    "piece; the cost must be lower semicontinuous")
        return errors

    @property
    def fixed_charge_at_zero(self) -> float:
        """The jump of c at 0+, i.e. the first piece's fixed charge."""
        return self.pieces[0].fixed

    def piece_at(self, z: float) -> Piece:
        for piece in self.pieces:
            if z <= piece.upper:
                return piece
        return self.pieces[-1]

    def __call__(self, z: float) -> float:
        return float(self.eval_array(np.asarray(z, dtype=float)))

    def eval_array(self, z: np.ndarray) -> np.ndarray:
        if np.any(z < 0):
            raise ValueError("ordering cost is defined for z >= 0 only")
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        lower = 0.0
        for piece in self.pieces:
            mask = (z > lower) & (z <= piece.upper)
            out[mask] = piece.fixed + piece.slope * z[mask]
            lower = piece.upper
        for zv, slope in self.discounts:
            mask = np.abs(z - zv) <= DISCOUNT_MATCH_TOL
            out[mask] = slope * z[mask]
        return out


def linear_cost(m: float) -> OrderingCost:
    return OrderingCost(pieces=(Piece(math.inf, 0.0, m),))


def affine_cost(K: float, m: float) -> OrderingCost:
    return OrderingCost(pieces=(Piece(math.inf, K, m),))


def eval_ordering_cost(c: OrderingCost, z: float) -> float:
    if z < 0:
        raise ValueError("ordering cost is defined for z >= 0 only")
    return c(z)


@dataclass(frozen=True)
class HoldingBacklogCost:
    """Two-sided piecewise-linear holding/backlog rates per location."""

    holding: tuple  # a_i >= 0, charged on excess inventory
    backlog: tuple  # b_i >= 0, charged on unmet demand

    @property
    def m(self) -> int:
        return len(self.holding)

    def check(self):
        errors = []
        if len(self.holding) != len(self.backlog) or not self.holding:
            errors.append("holding: holding and backlog rate lists must be nonempty and equal length")
            return errors
        for i, (a, b) in enumerate(zip(self.holding, self.backlog)):
            if a < 0 or b < 0:
                errors.append(f"holding[{i}]: rates must be >= 0")
            if a == 0 and b == 0:
                errors.append(f"holding[{i}]: at least one rate must be > 0 (radial unboundedness)")
        return errors

    def eval(self, i: int, x: float) -> float:
        return self.holding[i] * max(0.0, x) + self.backlog[i] * max(0.0, -x)

    def eval_batch(self, levels: np.ndarray) -> np.ndarray:
        """Per-location cost for levels of shape (..., M)."""
        a = np.asarray(self.holding)
        b = np.asarray(self.backlog)
        return a * np.maximum(0.0, levels) + b * np.maximum(0.0, -levels)


def eval_holding_cost(r: HoldingBacklogCost, i: int, x: float) -> float:
    if not 0 <= i < r.m:
        raise IndexError(f"location {i} out of range")
    return r.eval(i, x)


# ---------------------------------------------------------------------------
# Horizon and Problem
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Finite:
    periods: int


@dataclass(frozen=True)
class InfiniteAveraged:
    """Long-run average realized as a long finite simulation; the first
    ``burn_in`` periods' costs are discarded before averaging."""

    sim_periods: int
    burn_in: int = 0


@dataclass(frozen=True)
class Problem:
    m: int
    horizon: object
    ordering: OrderingCost
    holding: HoldingBacklogCost
    demand: DemandModel
    grid: Grid
    max_order_per_location: float

    def validate(self, dp: bool = False) -> "Problem":
        errors = validate_problem(self, dp=dp)
        if errors:
            raise ValidationError(errors)
        return self

    @property
    def periods(self) -> int:
        """Number of simulated periods for either horizon kind."""
        if isinstance(self.horizon, Finite):
            return self.horizon.periods
        return self.horizon.sim_periods

    @property
    def averaging_periods(self) -> int:
        if isinstance(self.horizon, Finite):
            return self.horizon.periods
        return self.horizon.sim_periods - self.horizon.burn_in

    def order_cap(self, x) -> np.ndarray:
        """Componentwise feasible order cap at state x: stay in the grid
        box and respect the per-location order limit."""
        return np.minimum(self.max_order_per_location,
                          self.grid.hi - np.asarray(x, dtype=float))


def validate_problem(problem: Problem, dp: bool = False):
    """All invariant violations, each with a field path.  With ``dp`` the
    extra requirements of exact dynamic programming are enforced (discrete
    demand whose values are whole numbers of grid steps)."""
    errors = []
    if problem.m < 1:
        errors.append("m: need at least one location")
    errors.extend(problem.grid.check())
    errors.extend(problem.ordering.check())
    errors.extend(problem.holding.check())
    errors.extend(problem.demand.check())
    if problem.holding.m != problem.m:
        errors.append(f"holding: has {problem.holding.m} locations, problem has {problem.m}")
    if problem.demand.m != problem.m:
        errors.append(f"demand: has {problem.demand.m} locations, problem has {problem.m}")
    if isinstance(problem.horizon, Finite):
        if problem.horizon.periods < 1:
            errors.append("horizon.periods: must be >= 1")
    elif isinstance(problem.horizon, InfiniteAveraged):
        h = problem.horizon
        if h.sim_periods < 1 or not 0 <= h.burn_in < h.sim_periods:
            errors.append("horizon: need sim_periods >= 1 and 0 <= burn_in < sim_periods")
    else:
        errors.append("horizon: unknown horizon kind")
    if problem.max_order_per_location < 0:
        errors.append("max_order_per_location: must be >= 0")
    elif problem.grid.step > 0:
        s = problem.max_order_per_location / problem.grid.step
        if abs(s - round(s)) > GRID_ALIGN_TOL:
            errors.append("max_order_per_location: must be a multiple of grid.step")
    if dp:
        if not problem.demand.is_discrete:
            errors.append("demand: exact DP requires discrete demand")
        else:
            for i, g in enumerate(problem.demand.marginals):
                for v in g.values:
                    s = v / problem.grid.step
                    if abs(s - round(s)) > GRID_ALIGN_TOL:
                        errors.append(
                            f"demand[{i}]: value {v} is off-grid for step {problem.grid.step}")
    return errors


def single_location_problem(problem: Problem, i: int,
                            ordering: OrderingCost | None = None) -> Problem:
    """The i-th location's single-location problem, optionally under a
    substitute ordering cost (the grid, horizon and order cap carry over)."""
    return replace(
        problem,
        m=1,
        ordering=problem.ordering if ordering is None else ordering,
        holding=HoldingBacklogCost(holding=(problem.holding.holding[i],),
                                   backlog=(problem.holding.backlog[i],)),
        demand=DemandModel(marginals=(problem.demand.marginals[i],),
                           iid_across_periods=problem.demand.iid_across_periods),
    )
