"""Exact finite-horizon dynamic programming on the joint state grid.

Backward induction over the discretized joint state space gives the
optimal coupled policy and its cost-to-go; forward reasoning on the same
lattice gives exact expected costs of any deterministic grid policy.

Conventions shared with the simulator:

* Feasible orders at state x keep x + u inside the grid box and below
  the per-location order cap, in whole grid steps.
* Holding/backlog cost is charged on the pre-clamp level x + u - w; the
  next state is then clamped into the grid box componentwise, so
  boundary truncation never hides cost.
* Ties in the minimization break toward the lexicographically smallest
  order vector (location 1 first).
* Value tables hold un-normalized sums of stage costs; terminal values
  are identically zero.  The 1/N of the average-cost objective is
  applied only where costs are reported.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .model import Finite, Problem, demand_pmf

MAX_JOINT_STATES = 100_000


class SizeError(ValueError):
    """Joint table would not fit sensibly in memory."""


class StructureError(ValueError):
    """A policy table does not have the asserted structure."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass
class ValueFunction:
    """Stage-indexed cost-to-go tables over the joint grid.

    ``values[k]`` has one axis per location; entries are un-normalized
    expected remaining cost from stage k on.
    """

    grid: object
    m: int
    values: np.ndarray  # shape (N+1,) + (n,)*m

    @property
    def stages(self) -> int:
        return self.values.shape[0] - 1

    def table(self, k: int) -> np.ndarray:
        return self.values[k]


@dataclass
class TabularPolicy:
    """Stage-indexed optimal orders, stored as whole grid steps.

    ``orders[k]`` has one axis per location plus a trailing axis of
    length M with the per-location order in grid steps.  ``cap_steps``
    is the per-location order limit in steps; feasible orders also keep
    x + u inside the grid box.
    """

    grid: object
    m: int
    orders: np.ndarray  # int array, shape (N,) + (n,)*m + (m,)
    cap_steps: int = 10 ** 9
    tie_break: str = "lexicographic-smallest-order"

    @property
    def stages(self) -> int:
        return self.orders.shape[0]

    def stage_table(self, k: int) -> np.ndarray:
        return self.orders[k]


def _joint_demand(problem: Problem):
    """All joint demand outcomes as (step-shift vectors, probabilities)."""
    per_loc = []
    for i in range(problem.m):
        values, probs = demand_pmf(problem.demand, i)
        steps = [problem.grid.to_steps(v) for v in values]
        per_loc.append(list(zip(steps, values, probs)))
    combos = []
    for combo in itertools.product(*per_loc):
        shift = np.array([c[0] for c in combo], dtype=int)
        vals = np.array([c[1] for c in combo], dtype=float)
        prob = float(np.prod([c[2] for c in combo]))
        combos.append((shift, vals, prob))
    return combos


def _expected_holding_tables(problem: Problem) -> list:
    """Per location i, EH[i][j] = E r_i(grid.point(j) - w_i).

    The argument grid.point(j) is the post-order level; subtracting the
    demand can leave the grid below its minimum, which is intended: the
    cost is charged pre-clamp.
    """
    tables = []
    points = problem.grid.points()
    for i in range(problem.m):
        values, probs = demand_pmf(problem.demand, i)
        levels = points[:, None] - values[None, :]
        a = problem.holding.holding[i]
        b = problem.holding.backlog[i]
        cost = a * np.maximum(0.0, levels) + b * np.maximum(0.0, -levels)
        tables.append(cost @ probs)
    return tables


def _order_cost_box(problem: Problem, cap_steps: int) -> np.ndarray:
    """c(total order) for every joint order in the action box, indexed by
    per-location step counts."""
    step = problem.grid.step
    totals = np.zeros((cap_steps + 1,) * problem.m)
    for combo in itertools.product(range(cap_steps + 1), repeat=problem.m):
        totals[combo] = sum(combo) * step
    return problem.ordering.eval_array(totals)


def _require_dp(problem: Problem):
    problem.validate(dp=True)
    if not isinstance(problem.horizon, Finite):
        raise ValueError("exact DP requires a finite horizon")
    n = problem.grid.count
    if n ** problem.m > MAX_JOINT_STATES:
        raise SizeError(
            f"joint grid has {n}^{problem.m} = {n ** problem.m} states "
            f"(limit {MAX_JOINT_STATES}); reduce the grid or locations")


def solve_joint_dp(problem: Problem):
    """Optimal coupled policy by backward induction.

    Returns (ValueFunction, TabularPolicy).  Within a stage the per-state
    minimizations are independent; the argmin scans candidate orders in
    C order, which realizes the lexicographic tie-break.
    """
    _require_dp(problem)
    grid, m = problem.grid, problem.m
    n = grid.count
    periods = problem.horizon.periods
    cap_steps = grid.to_steps(problem.max_order_per_location)

    combos = _joint_demand(problem)
    eh = _expected_holding_tables(problem)
    hold = np.zeros((n,) * m)
    for i in range(m):
        shape = [1] * m
        shape[i] = n
        hold = hold + eh[i].reshape(shape)
    order_cost = _order_cost_box(problem, cap_steps)

    shift_idx = {}
    for shift, _, _ in combos:
        key = tuple(shift)
        if key not in shift_idx:
            shift_idx[key] = tuple(np.maximum(np.arange(n) - t, 0) for t in shift)

    values = np.zeros((periods + 1,) + (n,) * m)
    orders = np.zeros((periods,) + (n,) * m + (m,), dtype=np.int32)

    for k in range(periods - 1, -1, -1):
        v_next = values[k + 1]
        ev = np.zeros((n,) * m)
        for shift, _, prob in combos:
            ev += prob * v_next[np.ix_(*shift_idx[tuple(shift)])]
        goal = hold + ev  # cost of landing post-order at y, plus the future
        v_new = values[k]
        pol = orders[k]
        for state in np.ndindex(*(n,) * m):
            sizes = tuple(min(cap_steps, n - 1 - j) + 1 for j in state)
            cand = order_cost[tuple(slice(0, b) for b in sizes)] \
                + goal[tuple(slice(j, j + b) for j, b in zip(state, sizes))]
            flat = int(np.argmin(cand))
            u = np.unravel_index(flat, sizes)
            v_new[state] = cand[u]
            pol[state] = u

    return (ValueFunction(grid=grid, m=m, values=values),
            TabularPolicy(grid=grid, m=m, orders=orders, cap_steps=cap_steps))


def solve_single_dp(problem: Problem):
    """Backward induction for a single-location problem (M = 1)."""
    if problem.m != 1:
        raise ValueError("solve_single_dp requires a one-location problem")
    return solve_joint_dp(problem)


def _order_table(problem: Problem, policy) -> np.ndarray:
    """Per-stage order tables (in grid steps) of a deterministic grid
    policy, with feasibility checked."""
    if isinstance(policy, TabularPolicy):
        table = policy.orders
    elif hasattr(policy, "tabulate"):
        table = policy.tabulate(problem)
    else:
        raise TypeError(f"policy of type {type(policy).__name__} has no grid tabulation")
    n = problem.grid.count
    cap_steps = problem.grid.to_steps(problem.max_order_per_location)
    if table.shape != (problem.periods,) + (n,) * problem.m + (problem.m,):
        raise ValueError("order table shape does not match the problem")
    if np.any(table < 0):
        raise ValueError("order table contains negative orders")
    idx = np.indices((n,) * problem.m)
    for i in range(problem.m):
        if np.any(table[..., i] > np.minimum(cap_steps, n - 1 - idx[i])):
            raise ValueError("order table leaves the grid box or exceeds the order cap")
    return table


def evaluate_policy_exact(problem: Problem, policy) -> np.ndarray:
    """Expected average cost of a deterministic grid policy from every
    initial grid state, by exact backward recursion of the remaining
    cost under the policy.  Randomized or online policies are not
    representable here; estimate those by Monte Carlo instead.
    """
    _require_dp(problem)
    table = _order_table(problem, policy)
    grid, m = problem.grid, problem.m
    n = grid.count
    periods = problem.horizon.periods
    step = grid.step

    combos = _joint_demand(problem)
    eh = _expected_holding_tables(problem)
    idx = np.indices((n,) * m)

    w = np.zeros((n,) * m)
    for k in range(periods - 1, -1, -1):
        u = table[k]
        totals = u.sum(axis=-1) * step
        stage = problem.ordering.eval_array(totals)
        post = [idx[i] + u[..., i] for i in range(m)]
        for i in range(m):
            stage = stage + eh[i][post[i]]
        nxt = np.zeros((n,) * m)
        for shift, _, prob in combos:
            gather = tuple(np.clip(post[i] - shift[i], 0, n - 1) for i in range(m))
            nxt += prob * w[gather]
        w = stage + nxt
    return w / periods


def expected_total_orders(problem: Problem, policy) -> np.ndarray:
    """Exact E[sum over periods and locations of orders] from every
    initial grid state, under a deterministic grid policy."""
    _require_dp(problem)
    table = _order_table(problem, policy)
    grid, m = problem.grid, problem.m
    n = grid.count
    periods = problem.horizon.periods
    combos = _joint_demand(problem)
    idx = np.indices((n,) * m)

    w = np.zeros((n,) * m)
    for k in range(periods - 1, -1, -1):
        u = table[k]
        stage = u.sum(axis=-1) * grid.step
        post = [idx[i] + u[..., i] for i in range(m)]
        nxt = np.zeros((n,) * m)
        for shift, _, prob in combos:
            gather = tuple(np.clip(post[i] - shift[i], 0, n - 1) for i in range(m))
            nxt += prob * w[gather]
        w = stage + nxt
    return w


# ---------------------------------------------------------------------------
# Structure extraction
# ---------------------------------------------------------------------------

def _single_stage_orders(policy: TabularPolicy, k: int) -> np.ndarray:
    if policy.m != 1:
        raise ValueError("structure extraction works on single-location policies")
    if not 0 <= k < policy.stages:
        raise IndexError(f"stage {k} out of range")
    return policy.orders[k][:, 0]


def _caps(policy: TabularPolicy) -> np.ndarray:
    n = policy.grid.count
    return np.minimum(policy.cap_steps, n - 1 - np.arange(n))


def extract_base_stock(policy: TabularPolicy, k: int) -> float:
    """Base-stock level of one stage table, or StructureError.

    The table must equal order-up-to-S truncated to the feasible action
    set: u(x) = clip(S - x, 0, cap(x)).  This is a structural scan, not a
    fit; the first violating state is reported.  A never-ordering table
    yields the grid floor (any level at or below it acts identically).
    """
    u = _single_stage_orders(policy, k)
    caps = _caps(policy)
    grid = policy.grid
    positive = np.nonzero(u > 0)[0]
    if positive.size == 0:
        return grid.point(0)
    s_idx = int((positive + u[positive]).max())
    expected = np.clip(s_idx - np.arange(grid.count), 0, caps)
    bad = np.nonzero(u != expected)[0]
    if bad.size:
        j = int(bad[0])
        raise StructureError(
            f"stage {k} is not base-stock: state {grid.point(j)} orders "
            f"{u[j] * grid.step}, expected {expected[j] * grid.step} for S={grid.point(s_idx)}",
            state=grid.point(j))
    return grid.point(s_idx)


def extract_sS(policy: TabularPolicy, k: int):
    """(s, S) pair of one stage table, or StructureError.

    Below s the table must order up to S (truncated to the action cap);
    at or above s it must order nothing.  A never-ordering table yields
    s = S = the grid floor.
    """
    u = _single_stage_orders(policy, k)
    caps = _caps(policy)
    grid = policy.grid
    n = grid.count
    positive = np.nonzero(u > 0)[0]
    if positive.size == 0:
        return grid.point(0), grid.point(0)
    zero = np.nonzero(u == 0)[0]
    small_s_idx = int(zero[0]) if zero.size else n
    if np.any(u[small_s_idx:] != 0):
        j = int(small_s_idx + np.nonzero(u[small_s_idx:] != 0)[0][0])
        raise StructureError(
            f"stage {k} is not (s,S): state {grid.point(j)} orders above the "
            f"reorder point {grid.point(small_s_idx)}", state=grid.point(j))
    big_s_idx = int((positive + u[positive]).max())
    below = np.arange(small_s_idx)
    expected = np.minimum(big_s_idx - below, caps[below])
    bad = np.nonzero(u[below] != expected)[0]
    if bad.size:
        j = int(bad[0])
        raise StructureError(
            f"stage {k} is not (s,S): state {grid.point(j)} orders {u[j] * grid.step}, "
            f"expected {expected[j] * grid.step} for S={grid.point(big_s_idx)}",
            state=grid.point(j))
    small_s = grid.point(small_s_idx) if small_s_idx < n else grid.point(n - 1) + grid.step
    return small_s, grid.point(big_s_idx)
