"""Long-run average cost of stationary base-stock policies.

Once a stationary base-stock policy has replenished every location, each
period's order replaces the previous period's demand exactly, so the
per-period average cost settles at

    E[c(sum_i w_i)]  +  sum_i E[r_i(S_i - w_i)]

and the ordering term does not depend on the levels S at all.  That is
why jointly optimizing the levels over all locations and optimizing each
location in isolation produce the same levels and the same cost; both
optimizers below share one tie-break (toward smaller levels) so the
equality holds argmin-by-argmin, not just in value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Problem, UnsupportedDemandError, demand_pmf


class SizeError(ValueError):
    pass


MAX_JOINT_CANDIDATES = 2_000_000


@dataclass(frozen=True)
class StationaryLevels:
    levels: tuple

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)


def _require_discrete_iid(problem: Problem):
    if not problem.demand.is_discrete:
        raise UnsupportedDemandError("stationary analysis requires discrete demand")
    if not problem.demand.iid_across_periods:
        raise UnsupportedDemandError("stationary analysis requires i.i.d. demand")


def total_demand_pmf(problem: Problem):
    """Pmf of one period's total demand across locations (convolution of
    the independent marginals)."""
    _require_discrete_iid(problem)
    atoms = {0.0: 1.0}
    for i in range(problem.m):
        values, probs = demand_pmf(problem.demand, i)
        nxt = {}
        for s, ps in atoms.items():
            for v, p in zip(values, probs):
                key = round(s + v, 9)
                nxt[key] = nxt.get(key, 0.0) + ps * p
        atoms = nxt
    values = np.array(sorted(atoms))
    probs = np.array([atoms[v] for v in values])
    return values, probs


def expected_ordering_term(problem: Problem) -> float:
    """E[c(total demand)] - the level-independent part of the average."""
    values, probs = total_demand_pmf(problem)
    return float(problem.ordering.eval_array(values) @ probs)


def _location_cost_curve(problem: Problem, i: int) -> np.ndarray:
    """E[r_i(S - w_i)] for every grid level S."""
    values, probs = demand_pmf(problem.demand, i)
    levels = problem.grid.points()[:, None] - values[None, :]
    a = problem.holding.holding[i]
    b = problem.holding.backlog[i]
    return (a * np.maximum(0.0, levels) + b * np.maximum(0.0, -levels)) @ probs


def stationary_cost(levels: StationaryLevels, problem: Problem) -> float:
    """Steady-state per-period average cost of the stationary base-stock
    policy with the given levels."""
    _require_discrete_iid(problem)
    total = expected_ordering_term(problem)
    for i, s in enumerate(levels.levels):
        values, probs = demand_pmf(problem.demand, i)
        post = s - values
        a = problem.holding.holding[i]
        b = problem.holding.backlog[i]
        total += float((a * np.maximum(0.0, post) + b * np.maximum(0.0, -post)) @ probs)
    return total


def optimize_individual(problem: Problem) -> StationaryLevels:
    """Per-location argmin of E[r_i(S - w_i)] over the grid; ties break
    toward the smaller level."""
    _require_discrete_iid(problem)
    points = problem.grid.points()
    levels = []
    for i in range(problem.m):
        curve = _location_cost_curve(problem, i)
        levels.append(float(points[int(np.argmin(curve))]))
    return StationaryLevels(levels=tuple(levels))


def optimize_joint(problem: Problem) -> StationaryLevels:
    """Exhaustive search of the joint level grid; ties break toward the
    lexicographically smallest level vector."""
    _require_discrete_iid(problem)
    points = problem.grid.points()
    n = len(points)
    if n ** problem.m > MAX_JOINT_CANDIDATES:
        raise SizeError(
            f"joint level search has {n}^{problem.m} = {n ** problem.m} candidates "
            f"(limit {MAX_JOINT_CANDIDATES})")
    total = np.zeros((n,) * problem.m)
    for i in range(problem.m):
        shape = [1] * problem.m
        shape[i] = n
        total = total + _location_cost_curve(problem, i).reshape(shape)
    flat = int(np.argmin(total))  # first minimum in C order = lexicographic
    idx = np.unravel_index(flat, total.shape)
    return StationaryLevels(levels=tuple(float(points[j]) for j in idx))


def cost_decomposition(levels: StationaryLevels, problem: Problem) -> dict:
    """Reporting helper: the constant ordering term and the per-location
    holding/backlog terms."""
    parts = {"ordering": expected_ordering_term(problem)}
    for i, s in enumerate(levels.levels):
        values, probs = demand_pmf(problem.demand, i)
        post = s - values
        a = problem.holding.holding[i]
        b = problem.holding.backlog[i]
        parts[f"location_{i}"] = float(
            (a * np.maximum(0.0, post) + b * np.maximum(0.0, -post)) @ probs)
    return parts
