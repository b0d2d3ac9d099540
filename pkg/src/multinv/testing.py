"""Independent reference implementations used by verify suites and tests.

The brute-force evaluator below recomputes optimal costs by plain
recursive enumeration of every feasible action sequence against every
demand scenario path, in pure Python arithmetic.  It shares no code with
the vectorized dynamic program it cross-checks, so agreement between the
two is meaningful.  Exponential in the horizon; use only on tiny
instances.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .model import (DemandModel, DiscreteMarginal, Finite, Grid,
                    HoldingBacklogCost, OrderingCost, Piece, Problem,
                    demand_pmf)


def brute_force_values(problem: Problem) -> np.ndarray:
    """Optimal un-normalized cost-to-go at stage 0 for every grid state."""
    grid, m = problem.grid, problem.m
    n = grid.count
    periods = problem.horizon.periods
    cap = grid.to_steps(problem.max_order_per_location)
    per_loc = []
    for i in range(m):
        values, probs = demand_pmf(problem.demand, i)
        per_loc.append([(grid.to_steps(v), float(v), float(p))
                        for v, p in zip(values, probs)])
    scenarios = [
        (tuple(c[0] for c in combo), tuple(c[1] for c in combo),
         math.prod(c[2] for c in combo))
        for combo in itertools.product(*per_loc)
    ]

    def best(k, state):
        if k == periods:
            return 0.0
        best_cost = math.inf
        ranges = [range(min(cap, n - 1 - j) + 1) for j in state]
        for order in itertools.product(*ranges):
            post = tuple(j + u for j, u in zip(state, order))
            total = problem.ordering(sum(order) * grid.step)
            for shift, values, prob in scenarios:
                stage = 0.0
                nxt = []
                for i in range(m):
                    level = grid.point(post[i]) - values[i]
                    stage += (problem.holding.holding[i] * max(0.0, level)
                              + problem.holding.backlog[i] * max(0.0, -level))
                    nxt.append(max(post[i] - shift[i], 0))
                total += prob * (stage + best(k + 1, tuple(nxt)))
            if total < best_cost:
                best_cost = total
        return best_cost

    out = np.zeros((n,) * m)
    for state in itertools.product(range(n), repeat=m):
        out[state] = best(0, state)
    return out


def brute_force_policy_cost(problem: Problem, order_table: np.ndarray) -> np.ndarray:
    """Un-normalized expected cost of a fixed per-stage order table by
    scenario-path enumeration, for every grid state."""
    grid, m = problem.grid, problem.m
    n = grid.count
    periods = problem.horizon.periods
    per_loc = []
    for i in range(m):
        values, probs = demand_pmf(problem.demand, i)
        per_loc.append([(grid.to_steps(v), float(v), float(p))
                        for v, p in zip(values, probs)])
    scenarios = [
        (tuple(c[0] for c in combo), tuple(c[1] for c in combo),
         math.prod(c[2] for c in combo))
        for combo in itertools.product(*per_loc)
    ]

    def cost(k, state):
        if k == periods:
            return 0.0
        order = order_table[k][state]
        post = tuple(j + u for j, u in zip(state, order))
        total = problem.ordering(sum(order) * grid.step)
        for shift, values, prob in scenarios:
            stage = 0.0
            nxt = []
            for i in range(m):
                level = grid.point(post[i]) - values[i]
                stage += (problem.holding.holding[i] * max(0.0, level)
                          + problem.holding.backlog[i] * max(0.0, -level))
                nxt.append(max(post[i] - shift[i], 0))
            total += prob * (stage + cost(k + 1, tuple(nxt)))
        return total

    out = np.zeros((n,) * m)
    for state in itertools.product(range(n), repeat=m):
        out[state] = cost(0, state)
    return out


def random_small_problem(rng: np.random.Generator) -> Problem:
    """A random instance small enough for brute-force enumeration:
    N <= 2, M <= 2, at most 6 grid points per dimension."""
    m = int(rng.integers(1, 3))
    periods = int(rng.integers(1, 3))
    step = float(rng.choice([0.5, 1.0]))
    count = int(rng.integers(4, 7))
    lo = -step * int(rng.integers(0, 3))
    grid = Grid(lo=lo, hi=lo + step * (count - 1), step=step)
    marginals = []
    for _ in range(m):
        n_atoms = int(rng.integers(2, 4))
        offsets = rng.choice(np.arange(4), size=n_atoms, replace=False)
        values = tuple(float(step * o) for o in sorted(offsets))
        raw = rng.random(n_atoms)
        probs = tuple(float(p) for p in raw / raw.sum())
        marginals.append(DiscreteMarginal(values=values, probs=probs))
    pieces = []
    if rng.random() < 0.5:
        b = float(step * rng.integers(1, 4))
        m1 = float(rng.uniform(0.5, 4.0))
        m2 = float(rng.uniform(0.5, 4.0))
        # keep the cost lower semicontinuous: no downward jump at b
        lift = max(0.0, (m1 - m2) * b) + float(rng.choice([0.0, rng.uniform(0, 2)]))
        pieces.append(Piece(b, 0.0, m1))
        pieces.append(Piece(math.inf, lift, m2))
    else:
        pieces.append(Piece(math.inf,
                            float(rng.choice([0.0, rng.uniform(0.5, 3.0)])),
                            float(rng.uniform(0.5, 4.0))))
    return Problem(
        m=m,
        horizon=Finite(periods),
        ordering=OrderingCost(pieces=tuple(pieces)),
        holding=HoldingBacklogCost(
            holding=tuple(float(rng.uniform(0.1, 2.0)) for _ in range(m)),
            backlog=tuple(float(rng.uniform(1.0, 12.0)) for _ in range(m))),
        demand=DemandModel(marginals=tuple(marginals)),
        grid=grid,
        max_order_per_location=float(step * int(rng.integers(2, 4))),
    ).validate(dp=True)
