"""Structured-text (JSON) serialization of problems and policies.

The problem schema (all field names are part of the contract; inventory
quantities share the grid's units, rates are cost per unit per period):

    {
      "locations": 2,
      "horizon": {"kind": "finite", "periods": 20}
                 | {"kind": "infinite_averaged", "sim_periods": 2000, "burn_in": 0},
      "grid": {"min": -2.0, "max": 8.0, "step": 0.5},
      "max_order_per_location": 10.0,
      "ordering": {
        "pieces": [{"upper": 6.0, "fixed": 0.0, "slope": 4.0},
                   {"upper": null, "fixed": 12.0, "slope": 2.0}],
        "discounts": [{"z": 2.0, "slope": 1.0}]
      },
      "holding": [{"holding_rate": 0.1, "backlog_rate": 10.0}, ...],
      "demand": {
        "iid_across_periods": true,
        "locations": [{"kind": "discrete", "atoms": [[0.0, 0.125], ...]}
                      | {"kind": "uniform", "lo": 1.0, "hi": 1.1}]
      }
    }

Pieces list consecutive intervals starting just above zero; "upper" is
the inclusive right end, null meaning unbounded.  Policies serialize as
a kind tag plus parameters; tabular policies serialize by digest only
and are reconstructed from their CSV exports instead.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .model import (DemandModel, DiscreteMarginal, Finite, Grid,
                    HoldingBacklogCost, InfiniteAveraged, OrderingCost, Piece,
                    Problem, UniformMarginal)
from . import policies as pol_mod


def problem_to_config(problem: Problem) -> dict:
    if isinstance(problem.horizon, Finite):
        horizon = {"kind": "finite", "periods": problem.horizon.periods}
    else:
        horizon = {"kind": "infinite_averaged",
                   "sim_periods": problem.horizon.sim_periods,
                   "burn_in": problem.horizon.burn_in}
    locations = []
    for g in problem.demand.marginals:
        if isinstance(g, DiscreteMarginal):
            locations.append({"kind": "discrete",
                              "atoms": [[float(v), float(p)]
                                        for v, p in zip(g.values, g.probs)]})
        else:
            locations.append({"kind": "uniform", "lo": g.lo, "hi": g.hi})
    return {
        "locations": problem.m,
        "horizon": horizon,
        "grid": {"min": problem.grid.lo, "max": problem.grid.hi,
                 "step": problem.grid.step},
        "max_order_per_location": problem.max_order_per_location,
        "ordering": {
            "pieces": [{"upper": None if math.isinf(p.upper) else p.upper,
                        "fixed": p.fixed, "slope": p.slope}
                       for p in problem.ordering.pieces],
            "discounts": [{"z": z, "slope": s}
                          for z, s in problem.ordering.discounts],
        },
        "holding": [{"holding_rate": a, "backlog_rate": b}
                    for a, b in zip(problem.holding.holding, problem.holding.backlog)],
        "demand": {"iid_across_periods": problem.demand.iid_across_periods,
                   "locations": locations},
    }


def problem_from_config(cfg: dict) -> Problem:
    h = cfg["horizon"]
    if h["kind"] == "finite":
        horizon = Finite(int(h["periods"]))
    elif h["kind"] == "infinite_averaged":
        horizon = InfiniteAveraged(int(h["sim_periods"]), int(h.get("burn_in", 0)))
    else:
        raise ValueError(f"unknown horizon kind {h['kind']!r}")
    marginals = []
    for loc in cfg["demand"]["locations"]:
        if loc["kind"] == "discrete":
            marginals.append(DiscreteMarginal(
                values=tuple(float(v) for v, _ in loc["atoms"]),
                probs=tuple(float(p) for _, p in loc["atoms"])))
        elif loc["kind"] == "uniform":
            marginals.append(UniformMarginal(lo=float(loc["lo"]), hi=float(loc["hi"])))
        else:
            raise ValueError(f"unknown demand kind {loc['kind']!r}")
    ordering = OrderingCost(
        pieces=tuple(Piece(math.inf if p["upper"] is None else float(p["upper"]),
                           float(p["fixed"]), float(p["slope"]))
                     for p in cfg["ordering"]["pieces"]),
        discounts=tuple((float(d["z"]), float(d["slope"]))
                        for d in cfg["ordering"].get("discounts", [])))
    return Problem(
        m=int(cfg["locations"]),
        horizon=horizon,
        ordering=ordering,
        holding=HoldingBacklogCost(
            holding=tuple(float(e["holding_rate"]) for e in cfg["holding"]),
            backlog=tuple(float(e["backlog_rate"]) for e in cfg["holding"])),
        demand=DemandModel(marginals=tuple(marginals),
                           iid_across_periods=bool(cfg["demand"]["iid_across_periods"])),
        grid=Grid(lo=float(cfg["grid"]["min"]), hi=float(cfg["grid"]["max"]),
                  step=float(cfg["grid"]["step"])),
        max_order_per_location=float(cfg["max_order_per_location"]),
    )


def save_problem(problem: Problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_config(problem), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_problem(path) -> Problem:
    with open(path) as fh:
        return problem_from_config(json.load(fh)).validate()


def policy_from_config(cfg: dict, problem: Problem):
    """Reconstruct a serialized policy; balancing policies rebuild from
    their parameters against the given problem."""
    kind = cfg["kind"]
    if kind == "base_stock":
        return pol_mod.BaseStockPolicy(np.asarray(cfg["levels"]))
    if kind == "sS":
        return pol_mod.SSPolicy(np.asarray(cfg["small_s"]), np.asarray(cfg["big_s"]))
    if kind == "decoupled":
        return pol_mod.DecoupledPolicy(
            [policy_from_config(c, problem) for c in cfg["components"]])
    if kind == "pi_v":
        return pol_mod.ExplicitVPolicy(v_values=cfg["v_values"],
                                       threshold=cfg["threshold"])
    if kind == "balancing":
        from .balancing import make_balancing_policy
        return make_balancing_policy(problem, K=cfg["fixed_charge"],
                                     variant=cfg["variant"])
    raise ValueError(f"policy kind {kind!r} cannot be reconstructed from config")
