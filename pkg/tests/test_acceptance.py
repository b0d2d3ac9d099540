"""Acceptance criteria, one test per criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Reproduction settings: 1000 Monte Carlo runs per initial state with
master seed 2024; the online balancing policy uses its cumulative-demand
holding-proxy variant (reported in the output lines).  Two criteria
check published constants that are mutually inconsistent with the cost
definitions they accompany (the affine envelope parameters of criterion
5, and the finite-horizon cost-transformation identity of criterion 7);
those assertions are implemented exactly as stated and fail, with the
measured values printed alongside.
"""

import numpy as np
import pytest

import multinv as mi
from multinv.balancing import make_balancing_policy
from multinv.bounds import fit_affine, fit_sector, theoretical_ratio
from multinv.dp import TabularPolicy
from multinv.model import Finite
from multinv.sim import SimConfig, estimate_cost, ratio_heatmap, \
    verify_cost_transformation
from multinv.stationary import optimize_individual, optimize_joint, \
    stationary_cost
from multinv.testing import brute_force_values, random_small_problem

SEED = 2024
RUNS = 1000
BALANCING_VARIANT = "cumulative"


def report(name: str, ok: bool, detail: str = "") -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" | {detail}" if detail else ""))
    return ok


@pytest.fixture(scope="module")
def sector():
    problem = mi.instances.build("sector_sim")
    vf, tab = mi.solve_joint_dp(problem)
    return problem, vf, mi.TabularGridPolicy(tab)


@pytest.fixture(scope="module")
def affine():
    problem = mi.instances.build("affine_sim")
    vf, tab = mi.solve_joint_dp(problem)
    return problem, vf, mi.TabularGridPolicy(tab)


@pytest.fixture(scope="module")
def sector_square_report(sector):
    problem, _, optimal = sector
    return ratio_heatmap(problem, mi.make_pi_square(problem, 2.0), optimal,
                         SimConfig(runs=RUNS, seed=SEED))


@pytest.fixture(scope="module")
def sector_balancing_report(sector):
    problem, _, optimal = sector
    policy = make_balancing_policy(problem, variant=BALANCING_VARIANT)
    return ratio_heatmap(problem, policy, optimal, SimConfig(runs=RUNS, seed=SEED))


def test_criterion_1_linear_instance_policy_structure():
    problem = mi.instances.build("fig1_linear")
    _, tab = mi.solve_joint_dp(problem)
    pts = problem.grid.points()
    n = problem.grid.count
    stage0 = tab.orders[0] * problem.grid.step
    ok = True
    for i in range(problem.m):
        lane = stage0[..., i]
        # decoupled: the order depends on this location's coordinate only
        collapsed = lane.min(axis=1 - i)
        ok &= bool(np.array_equal(lane, np.broadcast_to(
            collapsed[:, None] if i == 0 else collapsed[None, :], lane.shape)))
        # exact base-stock structure with level 1 per location
        ok &= bool(np.array_equal(collapsed, np.maximum(1.0 - pts, 0.0)))
    assert report("criterion 1: linear instance, stage-0 decoupled "
                  "base-stock with S=1", ok)


def test_criterion_2_nonlinear_instance_single_unit_order():
    problem = mi.instances.build("fig1_nonlinear")
    vf, tab = mi.solve_joint_dp(problem)
    i0 = problem.grid.index(0.0)
    # the displayed single-period-remaining rule: one unit, one location
    last = tab.orders[problem.horizon.periods - 1][i0, i0]
    single_unit = (last.sum() == 1) and (np.count_nonzero(last) == 1)
    # the same rule is the k = 0 decision of the one-period variant
    from dataclasses import replace
    _, tab1 = mi.solve_joint_dp(replace(problem, horizon=Finite(1)))
    first = tab1.orders[0][i0, i0]
    single_unit &= (first.sum() == 1) and (np.count_nonzero(first) == 1)
    v0 = vf.values[0]
    sym_gap = float(np.max(np.abs(v0 - v0.T)))
    ok = single_unit and sym_gap <= 1e-12
    assert report("criterion 2: nonlinear instance, one unit in a single "
                  "location, symmetric values",
                  ok, f"order={last}, value symmetry gap={sym_gap:.2e}")


def test_criterion_3_sector_reproduction(sector_square_report,
                                         sector_balancing_report):
    sq = sector_square_report
    bal = sector_balancing_report
    ok_sq = abs(sq.mean_ratio - 1.13) <= 0.05 and abs(sq.max_ratio - 1.18) <= 0.10
    ok_bal = abs(bal.mean_ratio - 1.15) <= 0.05 and abs(bal.max_ratio - 1.21) <= 0.10
    detail = (f"decoupled mean={sq.mean_ratio:.4f} max={sq.max_ratio:.4f} "
              f"(targets 1.13+-0.05, 1.18+-0.10); online mean={bal.mean_ratio:.4f} "
              f"max={bal.max_ratio:.4f} (targets 1.15+-0.05, 1.21+-0.10); "
              f"balancing variant={BALANCING_VARIANT}")
    assert report("criterion 3: sector-instance cost ratios", ok_sq and ok_bal,
                  detail)


def test_criterion_4_affine_reproduction(affine):
    problem, _, optimal = affine
    Kh, h = mi.instances.DIAMOND_DEFAULTS["affine_sim"]
    dia = ratio_heatmap(problem, mi.make_pi_diamond(problem, Kh, h), optimal,
                        SimConfig(runs=RUNS, seed=SEED))
    ok_dia = abs(dia.mean_ratio - 1.14) <= 0.05 and abs(dia.max_ratio - 1.22) <= 0.10
    policy = make_balancing_policy(problem, variant=BALANCING_VARIANT)
    bal = ratio_heatmap(problem, policy, optimal, SimConfig(runs=RUNS, seed=SEED))
    primary = abs(bal.mean_ratio - 1.47) <= 0.15 and abs(bal.max_ratio - 1.56) <= 0.20
    se_ratio = 3.0 * bal.se_num / bal.mean_den
    fallback = bool(np.all(bal.ratio <= 8.0 - se_ratio) and bal.mean_ratio > 1.2)
    mode = ("primary tolerance" if primary else
            "fallback: every ratio below the worst-case bound 8, mean above 1.2")
    detail = (f"(s,S) mean={dia.mean_ratio:.4f} max={dia.max_ratio:.4f} "
              f"(targets 1.14+-0.05, 1.22+-0.10); online mean={bal.mean_ratio:.4f} "
              f"max={bal.max_ratio:.4f} (targets 1.47+-0.15, 1.56+-0.20; {mode}); "
              f"balancing variant={BALANCING_VARIANT}")
    assert report("criterion 4: affine-instance cost ratios",
                  ok_dia and (primary or fallback), detail)


def test_criterion_5_bound_constants():
    sector_fit = fit_sector(mi.instances.build("sector_sim").ordering)
    ok_sector = (sector_fit.l, sector_fit.h) == (2.0, 4.0)
    ok_sector &= theoretical_ratio(sector_fit, 2, "base_stock") == 2.0
    ok_sector &= theoretical_ratio(sector_fit, 2, "online") == 4.0
    affine_fit = fit_affine(mi.instances.build("affine_sim").ordering, 2)
    expected = (4.0, 1.0, 16.0 / 3.0, 4.0 / 3.0)
    got = (affine_fit.K_l, affine_fit.l, affine_fit.K_h, affine_fit.h)
    ok_affine = abs(affine_fit.objective - 8.0 / 3.0) <= 1e-6
    ok_affine &= all(abs(a - b) <= 1e-6 for a, b in zip(got, expected))
    ok_affine &= theoretical_ratio(affine_fit, 2, "online") == 8.0
    detail = (f"sector (l,h)=({sector_fit.l:g},{sector_fit.h:g}), bounds 2/4; "
              f"affine objective={affine_fit.objective:g} with "
              f"(K_l,l,K_h,h)={tuple(round(v, 6) for v in got)}, expected 8/3 "
              f"with (4,1,16/3,4/3): the expected upper envelope lies below "
              f"the cost on 2<z<18 (e.g. c(6)=16 > 16/3+8), so no feasible "
              f"fit can return it; the optimal feasible envelope is reported")
    assert report("criterion 5: bound constants", ok_sector and ok_affine, detail)


def test_criterion_6_stationary_equivalence():
    rng = np.random.default_rng(606)
    problems = [mi.instances.build("fig1_linear"),
                mi.instances.build("fig1_nonlinear")]
    problems += [random_small_problem(rng) for _ in range(5)]
    worst = 0.0
    identical = True
    for problem in problems:
        joint = optimize_joint(problem)
        indiv = optimize_individual(problem)
        identical &= joint == indiv
        worst = max(worst, abs(stationary_cost(joint, problem)
                               - stationary_cost(indiv, problem)))
    ok = identical and worst <= 1e-12
    assert report("criterion 6: stationary level equivalence",
                  ok, f"max cost gap {worst:.2e}, identical levels: {identical}")


def test_criterion_7_cost_transformation_identity():
    problem = mi.instances.build("fig1_linear")
    rng = np.random.default_rng(7)
    n = problem.grid.count
    cap = problem.grid.to_steps(problem.max_order_per_location)
    table = np.zeros((2, n, n, 2), dtype=np.int32)
    for k in range(2):
        for i1 in range(n):
            for i2 in range(n):
                table[k, i1, i2] = [rng.integers(0, min(cap, n - 1 - i1) + 1),
                                    rng.integers(0, min(cap, n - 1 - i2) + 1)]
    policies = {
        "pi_square": mi.make_pi_square(problem, 2.0),
        "pi_diamond": mi.make_pi_diamond(problem, 1.0, 2.0),
        "random_tabular": mi.TabularGridPolicy(TabularPolicy(
            grid=problem.grid, m=2, orders=table, cap_steps=cap)),
    }
    worst_formula = 0.0
    worst_accounting = 0.0
    for policy in policies.values():
        rep = verify_cost_transformation(problem, policy, 2.0)
        worst_formula = max(worst_formula, rep["max_abs_formula_gap"])
        worst_accounting = max(worst_accounting, rep["max_abs_accounting_gap"])
    ok = worst_formula <= 1e-9
    detail = (f"max |J(P) - J(P_hat) - m*E[mean demand]| = {worst_formula:.3e} "
              f"(tolerance 1e-9): the demand-only identity omits the terminal "
              f"inventory displacement m*(E x_N - x_0)/N, which is nonzero on "
              f"a finite horizon; the order-accounting identity "
              f"J(P) - J(P_hat) = (m/N)*E[total orders] holds to "
              f"{worst_accounting:.1e}")
    assert report("criterion 7: cost-transformation identity", ok, detail)


def test_criterion_8_tightness_trend():
    instance_id = "tightness:M=2,eps=0.1,l=1,h=4,p=100"
    problem = mi.instances.build(instance_id)
    defaults = mi.instances.policy_defaults(instance_id)
    base = mi.BaseStockPolicy(np.full(2, defaults["base_stock_auto"]))
    pv = mi.make_pi_v(defaults["pi_v"]["m"], defaults["pi_v"]["delta"])
    cfg = SimConfig(runs=200, seed=SEED)
    mean_b, _, z_trace, cost_trace = estimate_cost(problem, base, [0.0, 0.0],
                                                   cfg, collect_orders=True)
    mean_v, _ = estimate_cost(problem, pv, [0.0, 0.0], cfg)
    ratio = mean_b / mean_v
    floor = 0.9 * 4.0 / 1.1
    h = 4.0
    ordered = z_trace[:, 1:] > 0
    priced_h = bool(np.all(cost_trace[:, 1:][ordered]
                           == h * z_trace[:, 1:][ordered]))
    ok = ratio >= floor and priced_h
    assert report("criterion 8: tightness-instance trend", ok,
                  f"ratio={ratio:.4f} >= {floor:.4f}; every post-period-0 "
                  f"order priced at h: {priced_h}")


def test_criterion_9_oracle_equivalence():
    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(10):
        problem = random_small_problem(rng)
        vf, _ = mi.solve_joint_dp(problem)
        worst = max(worst, float(np.max(np.abs(vf.values[0]
                                               - brute_force_values(problem)))))
    assert report("criterion 9: DP equals scenario-tree brute force",
                  worst <= 1e-12, f"max gap {worst:.2e} over 10 instances")


def test_criterion_10_thread_count_determinism(sector, sector_square_report,
                                               sector_balancing_report):
    problem, _, optimal = sector
    cfg = SimConfig(runs=RUNS, seed=SEED, threads=3)
    sq = ratio_heatmap(problem, mi.make_pi_square(problem, 2.0), optimal, cfg)
    policy = make_balancing_policy(problem, variant=BALANCING_VARIANT)
    bal = ratio_heatmap(problem, policy, optimal, cfg)
    ok = (sq.csv_text() == sector_square_report.csv_text()
          and bal.csv_text() == sector_balancing_report.csv_text())
    assert report("criterion 10: byte-identical CSVs across thread counts", ok)
