import numpy as np
import pytest

import multinv as mi
from multinv.dp import (SizeError, StructureError, TabularPolicy,
                        extract_base_stock, extract_sS)
from multinv.model import (DemandModel, DiscreteMarginal, Finite, Grid,
                           HoldingBacklogCost, Problem, linear_cost,
                           single_location_problem)
from multinv.testing import brute_force_values, random_small_problem


@pytest.fixture(scope="module")
def fig1_linear():
    p = mi.instances.build("fig1_linear")
    vf, tab = mi.solve_joint_dp(p)
    return p, vf, tab


@pytest.fixture(scope="module")
def fig1_nonlinear():
    p = mi.instances.build("fig1_nonlinear")
    vf, tab = mi.solve_joint_dp(p)
    return p, vf, tab


def single_problem(c, demand, holding=(1.0, 10.0), periods=1,
                   grid=Grid(-2.0, 4.0, 1.0), cap=4.0):
    return Problem(m=1, horizon=Finite(periods), ordering=c,
                   holding=HoldingBacklogCost((holding[0],), (holding[1],)),
                   demand=DemandModel(marginals=(demand,)),
                   grid=grid, max_order_per_location=cap).validate(dp=True)


class TestSolveDP:
    def test_one_period_costless_order(self):
        # enumerating u in {0,1,2,...}: ordering to 1 costs 0.5 in
        # expectation, everything else is worse
        p = single_problem(linear_cost(0.0), DiscreteMarginal((0.0, 1.0), (0.5, 0.5)))
        vf, tab = mi.solve_single_dp(p)
        i0 = p.grid.index(0.0)
        assert tab.orders[0][i0, 0] == 1
        assert vf.values[0][i0] == pytest.approx(0.5, abs=1e-12)

    def test_linear_cost_gives_decoupled_base_stock(self, fig1_linear):
        p, vf, tab = fig1_linear
        pts = p.grid.points()
        for k in range(2):
            for i1 in range(p.grid.count):
                for i2 in range(p.grid.count):
                    want = np.maximum(1.0 - pts[[i1, i2]], 0.0)
                    assert np.array_equal(tab.orders[k][i1, i2] * p.grid.step, want)

    def test_nonlinear_final_stage_orders_one_unit_once(self, fig1_nonlinear):
        p, vf, tab = fig1_nonlinear
        i0 = p.grid.index(0.0)
        last = tab.orders[p.horizon.periods - 1][i0, i0]
        assert last.sum() == 1
        assert np.count_nonzero(last) == 1

    def test_nonlinear_value_symmetric(self, fig1_nonlinear):
        _, vf, _ = fig1_nonlinear
        v0 = vf.values[0]
        assert np.max(np.abs(v0 - v0.T)) <= 1e-12

    def test_zero_demand_orders_nothing_from_nonnegative_states(self):
        p = single_problem(linear_cost(2.0), DiscreteMarginal((0.0,), (1.0,)),
                           periods=2)
        _, tab = mi.solve_single_dp(p)
        nonneg = p.grid.points() >= 0
        assert np.all(tab.orders[:, nonneg, 0] == 0)

    def test_requires_finite_horizon_and_discrete_demand(self):
        p = mi.instances.build("tightness:M=2,eps=0.1,l=1,h=4,p=100")
        with pytest.raises(mi.ValidationError):
            mi.solve_joint_dp(p)

    def test_size_guard(self):
        p = mi.instances.build("sector_sim")
        from dataclasses import replace
        q = replace(p, m=4, holding=HoldingBacklogCost((0.1,) * 4, (10.0,) * 4),
                    demand=DemandModel(marginals=p.demand.marginals * 2))
        with pytest.raises(SizeError):
            mi.solve_joint_dp(q)

    def test_terminal_values_zero_and_tables_nonnegative(self, fig1_nonlinear):
        _, vf, _ = fig1_nonlinear
        assert np.all(vf.values[-1] == 0.0)
        assert np.all(vf.values >= 0.0)


class TestOracleEquivalence:
    def test_dp_matches_brute_force(self):
        rng = np.random.default_rng(424242)
        for _ in range(6):
            p = random_small_problem(rng)
            vf, _ = mi.solve_joint_dp(p)
            assert np.max(np.abs(vf.values[0] - brute_force_values(p))) <= 1e-12

    def test_linear_cost_decouples(self, fig1_linear):
        p, vf, _ = fig1_linear
        sub = single_location_problem(p, 0)
        vf1, _ = mi.solve_single_dp(sub)
        v1 = vf1.values[0]
        joint = vf.values[0]
        split = v1[:, None] + v1[None, :]
        assert np.max(np.abs(joint - split)) <= 1e-9

    def test_optimality_dominates_random_policies(self, fig1_nonlinear):
        p, vf, tab = fig1_nonlinear
        periods = p.horizon.periods
        n = p.grid.count
        cap = p.grid.to_steps(p.max_order_per_location)
        rng = np.random.default_rng(5)
        for _ in range(5):
            table = np.zeros((periods, n, n, 2), dtype=np.int32)
            for k in range(periods):
                for i1 in range(n):
                    for i2 in range(n):
                        table[k, i1, i2] = [
                            rng.integers(0, min(cap, n - 1 - i1) + 1),
                            rng.integers(0, min(cap, n - 1 - i2) + 1)]
            policy = mi.TabularGridPolicy(TabularPolicy(
                grid=p.grid, m=2, orders=table, cap_steps=cap))
            j = mi.evaluate_policy_exact(p, policy)
            assert np.all(vf.values[0] / periods <= j + 1e-9)


class TestExactEvaluation:
    def test_optimal_policy_reproduces_value_function(self, fig1_nonlinear):
        p, vf, tab = fig1_nonlinear
        j = mi.evaluate_policy_exact(p, mi.TabularGridPolicy(tab))
        assert np.max(np.abs(j - vf.values[0] / 2)) <= 1e-12

    def test_matches_scenario_tree_for_fixed_policy(self):
        from multinv.testing import brute_force_policy_cost
        rng = np.random.default_rng(31)
        for _ in range(3):
            p = random_small_problem(rng)
            _, tab = mi.solve_joint_dp(p)
            policy = mi.TabularGridPolicy(tab)
            exact = mi.evaluate_policy_exact(p, policy)
            brute = brute_force_policy_cost(p, tab.orders)
            assert np.max(np.abs(exact - brute / p.horizon.periods)) <= 1e-12

    def test_zero_demand_never_order_costs_nothing(self):
        p = single_problem(linear_cost(2.0), DiscreteMarginal((0.0,), (1.0,)),
                           periods=2)
        policy = mi.BaseStockPolicy(np.array([p.grid.lo]))
        j = mi.evaluate_policy_exact(p, policy)
        assert j[p.grid.index(0.0)] == 0.0

    def test_square_policy_dominated_and_strictly_worse_somewhere(self, fig1_nonlinear):
        p, vf, tab = fig1_nonlinear
        j_opt = mi.evaluate_policy_exact(p, mi.TabularGridPolicy(tab))
        j_sq = mi.evaluate_policy_exact(p, mi.make_pi_square(p, 2.0))
        assert np.all(j_sq >= j_opt - 1e-9)
        assert np.any(j_sq > j_opt + 1e-9)

    def test_exchangeable_value_symmetry_long_horizon(self):
        p = mi.instances.build("sector_sim")
        vf, _ = mi.solve_joint_dp(p)
        for k in range(0, 21, 5):
            v = vf.values[k]
            assert np.max(np.abs(v - v.T)) <= 1e-12


class TestStructureExtraction:
    def grid7(self):
        return Grid(-2.0, 4.0, 1.0)

    def policy_from_orders(self, u):
        u = np.asarray(u, dtype=np.int32)
        return TabularPolicy(grid=self.grid7(), m=1,
                             orders=u.reshape(1, -1, 1), cap_steps=100)

    def test_base_stock_by_construction(self):
        pts = self.grid7().points()
        u = np.maximum(1.0 - pts, 0).astype(int)
        assert extract_base_stock(self.policy_from_orders(u), 0) == 1.0

    def test_dp_output_is_base_stock(self, fig1_linear):
        p, _, _ = fig1_linear
        sub = single_location_problem(p, 0)
        _, tab = mi.solve_single_dp(sub)
        assert extract_base_stock(tab, 0) == 1.0

    def test_jump_breaks_structure(self):
        policy = TabularPolicy(grid=Grid(0.0, 1.0, 1.0), m=1,
                               orders=np.array([[[2], [0]]], dtype=np.int32),
                               cap_steps=100)
        with pytest.raises(StructureError):
            extract_base_stock(policy, 0)

    def test_base_stock_is_degenerate_ss(self):
        pts = self.grid7().points()
        u = np.maximum(1.0 - pts, 0).astype(int)
        assert extract_sS(self.policy_from_orders(u), 0) == (1.0, 1.0)

    def test_fixed_charge_dp_yields_ss(self):
        p = single_problem(mi.affine_cost(4.0, 2.0), DiscreteMarginal(
            (0.0, 0.5, 1.0, 1.5), (0.125, 0.375, 0.375, 0.125)),
            periods=3, grid=Grid(-2.0, 8.0, 0.5), cap=10.0)
        _, tab = mi.solve_single_dp(p)
        for k in range(3):
            s, S = extract_sS(tab, k)
            assert s <= S

    def test_non_monotone_table_rejected(self):
        u = np.array([3, 0, 1, 0, 0, 0, 0])
        with pytest.raises(StructureError):
            extract_sS(self.policy_from_orders(u), 0)

    def test_never_ordering_conventions(self):
        u = np.zeros(7, dtype=int)
        policy = self.policy_from_orders(u)
        assert extract_base_stock(policy, 0) == -2.0
        assert extract_sS(policy, 0) == (-2.0, -2.0)

    def test_truncated_base_stock_accepted(self):
        # cap 2 truncates the order-up-to-1 policy at the grid floor
        pts = self.grid7().points()
        u = np.minimum(np.maximum(1.0 - pts, 0), 2).astype(int)
        policy = TabularPolicy(grid=self.grid7(), m=1,
                               orders=u.reshape(1, -1, 1), cap_steps=2)
        assert extract_base_stock(policy, 0) == 1.0
