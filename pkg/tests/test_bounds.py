import math

import numpy as np
import pytest

import multinv as mi
from multinv.bounds import (AffineFit, NotSectorBoundableError, envelope_gap,
                            fit_affine, fit_sector, report, theoretical_ratio)
from multinv.model import OrderingCost, Piece


def sector_cost():
    return mi.instances.build("sector_sim").ordering


def affine_cost_14():
    return mi.instances.build("affine_sim").ordering


class TestFitSector:
    def test_volume_discount_constants(self):
        fit = fit_sector(sector_cost())
        assert (fit.l, fit.h) == (2.0, 4.0)
        assert fit.l_witness == "limit"
        assert fit.h_witness == 6.0

    def test_linear_is_its_own_sector(self):
        fit = fit_sector(mi.linear_cost(2.0))
        assert (fit.l, fit.h) == (2.0, 2.0)

    def test_fixed_charge_at_zero_rejected(self):
        with pytest.raises(NotSectorBoundableError):
            fit_sector(affine_cost_14())

    def test_vanishing_cost_rejected(self):
        with pytest.raises(ValueError):
            fit_sector(mi.linear_cost(0.0))

    def test_discount_points_enter_the_sector(self):
        c = mi.instances.build("tightness:M=2,eps=0.1,l=1,h=4,p=100").ordering
        fit = fit_sector(c)
        assert (fit.l, fit.h) == (1.0, 4.0)

    def test_feasible_on_dense_sample(self):
        fit = fit_sector(sector_cost())
        z = np.linspace(1e-9, 50.0, 10_000)
        lo_slack, hi_slack = envelope_gap(sector_cost(), fit, z)
        assert np.min(lo_slack) >= -1e-9
        assert np.min(hi_slack) >= -1e-9

    def test_optimal_against_slope_grid_oracle(self):
        c = sector_cost()
        fit = fit_sector(c)
        z = np.linspace(1e-4, 200.0, 40_001)
        cz = c.eval_array(z)
        best = math.inf
        for l in np.linspace(0.25, 4.0, 16):
            if np.any(l * z > cz + 1e-9):
                continue
            h = float(np.max(cz / z))
            best = min(best, h / l)
        assert fit.h / fit.l <= best + 1e-9


class TestFitAffine:
    def test_two_piece_fixed_charge_cost(self):
        fit = fit_affine(affine_cost_14(), 2)
        assert fit.K_l == pytest.approx(4.0, abs=1e-9)
        assert fit.l == pytest.approx(1.0, abs=1e-9)
        assert fit.K_h == pytest.approx(6.4, abs=1e-9)
        assert fit.h == pytest.approx(1.6, abs=1e-9)
        assert fit.objective == pytest.approx(3.2, abs=1e-9)

    def test_affine_bounds_itself(self):
        fit = fit_affine(mi.affine_cost(5.0, 3.0), 3)
        assert (fit.K_l, fit.l, fit.K_h, fit.h) == (5.0, 3.0, 5.0, 3.0)
        assert fit.objective == pytest.approx(3.0)

    def test_zero_jump_rejected(self):
        with pytest.raises(ValueError):
            fit_affine(sector_cost(), 2)

    def test_feasible_on_dense_sample(self):
        fit = fit_affine(affine_cost_14(), 2)
        z = np.linspace(1e-9, 100.0, 10_000)
        lo_slack, hi_slack = envelope_gap(affine_cost_14(), fit, z)
        assert np.min(lo_slack) >= -1e-9
        assert np.min(hi_slack) >= -1e-9

    def brute_force_objective(self, cost, m_locations):
        z = np.concatenate([np.linspace(1e-6, 60.0, 24_001),
                            np.linspace(60.0, 4000.0, 500)])
        cz = cost.eval_array(z)
        best = math.inf
        k_max = cost.fixed_charge_at_zero
        for K in np.linspace(k_max / 40, k_max, 40):
            for l in np.linspace(0.0, 4.0, 81):
                lower = K + l * z
                if np.any(lower > cz + 1e-9):
                    continue
                rho = float(np.max(cz / lower))
                tail = cost.pieces[-1]
                if l > 0:
                    rho = max(rho, tail.slope / l)
                elif tail.slope > 0:
                    continue
                best = min(best, m_locations * rho)
        return best

    def test_matches_grid_oracle_on_reference_cost(self):
        fit = fit_affine(affine_cost_14(), 2)
        oracle = self.brute_force_objective(affine_cost_14(), 2)
        assert fit.objective <= oracle + 1e-6

    def test_matches_grid_oracle_on_random_costs(self):
        rng = np.random.default_rng(1234)
        for _ in range(5):
            K0 = float(rng.uniform(1.0, 6.0))
            m1 = float(rng.uniform(1.0, 4.0))
            b = float(rng.uniform(2.0, 8.0))
            m2 = float(rng.uniform(0.3, m1))
            lift = K0 + (m1 - m2) * b  # continuous at the breakpoint
            cost = OrderingCost(pieces=(Piece(b, K0, m1),
                                        Piece(math.inf, lift, m2)))
            assert not cost.check()
            fit = fit_affine(cost, 2)
            oracle = self.brute_force_objective(cost, 2)
            assert fit.objective <= oracle + 1e-6
            z = np.linspace(1e-9, 400.0, 20_000)
            lo_slack, hi_slack = envelope_gap(cost, fit, z)
            assert np.min(lo_slack) >= -1e-7
            assert np.min(hi_slack) >= -1e-7


class TestTheoreticalRatio:
    def test_sector_bounds(self):
        fit = fit_sector(sector_cost())
        assert theoretical_ratio(fit, 2, "base_stock") == 2.0
        assert theoretical_ratio(fit, 2, "online") == 4.0

    def test_linear_cost_trivial_bounds(self):
        fit = fit_sector(mi.linear_cost(3.0))
        assert theoretical_ratio(fit, 2, "base_stock") == 1.0
        assert theoretical_ratio(fit, 2, "online") == 2.0

    def test_online_factors_are_exact_multiples(self):
        s = fit_sector(sector_cost())
        assert theoretical_ratio(s, 2, "online") == 2.0 * theoretical_ratio(
            s, 2, "base_stock")
        a = fit_affine(affine_cost_14(), 2)
        assert theoretical_ratio(a, 2, "online") == 3.0 * theoretical_ratio(
            a, 2, "sS")

    def test_published_reproduction_parameters_imply_published_bounds(self):
        # the (s,S)-construction constants shipped with the affine
        # instance imply the online bound 8 used in its benchmark
        Kh, h = mi.instances.DIAMOND_DEFAULTS["affine_sim"]
        fit = AffineFit(K_l=4.0, l=1.0, K_h=Kh, h=h,
                        objective=2 * max(Kh / 4.0, h / 1.0), m_locations=2)
        assert fit.objective == pytest.approx(8.0 / 3.0, abs=1e-12)
        assert theoretical_ratio(fit, 2, "online") == pytest.approx(8.0, abs=1e-12)

    def test_mismatched_fit_and_family(self):
        s = fit_sector(sector_cost())
        a = fit_affine(affine_cost_14(), 2)
        with pytest.raises(ValueError):
            theoretical_ratio(s, 2, "sS")
        with pytest.raises(ValueError):
            theoretical_ratio(a, 2, "base_stock")

    def test_report_renders_both_fits(self):
        text = report(sector_cost(), 2)
        assert "h/l = 2" in text
        text = report(affine_cost_14(), 2)
        assert "sector fit: unavailable" in text
