"""Power-split solver checks: closed form vs formula, dual loop vs grid oracle."""

import math

import numpy as np
import pytest

from trisopt.power import (
    DegenerateDualsError,
    DualState,
    PowerConstraints,
    clamp_pk,
    closed_form_pk,
    optimal_total_power,
    oracle_power_split,
    solve_power,
)
from trisopt.rate import NoisePower, sca_coefficients


def formula_pk(gk, gj, lam_k, lam_j, sigma_sq, p_t):
    """Independent re-evaluation of the closed-form stationarity expression."""
    return ((gj * gk - gk * lam_k + gj * lam_j) * sigma_sq) / (gj * gk * (lam_k - lam_j) * p_t)


def surrogate_sum(p_k, gk, gj, sigma_sq, p_t, coeffs):
    ck, cj = coeffs
    gam_k = gk * p_k * p_t / sigma_sq
    gam_j = gj * (1 - p_k) * p_t / (sigma_sq + gj * p_k * p_t)
    if gam_k <= 0 or gam_j <= 0:
        return -math.inf
    return ck.alpha * math.log2(gam_k) + ck.beta + cj.alpha * math.log2(gam_j) + cj.beta


class TestOptimalTotalPower:
    def test_power_limited(self):
        assert optimal_total_power(1.0, PowerConstraints(p_max=1.0, i_th=2.0, r_min=0.0)) == 1.0

    def test_interference_limited(self):
        assert optimal_total_power(4.0, PowerConstraints(p_max=1.0, i_th=2.0, r_min=0.0)) == 0.5

    def test_zero_gain_decouples(self):
        assert optimal_total_power(0.0, PowerConstraints(p_max=1.0, i_th=2.0, r_min=0.0)) == 1.0

    @pytest.mark.parametrize("seed", range(10))
    def test_monotone_in_caps(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.uniform(0.01, 10)
        p_max, i_th = rng.uniform(0.1, 10), rng.uniform(0.1, 10)
        base = optimal_total_power(h, PowerConstraints(p_max=p_max, i_th=i_th, r_min=0.0))
        assert optimal_total_power(h, PowerConstraints(p_max=p_max * 1.5, i_th=i_th, r_min=0.0)) >= base
        assert optimal_total_power(h, PowerConstraints(p_max=p_max, i_th=i_th * 1.5, r_min=0.0)) >= base


class TestClosedForm:
    def test_plug_in_and_clamp(self):
        duals = DualState(lambda_k=2.0, lambda_j=0.0)
        raw = closed_form_pk(1.0, 1.0, duals, NoisePower(1.0), 1.0)
        assert raw == pytest.approx(-0.5, abs=1e-15)  # (1 - 2 + 0) / (1*2*1)
        assert clamp_pk(raw) == pytest.approx(1e-6)

    def test_degenerate_duals(self):
        with pytest.raises(DegenerateDualsError):
            closed_form_pk(1.0, 1.0, DualState(lambda_k=0.7, lambda_j=0.7), NoisePower(1.0), 1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_independent_formula(self, seed):
        rng = np.random.default_rng(seed)
        gk, gj = rng.uniform(0.1, 5, 2)
        lam_k, lam_j = rng.uniform(0, 3), rng.uniform(0, 3)
        if abs(lam_k - lam_j) < 1e-6:
            lam_k += 0.5
        s2, p_t = rng.uniform(0.01, 2), rng.uniform(0.1, 5)
        got = closed_form_pk(gk, gj, DualState(lambda_k=lam_k, lambda_j=lam_j), NoisePower(s2), p_t)
        assert got == pytest.approx(formula_pk(gk, gj, lam_k, lam_j, s2, p_t), rel=1e-12)


class TestOracle:
    def test_grid_refinement_self_consistency(self):
        noise = NoisePower(1e-7)
        cons = PowerConstraints(p_max=10.0, i_th=2.0, r_min=0.0)
        coeffs = (sca_coefficients(8.0), sca_coefficients(0.9))
        gains = (2e-6, 6e-7)
        coarse = oracle_power_split(gains, cons, noise, 1.0, coeffs, grid=1000)
        fine = oracle_power_split(gains, cons, noise, 1.0, coeffs, grid=10000)
        obj_coarse = surrogate_sum(coarse.p_k, *gains, 1e-7, 1.0, coeffs)
        obj_fine = surrogate_sum(fine.p_k, *gains, 1e-7, 1.0, coeffs)
        assert abs(obj_fine - obj_coarse) < 1e-4

    def test_infeasible_marker(self):
        noise = NoisePower(1.0)
        # even p_j = 1 cannot reach the floor: log2(1 + G*P_t) << r_min
        cons = PowerConstraints(p_max=1.0, i_th=10.0, r_min=5.0)
        coeffs = (sca_coefficients(1.0), sca_coefficients(1.0))
        assert oracle_power_split((0.5, 0.5), cons, noise, 1.0, coeffs) is None

    def test_symmetric_users_enumeration(self):
        # equal gains: the sum objective is maximized at the p_k the direct
        # enumeration finds; check against a dense enumeration with loops
        noise = NoisePower(0.1)
        cons = PowerConstraints(p_max=5.0, i_th=5.0, r_min=0.0)
        coeffs = (sca_coefficients(2.0), sca_coefficients(2.0))
        gains = (1.0, 1.0)
        got = oracle_power_split(gains, cons, noise, 1.0, coeffs, grid=2001)
        best_val, best_pk = -math.inf, None
        for p_k in np.linspace(0, 1, 2001):
            val = surrogate_sum(float(p_k), 1.0, 1.0, 0.1, 1.0, coeffs)
            if val > best_val:
                best_val, best_pk = val, float(p_k)
        assert got.p_k == pytest.approx(best_pk, abs=1e-6)

    def test_grid_floor_enforced(self):
        with pytest.raises(ValueError):
            oracle_power_split((1.0, 1.0), PowerConstraints(p_max=1, i_th=1, r_min=0), NoisePower(1.0), 1.0,
                               (sca_coefficients(1.0), sca_coefficients(1.0)), grid=10)


def random_instance(seed):
    rng = np.random.default_rng(seed)
    gain_k = 10 ** rng.uniform(-6.5, -4.5)
    gain_j = gain_k * 10 ** rng.uniform(-1.5, -0.1)
    h_eff = 10 ** rng.uniform(-1, 1)
    noise = NoisePower(1e-7)
    cons = PowerConstraints(p_max=10 ** rng.uniform(-0.5, 1.0), i_th=10 ** rng.uniform(-0.5, 0.5), r_min=rng.uniform(0.0, 0.4))
    coeffs = (sca_coefficients(10 ** rng.uniform(0, 1.5)), sca_coefficients(10 ** rng.uniform(-1, 0.5)))
    return gain_k, gain_j, h_eff, noise, cons, coeffs


class TestSolvePower:
    def test_slack_constraints_drive_duals_to_zero(self):
        # r_min = 0: both floors inactive, so complementary slackness forces
        # the multipliers to decay to (numerically) zero
        noise = NoisePower(1e-7)
        cons = PowerConstraints(p_max=1.0, i_th=100.0, r_min=0.0)
        # expansion points consistent with a strong/weak operating point
        coeffs = (sca_coefficients(50.0), sca_coefficients(0.5))
        sol = solve_power(1e-5, 1e-6, 1e-9, cons, noise, coeffs)
        assert sol.feasible
        assert sol.duals.lambda_k < 1e-6
        assert sol.duals.lambda_j < 1e-6
        # strong user's gain dominates: most power goes to it
        assert sol.split.p_k > 0.5

    def test_default_parameters_meet_floor(self):
        # default operating point: floors at 0.1 b/s/Hz must be met
        noise = NoisePower(1e-7)
        cons = PowerConstraints(p_max=10.0, i_th=2.0, r_min=0.1)
        coeffs = (sca_coefficients(5.0), sca_coefficients(0.8))
        sol = solve_power(1e-6, 3e-7, 1.0, cons, noise, coeffs)
        assert sol.feasible
        assert sol.surrogate_rates[0] >= 0.1 - 1e-6
        assert sol.surrogate_rates[1] >= 0.1 - 1e-6
        assert sol.split.p_total == pytest.approx(min(2.0 / 1.0, 10.0))

    @pytest.mark.parametrize("seed", range(100))
    def test_oracle_equivalence_100_instances(self, seed):
        gain_k, gain_j, h_eff, noise, cons, coeffs = random_instance(seed)
        sol = solve_power(gain_k, gain_j, h_eff, cons, noise, coeffs)
        p_t = optimal_total_power(h_eff, cons)
        oracle = oracle_power_split((gain_k, gain_j), cons, noise, p_t, coeffs)
        if oracle is None:
            assert not sol.feasible
            return
        assert sol.feasible
        got = sum(sol.surrogate_rates)
        want = surrogate_sum(oracle.p_k, gain_k, gain_j, noise.sigma_sq, p_t, coeffs)
        assert got >= want - 1e-3  # never below the oracle
        assert abs(got - want) <= 1e-3  # and never mysteriously above it

    @pytest.mark.parametrize("seed", range(20))
    def test_feasible_solutions_satisfy_invariants(self, seed):
        gain_k, gain_j, h_eff, noise, cons, coeffs = random_instance(1000 + seed)
        sol = solve_power(gain_k, gain_j, h_eff, cons, noise, coeffs)
        split = sol.split
        assert split.p_k + split.p_j == pytest.approx(1.0, abs=1e-9)
        assert h_eff * split.p_total <= cons.i_th + 1e-9
        assert split.p_total <= cons.p_max + 1e-12
        assert sol.duals.lambda_k >= 0 and sol.duals.lambda_j >= 0
        if sol.feasible:
            assert sol.surrogate_rates[0] >= cons.r_min - 1e-6
            assert sol.surrogate_rates[1] >= cons.r_min - 1e-6

    def test_infeasible_reports_least_violating(self):
        noise = NoisePower(1.0)
        cons = PowerConstraints(p_max=1.0, i_th=10.0, r_min=6.0)
        coeffs = (sca_coefficients(1.0), sca_coefficients(1.0))
        sol = solve_power(0.5, 0.5, 0.1, cons, noise, coeffs)
        assert not sol.feasible
        assert sol.solver_path == "oracle_fallback"
        assert 0.0 < sol.split.p_k < 1.0
