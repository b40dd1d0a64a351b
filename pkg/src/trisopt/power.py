"""NOMA power split and total transmit power for a fixed beam.

The fast path is the closed-form stationarity expression driven by a projected
sub-gradient dual loop; every result is cross-checked against an independent
grid-search oracle over the scalar split, and the better feasible point wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rate import NoisePower, PowerSplit, ScaCoefficients, sca_coefficients

P_CLAMP_EPS = 1e-6
RATE_FLOOR_TOL = 1e-6
DUAL_STOP_TOL = 1e-4


class DegenerateDualsError(ValueError):
    """Raised when the closed-form denominator vanishes (lambda_k == lambda_j)."""


@dataclass(frozen=True)
class PowerConstraints:
    """Transmit-power cap, interference-temperature cap, and per-user rate floor."""

    p_max: float
    i_th: float
    r_min: float

    def __post_init__(self):
        if not (math.isfinite(self.p_max) and self.p_max > 0):
            raise ValueError("p_max must be finite and > 0")
        if not (math.isfinite(self.i_th) and self.i_th > 0):
            raise ValueError("i_th must be finite and > 0")
        if not (math.isfinite(self.r_min) and self.r_min >= 0):
            raise ValueError("r_min must be finite and >= 0")


@dataclass(frozen=True)
class DualState:
    """Nonnegative multipliers for the two rate floors plus the sub-gradient step."""

    lambda_k: float
    lambda_j: float
    step_size: float = 0.05

    def __post_init__(self):
        if self.lambda_k < 0 or self.lambda_j < 0:
            raise ValueError("multipliers must be >= 0")
        if not (math.isfinite(self.step_size) and self.step_size > 0):
            raise ValueError("step_size must be finite and > 0")


@dataclass(frozen=True)
class PowerSolution:
    split: PowerSplit
    duals: DualState
    surrogate_rates: tuple[float, float]
    feasible: bool
    solver_path: str  # "closed_form" | "oracle_fallback"


def optimal_total_power(h_eff: float, cons: PowerConstraints) -> float:
    """min(I_th / h_eff, P_max): transmit as hot as the interference cap allows."""
    if h_eff <= 0.0:
        return cons.p_max
    return min(cons.i_th / h_eff, cons.p_max)


def closed_form_pk(gain_k: float, gain_j: float, duals: DualState, noise: NoisePower, p_t: float) -> float:
    """Stationarity expression for the strong user's coefficient (unclamped).

    The caller clamps the result to [P_CLAMP_EPS, 1 - P_CLAMP_EPS].
    """
    if gain_k <= 0 or gain_j <= 0:
        raise ValueError("gains must be > 0")
    denom_duals = duals.lambda_k - duals.lambda_j
    if abs(denom_duals) < 1e-12:
        raise DegenerateDualsError("lambda_k == lambda_j: closed form undefined")
    num = (gain_j * gain_k - gain_k * duals.lambda_k + gain_j * duals.lambda_j) * noise.sigma_sq
    den = gain_j * gain_k * denom_duals * p_t
    return num / den


def clamp_pk(p_k_raw: float) -> float:
    return min(max(p_k_raw, P_CLAMP_EPS), 1.0 - P_CLAMP_EPS)


def _surrogate_pair(
    p_k: np.ndarray,
    gain_k: float,
    gain_j: float,
    sigma_sq: float,
    p_t: float,
    coeffs: tuple[ScaCoefficients, ScaCoefficients],
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized surrogate rates over an array of split values; -inf where SINR <= 0."""
    p_j = 1.0 - p_k
    gam_k = gain_k * p_k * p_t / sigma_sq
    gam_j = gain_j * p_j * p_t / (sigma_sq + gain_j * p_k * p_t)
    ck, cj = coeffs
    with np.errstate(divide="ignore", invalid="ignore"):
        rk = np.where(gam_k > 0, ck.alpha * np.log2(np.maximum(gam_k, 1e-300)) + ck.beta, -np.inf)
        rj = np.where(gam_j > 0, cj.alpha * np.log2(np.maximum(gam_j, 1e-300)) + cj.beta, -np.inf)
    return rk, rj


def oracle_power_split(
    gains: tuple[float, float],
    cons: PowerConstraints,
    noise: NoisePower,
    p_t: float,
    coeffs: tuple[ScaCoefficients, ScaCoefficients],
    grid: int = 10_000,
) -> PowerSplit | None:
    """Independent grid search over p_k in [0, 1]; None marks an infeasible instance.

    Keeps only grid points where both surrogate rates clear the floor and returns
    the one maximizing their sum.
    """
    if grid < 100:
        raise ValueError("grid must be >= 100")
    gain_k, gain_j = gains
    p = np.linspace(0.0, 1.0, grid)
    rk, rj = _surrogate_pair(p, gain_k, gain_j, noise.sigma_sq, p_t, coeffs)
    feas = (rk >= cons.r_min) & (rj >= cons.r_min)
    if not np.any(feas):
        return None
    total = np.where(feas, rk + rj, -np.inf)
    best = int(np.argmax(total))
    p_best = clamp_pk(float(p[best]))
    return PowerSplit(p_k=p_best, p_j=1.0 - p_best, p_total=p_t)


def _least_violating_split(
    gains: tuple[float, float],
    cons: PowerConstraints,
    noise: NoisePower,
    p_t: float,
    coeffs: tuple[ScaCoefficients, ScaCoefficients],
    grid: int = 10_000,
) -> PowerSplit:
    """Grid point minimizing the worst rate-floor violation (for infeasible reporting)."""
    gain_k, gain_j = gains
    p = np.linspace(0.0, 1.0, grid)
    rk, rj = _surrogate_pair(p, gain_k, gain_j, noise.sigma_sq, p_t, coeffs)
    viol = np.maximum(cons.r_min - rk, cons.r_min - rj)
    best = int(np.argmin(viol))
    p_best = clamp_pk(float(p[best]))
    return PowerSplit(p_k=p_best, p_j=1.0 - p_best, p_total=p_t)


def _rates_at(split: PowerSplit, gain_k, gain_j, sigma_sq, coeffs) -> tuple[float, float]:
    rk, rj = _surrogate_pair(np.array([split.p_k]), gain_k, gain_j, sigma_sq, split.p_total, coeffs)
    return float(rk[0]), float(rj[0])


def solve_power(
    gain_k: float,
    gain_j: float,
    h_eff: float,
    cons: PowerConstraints,
    noise: NoisePower,
    coeffs: tuple[ScaCoefficients, ScaCoefficients],
    duals_init: DualState | None = None,
    max_dual_iters: int = 500,
    oracle_grid: int = 10_000,
) -> PowerSolution:
    """Dual loop on the closed form, then an oracle cross-check; best feasible wins.

    Each dual iteration clamps the closed-form split, then projects
    lambda <- max(0, lambda - step*(rate - r_min)) for both users.
    """
    p_t = optimal_total_power(h_eff, cons)
    duals = duals_init or DualState(lambda_k=0.5, lambda_j=0.5)

    closed_split: PowerSplit | None = None
    closed_rates = (-np.inf, -np.inf)
    if gain_k > 0 and gain_j > 0:
        prev_pk = 0.5
        for _ in range(max_dual_iters):
            try:
                p_k = clamp_pk(closed_form_pk(gain_k, gain_j, duals, noise, p_t))
                degenerate = False
            except DegenerateDualsError:
                # symmetric multipliers (e.g. the 0.5/0.5 init): update the
                # duals at the previous split so they can separate
                p_k = prev_pk
                degenerate = True
            prev_pk = p_k
            split = PowerSplit(p_k=p_k, p_j=1.0 - p_k, p_total=p_t)
            rk, rj = _rates_at(split, gain_k, gain_j, noise.sigma_sq, coeffs)
            if not degenerate:
                closed_split, closed_rates = split, (rk, rj)
            viol_k = max(0.0, cons.r_min - rk)
            viol_j = max(0.0, cons.r_min - rj)
            duals = replace(
                duals,
                lambda_k=max(0.0, duals.lambda_k - duals.step_size * (rk - cons.r_min)),
                lambda_j=max(0.0, duals.lambda_j - duals.step_size * (rj - cons.r_min)),
            )
            # primal violations plus KKT complementarity residuals
            comp_k = min(duals.lambda_k, max(0.0, rk - cons.r_min))
            comp_j = min(duals.lambda_j, max(0.0, rj - cons.r_min))
            if max(viol_k, viol_j, comp_k, comp_j) < DUAL_STOP_TOL and not degenerate:
                break

    oracle_split = oracle_power_split((gain_k, gain_j), cons, noise, p_t, coeffs, grid=oracle_grid)

    closed_ok = (
        closed_split is not None
        and closed_rates[0] >= cons.r_min - RATE_FLOOR_TOL
        and closed_rates[1] >= cons.r_min - RATE_FLOOR_TOL
    )
    if oracle_split is not None:
        oracle_rates = _rates_at(oracle_split, gain_k, gain_j, noise.sigma_sq, coeffs)
        if closed_ok and sum(closed_rates) >= sum(oracle_rates):
            return PowerSolution(closed_split, duals, closed_rates, True, "closed_form")
        return PowerSolution(oracle_split, duals, oracle_rates, True, "oracle_fallback")
    if closed_ok:
        return PowerSolution(closed_split, duals, closed_rates, True, "closed_form")

    worst = _least_violating_split((gain_k, gain_j), cons, noise, p_t, coeffs, grid=oracle_grid)
    worst_rates = _rates_at(worst, gain_k, gain_j, noise.sigma_sq, coeffs)
    return PowerSolution(worst, duals, worst_rates, False, "oracle_fallback")


def exact_boundary_pk(gain_j: float, sigma_sq: float, p_t: float, r_min: float) -> float:
    """Largest split meeting the weak user's exact rate floor.

    With users ordered strong-first, the exact sum rate is nondecreasing in
    p_k for all p, so this boundary point is the exact optimum of the scalar
    subproblem (and the fixed point of the surrogate re-expansion).
    """
    q = 2.0 ** r_min - 1.0
    b = gain_j * p_t
    if b <= 0:
        return clamp_pk(1.0)
    return clamp_pk((b - q * sigma_sq) / (b * (1.0 + q)))


def solve_power_sca(
    gain_k: float,
    gain_j: float,
    h_eff: float,
    cons: PowerConstraints,
    noise: NoisePower,
    gamma_seed: tuple[float, float],
    duals_init: DualState | None = None,
    max_dual_iters: int = 500,
    oracle_grid: int = 10_000,
    refresh_cap: int = 8,
    split_tol: float = 2e-4,
) -> tuple[PowerSolution, tuple[ScaCoefficients, ScaCoefficients]]:
    """Drive the scalar power subproblem to its own surrogate fixed point.

    One solve happens at the incoming expansion (the previous iterate's
    SINRs), one at the expansion around the analytic exact-boundary split
    (the re-expansion fixed point, which plain refreshes approach only at a
    linear crawl), and plain refreshes polish whichever won. Expansions are
    tight at their own split, so exact rates never decrease across refreshes.
    """
    floor = 1e-12
    sigma_sq = noise.sigma_sq

    def expand(split: PowerSplit) -> tuple[ScaCoefficients, ScaCoefficients]:
        gam_k = gain_k * split.p_k * split.p_total / sigma_sq
        gam_j = gain_j * split.p_j * split.p_total / (sigma_sq + gain_j * split.p_k * split.p_total)
        return (
            sca_coefficients(max(gam_k, floor)),
            sca_coefficients(max(gam_j, floor)),
        )

    def exact_sum(split: PowerSplit) -> float:
        gam_k = gain_k * split.p_k * split.p_total / sigma_sq
        gam_j = gain_j * split.p_j * split.p_total / (sigma_sq + gain_j * split.p_k * split.p_total)
        return math.log2(1.0 + gam_k) + math.log2(1.0 + gam_j)

    coeffs = (
        sca_coefficients(max(gamma_seed[0], floor)),
        sca_coefficients(max(gamma_seed[1], floor)),
    )
    sol = solve_power(gain_k, gain_j, h_eff, cons, noise, coeffs, duals_init, max_dual_iters, oracle_grid)

    p_t = sol.split.p_total
    p_star = exact_boundary_pk(gain_j, sigma_sq, p_t, cons.r_min)
    star_split = PowerSplit(p_k=p_star, p_j=1.0 - p_star, p_total=p_t)
    star_coeffs = expand(star_split)
    star_sol = solve_power(gain_k, gain_j, h_eff, cons, noise, star_coeffs, duals_init, max_dual_iters, oracle_grid)
    if star_sol.feasible and (not sol.feasible or exact_sum(star_sol.split) >= exact_sum(sol.split)):
        sol, coeffs = star_sol, star_coeffs

    for _ in range(refresh_cap):
        if not sol.feasible:
            break
        new_coeffs = expand(sol.split)
        new_sol = solve_power(gain_k, gain_j, h_eff, cons, noise, new_coeffs, duals_init, max_dual_iters, oracle_grid)
        if not new_sol.feasible:
            break
        moved = abs(new_sol.split.p_k - sol.split.p_k)
        sol, coeffs = new_sol, new_coeffs
        if moved < split_tol:
            break
    return sol, coeffs
