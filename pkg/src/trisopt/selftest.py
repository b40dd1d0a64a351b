"""Built-in oracle battery for the `selftest` CLI subcommand.

Each check recomputes an expected value through an independent route (explicit
loops, dense grid search, direct formula evaluation) and compares the library
against it, printing one PASS/FAIL line per check.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from . import conic
from .channel import GeometryParams, effective_gain, steering_vector
from .phase import PhaseSubproblem, extract_beam, lift_channel, lifted_sinrs, LiftedMatrix
from .power import PowerConstraints, oracle_power_split, solve_power
from .rate import NoisePower, PowerSplit, exact_rate, sca_coefficients, surrogate_rate


def _check_steering() -> tuple[bool, str]:
    f_c = 2e9
    geom = GeometryParams(
        carrier_frequency_hz=f_c,
        element_spacing_m=299_792_458.0 / (2 * f_c),
        vertical_aod_rad=math.pi / 2,
        horizontal_aod_rad=0.0,
    )
    got = steering_vector(geom, 3).gains
    rho = 2 * math.pi * f_c * geom.element_spacing_m / 299_792_458.0
    want = [cmath.exp(-1j * rho * math.sin(geom.vertical_aod_rad) * math.cos(0.0) * m) for m in range(3)]
    err = max(abs(g - w) for g, w in zip(got, want))
    return err < 1e-12, f"max entry error {err:.2e}"

def _check_effective_gain() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    g = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    acc = 0.0 + 0.0j
    for a, b in zip(g, phi):
        acc += a.conjugate() * b
    want = abs(acc) ** 2
    got = effective_gain(g, phi)
    return abs(got - want) < 1e-9 * max(1.0, want), f"|got-want|={abs(got - want):.2e}"

def _check_sca() -> tuple[bool, str]:
    c = sca_coefficients(3.0)
    want_beta = 2.0 - 0.75 * math.log2(3.0)
    ok = abs(c.alpha - 0.75) < 1e-15 and abs(c.beta - want_beta) < 1e-12
    for gamma_hat in np.logspace(-3, 3, 13):
        coeffs = sca_coefficients(float(gamma_hat))
        for gamma in np.logspace(-3, 3, 13):
            if surrogate_rate(coeffs, float(gamma)) > exact_rate(float(gamma)) + 1e-10:
                return False, f"minorant violated at ({gamma_hat:.2e}, {gamma:.2e})"
    return ok, "tightness and minorant hold"

def _check_lift_consistency() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    g_k = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    g_j = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    h_l = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    phi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    phi = phi / np.max(np.abs(phi))
    split = PowerSplit(p_k=0.7, p_j=0.3, p_total=1.5)
    noise = NoisePower(sigma_sq=0.1)
    sub = PhaseSubproblem(
        g_k_lift=lift_channel(g_k), g_j_lift=lift_channel(g_j), h_l_lift=lift_channel(h_l),
        split=split, noise=noise, cons=PowerConstraints(p_max=10, i_th=1e9, r_min=0), lambda_bar=0.1,
    )
    gam_k, gam_j = lifted_sinrs(sub, np.outer(phi, phi.conj()))
    want_k = effective_gain(g_k, phi) * 0.7 * 1.5 / 0.1
    want_j = effective_gain(g_j, phi) * 0.3 * 1.5 / (0.1 + effective_gain(g_j, phi) * 0.7 * 1.5)
    rel = max(abs(gam_k - want_k) / want_k, abs(gam_j - want_j) / want_j)
    return rel < 1e-9, f"max relative error {rel:.2e}"

def _check_power_oracle() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(5):
        gain_k = 10 ** rng.uniform(-6, -4)
        gain_j = gain_k * 10 ** rng.uniform(-1.5, 0)
        noise = NoisePower(sigma_sq=1e-7)
        cons = PowerConstraints(p_max=10.0, i_th=2.0, r_min=0.1)
        p_t = 1.0
        coeffs = (sca_coefficients(5.0), sca_coefficients(0.8))
        sol = solve_power(gain_k, gain_j, gain_j, cons, noise, coeffs)
        oracle = oracle_power_split((gain_k, gain_j), cons, noise, sol.split.p_total, coeffs)
        if oracle is None or not sol.feasible:
            continue
        o_rates = sum(
            surrogate_rate(c, g)
            for c, g in zip(
                coeffs,
                (
                    gain_k * oracle.p_k * oracle.p_total / 1e-7,
                    gain_j * oracle.p_j * oracle.p_total / (1e-7 + gain_j * oracle.p_k * oracle.p_total),
                ),
            )
        )
        worst = max(worst, o_rates - sum(sol.surrogate_rates))
    return worst <= 1e-3, f"worst oracle shortfall {worst:.2e}"

def _check_conic_scalar() -> tuple[bool, str]:
    problem = conic.ConicProblem(
        dimension=1,
        log_terms=[conic.LogTerm(matrix=np.array([[2.0 + 0j]]), weight=1.0, offset=0.5)],
        trace_inequalities=[conic.TraceInequality(matrix=np.array([[3.0 + 0j]]), sense="le", bound=1.8)],
    )
    report = conic.solve(problem, tol=1e-8)
    want = min(1.0, 1.8 / 3.0)
    err = abs(float(np.real(report.phi[0, 0])) - want)
    return report.status == "optimal" and err < 1e-5, f"|phi-{want}|={err:.2e}"

def _check_extraction_determinism() -> tuple[bool, str]:
    rng = np.random.default_rng(5)
    a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    mat = a @ a.conj().T
    mat = mat / (np.max(np.real(np.diag(mat))) * 1.01)
    lifted = LiftedMatrix(matrix=mat)
    g = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    sub = PhaseSubproblem(
        g_k_lift=lift_channel(g), g_j_lift=lift_channel(g * 0.5), h_l_lift=lift_channel(g * 0.1),
        split=PowerSplit(p_k=0.6, p_j=0.4, p_total=1.0), noise=NoisePower(sigma_sq=0.01),
        cons=PowerConstraints(p_max=10, i_th=1e9, r_min=0.0), lambda_bar=0.01,
    )
    s1 = extract_beam(lifted, sub, trials=50, rng_seed=42)
    s2 = extract_beam(lifted, sub, trials=50, rng_seed=42)
    same = np.array_equal(s1.beam.elements, s2.beam.elements) and s1.objective_value == s2.objective_value
    return same, "bit-identical across repeat runs" if same else "results differ"


CHECKS = [
    ("steering_vector matches direct formula", _check_steering),
    ("effective_gain matches loop dot product", _check_effective_gain),
    ("surrogate coefficients and minorant", _check_sca),
    ("lifted SINRs match vector SINRs", _check_lift_consistency),
    ("power solver dominates grid oracle", _check_power_oracle),
    ("conic solver matches scalar optimum", _check_conic_scalar),
    ("beam extraction is deterministic", _check_extraction_determinism),
]


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok = all_ok and ok
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return all_ok
