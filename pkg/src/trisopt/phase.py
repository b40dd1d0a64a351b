"""Transmissive-surface phase design for fixed powers.

Lifts the beam to a PSD matrix, relaxes the rank-1 constraint, linearizes the
interference log with a first-order bound re-expanded until the exact relaxed
objective stalls, solves the resulting conic program with the embedded barrier
solver, and recovers a unit-disk beam by Gaussian randomization.

The conic subproblem is assembled in noise-normalized units (channels divided
by the noise variance) so the Newton systems stay well conditioned at small
sigma^2; reported objective values are in the original units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import conic
from .channel import ChannelVector
from .power import PowerConstraints
from .rate import NoisePower, PowerSplit

LN2 = math.log(2.0)
RANK1_GAP_THRESHOLD = 1e-6
AMPLITUDE_TOL = 1e-9
INNER_TAYLOR_TOL = 1e-4
MAX_INNER_TAYLOR = 20


class PhaseInfeasibleError(RuntimeError):
    """The relaxed subproblem has no strictly feasible point for the current powers."""

    def __init__(self, evidence: str):
        super().__init__(f"phase subproblem infeasible: {evidence}")
        self.evidence = evidence


class ExtractionError(RuntimeError):
    """No randomization candidate satisfied the exact constraints."""

    def __init__(self, best_beam: np.ndarray, violations: dict[str, float]):
        worst = max(violations.values())
        super().__init__(f"no feasible randomization candidate (worst violation {worst:.3e})")
        self.best_beam = best_beam
        self.violations = violations


@dataclass(frozen=True)
class BeamformingVector:
    """Per-element transmission coefficients, amplitudes capped at one."""

    elements: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.elements, dtype=complex)
        if e.ndim != 1 or e.size < 1:
            raise ValueError("elements must be a nonempty 1-D vector")
        if np.max(np.abs(e)) > 1.0 + AMPLITUDE_TOL:
            raise ValueError("element amplitudes must not exceed 1")
        object.__setattr__(self, "elements", e)

    def __len__(self) -> int:
        return self.elements.size


@dataclass(frozen=True)
class LiftedMatrix:
    """Hermitian PSD lift of a beam, with a diagonal cap of one."""

    matrix: np.ndarray
    source: str = "solver"  # "solver" | "outer_product"

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.conj().T)) > 1e-9 * scale:
            raise ValueError("matrix must be Hermitian")
        eigvals = np.linalg.eigvalsh(a)
        if eigvals[0] < -1e-7 * scale:
            raise ValueError(f"matrix must be PSD (min eigenvalue {eigvals[0]:.3e})")
        if np.max(np.real(np.diag(a))) > 1.0 + 1e-7:
            raise ValueError("diagonal entries must not exceed 1")
        object.__setattr__(self, "matrix", a)


@dataclass(frozen=True)
class PhaseSubproblem:
    """Data of the lifted phase program at a fixed power split."""

    g_k_lift: np.ndarray
    g_j_lift: np.ndarray
    h_l_lift: np.ndarray
    split: PowerSplit
    noise: NoisePower
    cons: PowerConstraints
    lambda_bar: float

    def __post_init__(self):
        if self.lambda_bar < self.noise.sigma_sq:
            raise ValueError("lambda_bar must be >= sigma_sq")


@dataclass(frozen=True)
class PhaseSolution:
    lifted: LiftedMatrix
    beam: BeamformingVector
    rank1_gap: float
    randomization_trials_used: int
    objective_value: float  # exact sum rate of the returned beam
    solver_matrix: np.ndarray | None = None  # raw strictly-interior solver iterate


def lift_channel(g: ChannelVector | np.ndarray) -> np.ndarray:
    """Rank-1 outer product g g^H, so tr(lift(g) @ phi phi^H) = |g^H phi|^2."""
    gv = g.gains if isinstance(g, ChannelVector) else np.asarray(g, dtype=complex)
    return np.outer(gv, gv.conj())


def lifted_gain(lift: np.ndarray, phi_mat: np.ndarray) -> float:
    return float(np.real(np.trace(lift @ phi_mat)))


def lifted_sinrs(sub: PhaseSubproblem, phi_mat: np.ndarray | LiftedMatrix) -> tuple[float, float]:
    """Trace-form SINRs; equal to the vector form whenever phi_mat = phi phi^H."""
    mat = phi_mat.matrix if isinstance(phi_mat, LiftedMatrix) else phi_mat
    s = sub.split
    sigma = sub.noise.sigma_sq
    gk = lifted_gain(sub.g_k_lift, mat)
    gj = lifted_gain(sub.g_j_lift, mat)
    gamma_k = gk * s.p_k * s.p_total / sigma
    gamma_j = gj * s.p_j * s.p_total / (sigma + gj * s.p_k * s.p_total)
    return gamma_k, gamma_j


def relaxed_objective(sub: PhaseSubproblem, phi_mat: np.ndarray) -> float:
    """Exact relaxed sum-rate objective (no Taylor bound) at a lifted point."""
    s = sub.split
    sigma = sub.noise.sigma_sq
    gk = lifted_gain(sub.g_k_lift, phi_mat)
    gj = lifted_gain(sub.g_j_lift, phi_mat)
    return (
        math.log2(gk * s.p_k * s.p_total + sigma)
        - math.log2(sigma)
        + math.log2(gj * s.p_total + sigma)
        - math.log2(sigma + gj * s.p_k * s.p_total)
    )


def build_taylor_objective(sub: PhaseSubproblem) -> conic.ConicProblem:
    """Assemble the linearized conic program for the current expansion point.

    Objective value equals
        log2(tr(G_k Phi) p_k P_t + s2) - log2(s2)
      + log2(tr(G_j Phi) P_t + s2) - log2(lam_bar) - (Lambda - lam_bar)/(lam_bar ln 2)
    subject to the interference bound on Lambda, both exact rate floors, the
    interference-temperature cap, the PSD cone and the unit diagonal cap. The
    solver-side Lambda variable is Lambda / s2.
    """
    if sub.lambda_bar <= 0:
        raise ValueError("lambda_bar must be > 0")
    s = sub.split
    sigma = sub.noise.sigma_sq
    p_t = s.p_total
    m = sub.g_k_lift.shape[0]
    gk_n = sub.g_k_lift / sigma
    gj_n = sub.g_j_lift / sigma
    lam_bar_n = sub.lambda_bar / sigma
    floor = 2.0 ** sub.cons.r_min - 1.0

    log_terms = [
        conic.LogTerm(matrix=gk_n * (s.p_k * p_t), weight=1.0, offset=1.0),
        conic.LogTerm(matrix=gj_n * p_t, weight=1.0, offset=1.0),
    ]
    inequalities = [
        # 1 + tr(G_j Phi) p_k P_t / s2 <= Lambda / s2
        conic.TraceInequality(matrix=gj_n * (s.p_k * p_t), sense="le", bound=-1.0, lam_coeff=-1.0),
        # strong user's exact rate floor
        conic.TraceInequality(matrix=gk_n * (s.p_k * p_t), sense="ge", bound=floor),
        # weak user's exact rate floor, interference moved to the left side
        conic.TraceInequality(
            matrix=gj_n * ((s.p_j - floor * s.p_k) * p_t), sense="ge", bound=floor
        ),
        # absolute interference-temperature cap (not noise-normalized)
        conic.TraceInequality(matrix=sub.h_l_lift * p_t, sense="le", bound=sub.cons.i_th),
    ]
    return conic.ConicProblem(
        dimension=m,
        log_terms=log_terms,
        lam_objective=-1.0 / (lam_bar_n * LN2),
        constant=-math.log2(lam_bar_n) + 1.0 / LN2,
        trace_inequalities=inequalities,
        diag_cap=1.0,
        uses_lambda=True,
    )


def _warm_start(sub: PhaseSubproblem, phi_mat: np.ndarray, mix: float = 0.05) -> tuple[np.ndarray, float] | None:
    """Blend a (possibly boundary) lift strictly inside the feasible set.

    Returns (phi, lambda_normalized) for the solver, or None when the blend is
    not strictly feasible (caller falls back to a cold phase-I start).
    """
    m = phi_mat.shape[0]
    blended = (1.0 - mix) * phi_mat + mix * (0.25 * np.eye(m))
    if np.max(np.real(np.diag(blended))) >= 1.0:
        return None
    problem = build_taylor_objective(sub)
    lo, hi = conic.lambda_window(problem, blended)
    if math.isinf(lo):
        lo = 0.0
    lam = lo + max(1.0, abs(lo)) if math.isinf(hi) else 0.5 * (lo + hi)
    if not math.isinf(hi) and lo >= hi:
        return None
    for q in problem.trace_inequalities:
        lhs = float(np.real(np.trace(q.matrix @ blended))) + q.lam_coeff * lam
        margin = lhs - q.bound if q.sense == "ge" else q.bound - lhs
        if margin <= 1e-12 * max(1.0, abs(q.bound)):
            return None
    return blended, lam


def solve_phase_subproblem(
    sub: PhaseSubproblem,
    tol: float = 1e-6,
    start: tuple[np.ndarray, float] | None = None,
    t0: float = 1.0,
) -> tuple[LiftedMatrix, float, conic.SolveReport]:
    """One linearized solve at the current expansion point; raises if infeasible.

    `start` is (phi matrix, solver-unit lambda), e.g. a previous report's raw
    iterate; the returned Lambda is in the original watt units.
    """
    problem = build_taylor_objective(sub)
    report = conic.solve(problem, tol=tol, start=start, t0=t0)
    if report.status == "infeasible":
        raise PhaseInfeasibleError(report.evidence or "no strictly feasible point")
    lifted = LiftedMatrix(matrix=_clean_psd(report.phi), source="solver")
    return lifted, float(report.lam) * sub.noise.sigma_sq, report


def _clean_psd(phi: np.ndarray) -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues / diagonal overshoot."""
    a = 0.5 * (phi + phi.conj().T)
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    a = (v * w) @ v.conj().T
    a = 0.5 * (a + a.conj().T)
    over = float(np.max(np.real(np.diag(a))))
    if over > 1.0:
        a = a / over
    return a


FEASIBILITY_SLACK = 1e-9  # relative; keeps binding constraints from rejecting
# candidates that sit on the boundary up to float noise


def _candidate_metrics(beam: np.ndarray, sub: PhaseSubproblem) -> tuple[float, dict[str, float]]:
    """Exact sum rate and relative constraint violations of a candidate beam."""
    s = sub.split
    sigma = sub.noise.sigma_sq
    floor = 2.0 ** sub.cons.r_min - 1.0
    gk = float(np.real(beam.conj() @ sub.g_k_lift @ beam))
    gj = float(np.real(beam.conj() @ sub.g_j_lift @ beam))
    hl = float(np.real(beam.conj() @ sub.h_l_lift @ beam))
    gamma_k = gk * s.p_k * s.p_total / sigma
    gamma_j = gj * s.p_j * s.p_total / (sigma + gj * s.p_k * s.p_total)
    violations = {
        "rate_floor_strong": (floor * sigma - gk * s.p_k * s.p_total) / sigma,
        "rate_floor_weak": (floor * (sigma + gj * s.p_k * s.p_total) - gj * s.p_j * s.p_total) / sigma,
        "interference_cap": (hl * s.p_total - sub.cons.i_th) / sub.cons.i_th,
    }
    rate = math.log2(1.0 + gamma_k) + math.log2(1.0 + gamma_j)
    return rate, violations


def polish_beam(beam: np.ndarray, sub: PhaseSubproblem, grid: int = 64, sweeps: int = 3) -> np.ndarray:
    """Deterministic per-element ascent on the exact sum rate.

    Cyclically re-optimizes each element over a phase grid at two amplitude
    levels (current and unit), keeping only feasible improvements, so the
    result is monotone in the exact rate and insensitive to tiny perturbations
    of the input beam. The per-candidate cost is O(1) through incremental
    updates of the three channel inner products.
    """
    vecs = []
    for lift in (sub.g_k_lift, sub.g_j_lift, sub.h_l_lift):
        w, v = np.linalg.eigh(lift)
        vecs.append(v[:, -1] * math.sqrt(max(float(w[-1]), 0.0)))
    g_k, g_j, h_l = vecs
    s = sub.split
    sigma = sub.noise.sigma_sq
    floor = 2.0 ** sub.cons.r_min - 1.0
    thetas = np.exp(2j * math.pi * np.arange(grid) / grid)

    beam = beam.copy()
    sums = np.array([np.vdot(g_k, beam), np.vdot(g_j, beam), np.vdot(h_l, beam)])

    def rate_and_ok(gk, gj, hl):
        gamma_k = gk * s.p_k * s.p_total / sigma
        gamma_j = gj * s.p_j * s.p_total / (sigma + gj * s.p_k * s.p_total)
        ok = (
            (gk * s.p_k * s.p_total - floor * sigma) / sigma >= -FEASIBILITY_SLACK
        ) & (
            (gj * s.p_j * s.p_total - floor * (sigma + gj * s.p_k * s.p_total)) / sigma >= -FEASIBILITY_SLACK
        ) & (
            (sub.cons.i_th - hl * s.p_total) / sub.cons.i_th >= -FEASIBILITY_SLACK
        )
        return np.log2(1.0 + gamma_k) + np.log2(1.0 + gamma_j), ok

    current_rate, current_ok = rate_and_ok(*(abs(v) ** 2 for v in sums))
    if not current_ok:
        return beam
    for _ in range(sweeps):
        improved = False
        for idx in range(beam.size):
            amp = abs(beam[idx])
            candidates = amp * thetas
            if amp < 1.0 - 1e-12:
                candidates = np.concatenate([candidates, thetas])
            base = sums - np.array([g_k[idx].conjugate(), g_j[idx].conjugate(), h_l[idx].conjugate()]) * beam[idx]
            cand_sums = base[:, None] + np.array(
                [g_k[idx].conjugate(), g_j[idx].conjugate(), h_l[idx].conjugate()]
            )[:, None] * candidates[None, :]
            rates, ok = rate_and_ok(*(np.abs(cand_sums) ** 2))
            rates = np.where(ok, rates, -np.inf)
            best = int(np.argmax(rates))
            if rates[best] > current_rate + 1e-12:
                beam[idx] = candidates[best]
                sums = cand_sums[:, best]
                current_rate = float(rates[best])
                improved = True
        # global amplitude scaling reaches the interference-cap face exactly
        peak = float(np.max(np.abs(beam)))
        if peak > 0:
            scales = np.linspace(0.8, 1.0 / peak, grid)
            scale_sums = sums[:, None] * scales[None, :]
            rates, ok = rate_and_ok(*(np.abs(scale_sums) ** 2))
            rates = np.where(ok, rates, -np.inf)
            best = int(np.argmax(rates))
            if rates[best] > current_rate + 1e-12:
                beam = beam * scales[best]
                sums = scale_sums[:, best]
                current_rate = float(rates[best])
                improved = True
        if not improved:
            break
    return beam


def extract_beam(
    lifted: LiftedMatrix,
    sub: PhaseSubproblem,
    trials: int = 200,
    rng_seed: int = 0,
) -> PhaseSolution:
    """Rank-1 recovery: principal eigenvector when the lift is numerically rank
    one, otherwise the best feasible clipped Gaussian sample.

    Deterministic in rng_seed; the first candidates of a larger trial budget
    repeat a smaller budget's draws, so more trials never lose.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    mat = lifted.matrix
    m = mat.shape[0]
    w, v = np.linalg.eigh(mat)
    lead = float(w[-1])
    second = float(w[-2]) if m > 1 else 0.0
    gap = max(second, 0.0) / lead if lead > 0 else 0.0

    if gap < RANK1_GAP_THRESHOLD:
        beam = v[:, -1] * math.sqrt(max(lead, 0.0))
        peak = float(np.max(np.abs(beam)))
        if peak > 1.0:
            beam = beam / peak
        rate, _ = _candidate_metrics(beam, sub)
        return PhaseSolution(
            lifted=lifted,
            beam=BeamformingVector(elements=beam),
            rank1_gap=gap,
            randomization_trials_used=0,
            objective_value=rate,
        )

    factor = v * np.sqrt(np.clip(w, 0.0, None))  # mat = factor @ factor^H
    rng = np.random.default_rng(rng_seed)
    # one row of 2M draws per trial keeps candidate prefixes seed-stable
    draws = rng.standard_normal((trials, 2 * m))
    xi = (draws[:, :m] + 1j * draws[:, m:]) / math.sqrt(2.0)
    samples = xi @ factor.T  # rows ~ CN(0, mat)
    candidates = samples / np.maximum(1.0, np.abs(samples))

    best_rate = -np.inf
    best_beam = None
    least_bad = None
    least_bad_score = np.inf
    for c in candidates:
        rate, violations = _candidate_metrics(c, sub)
        worst = max(violations.values())
        if worst > FEASIBILITY_SLACK and violations["interference_cap"] == worst:
            # over the cap only: a uniform shrink lands exactly on the cap
            # face (amplitudes only decrease), often restoring feasibility
            hl = float(np.real(c.conj() @ sub.h_l_lift @ c))
            scale = math.sqrt(sub.cons.i_th / (hl * sub.split.p_total))
            if scale < 1.0:
                c = c * scale
                rate, violations = _candidate_metrics(c, sub)
                worst = max(violations.values())
        if worst <= FEASIBILITY_SLACK:
            if rate > best_rate:
                best_rate, best_beam = rate, c
        elif worst < least_bad_score:
            least_bad_score, least_bad = worst, (c, violations)
    if best_beam is None:
        beam, violations = least_bad
        raise ExtractionError(best_beam=beam, violations=violations)
    return PhaseSolution(
        lifted=lifted,
        beam=BeamformingVector(elements=best_beam),
        rank1_gap=gap,
        randomization_trials_used=trials,
        objective_value=best_rate,
    )


def _taylor_loop(
    sub: PhaseSubproblem,
    start: tuple[np.ndarray, float] | None,
    tol: float,
    inner_tol: float = INNER_TAYLOR_TOL,
    max_inner: int = MAX_INNER_TAYLOR,
) -> tuple[LiftedMatrix, float, np.ndarray | None]:
    """Re-expand the interference linearization until the relaxed objective stalls.

    The re-expansion is a one-dimensional fixed-point iteration in the
    expansion value; when the plain update crawls (interference much larger
    than the noise floor), a guarded secant step on its residual jumps to the
    fixed point. The best iterate by exact relaxed objective is returned
    (with its raw strictly-interior solver point), so a bad extrapolation can
    never degrade the result.
    """
    sigma = sub.noise.sigma_sq

    def interference_at(mat: np.ndarray) -> float:
        return sigma + lifted_gain(sub.g_j_lift, mat) * sub.split.p_k * sub.split.p_total

    current = sub
    best_relaxed = -np.inf
    best_lifted = None
    best_raw = None
    t0 = 1.0
    history: list[tuple[float, float]] = []  # (lam_bar, residual = g(lam_bar) - lam_bar)
    for _ in range(max_inner):
        lifted, _lam_star, report = solve_phase_subproblem(current, tol=tol, start=start, t0=t0)
        relaxed = relaxed_objective(current, lifted.matrix)
        improvement = relaxed - best_relaxed
        if relaxed > best_relaxed:
            best_relaxed, best_lifted, best_raw = relaxed, lifted, report.warm_phi
        g_val = interference_at(lifted.matrix)
        residual = g_val - current.lambda_bar
        history.append((current.lambda_bar, residual))
        if abs(residual) <= 1e-9 * max(g_val, sigma):
            break  # expansion is self-consistent
        if improvement < inner_tol and len(history) >= 3:
            break  # stalled even after a secant attempt
        lam_next = max(g_val, sigma)  # plain re-expansion
        if len(history) >= 2:
            (l0, r0), (l1, r1) = history[-2], history[-1]
            denom = r1 - r0
            if abs(denom) > 1e-15 * max(abs(r1), abs(r0), 1e-300):
                secant = l1 - r1 * (l1 - l0) / denom
                if math.isfinite(secant) and secant >= sigma:
                    lam_next = secant
        current = replace(current, lambda_bar=lam_next)
        # only the objective's linear piece changed, so the previous ladder's
        # moderately-centered iterate is a robust strictly-interior restart
        start = (report.warm_phi, float(report.warm_lam))
        t0 = report.warm_t
    return best_lifted, best_relaxed, best_raw


def optimize_phase(
    sub: PhaseSubproblem,
    incoming_beam: np.ndarray,
    trials: int = 200,
    rng_seed: int = 0,
    tol: float = 1e-6,
    inner_tol: float = INNER_TAYLOR_TOL,
    max_inner: int = MAX_INNER_TAYLOR,
    warm_matrix: np.ndarray | None = None,
) -> tuple[PhaseSolution, float]:
    """Full phase step: re-expanded linearization to a stalled relaxed objective,
    then rank-1 extraction. Returns (solution, relaxed objective), with the
    relaxed objective guaranteed to upper-bound the extracted beam's rate.

    `warm_matrix` (e.g. the previous outer iteration's solver lift) seeds the
    first solve; the expansion point itself always comes from the incoming beam.
    """
    incoming_lift = np.outer(incoming_beam, np.conj(incoming_beam))
    lam_bar = sub.noise.sigma_sq + lifted_gain(sub.g_j_lift, incoming_lift) * sub.split.p_k * sub.split.p_total
    current = replace(sub, lambda_bar=max(lam_bar, sub.noise.sigma_sq))

    # start preference: raw interior iterate from the previous outer call
    # (validated by the solver), then a blended incoming lift, then cold
    start = None
    if warm_matrix is not None:
        problem = build_taylor_objective(current)
        lo, hi = conic.lambda_window(problem, warm_matrix)
        if lo <= hi or math.isinf(hi):
            lam0 = lo + max(1.0, abs(lo)) if math.isinf(hi) else 0.5 * (lo + hi)
            start = (warm_matrix, lam0)
    if start is None:
        start = _warm_start(current, incoming_lift)
    lifted, relaxed, raw = _taylor_loop(current, start, tol, inner_tol=inner_tol, max_inner=max_inner)
    try:
        solution = extract_beam(lifted, sub, trials=trials, rng_seed=rng_seed)
    except ExtractionError:
        # a binding rate floor leaves clipped samples marginally short; a
        # larger draw from the same seed almost always lands inside
        solution = extract_beam(lifted, sub, trials=5 * trials, rng_seed=rng_seed)
    polished = polish_beam(solution.beam.elements, sub)
    rate, _ = _candidate_metrics(polished, sub)
    if rate > solution.objective_value:
        solution = replace(solution, beam=BeamformingVector(elements=polished), objective_value=rate)
    solution = replace(solution, solver_matrix=raw)

    # MM stationarity does not dominate every rank-1 point of the nonconvex
    # relaxed objective; re-expand from the lifted candidate if it wins.
    if solution.objective_value > relaxed + 1e-9:
        cand_lift = np.outer(solution.beam.elements, np.conj(solution.beam.elements))
        lam_bar2 = sub.noise.sigma_sq + lifted_gain(sub.g_j_lift, cand_lift) * sub.split.p_k * sub.split.p_total
        current2 = replace(sub, lambda_bar=max(lam_bar2, sub.noise.sigma_sq))
        start2 = _warm_start(current2, cand_lift)
        lifted2, relaxed2, raw2 = _taylor_loop(current2, start2, tol, inner_tol=inner_tol, max_inner=max_inner)
        if relaxed2 > relaxed:
            lifted, relaxed = lifted2, relaxed2
            better = extract_beam(lifted, sub, trials=trials, rng_seed=rng_seed)
            better = replace(better, solver_matrix=raw2)
            if better.objective_value > solution.objective_value:
                solution = better
        relaxed = max(relaxed, solution.objective_value)
    return solution, relaxed
