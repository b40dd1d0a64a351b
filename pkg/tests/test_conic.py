"""Barrier-solver checks against analytic optima, dense grid search, and
finite-difference derivatives."""

import math

import numpy as np
import pytest

from trisopt import conic
from trisopt.conic import ConicProblem, LogTerm, TraceInequality, dump_problem, find_interior, solve


def hermitian(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    h = (a + a.conj().T) / 2
    return h * scale


def psd(rng, m, scale=1.0):
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    return (a @ a.conj().T) * scale / m


def grid_oracle_m2(problem: ConicProblem, levels: int = 17, zooms: int = 9):
    """Dense grid search over (Phi11, Phi22, Re Phi12, Im Phi12) with zooming.

    Every grid point is snapped onto the feasible set (off-diagonal projected
    into the PSD disk, whole matrix rescaled when a PSD-coefficient trace cap
    overflows), so boundary optima are covered densely instead of being lost
    to a feasibility mask. Snapping assumes le-inequalities with PSD matrices
    and positive bounds, which holds for the instances generated here.
    """
    cap = problem.diag_cap
    box_lo = np.array([0.0, 0.0, -cap, -cap])
    box_hi = np.array([cap, cap, cap, cap])
    lo, hi = box_lo.copy(), box_hi.copy()
    best_val, best_x = -np.inf, None

    def trace_of(a, d1, d2, re, im):
        return (
            np.real(a[0, 0]) * d1
            + np.real(a[1, 1]) * d2
            + 2 * np.real(a[0, 1]) * re
            + 2 * np.imag(a[0, 1]) * im
        )

    for _ in range(zooms):
        axes = [np.linspace(lo[i], hi[i], levels) for i in range(4)]
        g = np.meshgrid(*axes, indexing="ij")
        d1, d2, re, im = (a.ravel().copy() for a in g)
        # snap into the PSD cone: shrink the off-diagonal onto the disk
        limit = np.sqrt(np.maximum(d1 * d2, 0.0))
        r = np.hypot(re, im)
        shrink = np.where(r > limit, np.where(r > 0, limit / np.maximum(r, 1e-300), 0.0), 1.0)
        re, im = re * shrink, im * shrink
        # snap under every trace cap: uniform rescale keeps PSD and diag caps
        for ineq in problem.trace_inequalities:
            tr = trace_of(ineq.matrix, d1, d2, re, im)
            over = tr > ineq.bound
            factor = np.where(over, ineq.bound / np.maximum(tr, 1e-300), 1.0)
            d1, d2, re, im = d1 * factor, d2 * factor, re * factor, im * factor
        val = np.zeros(d1.shape)
        for term in problem.log_terms:
            u = trace_of(term.matrix, d1, d2, re, im) + term.offset
            bad = u <= 0
            u = np.where(bad, 1.0, u)
            val += np.where(bad, -np.inf, term.weight * np.log2(u))
        if problem.linear_phi is not None:
            val += trace_of(problem.linear_phi, d1, d2, re, im)
        idx = int(np.argmax(val))
        if val[idx] > best_val:
            best_val = float(val[idx]) + problem.constant
            best_x = np.array([d1[idx], d2[idx], re[idx], im[idx]])
        span = (hi - lo) / (levels - 1) * 2.5
        lo = np.maximum(box_lo, best_x - span)
        hi = np.minimum(box_hi, best_x + span)
    off = complex(best_x[2], best_x[3])
    mat = np.array([[best_x[0], off], [off.conjugate(), best_x[1]]])
    return best_val, mat


def random_m2_instance(seed: int) -> ConicProblem:
    rng = np.random.default_rng(seed)
    terms = [
        LogTerm(matrix=psd(rng, 2, scale=rng.uniform(0.5, 4.0)), weight=float(rng.uniform(0.5, 2.0)), offset=float(rng.uniform(0.2, 1.5)))
        for _ in range(2)
    ]
    ineqs = []
    b = psd(rng, 2, scale=1.0)
    # bound chosen above the value at eps*I so an interior point exists
    bound = float(np.real(np.trace(b)) * 0.5 * rng.uniform(0.6, 1.2)) + 0.1
    ineqs.append(TraceInequality(matrix=b, sense="le", bound=bound))
    lin = hermitian(rng, 2, scale=0.1) if seed % 3 == 0 else None
    return ConicProblem(dimension=2, log_terms=terms, linear_phi=lin, trace_inequalities=ineqs)


class TestScalarAndLinearCases:
    def test_scalar_monotone_objective(self):
        # maximize log2(2*Phi + 0.5) with 3*Phi <= 1.8 and Phi <= 1: opt at 0.6
        problem = ConicProblem(
            dimension=1,
            log_terms=[LogTerm(matrix=np.array([[2.0 + 0j]]), weight=1.0, offset=0.5)],
            trace_inequalities=[TraceInequality(matrix=np.array([[3.0 + 0j]]), sense="le", bound=1.8)],
        )
        report = solve(problem, tol=1e-8)
        assert report.status == "optimal"
        assert float(np.real(report.phi[0, 0])) == pytest.approx(min(1.0, 1.8 / 3.0), abs=1e-6)

    def test_scalar_cap_binding(self):
        problem = ConicProblem(
            dimension=1,
            log_terms=[LogTerm(matrix=np.array([[2.0 + 0j]]), weight=1.0, offset=0.5)],
            trace_inequalities=[TraceInequality(matrix=np.array([[0.5 + 0j]]), sense="le", bound=10.0)],
        )
        report = solve(problem, tol=1e-8)
        assert float(np.real(report.phi[0, 0])) == pytest.approx(1.0, abs=1e-6)

    def test_pure_linear_lambda_corner(self):
        sigma_sq = 0.37
        problem = ConicProblem(
            dimension=2,
            lam_objective=-1.0,
            uses_lambda=True,
            trace_inequalities=[
                TraceInequality(matrix=np.zeros((2, 2), dtype=complex), sense="ge", bound=sigma_sq, lam_coeff=1.0)
            ],
        )
        report = solve(problem, tol=1e-8)
        assert report.status == "optimal"
        assert report.lam == pytest.approx(sigma_sq, abs=1e-5)


class TestGridOracleEquivalence:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_dense_grid(self, seed):
        problem = random_m2_instance(seed)
        report = solve(problem, tol=1e-8)
        assert report.status == "optimal"
        want, _ = grid_oracle_m2(problem)
        assert report.objective_value == pytest.approx(want, abs=1e-3)

    @pytest.mark.parametrize("seed", range(20))
    def test_kkt_residual_and_complementarity(self, seed):
        problem = random_m2_instance(seed)
        tol = 1e-7
        report = solve(problem, tol=tol)
        assert report.status == "optimal"
        assert report.kkt_residual <= 1e-6
        # all affine slacks strictly positive (interior of the feasible set)
        assert np.all(report.slacks > 0)
        products = report.multipliers * report.slacks
        assert np.all(products <= 10 * tol)


class TestDerivativeChecks:
    @pytest.mark.parametrize("seed", range(10))
    def test_gradient_and_hessian_finite_difference(self, seed):
        rng = np.random.default_rng(seed)
        problem = random_m2_instance(seed)
        barrier = conic._build_barrier(problem, ())
        z = conic.x_from_phi(0.3 * np.eye(2, dtype=complex))
        # random strictly feasible perturbation around the scaled identity
        for _ in range(20):
            cand = z + 0.05 * rng.standard_normal(z.size)
            if barrier.strictly_feasible(cand):
                z = cand
                break
        t = 3.7
        chol = barrier.chol_phi(z)
        grad, hess = barrier.grad_hess(z, t, chol)
        h = 1e-6
        for p in rng.choice(z.size, size=min(4, z.size), replace=False):
            e = np.zeros(z.size)
            e[p] = h
            cp, cm = barrier.chol_phi(z + e), barrier.chol_phi(z - e)
            fd_grad = (barrier.psi(z + e, t, cp) - barrier.psi(z - e, t, cm)) / (2 * h)
            assert fd_grad == pytest.approx(grad[p], rel=1e-4, abs=1e-6)
            gp, _ = barrier.grad_hess(z + e, t, cp)
            gm, _ = barrier.grad_hess(z - e, t, cm)
            fd_hess_col = (gp - gm) / (2 * h)
            assert np.allclose(fd_hess_col, hess[:, p], rtol=1e-4, atol=1e-5 * max(1.0, float(np.max(np.abs(hess)))))

    def test_logdet_derivatives_against_finite_difference(self):
        rng = np.random.default_rng(42)
        m = 3
        a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        phi = a @ a.conj().T / m + 0.5 * np.eye(m)
        x = conic.x_from_phi(phi)
        s_inv = np.linalg.inv(phi)
        grad, hess = conic._logdet_grad_hess(s_inv, m)
        h = 1e-6

        def logdet(xv):
            sign, val = np.linalg.slogdet(conic.phi_from_x(xv, m))
            assert sign > 0
            return val

        for p in range(m * m):
            e = np.zeros(m * m)
            e[p] = h
            fd = (logdet(x + e) - logdet(x - e)) / (2 * h)
            assert fd == pytest.approx(grad[p], rel=1e-5, abs=1e-8)


class TestMonotoneStagesAndReport:
    def test_stage_objectives_nondecreasing(self):
        problem = random_m2_instance(5)
        report = solve(problem, tol=1e-8)
        stages = report.stage_objectives
        assert len(stages) >= 2
        assert all(b >= a - 1e-9 for a, b in zip(stages, stages[1:]))

    def test_roundtrip_parametrization(self):
        rng = np.random.default_rng(0)
        phi = hermitian(rng, 4)
        assert np.allclose(conic.phi_from_x(conic.x_from_phi(phi), 4), phi, atol=1e-12)
        a = hermitian(rng, 4)
        x = conic.x_from_phi(phi)
        assert float(np.real(np.trace(a @ phi))) == pytest.approx(float(conic.coef_vector(a) @ x), rel=1e-10)


class TestFindInterior:
    def test_unconstrained_returns_half_cap_identity(self):
        problem = ConicProblem(dimension=3, diag_cap=1.0)
        res = find_interior(problem)
        assert res.feasible
        assert np.allclose(res.phi, 0.5 * np.eye(3), atol=1e-12)

    def test_contradictory_trace_bound(self):
        # tr(Phi) >= 10 with diag cap 1 at M=2 caps the trace at 2
        problem = ConicProblem(
            dimension=2,
            trace_inequalities=[TraceInequality(matrix=np.eye(2, dtype=complex), sense="ge", bound=10.0)],
        )
        res = find_interior(problem)
        assert not res.feasible
        assert res.evidence is not None
        assert res.max_violation > 0

    def test_phase_one_finds_ge_point(self):
        # needs tr(A Phi) >= 1.5 which scaled identity misses but the cap allows
        a = np.diag([3.0, 0.1]).astype(complex)
        problem = ConicProblem(
            dimension=2,
            trace_inequalities=[TraceInequality(matrix=a, sense="ge", bound=1.5)],
        )
        res = find_interior(problem)
        assert res.feasible
        got = float(np.real(np.trace(a @ res.phi)))
        assert got > 1.5

    def test_infeasible_status_from_solve(self):
        problem = ConicProblem(
            dimension=2,
            log_terms=[LogTerm(matrix=np.eye(2, dtype=complex), weight=1.0, offset=0.1)],
            trace_inequalities=[TraceInequality(matrix=np.eye(2, dtype=complex), sense="ge", bound=10.0)],
        )
        report = solve(problem)
        assert report.status == "infeasible"


class TestDump:
    def test_header_and_blocks(self):
        problem = random_m2_instance(3)
        text = dump_problem(problem)
        lines = text.splitlines()
        assert lines[0] == "CONIC v1 M=2"
        assert sum(1 for ln in lines if ln.startswith("logterm")) == len(problem.log_terms)
        assert sum(1 for ln in lines if ln.startswith("ineq")) == len(problem.trace_inequalities)
        # every matrix block is row-major with 2 rows of 2 complex entries
        assert any(len(ln.split()) == 4 for ln in lines[1:])


class TestValidation:
    def test_non_hermitian_rejected(self):
        bad = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            ConicProblem(dimension=2, log_terms=[LogTerm(matrix=bad, weight=1.0, offset=1.0)])

    def test_lambda_reference_requires_flag(self):
        with pytest.raises(ValueError):
            ConicProblem(
                dimension=2,
                trace_inequalities=[TraceInequality(matrix=np.eye(2, dtype=complex), sense="le", bound=1.0, lam_coeff=1.0)],
            )

    def test_bad_tolerance_rejected(self):
        with pytest.raises(ValueError):
            solve(ConicProblem(dimension=1), tol=0.0)
