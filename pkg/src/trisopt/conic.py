"""Small-scale interior-point solver for the phase-design problem class.

Maximizes sums of logs of affine trace functionals (plus a linear term in an
optional scalar variable) over the intersection of the complex PSD cone with
trace inequalities and a diagonal cap. Implemented as a logarithmic-barrier
method with damped Newton steps over the real parametrization of the Hermitian
variable: M real diagonal entries followed by (Re, Im) pairs of the strict
upper triangle, so n = M^2 real coordinates plus the optional scalar.

Dense Newton is cheap at this scale: the log-det Hessian entry for a pair of
basis matrices (e_a e_b^H, e_c e_d^H) reduces to the product S[b,c]*S[d,a] of
inverse-matrix entries, so the full Hessian assembles in O(M^4) without any
explicit trace evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LN2 = math.log(2.0)
HERMITIAN_TOL = 1e-9
NEWTON_DECREMENT_TOL = 1e-9
MAX_NEWTON_PER_STAGE = 50
BARRIER_GROWTH = 10.0


@dataclass(frozen=True)
class LogTerm:
    """Contributes weight * log2(tr(matrix @ Phi) + offset) to the objective."""

    matrix: np.ndarray
    weight: float
    offset: float


@dataclass(frozen=True)
class TraceInequality:
    """tr(matrix @ Phi) + lam_coeff * Lambda  (sense)  bound, sense in {"le", "ge"}."""

    matrix: np.ndarray
    sense: str
    bound: float
    lam_coeff: float = 0.0

    def __post_init__(self):
        if self.sense not in ("le", "ge"):
            raise ValueError("sense must be 'le' or 'ge'")


@dataclass
class ConicProblem:
    dimension: int
    log_terms: list[LogTerm] = field(default_factory=list)
    linear_phi: np.ndarray | None = None
    lam_objective: float = 0.0
    constant: float = 0.0
    trace_inequalities: list[TraceInequality] = field(default_factory=list)
    diag_cap: float = 1.0
    uses_lambda: bool = False

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        for term in self.log_terms:
            _check_hermitian(term.matrix, self.dimension)
        for ineq in self.trace_inequalities:
            _check_hermitian(ineq.matrix, self.dimension)
            if ineq.lam_coeff != 0.0 and not self.uses_lambda:
                raise ValueError("inequality references Lambda but uses_lambda is False")
        if self.linear_phi is not None:
            _check_hermitian(self.linear_phi, self.dimension)
        if self.lam_objective != 0.0 and not self.uses_lambda:
            raise ValueError("objective references Lambda but uses_lambda is False")

    def objective_value(self, phi: np.ndarray, lam: float | None = None) -> float:
        val = self.constant
        for term in self.log_terms:
            u = float(np.real(np.trace(term.matrix @ phi))) + term.offset
            if u <= 0:
                return -np.inf
            val += term.weight * math.log2(u)
        if self.linear_phi is not None:
            val += float(np.real(np.trace(self.linear_phi @ phi)))
        if self.uses_lambda:
            val += self.lam_objective * float(lam)
        return val

    def gradient_phi(self, phi: np.ndarray) -> np.ndarray:
        """Matrix gradient of the objective w.r.t. Phi (Hermitian)."""
        grad = np.zeros((self.dimension, self.dimension), dtype=complex)
        for term in self.log_terms:
            u = float(np.real(np.trace(term.matrix @ phi))) + term.offset
            grad += term.weight * term.matrix / (u * LN2)
        if self.linear_phi is not None:
            grad += self.linear_phi
        return grad


@dataclass
class InteriorResult:
    feasible: bool
    phi: np.ndarray | None = None
    lam: float | None = None
    evidence: str | None = None
    max_violation: float = 0.0


@dataclass
class SolveReport:
    phi: np.ndarray | None
    lam: float | None
    objective_value: float
    barrier_iterations: int
    kkt_residual: float
    status: str  # "optimal" | "infeasible" | "max_iters"
    evidence: str | None = None
    stage_objectives: list[float] = field(default_factory=list)
    multipliers: np.ndarray | None = None
    slacks: np.ndarray | None = None
    t_final: float = 0.0
    # moderately-centered ladder iterate (gap ~1e-2): a robust warm start for
    # re-solves of perturbed problems, unlike the near-boundary final iterate
    warm_phi: np.ndarray | None = None
    warm_lam: float | None = None
    warm_t: float = 1.0


def _check_hermitian(a: np.ndarray, dim: int) -> None:
    a = np.asarray(a)
    if a.shape != (dim, dim):
        raise ValueError(f"matrix shape {a.shape} != ({dim}, {dim})")
    if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(a)))):
        raise ValueError("matrix is not Hermitian")


# ---------------------------------------------------------------------------
# Real parametrization of Hermitian matrices
# ---------------------------------------------------------------------------

_INDEX_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_SLOT_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _triu_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    cached = _INDEX_CACHE.get(m)
    if cached is None:
        cached = np.triu_indices(m, 1)
        _INDEX_CACHE[m] = cached
    return cached


def _coordinate_slots(m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Positions of the diagonal, Re-offdiag, Im-offdiag coordinates in x."""
    cached = _SLOT_CACHE.get(m)
    if cached is None:
        pairs = m * (m - 1) // 2
        d_pos = np.arange(m)
        r_pos = m + 2 * np.arange(pairs)
        i_pos = r_pos + 1
        cached = (d_pos, r_pos, i_pos)
        _SLOT_CACHE[m] = cached
    return cached


def phi_from_x(x: np.ndarray, m: int) -> np.ndarray:
    phi = np.zeros((m, m), dtype=complex)
    np.fill_diagonal(phi, x[:m])
    if m > 1:
        iu, ju = _triu_indices(m)
        off = x[m::2] + 1j * x[m + 1 :: 2]
        phi[iu, ju] = off
        phi[ju, iu] = off.conj()
    return phi


def x_from_phi(phi: np.ndarray) -> np.ndarray:
    m = phi.shape[0]
    x = np.empty(m * m)
    x[:m] = np.real(np.diag(phi))
    if m > 1:
        iu, ju = _triu_indices(m)
        x[m::2] = np.real(phi[iu, ju])
        x[m + 1 :: 2] = np.imag(phi[iu, ju])
    return x


def coef_vector(a: np.ndarray) -> np.ndarray:
    """Real vector c with tr(A @ Phi(x)) == c . x for Hermitian A."""
    m = a.shape[0]
    c = np.empty(m * m)
    c[:m] = np.real(np.diag(a))
    if m > 1:
        iu, ju = _triu_indices(m)
        c[m::2] = 2.0 * np.real(a[iu, ju])
        c[m + 1 :: 2] = 2.0 * np.imag(a[iu, ju])
    return c


def _logdet_grad_hess(s_inv: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of ln det Phi(x) given S = Phi^{-1}.

    grad_p = Re tr(S E_p) and hess_pq = -Re tr(S E_p S E_q) reduce to entry
    products of S for the elementary-matrix basis (tr(S e_a e_b^H S e_c e_d^H)
    = S[b,c] S[d,a]), so every block is plain vectorized arithmetic: no matrix
    products of basis stacks are needed.
    """
    n = m * m
    grad = np.empty(n)
    hess = np.empty((n, n))
    d_pos, r_pos, i_pos = _coordinate_slots(m)
    grad[d_pos] = np.real(np.diag(s_inv))
    if m == 1:
        hess[0, 0] = -np.real(s_inv[0, 0]) ** 2
        return grad, hess
    iu, ju = _triu_indices(m)
    off = s_inv[iu, ju]
    grad[r_pos] = 2.0 * np.real(off)
    grad[i_pos] = 2.0 * np.imag(off)

    # diag-diag: -|S_ab|^2
    hess[np.ix_(d_pos, d_pos)] = -np.abs(s_inv) ** 2
    # diag-offdiag: W[a, (ij)] = S_{a i} conj(S_{a j})
    w = s_inv[:, iu] * s_inv[:, ju].conj()
    hess[np.ix_(d_pos, r_pos)] = -2.0 * np.real(w)
    hess[np.ix_(r_pos, d_pos)] = -2.0 * np.real(w).T
    hess[np.ix_(d_pos, i_pos)] = 2.0 * np.imag(w)
    hess[np.ix_(i_pos, d_pos)] = 2.0 * np.imag(w).T
    # offdiag-offdiag via Z1[(ij),(kl)] = S_{jk} S_{li}, Z2 = S_{ik} S_{lj}
    z1 = s_inv[ju[:, None], iu[None, :]] * s_inv[ju[None, :], iu[:, None]]
    z2 = s_inv[iu[:, None], iu[None, :]] * s_inv[ju[None, :], ju[:, None]]
    hess[np.ix_(r_pos, r_pos)] = -2.0 * (np.real(z1) + np.real(z2))
    hess[np.ix_(i_pos, i_pos)] = 2.0 * (np.real(z1) - np.real(z2))
    rm = 2.0 * (np.imag(z1) + np.imag(z2))
    hess[np.ix_(r_pos, i_pos)] = rm
    hess[np.ix_(i_pos, r_pos)] = rm.T
    return grad, hess


# ---------------------------------------------------------------------------
# Internal affine form: variables z = [x_phi (n_phi); extras]
# ---------------------------------------------------------------------------


class _BarrierProblem:
    """Affine-form problem data over z = [x_phi; extra scalars]."""

    def __init__(
        self,
        m: int,
        n_extra: int,
        log_vecs: np.ndarray,      # (n_log, n_z) coefficient vectors
        log_offsets: np.ndarray,   # (n_log,)
        log_weights: np.ndarray,   # (n_log,) weights in nats (w / ln 2)
        lin: np.ndarray,           # (n_z,)
        constant: float,
        slack_vecs: np.ndarray,    # (n_slack, n_z): slack_r = slack_const[r] + slack_vecs[r] . z > 0
        slack_consts: np.ndarray,  # (n_slack,)
    ):
        self.m = m
        self.n_phi = m * m
        self.n_z = self.n_phi + n_extra
        self.log_vecs = log_vecs
        self.log_offsets = log_offsets
        self.log_weights = log_weights
        self.lin = lin
        self.constant = constant
        self.slack_vecs = slack_vecs
        self.slack_consts = slack_consts

    # objective in b/s/Hz-style units (log2 weights already converted to nats)
    def f(self, z: np.ndarray) -> float:
        u = self.log_offsets + self.log_vecs @ z
        if np.any(u <= 0):
            return -np.inf
        return float(np.sum(self.log_weights * np.log(u)) + self.lin @ z + self.constant)

    def slacks(self, z: np.ndarray) -> np.ndarray:
        if self.slack_vecs.shape[0] == 0:
            return np.empty(0)
        return self.slack_consts + self.slack_vecs @ z

    def chol_phi(self, z: np.ndarray) -> np.ndarray | None:
        phi = phi_from_x(z[: self.n_phi], self.m)
        try:
            return np.linalg.cholesky(phi)
        except np.linalg.LinAlgError:
            return None

    def eval_point(self, z: np.ndarray, t: float) -> tuple[float, np.ndarray | None]:
        """(barrier objective, Cholesky factor); (-inf, None) when infeasible."""
        u = self.log_offsets + self.log_vecs @ z
        if np.any(u <= 0):
            return -np.inf, None
        s = self.slacks(z)
        if s.size and np.any(s <= 0):
            return -np.inf, None
        chol = self.chol_phi(z)
        if chol is None:
            return -np.inf, None
        val = t * float(np.sum(self.log_weights * np.log(u)) + self.lin @ z + self.constant)
        val += 2.0 * float(np.sum(np.log(np.diag(chol).real)))
        if s.size:
            val += float(np.sum(np.log(s)))
        return val, chol

    def strictly_feasible(self, z: np.ndarray) -> bool:
        return self.eval_point(z, 1.0)[0] > -np.inf

    def psi(self, z: np.ndarray, t: float, chol: np.ndarray | None = None) -> float:
        """Barrier objective t*f + ln det Phi + sum ln slack."""
        return self.eval_point(z, t)[0]

    def grad_hess(self, z: np.ndarray, t: float, chol: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        n_z, n_phi = self.n_z, self.n_phi
        grad = t * self.lin.copy()
        hess = np.zeros((n_z, n_z))

        u = self.log_offsets + self.log_vecs @ z
        if u.size:
            w_over_u = t * self.log_weights / u
            grad += self.log_vecs.T @ w_over_u
            scaled = self.log_vecs * (np.sqrt(t * self.log_weights) / u)[:, None]
            hess -= scaled.T @ scaled

        s = self.slacks(z)
        if s.size:
            grad += self.slack_vecs.T @ (1.0 / s)
            scaled = self.slack_vecs / s[:, None]
            hess -= scaled.T @ scaled

        # PSD barrier ln det Phi via S = Phi^{-1} from the Cholesky factor
        ident = np.eye(self.m, dtype=complex)
        linv = np.linalg.solve(chol, ident)
        s_inv = linv.conj().T @ linv
        g_ld, h_ld = _logdet_grad_hess(s_inv, self.m)
        grad[:n_phi] += g_ld
        hess[:n_phi, :n_phi] += h_ld
        return grad, hess


def _newton_center(
    prob: _BarrierProblem,
    z: np.ndarray,
    t: float,
    stop_when=None,
) -> tuple[np.ndarray, int, float, bool]:
    """Center at fixed t. Returns (z, steps, final decrement^2, converged).

    The decrement tolerance is scale-aware: once t*f reaches ~1e8, increments
    below the float64 resolution of the barrier objective cannot be verified
    by the line search, so a stall at that level counts as converged.
    `stop_when(z)` allows phase-I to bail out as soon as its slack goes
    negative instead of centering to completion.
    """
    dec2 = np.inf
    noise_floor = 0.0
    for step in range(MAX_NEWTON_PER_STAGE):
        if stop_when is not None and stop_when(z):
            return z, step, dec2, True
        psi_0, chol = prob.eval_point(z, t)
        if chol is None:
            return z, step, dec2, False
        noise_floor = 1e-13 * abs(psi_0)
        grad, hess = prob.grad_hess(z, t, chol)
        if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
            return z, step, dec2, False
        neg_h = -hess
        ridge = 0.0
        for _ in range(6):
            try:
                factor = np.linalg.cholesky(neg_h + ridge * np.eye(prob.n_z))
                break
            except np.linalg.LinAlgError:
                ridge = max(ridge * 10.0, 1e-10 * float(np.max(np.abs(neg_h))))
        else:
            return z, step, dec2, False
        direction = np.linalg.solve(factor.conj().T, np.linalg.solve(factor, grad)).real
        with np.errstate(over="ignore", invalid="ignore"):
            dec2 = float(grad @ direction)
        if not math.isfinite(dec2):
            return z, step, dec2, False
        if dec2 / 2.0 <= max(NEWTON_DECREMENT_TOL, noise_floor):
            return z, step, dec2, True
        alpha = 1.0
        while alpha > 1e-13:
            z_new = z + alpha * direction
            psi_new, _ = prob.eval_point(z_new, t)
            if psi_new >= psi_0 + 0.25 * alpha * dec2 - noise_floor:
                break
            alpha *= 0.5
        else:
            # stalled: converged if the remaining decrement is noise-level
            return z, step + 1, dec2, dec2 / 2.0 <= max(1e-6, 1e3 * noise_floor)
        z = z + alpha * direction
    return z, MAX_NEWTON_PER_STAGE, dec2, dec2 / 2.0 <= max(1e-6, 1e3 * noise_floor)


def _build_barrier(problem: ConicProblem, extra_names: tuple[str, ...]) -> _BarrierProblem:
    """Lower ConicProblem to affine form; extras may be ("lam",) or ("lam", "s")."""
    m = problem.dimension
    n_phi = m * m
    n_extra = len(extra_names)
    n_z = n_phi + n_extra
    lam_slot = n_phi + extra_names.index("lam") if "lam" in extra_names else None
    s_slot = n_phi + extra_names.index("s") if "s" in extra_names else None

    phase_one = s_slot is not None
    log_vecs, log_offsets, log_weights = [], [], []
    slack_vecs, slack_consts = [], []
    for term in problem.log_terms:
        vec = np.zeros(n_z)
        vec[:n_phi] = coef_vector(term.matrix)
        if phase_one:
            # phase-I objective is -s alone; keep the log arguments positive
            # as plain domain constraints so the handoff point is usable
            slack_vecs.append(vec)
            slack_consts.append(term.offset)
        else:
            log_vecs.append(vec)
            log_offsets.append(term.offset)
            log_weights.append(term.weight / LN2)

    lin = np.zeros(n_z)
    if phase_one:
        lin[s_slot] = -1.0  # maximize -s only
    else:
        if problem.linear_phi is not None:
            lin[:n_phi] = coef_vector(problem.linear_phi)
        if problem.uses_lambda and lam_slot is not None:
            lin[lam_slot] = problem.lam_objective
    for ineq in problem.trace_inequalities:
        vec = np.zeros(n_z)
        vec[:n_phi] = coef_vector(ineq.matrix)
        if ineq.lam_coeff != 0.0:
            vec[lam_slot] = ineq.lam_coeff
        if ineq.sense == "le":
            slack_vecs.append(-vec)
            slack_consts.append(ineq.bound)
        else:
            if s_slot is not None:
                vec = vec.copy()
                vec[s_slot] = 1.0  # relaxed: lhs + s >= bound
            slack_vecs.append(vec)
            slack_consts.append(-ineq.bound)
    for d in range(m):  # diag cap: diag_cap - Phi_dd > 0
        vec = np.zeros(n_z)
        vec[d] = -1.0
        slack_vecs.append(vec)
        slack_consts.append(problem.diag_cap)

    return _BarrierProblem(
        m=m,
        n_extra=n_extra,
        log_vecs=np.array(log_vecs).reshape(len(log_vecs), n_z) if log_vecs else np.empty((0, n_z)),
        log_offsets=np.array(log_offsets),
        log_weights=np.array(log_weights),
        lin=lin,
        constant=problem.constant if not phase_one else 0.0,
        slack_vecs=np.array(slack_vecs).reshape(len(slack_vecs), n_z) if slack_vecs else np.empty((0, n_z)),
        slack_consts=np.array(slack_consts),
    )


def lambda_window(problem: ConicProblem, phi: np.ndarray) -> tuple[float, float]:
    """Feasible interval for Lambda at fixed Phi, from the Lambda-bearing inequalities."""
    lo, hi = -np.inf, np.inf
    for ineq in problem.trace_inequalities:
        if ineq.lam_coeff == 0.0:
            continue
        lhs = float(np.real(np.trace(ineq.matrix @ phi)))
        limit = (ineq.bound - lhs) / ineq.lam_coeff
        upper = (ineq.sense == "le") == (ineq.lam_coeff > 0)
        if upper:
            hi = min(hi, limit)
        else:
            lo = max(lo, limit)
    return lo, hi


def find_interior(problem: ConicProblem) -> InteriorResult:
    """Strictly feasible (Phi, Lambda), or evidence of infeasibility.

    Tries scaled multiples of the identity against the <= constraints, then runs
    a phase-I slack minimization (auxiliary scalar added to each >= constraint)
    with the same barrier machinery when the >= side is not already satisfied.
    """
    m = problem.dimension
    eps = problem.diag_cap / 2.0
    ge_ineqs = [q for q in problem.trace_inequalities if q.sense == "ge"]
    le_ineqs = [q for q in problem.trace_inequalities if q.sense == "le" and q.lam_coeff == 0.0]

    phi = eps * np.eye(m, dtype=complex)
    for _ in range(60):
        margins = [q.bound - float(np.real(np.trace(q.matrix @ phi))) for q in le_ineqs]
        if all(v > 1e-12 * max(1.0, abs(q.bound)) for v, q in zip(margins, le_ineqs)):
            break
        eps *= 0.5
        phi = eps * np.eye(m, dtype=complex)
    else:
        worst = min(
            (q.bound - float(np.real(np.trace(q.matrix @ phi))), q) for q in le_ineqs
        )
        return InteriorResult(
            feasible=False,
            evidence=f"'le' constraint unsatisfiable near the PSD origin (bound {worst[1].bound})",
            max_violation=-worst[0],
        )

    lam = None
    if problem.uses_lambda:
        lo, hi = lambda_window(problem, phi)
        if lo > hi:
            return InteriorResult(feasible=False, evidence="empty Lambda window at scaled identity", max_violation=lo - hi)
        if math.isinf(hi):
            lam = (0.0 if math.isinf(lo) else lo) + max(1.0, abs(lo) if not math.isinf(lo) else 1.0)
        elif math.isinf(lo):
            lam = hi - max(1.0, abs(hi))
        else:
            lam = 0.5 * (lo + hi)

    def lam_for(p: np.ndarray) -> float | None:
        if not problem.uses_lambda:
            return None
        lo, hi = lambda_window(problem, p)
        if lo > hi:
            return None
        if math.isinf(hi):
            base = 0.0 if math.isinf(lo) else lo
            return base + max(1.0, abs(base))
        if math.isinf(lo):
            return hi - max(1.0, abs(hi))
        return 0.5 * (lo + hi)

    def strictly_ok(p: np.ndarray, lv: float | None) -> bool:
        for q in problem.trace_inequalities:
            lhs = float(np.real(np.trace(q.matrix @ p)))
            if q.lam_coeff != 0.0:
                lhs += q.lam_coeff * float(lv)
            margin = lhs - q.bound if q.sense == "ge" else q.bound - lhs
            if margin <= 1e-12 * max(1.0, abs(q.bound)):
                return False
        return float(np.max(np.real(np.diag(p)))) < problem.diag_cap

    def ge_margins(p: np.ndarray, lv: float | None) -> list[float]:
        out = []
        for q in ge_ineqs:
            lhs = float(np.real(np.trace(q.matrix @ p)))
            if q.lam_coeff != 0.0:
                lhs += q.lam_coeff * float(lv)
            out.append(lhs - q.bound)
        return out

    margins = ge_margins(phi, lam)
    if all(v > 1e-12 * max(1.0, abs(q.bound)) for v, q in zip(margins, ge_ineqs)):
        return InteriorResult(feasible=True, phi=phi, lam=lam)

    # cheap analytic candidates: Phi = a*I + b*(aligned direction), with the
    # best (a, b) by worst-constraint margin over a grid; every constraint is
    # affine in (a, b), so this covers the problem class without phase-I
    if ge_ineqs:
        directions = []
        for q in ge_ineqs:
            w, v = np.linalg.eigh(q.matrix)
            if w[-1] > 0:
                directions.append(np.outer(v[:, -1], v[:, -1].conj()))
        if directions:
            aligned = sum(directions) / len(directions)
            peak = max(float(np.max(np.real(np.diag(aligned)))), 1e-300)
            aligned = aligned / peak  # unit diagonal peak
            cap = problem.diag_cap
            a_grid = np.linspace(0.02 * cap, 0.6 * cap, 12)
            b_grid = np.linspace(0.0, 0.9 * cap, 16)
            best = None
            for a in a_grid:
                for b in b_grid:
                    if a + b >= 0.98 * cap:
                        continue
                    cand = a * np.eye(m) + b * aligned
                    lam_c = lam_for(cand)
                    if problem.uses_lambda and lam_c is None:
                        continue
                    margin = min(
                        (
                            (
                                float(np.real(np.trace(q.matrix @ cand)))
                                + q.lam_coeff * (lam_c or 0.0)
                                - q.bound
                            )
                            * (1 if q.sense == "ge" else -1)
                        )
                        / max(1.0, abs(q.bound))
                        for q in problem.trace_inequalities
                    ) if problem.trace_inequalities else 1.0
                    if best is None or margin > best[0]:
                        best = (margin, cand, lam_c)
            if best is not None and best[0] > 1e-10:
                return InteriorResult(feasible=True, phi=best[1], lam=best[2])

    # Phase-I: minimize the auxiliary slack s over (Phi, Lambda, s)
    extras = ("lam", "s") if problem.uses_lambda else ("s",)
    barrier = _build_barrier(problem, extras)
    s0 = max(0.0, -min(margins)) + 1.0
    z = np.concatenate([x_from_phi(phi), [lam, s0] if problem.uses_lambda else [s0]])
    if not barrier.strictly_feasible(z):
        return InteriorResult(feasible=False, evidence="phase-I start infeasible", max_violation=s0)

    t = 1.0
    nu = barrier.slack_vecs.shape[0] + m
    found_early = lambda zz: zz[-1] < -1e-6  # noqa: E731
    for _ in range(64):
        z, _, _, _ = _newton_center(barrier, z, t, stop_when=found_early)
        s_val = z[-1]
        if s_val < -1e-9:
            break
        if nu / t < 1e-8:
            break
        t *= BARRIER_GROWTH
    s_val = float(z[-1])
    phi_out = phi_from_x(z[: m * m], m)
    lam_out = float(z[m * m]) if problem.uses_lambda else None
    if s_val < -1e-12:
        return InteriorResult(feasible=True, phi=phi_out, lam=lam_out)
    # the slack variable can stall above zero while the iterate itself drifted
    # strictly feasible; judge the point, not the auxiliary variable
    if strictly_ok(phi_out, lam_out) and np.linalg.eigvalsh(phi_out)[0] > 0:
        return InteriorResult(feasible=True, phi=phi_out, lam=lam_out)
    viols = [(-v, q) for v, q in zip(ge_margins(phi_out, lam_out), ge_ineqs)]
    worst_v, worst_q = max(viols, key=lambda vq: vq[0])
    return InteriorResult(
        feasible=False,
        evidence=f"'ge' constraint with bound {worst_q.bound} violated by {worst_v:.3e} at phase-I optimum",
        max_violation=max(worst_v, 0.0),
    )


def solve(
    problem: ConicProblem,
    tol: float = 1e-6,
    max_barrier_iters: int = 64,
    start: tuple[np.ndarray, float | None] | None = None,
    t0: float = 1.0,
) -> SolveReport:
    """Barrier method: center, grow t by 10x until (constraint count)/t < tol.

    `start` may supply a strictly feasible warm start (Phi, Lambda); invalid
    warm starts fall back to find_interior. kkt_residual is the final Newton
    decrement scaled by 1/t (stationarity of the implicit-multiplier KKT system).
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    m = problem.dimension
    extras = ("lam",) if problem.uses_lambda else ()
    barrier = _build_barrier(problem, extras)

    z = None
    if start is not None:
        phi0, lam0 = start
        cand = np.concatenate([x_from_phi(np.asarray(phi0, dtype=complex)), [float(lam0)] if problem.uses_lambda else []])
        if barrier.strictly_feasible(cand):
            z = cand
    if z is None:
        interior = find_interior(problem)
        if not interior.feasible:
            return SolveReport(
                phi=None, lam=None, objective_value=-np.inf, barrier_iterations=0,
                kkt_residual=np.inf, status="infeasible", evidence=interior.evidence,
            )
        z = np.concatenate([x_from_phi(interior.phi), [interior.lam] if problem.uses_lambda else []])

    nu = barrier.slack_vecs.shape[0] + m
    t = float(t0)
    total_steps = 0
    stage_objectives: list[float] = []
    dec2 = np.inf
    final_ok = False
    reached_gap = False
    warm = None
    for _stage in range(max_barrier_iters):
        z, steps, dec2, final_ok = _newton_center(barrier, z, t)
        total_steps += steps
        stage_objectives.append(barrier.f(z))
        if warm is None and final_ok and nu / t < 1e-2:
            warm = (
                phi_from_x(z[: m * m], m),
                float(z[m * m]) if problem.uses_lambda else None,
                t,
            )
        if nu / t < tol:
            reached_gap = True
            break
        t *= BARRIER_GROWTH

    phi_out = phi_from_x(z[: m * m], m)
    lam_out = float(z[m * m]) if problem.uses_lambda else None
    slacks = barrier.slacks(z)
    kkt = math.sqrt(max(dec2, 0.0)) / t
    status = "optimal" if (final_ok and reached_gap and kkt <= tol) else "max_iters"
    if warm is None:
        warm = (phi_out, lam_out, t)
    return SolveReport(
        phi=phi_out,
        lam=lam_out,
        objective_value=barrier.f(z),
        barrier_iterations=total_steps,
        kkt_residual=kkt,
        status=status,
        stage_objectives=stage_objectives,
        multipliers=1.0 / (t * slacks) if slacks.size else np.empty(0),
        slacks=slacks,
        t_final=t,
        warm_phi=warm[0],
        warm_lam=warm[1],
        warm_t=warm[2],
    )


def dump_problem(problem: ConicProblem) -> str:
    """Plain-text dump (row-major, one matrix per block) for external cross-checks."""
    lines = [f"CONIC v1 M={problem.dimension}"]
    lines.append(f"constant {problem.constant!r}")
    lines.append(f"diagcap {problem.diag_cap!r}")
    lines.append(f"lambda {'1' if problem.uses_lambda else '0'} objective_coeff {problem.lam_objective!r}")

    def matrix_block(a: np.ndarray) -> list[str]:
        return [
            " ".join(f"{v.real!r} {v.imag!r}" for v in row)
            for row in np.asarray(a, dtype=complex)
        ]

    for term in problem.log_terms:
        lines.append(f"logterm weight {term.weight!r} offset {term.offset!r}")
        lines.extend(matrix_block(term.matrix))
    if problem.linear_phi is not None:
        lines.append("linear")
        lines.extend(matrix_block(problem.linear_phi))
    for ineq in problem.trace_inequalities:
        lines.append(f"ineq {ineq.sense} bound {ineq.bound!r} lam_coeff {ineq.lam_coeff!r}")
        lines.extend(matrix_block(ineq.matrix))
    return "\n".join(lines) + "\n"
