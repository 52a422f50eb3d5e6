"""Small dense primal-dual interior-point solver for one-block SDPs with free variables.

Problem form (maximization over free variables ``y`` and one symmetric
block ``X``)::

    maximize    c' y
    subject to  G y + A(X) = b
                lower <= y <= upper       (optional, per variable)
                X >= 0                    (PSD, or entrywise if ``diagonal``)

``A(X)`` is given row by row as coefficients on the distinct entries
X[i, j], i <= j (upper triangle, row-major).  An off-diagonal coefficient
multiplies the single shared variable X[i, j] = X[j, i]; a Gram-type sum
over ordered pairs therefore puts a 2 there.

The dual is ``minimize b' w  s.t.  G' w = c,  A*(w) = S >= 0``.

Method: infeasible-start path following with Nesterov-Todd scaling and a
Mehrotra predictor-corrector.  Free variables stay free in the Newton
system, which is solved as a dense saddle-point system.  Box bounds become
nonnegative slacks.  Step length uses fraction-to-boundary 0.98.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import IO, Optional, Sequence

import numpy as np
import scipy.linalg as sla

log = logging.getLogger(__name__)

STATUSES = ("optimal", "infeasible", "unbounded", "max_iterations", "numerical_failure")
STEP_FRACTION = 0.98
STALL_WINDOW = 30
REFINE_STEPS = 2


class MalformedProblem(ValueError):
    pass


def num_entries(n: int) -> int:
    return n * (n + 1) // 2


def entry_index(i: int, j: int, n: int) -> int:
    """Position of X[i, j] (any order) in the upper-triangle row-major list."""
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


def _upper_indices(n: int):
    return np.triu_indices(n)


def entries_to_matrix(row: np.ndarray, n: int) -> np.ndarray:
    """Symmetric A with <A, X> equal to the row applied to X's distinct entries."""
    iu = _upper_indices(n)
    A = np.zeros((n, n))
    A[iu] = row
    off = A - np.diag(np.diag(A))
    return np.diag(np.diag(A)) + 0.5 * (off + off.T)


def matrix_to_entries(X: np.ndarray) -> np.ndarray:
    return X[_upper_indices(X.shape[0])]


@dataclass
class SdpProblem:
    num_free: int
    psd_dim: int
    free_coeffs: np.ndarray
    matrix_coeffs: np.ndarray
    rhs: np.ndarray
    objective: np.ndarray
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    diagonal: bool = False
    free_labels: tuple[str, ...] = ()

    def __post_init__(self):
        m, n = int(self.num_free), int(self.psd_dim)
        if n < 1:
            raise MalformedProblem("psd_dim must be at least 1")
        if m < 0:
            raise MalformedProblem("num_free must be nonnegative")
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        p = self.rhs.size
        self.free_coeffs = np.asarray(self.free_coeffs, dtype=float).reshape(p, m)
        width = n if self.diagonal else num_entries(n)
        mc = np.asarray(self.matrix_coeffs, dtype=float)
        if mc.shape != (p, width):
            raise MalformedProblem(
                f"matrix_coeffs must have shape {(p, width)} (rows x matrix entries), got {mc.shape}")
        self.matrix_coeffs = mc
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        if self.objective.size != m:
            raise MalformedProblem("objective length must equal num_free")
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float).ravel()
                if v.size != m:
                    raise MalformedProblem(f"{name} bounds length must equal num_free")
                setattr(self, name, v)
        if self.lower is not None and self.upper is not None and np.any(self.lower > self.upper):
            raise MalformedProblem("lower bound exceeds upper bound")
        for arr in (self.free_coeffs, self.matrix_coeffs, self.rhs, self.objective):
            if not np.all(np.isfinite(arr)):
                raise MalformedProblem("non-finite problem data")
        if self.free_labels and len(self.free_labels) != m:
            raise MalformedProblem("free_labels length must equal num_free")

    @property
    def num_equalities(self) -> int:
        return self.rhs.size

    def matrix_part(self, X: np.ndarray) -> np.ndarray:
        if self.diagonal:
            return self.matrix_coeffs @ np.diag(X)
        return self.matrix_coeffs @ matrix_to_entries(X)

    def residuals(self, y: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Per-row residual G y + A(X) - b."""
        return self.free_coeffs @ y + self.matrix_part(X) - self.rhs

    def scaled(self, factor) -> "SdpProblem":
        """Copy with every equality row (and its rhs) multiplied by ``factor``."""
        f = np.broadcast_to(np.asarray(factor, dtype=float), self.rhs.shape)
        return SdpProblem(self.num_free, self.psd_dim, self.free_coeffs * f[:, None],
                          self.matrix_coeffs * f[:, None], self.rhs * f, self.objective,
                          self.lower, self.upper, self.diagonal, self.free_labels)


@dataclass
class SdpSolution:
    status: str
    free_values: np.ndarray
    psd_matrix: np.ndarray
    objective_value: float
    primal_residual: float
    dual_gap_estimate: float
    iterations: int
    dual_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dual_objective: float = float("nan")
    dual_residual: float = float("nan")


@dataclass(frozen=True)
class SolverOptions:
    tol_feas: float = 1e-8
    tol_gap: float = 1e-7
    max_iter: int = 200
    tol_infeas: float = 1e-8


def psd_check(matrix, tol: float = 1e-9) -> tuple[bool, float]:
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("matrix must be square")
    if M.size and np.max(np.abs(M - M.T)) > 1e-12 * max(1.0, np.max(np.abs(M))):
        raise ValueError("matrix is not symmetric")
    if M.size == 0:
        return True, float("inf")
    lam_min = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
    return lam_min >= -tol, lam_min


def primal_residual(problem: SdpProblem, y: np.ndarray, X: np.ndarray) -> float:
    """Max row residual, each row measured relative to max(1, ||row||_2)."""
    r = problem.residuals(y, X)
    norms = np.sqrt(np.sum(problem.free_coeffs**2, axis=1) + np.sum(problem.matrix_coeffs**2, axis=1))
    return float(np.max(np.abs(r) / np.maximum(1.0, norms))) if r.size else 0.0


class _Internal:
    """Row-normalized copy of the problem with bounds folded into an orthant block."""

    def __init__(self, prob: SdpProblem):
        m, n = prob.num_free, prob.psd_dim
        p0 = prob.num_equalities
        G = prob.free_coeffs
        b = prob.rhs
        self.dense = not prob.diagonal
        self.n = n if self.dense else 0
        if self.dense:
            A_rows = np.stack([entries_to_matrix(r, n) for r in prob.matrix_coeffs]) if p0 else np.zeros((0, n, n))
            F = np.zeros((p0, 0))
        else:
            A_rows = np.zeros((p0, 0, 0))
            F = prob.matrix_coeffs.copy()
        rows_G, rows_F, rhs = [G], [F], [b]
        bound_rows = []
        lo = prob.lower if prob.lower is not None else np.full(m, -np.inf)
        hi = prob.upper if prob.upper is not None else np.full(m, np.inf)
        for i in range(m):
            if np.isfinite(lo[i]):
                bound_rows.append((i, -1.0, lo[i]))  # y_i - s = lo
            if np.isfinite(hi[i]):
                bound_rows.append((i, 1.0, hi[i]))  # y_i + s = hi
        k0 = F.shape[1]
        k = k0 + len(bound_rows)
        Gb = np.zeros((len(bound_rows), m))
        Fb = np.zeros((len(bound_rows), k))
        bb = np.zeros(len(bound_rows))
        for r, (i, sgn, val) in enumerate(bound_rows):
            Gb[r, i] = 1.0
            Fb[r, k0 + r] = sgn
            bb[r] = val
        Fpad = np.zeros((p0, k))
        Fpad[:, :k0] = F
        self.G = np.vstack([G, Gb])
        self.F = np.vstack([Fpad, Fb])
        self.b = np.concatenate([b, bb])
        p = self.b.size
        A_all = np.zeros((p, n, n)) if self.dense else np.zeros((p, 0, 0))
        if self.dense:
            A_all[:p0] = A_rows
        self.A = A_all.reshape(p, -1)
        self.c = prob.objective.copy()
        self.p, self.m, self.k = p, m, k
        norms = np.sqrt(np.sum(self.G**2, 1) + np.sum(self.A**2, 1) + np.sum(self.F**2, 1))
        if np.any(norms == 0):
            bad = np.flatnonzero(norms == 0)
            if np.any(self.b[bad] != 0):
                raise MalformedProblem(f"equality row {int(bad[0])} has no variables but nonzero rhs")
            norms[bad] = 1.0
        self.row_scale = 1.0 / norms
        self.G *= self.row_scale[:, None]
        self.A *= self.row_scale[:, None]
        self.F *= self.row_scale[:, None]
        self.b *= self.row_scale

    def op(self, X):
        return self.A @ X.ravel() if self.n else np.zeros(self.p)

    def adj(self, w):
        return (w @ self.A).reshape(self.n, self.n) if self.n else np.zeros((0, 0))


def _sym(M):
    return 0.5 * (M + M.T)


def _max_step(L_inv: np.ndarray, dM: np.ndarray) -> float:
    if dM.size == 0:
        return math.inf
    lam = np.linalg.eigvalsh(_sym(L_inv @ dM @ L_inv.T))[0]
    return -1.0 / lam if lam < 0 else math.inf


def _max_step_vec(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-v[neg] / dv[neg]))


def solve(problem: SdpProblem, tol_feas: float = 1e-8, tol_gap: float = 1e-7,
          max_iter: int = 200, options: SolverOptions | None = None) -> SdpSolution:
    """Solve ``problem``; see the module docstring for the formulation.

    Deterministic: no randomness, fixed start.  Non-convergence is reported
    through ``status``, never raised.
    """
    if options is None:
        options = SolverOptions(tol_feas=tol_feas, tol_gap=tol_gap, max_iter=max_iter)
    if not isinstance(problem, SdpProblem):
        raise MalformedProblem("solve expects an SdpProblem")
    P = _Internal(problem)
    n, m, k, p = P.n, P.m, P.k, P.p
    nu = n + k

    # start: scaled identity / ones, zero free variables
    bnorm = 1.0 + np.max(np.abs(P.b)) if p else 1.0
    scale_x = max(10.0, math.sqrt(max(nu, 1)), bnorm * max(nu, 1))
    scale_s = max(10.0, math.sqrt(max(nu, 1)), 1.0 + np.max(np.abs(P.c)) if m else 1.0)
    X = scale_x * np.eye(n)
    S = scale_s * np.eye(n)
    v = np.full(k, scale_x)
    z = np.full(k, scale_s)
    y = np.zeros(m)
    w = np.zeros(p)

    best = math.inf
    best_iter = 0
    status = "max_iterations"
    it = 0
    rel_p = rel_d = gap = math.inf

    for it in range(options.max_iter + 1):
        r_p = P.b - P.G @ y - P.op(X) - P.F @ v
        r_y = P.c - P.G.T @ w
        R_d = S - P.adj(w)
        r_z = z - P.F.T @ w
        pobj = float(P.c @ y)
        dobj = float(P.b @ w)
        rel_p = float(np.max(np.abs(r_p))) / (1.0 + float(np.max(np.abs(P.b)))) if p else 0.0
        rel_d = math.sqrt(np.linalg.norm(r_y) ** 2 + np.linalg.norm(R_d) ** 2 + np.linalg.norm(r_z) ** 2) \
            / (1.0 + np.linalg.norm(P.c))
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        compl = (float(np.sum(X * S)) + float(v @ z)) / max(nu, 1)
        log.debug("it=%d pobj=%.10g dobj=%.10g rp=%.2e rd=%.2e gap=%.2e mu=%.2e",
                  it, pobj, dobj, rel_p, rel_d, gap, compl)

        if rel_p <= options.tol_feas and rel_d <= options.tol_feas and gap <= options.tol_gap:
            status = "optimal"
            break
        # unbounded primal: (y, X, v) grows along a recession direction improving c'y
        if pobj > 0 and (np.linalg.norm(P.b) + np.linalg.norm(r_p)) <= options.tol_infeas * pobj \
                and pobj > 1e6 * (1.0 + abs(dobj) if math.isfinite(dobj) else 1.0):
            status = "unbounded"
            break
        # infeasible primal: dual ray with b'w < 0, G'w = 0, A*(w) >= 0
        if dobj < 0 and (np.linalg.norm(P.c) + np.linalg.norm(r_y)) <= options.tol_infeas * -dobj \
                and np.linalg.norm(R_d) + np.linalg.norm(r_z) <= options.tol_infeas * -dobj:
            status = "infeasible"
            break
        merit = max(rel_p, rel_d, gap)
        if merit < 0.999 * best:
            best, best_iter = merit, it
        elif it - best_iter >= STALL_WINDOW:
            status = "numerical_failure"
            break
        if it == options.max_iter:
            status = "max_iterations"
            break

        try:
            step = _newton_step(P, X, S, v, z, r_p, r_y, R_d, r_z, compl)
        except (np.linalg.LinAlgError, sla.LinAlgError, FloatingPointError) as exc:
            log.debug("numerical failure at it=%d: %s", it, exc)
            status = "numerical_failure"
            break
        dy, dX, dv, dw, dS, dz, a_p, a_d = step
        y = y + a_p * dy
        X = _sym(X + a_p * dX)
        v = v + a_p * dv
        w = w + a_d * dw
        S = _sym(S + a_d * dS)
        z = z + a_d * dz
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            status = "numerical_failure"
            break

    # report the block in the caller's form
    if problem.diagonal:
        Xout = np.diag(v[: problem.psd_dim])
    else:
        Xout = X
    return SdpSolution(
        status=status,
        free_values=y.copy(),
        psd_matrix=Xout,
        objective_value=float(problem.objective @ y),
        primal_residual=primal_residual(problem, y, Xout),
        dual_gap_estimate=float(gap),
        iterations=it,
        dual_values=w * P.row_scale,
        dual_objective=float(P.b @ w),
        dual_residual=float(rel_d),
    )


def _newton_step(P: _Internal, X, S, v, z, r_p, r_y, R_d, r_z, mu):
    n, k = P.n, P.k
    # Nesterov-Todd scaling: W = Gs Gs', Gs^-1 X Gs^-T = Gs' S Gs = diag(lam)
    if n:
        Lx = np.linalg.cholesky(X)
        Ls = np.linalg.cholesky(S)
        U, sv, Vt = np.linalg.svd(Ls.T @ Lx)
        lam = sv
        Gs = Lx @ Vt.T / np.sqrt(sv)[None, :]
        Gs_inv = (np.sqrt(sv)[:, None] * Vt) @ np.linalg.inv(Lx)
        W = Gs @ Gs.T
        Lx_inv = np.linalg.inv(Lx)
        Ls_inv = np.linalg.inv(Ls)
        WAW = W @ P.A.reshape(-1, n, n) @ W
        M = _sym(P.A @ WAW.reshape(P.p, -1).T)
        lam_sum = lam[:, None] + lam[None, :]
    else:
        M = np.zeros((P.p, P.p))
    dvec = v / z if k else np.zeros(0)
    if k:
        M = M + (P.F * dvec[None, :]) @ P.F.T
    m = P.m
    K = np.zeros((P.p + m, P.p + m))
    K[: P.p, : P.p] = -M
    K[: P.p, P.p:] = P.G
    K[P.p:, : P.p] = P.G.T
    lu = sla.lu_factor(K, check_finite=True)

    def direction(Rhat, Rv):
        # Rhat: scaled complementarity rhs (n x n), Rv: orthant rhs (k)
        if n:
            Rt = Rhat / lam_sum
            R_X = Gs @ Rt @ Gs.T
            tX = R_X + W @ R_d @ W
            rhs1 = r_p - P.op(tX)
        else:
            R_X = np.zeros((0, 0))
            rhs1 = r_p.copy()
        if k:
            rhs1 = rhs1 - P.F @ (Rv + dvec * r_z)
        sol = sla.lu_solve(lu, np.concatenate([rhs1, r_y]))
        best = None
        for _ in range(REFINE_STEPS + 1):
            dw, dy = sol[: P.p], sol[P.p:]
            if n:
                dS = _sym(P.adj(dw) - R_d)
                dX = _sym(R_X - W @ dS @ W)
            else:
                dS = dX = np.zeros((0, 0))
            if k:
                dz = P.F.T @ dw - r_z
                dv = Rv - dvec * dz
            else:
                dz = dv = np.zeros(0)
            # residual of the unreduced equations; the reduced matrix loses
            # digits once W is badly conditioned, so refine against these
            err_p = r_p - P.G @ dy - P.op(dX) - P.F @ dv
            err_y = r_y - P.G.T @ dw
            err = np.linalg.norm(err_p) + np.linalg.norm(err_y)
            if best is not None and err >= best[0]:
                break
            best = (err, (dy, dX, dv, dw, dS, dz))
            sol = sol + sla.lu_solve(lu, np.concatenate([err_p, err_y]))
        return best[1]

    def steps(dX, dv, dS, dz):
        a_p = min(_max_step(Lx_inv, dX) if n else math.inf, _max_step_vec(v, dv))
        a_d = min(_max_step(Ls_inv, dS) if n else math.inf, _max_step_vec(z, dz))
        return min(1.0, STEP_FRACTION * a_p), min(1.0, STEP_FRACTION * a_d)

    nu = n + k
    # predictor
    Rhat = -2.0 * np.diag(lam**2) if n else None
    Rv = -v
    dy, dX, dv, dw, dS, dz = direction(Rhat, Rv)
    a_p, a_d = steps(dX, dv, dS, dz)
    mu_aff = (np.sum((X + a_p * dX) * (S + a_d * dS)) + (v + a_p * dv) @ (z + a_d * dz)) / nu
    sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

    # corrector with second-order term
    if n:
        dXt = Gs_inv @ dX @ Gs_inv.T
        dSt = Gs.T @ dS @ Gs
        cross = dXt @ dSt
        Rhat = 2.0 * sigma * mu * np.eye(n) - 2.0 * np.diag(lam**2) - (cross + cross.T)
    Rv = (sigma * mu - v * z - dv * dz) / z if k else np.zeros(0)
    dy, dX, dv, dw, dS, dz = direction(Rhat, Rv)
    a_p, a_d = steps(dX, dv, dS, dz)
    return dy, dX, dv, dw, dS, dz, a_p, a_d


def dump_problem(problem: SdpProblem, stream: IO[str]) -> None:
    """Write a plain-text conic dump: header, objective, then one equality per line.

    Each equality line lists ``f<i>:<value>`` for free variables and
    ``x<i>,<j>:<value>`` for matrix entries, followed by ``= <rhs>``.
    """
    n = problem.psd_dim
    stream.write(f"# free {problem.num_free} block {n} {'diag' if problem.diagonal else 'psd'} "
                 f"rows {problem.num_equalities}\n")
    stream.write("max " + " ".join(f"f{i}:{c!r}" for i, c in enumerate(problem.objective) if c) + "\n")
    if problem.diagonal:
        pairs = [(i, i) for i in range(n)]
    else:
        pairs = list(zip(*_upper_indices(n)))
    for r in range(problem.num_equalities):
        parts = [f"f{i}:{a!r}" for i, a in enumerate(problem.free_coeffs[r]) if a]
        parts += [f"x{i},{j}:{a!r}" for (i, j), a in zip(pairs, problem.matrix_coeffs[r]) if a]
        stream.write(" ".join(parts) + f" = {problem.rhs[r]!r}\n")
    for name in ("lower", "upper"):
        vals = getattr(problem, name)
        if vals is not None:
            stream.write(f"{name} " + " ".join(repr(float(x)) for x in vals) + "\n")
