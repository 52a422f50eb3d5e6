"""Exact rate-maximization SDP via a Gram-matrix nonnegativity certificate.

The density-evolution condition is P(x) >= 0 on [0, 1] with
P(x) = x - sum_d lambda_d h_d(x).  With Pi(x) = (1 + x^2)^q P(x^2/(1 + x^2)),
P >= 0 on [0, 1] iff Pi >= 0 on the line iff Pi = m(x)' B m(x) for some
PSD B over the monomials m = (1, x, ..., x^q).

How the solver sees it
----------------------
Substituting x = tan(t) gives cos(t)^(2q) Pi(tan t) = P(sin(t)^2) and
cos(t)^q m(tan t) = (cos^q t, cos^(q-1) t sin t, ..., sin^q t).  That
homogeneous trigonometric space is also spanned by the orthonormal Fourier
functions {1, sqrt2 cos jt, sqrt2 sin jt : j = q mod 2, j <= q}.  The
program therefore uses

* a Gram block over the Fourier basis instead of monomials (B = C' B_F C
  with C the exact change of basis), and
* the 2q + 1 coefficient identities replaced by the same identity at
  2q + 1 equispaced angles (an invertible recombination of those rows).

Both are exact reformulations.  The monomial version needs coefficients of
size ~2**q and loses all accuracy in double precision by q ~ 40, a
routine size for check degrees 6-8; this one keeps every entry O(1).

Since P(0) = 0 identically, B[0, 0] = 0 and the whole first row of B
vanishes.  That basis element is dropped up front (P = x * P1, certify P1),
which gives the program a strictly feasible interior.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import sdpcore
from .ensemble import ChannelParam, DegreeDistribution, DesignResult, InvalidInput, as_channel
from .polyops import DensePolynomial, constraint_basis, constraint_values, pi_transform, poly_eval
from .sdpcore import SdpProblem, SdpSolution

CLAMP_TOL = 1e-7
RENORM_DRIFT_TOL = 1e-6
CERT_EIG_TOL = 1e-9
CERT_RESIDUAL_TOL = 1e-7
# Designs are solved past the solver's default gap so that inactive degrees
# land below CLAMP_TOL instead of hovering at the central-path residue.
DESIGN_TOL_GAP = 1e-10


class NoDesign(RuntimeError):
    """The solver did not produce a usable design; ``status`` carries its verdict."""

    def __init__(self, status: str, message: str = ""):
        super().__init__(message or f"no design: solver status {status}")
        self.status = status


class CheckFailed(RuntimeError):
    """Neither a certificate nor a refutation could be produced."""


# ---------------------------------------------------------------------------
# Gram layout: basis, sampling nodes, conversion to monomials


@dataclass(frozen=True)
class GramLayout:
    """Gram block for certifying p = x**shift * p_s >= 0 on [0, 1], deg p = q."""

    q: int
    shift: int = 0

    @property
    def order(self) -> int:
        """Degree r of p_s; the Gram block has order r + 1."""
        return self.q - self.shift

    @property
    def dim(self) -> int:
        return self.order + 1

    @cached_property
    def frequencies(self) -> tuple[tuple[int, str], ...]:
        r = self.order
        out: list[tuple[int, str]] = []
        if r % 2 == 0:
            out.append((0, "cos"))
        for j in range(2 if r % 2 == 0 else 1, r + 1, 2):
            out += [(j, "cos"), (j, "sin")]
        return tuple(out)

    @cached_property
    def angles(self) -> np.ndarray:
        k = 2 * self.order + 1
        return -np.pi / 2 + np.pi * np.arange(k) / k

    @cached_property
    def nodes(self) -> np.ndarray:
        """Points y = sin(t)**2 in [0, 1] where the identity is imposed."""
        return np.sin(self.angles) ** 2

    def basis_values(self, angles) -> np.ndarray:
        t = np.asarray(angles, dtype=float)
        cols = []
        for j, kind in self.frequencies:
            if j == 0:
                cols.append(np.ones_like(t))
            else:
                cols.append(math.sqrt(2.0) * (np.cos(j * t) if kind == "cos" else np.sin(j * t)))
        return np.stack(cols, axis=-1)

    @cached_property
    def rows(self) -> np.ndarray:
        """Row k maps the Gram entries (upper triangle) to u(t_k)' B u(t_k)."""
        U = self.basis_values(self.angles)
        i, j = np.triu_indices(self.dim)
        return U[:, i] * U[:, j] * np.where(i == j, 1.0, 2.0)

    @cached_property
    def change_of_basis(self) -> np.ndarray:
        """C with fourier(t) = C @ (cos^(r-i) t sin^i t)_i, built in exact integers."""
        r = self.order
        C = np.zeros((self.dim, self.dim))
        for row, (j, kind) in enumerate(self.frequencies):
            e = (r - j) // 2
            trig = [0] * (j + 1)
            for t in range(j + 1):
                if kind == "cos" and t % 2 == 0:
                    trig[t] = (-1) ** (t // 2) * math.comb(j, t)
                elif kind == "sin" and t % 2 == 1:
                    trig[t] = (-1) ** ((t - 1) // 2) * math.comb(j, t)
            homog = [0] * (2 * e + 1)
            for u in range(e + 1):
                homog[2 * u] = math.comb(e, u)
            prod = [0] * (r + 1)
            for a, ca in enumerate(trig):
                if ca:
                    for b, cb in enumerate(homog):
                        if cb:
                            prod[a + b] += ca * cb
            scale = 1.0 if j == 0 else math.sqrt(2.0)
            C[row] = [scale * float(v) for v in prod]
        return C

    def monomial_gram(self, gram: np.ndarray) -> np.ndarray:
        """Gram matrix of Pi over (1, x, ..., x^q); entries grow like 2**q."""
        C = self.change_of_basis
        inner = C.T @ gram @ C
        out = np.zeros((self.q + 1, self.q + 1))
        out[self.shift:, self.shift:] = 0.5 * (inner + inner.T)
        return out

    def reduce(self, p: DensePolynomial) -> DensePolynomial:
        """p / x**shift; the dropped coefficients must be zero."""
        c = p.coefficients
        if np.any(c[: self.shift] != 0):
            raise InvalidInput(f"polynomial does not vanish to order {self.shift} at 0")
        return DensePolynomial(c[self.shift:])


def _leading_zero_order(polys: Sequence[DensePolynomial]) -> int:
    s = None
    for p in polys:
        c = p.coefficients
        if c.size == 0:
            continue
        nz = int(np.flatnonzero(c)[0])
        s = nz if s is None else min(s, nz)
    return s or 0


# ---------------------------------------------------------------------------
# Certificates


@dataclass(frozen=True)
class FeasibilityCertificate:
    """PSD Gram matrix for p in the layout's Fourier basis.

    ``reconstruction_residual`` is max_k |p_s(y_k) - u_k' B u_k| over the
    sampling nodes; the nodes are unisolvent, so a zero residual is the full
    polynomial identity.  ``monomial_gram()`` gives the same certificate over
    the plain monomials of Pi.
    """

    gram: np.ndarray
    min_eigenvalue: float
    reconstruction_residual: float
    layout: GramLayout

    @property
    def accepted(self) -> bool:
        return self.min_eigenvalue >= -CERT_EIG_TOL and self.reconstruction_residual <= CERT_RESIDUAL_TOL

    def monomial_gram(self) -> np.ndarray:
        return self.layout.monomial_gram(self.gram)

    def to_json(self) -> dict:
        return {
            "basis": "fourier",
            "q": self.layout.q,
            "shift": self.layout.shift,
            "gram_order": int(self.gram.shape[0]),
            "gram_row_major": [float(v) for v in self.gram.ravel()],
            "min_eigenvalue": float(self.min_eigenvalue),
            "reconstruction_residual": float(self.reconstruction_residual),
            "accepted": bool(self.accepted),
        }


@dataclass(frozen=True)
class Refutation:
    """A point in [0, 1] where the polynomial is negative."""

    x: float
    value: float


def _certify(layout: GramLayout, gram: np.ndarray, targets: np.ndarray) -> FeasibilityCertificate:
    gram = 0.5 * (gram + gram.T)
    i, j = np.triu_indices(layout.dim)
    recon = layout.rows @ gram[i, j]
    return FeasibilityCertificate(
        gram=gram,
        min_eigenvalue=float(np.linalg.eigvalsh(gram)[0]),
        reconstruction_residual=float(np.max(np.abs(targets - recon))),
        layout=layout,
    )


def hankel_sums(gram: np.ndarray) -> np.ndarray:
    n = gram.shape[0]
    out = np.zeros(2 * n - 1)
    for i in range(n):
        out[i: i + n] += gram[i]
    return out


def gram_residual(pi: Union[DensePolynomial, Sequence[float]], gram) -> float:
    """max_l |Pi_l - sum_{i+j=l} B_ij| for a Gram matrix over (1, x, ..., x^k).

    Pi may have lower degree than 2k (its top coefficients are then zero).
    """
    B = np.asarray(gram, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise InvalidInput("gram must be a square matrix")
    coeffs = pi.coefficients if isinstance(pi, DensePolynomial) else DensePolynomial(pi).coefficients
    n = B.shape[0]
    if coeffs.size > 2 * n - 1:
        raise InvalidInput(f"Gram order {n} is too small for a polynomial of degree {coeffs.size - 1}")
    target = np.zeros(2 * n - 1)
    target[: coeffs.size] = coeffs
    return float(np.max(np.abs(target - hankel_sums(B))))


# ---------------------------------------------------------------------------
# Generic affine family: p(t) = base + sum_i t_i * family_i >= 0 on [0, 1]


@dataclass(frozen=True)
class NonnegProgram:
    """A solved-for family base + sum t_i f_i, with each member's values p / x**shift at the nodes."""

    problem: SdpProblem
    layout: GramLayout
    base_values: np.ndarray
    family_values: np.ndarray

    def targets(self, t: Sequence[float]) -> np.ndarray:
        """p_s(y_k) for parameter values t."""
        return self.base_values + self.family_values @ np.asarray(t, dtype=float)

    def certificate(self, solution: SdpSolution) -> FeasibilityCertificate:
        return _certify(self.layout, solution.psd_matrix, self.targets(solution.free_values))


def _program(layout: GramLayout, base_values, family_values, objective, lower=None, upper=None,
             extra_rows: Sequence[tuple[Sequence[float], float]] = (), labels: Sequence[str] = ()
             ) -> NonnegProgram:
    base_values = np.asarray(base_values, dtype=float)
    family_values = np.asarray(family_values, dtype=float).reshape(layout.nodes.size, -1)
    m = family_values.shape[1]
    G = -family_values
    rhs = base_values
    rows = layout.rows
    if extra_rows:
        G = np.vstack([G] + [np.asarray(a, dtype=float)[None, :] for a, _ in extra_rows])
        rows = np.vstack([rows, np.zeros((len(extra_rows), rows.shape[1]))])
        rhs = np.concatenate([rhs, [float(b) for _, b in extra_rows]])
    problem = SdpProblem(num_free=m, psd_dim=layout.dim, free_coeffs=G, matrix_coeffs=rows, rhs=rhs,
                         objective=np.asarray(objective, dtype=float), lower=lower, upper=upper,
                         free_labels=tuple(labels))
    return NonnegProgram(problem, layout, base_values, family_values)


def nonneg_program(base: DensePolynomial, family: Sequence[DensePolynomial], objective: Sequence[float],
                   lower=None, upper=None, extra_rows: Sequence[tuple[Sequence[float], float]] = (),
                   labels: Sequence[str] = (), q: int | None = None) -> NonnegProgram:
    """SDP: maximize objective @ t s.t. base + sum t_i family_i >= 0 on [0, 1].

    ``extra_rows`` adds linear equalities a @ t = b on the free variables.
    """
    family = tuple(family)
    polys = (base,) + family
    if q is None:
        q = max(1, max(p.degree for p in polys))
    layout = GramLayout(q=q, shift=min(_leading_zero_order(polys), q))
    y = layout.nodes
    base_values = poly_eval(layout.reduce(base), y) * np.ones(y.size)
    family_values = np.zeros((y.size, len(family)))
    for i, f in enumerate(family):
        family_values[:, i] = poly_eval(layout.reduce(f), y)
    return _program(layout, base_values, family_values, objective, lower, upper, extra_rows, labels)


# ---------------------------------------------------------------------------
# Rate maximization


@dataclass(frozen=True)
class GramConstraintSystem:
    """Coefficients of Pi as affine functions of lambda: Pi_l = constant[l] + gradient[l] @ lambda."""

    q: int
    degrees: tuple[int, ...]
    constant: np.ndarray
    gradient: np.ndarray

    @property
    def gram_dim(self) -> int:
        return self.q + 1

    @property
    def target_coefficients(self) -> list[tuple[float, np.ndarray]]:
        """(constant, lambda-gradient) for Pi_0 .. Pi_2q."""
        return [(float(c), g) for c, g in zip(self.constant, self.gradient)]

    def evaluate(self, lam: Sequence[float]) -> np.ndarray:
        return self.constant + self.gradient @ np.asarray(lam, dtype=float)


def _rate_pieces(rho: DegreeDistribution, epsilon, degrees):
    h = constraint_basis(rho, epsilon, degrees)
    q = max(1, max(p.degree for p in h))
    return h, q


def gram_system(rho: DegreeDistribution, epsilon: Union[ChannelParam, float],
                degrees: Sequence[int]) -> GramConstraintSystem:
    degrees = tuple(int(d) for d in degrees)
    h, q = _rate_pieces(rho, as_channel(epsilon).epsilon, degrees)
    constant = pi_transform(DensePolynomial([0.0, 1.0]), q).padded(2 * q + 1)
    gradient = np.column_stack([-pi_transform(p, q).padded(2 * q + 1) for p in h])
    return GramConstraintSystem(q=q, degrees=degrees, constant=constant, gradient=gradient)


def rate_program(rho: DegreeDistribution, epsilon: Union[ChannelParam, float], dv_max: int) -> NonnegProgram:
    if isinstance(dv_max, bool) or int(dv_max) != dv_max or dv_max < 2:
        raise InvalidInput(f"dv_max must be an integer >= 2, got {dv_max!r}")
    ch = as_channel(epsilon)
    if not isinstance(rho, DegreeDistribution):
        rho = DegreeDistribution.parse(rho, kind="check")
    degrees = tuple(range(2, int(dv_max) + 1))
    q = max(1, (int(dv_max) - 1) * (rho.max_nonzero_degree - 1))
    # P(x)/x = 1 - sum_d lambda_d h_d(x)/x; every h_d vanishes at 0
    layout = GramLayout(q=q, shift=1)
    m = len(degrees)
    return _program(
        layout,
        base_values=np.ones(layout.nodes.size),
        family_values=-constraint_values(rho, ch, degrees, layout.nodes),
        objective=[1.0 / d for d in degrees],
        lower=np.zeros(m), upper=np.ones(m),
        extra_rows=[(np.ones(m), 1.0)],
        labels=[f"lambda_{d}" for d in degrees],
    )


def build_rate_sdp(rho: DegreeDistribution, epsilon: Union[ChannelParam, float], dv_max: int) -> SdpProblem:
    """Maximize sum_d lambda_d / d over lambda_2..lambda_dv_max subject to P >= 0 on [0, 1].

    Free variables are the lambdas (boxed in [0, 1]); the last equality is
    sum lambda_d = 1.  See the module docstring for the Gram block layout.
    """
    return rate_program(rho, epsilon, dv_max).problem


def _degrees_from_labels(problem: SdpProblem) -> tuple[int, ...]:
    out = []
    for label in problem.free_labels:
        m = re.fullmatch(r"lambda_(\d+)", label)
        if not m:
            raise InvalidInput(f"not a rate problem: unexpected free variable {label!r}")
        out.append(int(m.group(1)))
    if not out:
        raise InvalidInput("not a rate problem: no lambda variables")
    return tuple(out)


def extract_design(problem: SdpProblem, solution: SdpSolution, rho: DegreeDistribution,
                   epsilon: Union[ChannelParam, float], with_threshold: bool = True) -> DesignResult:
    """Read lambda off a solved rate SDP, clean it up and attach the certificate.

    The certificate is checked against the solver's raw lambda; the cleaned
    lambda (tiny entries zeroed, renormalized) is what verification checks.
    """
    if solution.status != "optimal":
        raise NoDesign(solution.status)
    ch = as_channel(epsilon)
    if not isinstance(rho, DegreeDistribution):
        rho = DegreeDistribution.parse(rho, kind="check")
    degrees = _degrees_from_labels(problem)
    raw = np.asarray(solution.free_values, dtype=float)
    lam = np.where(raw < CLAMP_TOL, 0.0, raw)
    total = float(lam.sum())
    if total <= 0:
        raise NoDesign(solution.status, "solver returned an all-zero lambda")
    drift = abs(total - 1.0)
    if drift > RENORM_DRIFT_TOL:
        raise NoDesign(solution.status, f"renormalization drift {drift:.3g} exceeds {RENORM_DRIFT_TOL}")
    lam = lam / total
    lam_dd = DegreeDistribution({d: float(w) for d, w in zip(degrees, lam) if w > 0}, kind="variable")

    program = rate_program(rho, ch, max(degrees))
    cert = program.certificate(solution)

    threshold = float("nan")
    if with_threshold:
        from .desim import bp_threshold

        threshold = bp_threshold(lam_dd, rho)
    return DesignResult.from_pair(
        lam_dd, rho, ch, threshold=threshold, certificate_ok=cert.accepted,
        solver_status=solution.status, certificate=cert,
        extras={"raw_lambda": {str(d): float(w) for d, w in zip(degrees, raw)},
                "solver_objective": solution.objective_value,
                "iterations": solution.iterations},
    )


def optimize_design(rho, epsilon, dv_max: int, with_threshold: bool = True, **solver_options) -> DesignResult:
    """Build, solve and extract in one call."""
    ch = as_channel(epsilon)
    if not isinstance(rho, DegreeDistribution):
        rho = DegreeDistribution.parse(rho, kind="check")
    problem = build_rate_sdp(rho, ch, dv_max)
    solver_options.setdefault("tol_gap", DESIGN_TOL_GAP)
    solution = sdpcore.solve(problem, **solver_options)
    return extract_design(problem, solution, rho, ch, with_threshold=with_threshold)


# ---------------------------------------------------------------------------
# Pointwise checks


def find_negative_point(p: DensePolynomial, grid_size: int = 100_001) -> Refutation | None:
    """Dense grid search on [0, 1] plus golden-section refinement; None if nothing negative."""
    xs = np.linspace(0.0, 1.0, grid_size)
    vals = poly_eval(p, xs)
    i = int(np.argmin(vals))
    best_x, best_v = float(xs[i]), float(vals[i])
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, grid_size - 1)]
    g = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(80):
        c1, c2 = b - g * (b - a), a + g * (b - a)
        if poly_eval(p, c1) < poly_eval(p, c2):
            b = c2
        else:
            a = c1
    x_ref = 0.5 * (a + b)
    v_ref = float(poly_eval(p, x_ref))
    if v_ref < best_v:
        best_x, best_v = x_ref, v_ref
    if best_v < -1e-12:
        return Refutation(best_x, best_v)
    return None


def check_nonneg_on_01(p: Union[DensePolynomial, Sequence[float]], **solver_options
                       ) -> Union[FeasibilityCertificate, Refutation]:
    """Certify p >= 0 on [0, 1] with a Gram matrix, or return a point where p < 0."""
    if not isinstance(p, DensePolynomial):
        p = DensePolynomial(p)
    if p.degree < 0:
        layout = GramLayout(q=0)
        return FeasibilityCertificate(np.zeros((1, 1)), 0.0, 0.0, layout)
    shift = _leading_zero_order([p])
    if p.degree == shift:
        c = p.coefficient(shift)
        if c < -1e-12:
            return Refutation(1.0, c)
        return FeasibilityCertificate(np.array([[c]]), c, 0.0, GramLayout(q=p.degree, shift=shift))
    program = nonneg_program(p, (), ())
    solution = sdpcore.solve(program.problem, **solver_options)
    if solution.status == "optimal":
        cert = program.certificate(solution)
        if cert.accepted:
            return cert
    witness = find_negative_point(p)
    if witness is not None:
        return witness
    raise CheckFailed(f"no certificate (solver status {solution.status}) and no negative point found")
