"""Dense univariate polynomials and the two constructions used by the design SDP.

``p_coefficients`` builds P(x) = x - lambda(1 - rho(1 - eps*x)), whose
nonnegativity on [0, 1] is the density-evolution condition rescaled to the
unit interval.  ``pi_transform`` maps a polynomial nonnegative on [0, 1] to
one nonnegative on the whole real line, where a Gram-matrix certificate
applies.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .ensemble import ChannelParam, DegreeDistribution, InvalidInput, as_channel

Number = Union[int, float]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(coeffs)
    if nz.size == 0:
        return coeffs[:0]
    return coeffs[: nz[-1] + 1]


class DensePolynomial:
    """Real polynomial stored by ascending coefficients, trailing zeros trimmed.

    The zero polynomial has an empty coefficient array and degree -1.
    Instances are immutable.
    """

    __slots__ = ("_c",)

    def __init__(self, coefficients: Iterable[Number] = ()):
        c = np.array(list(coefficients) if not isinstance(coefficients, np.ndarray) else coefficients,
                     dtype=float).ravel()
        c = _trim(c).copy()
        c.setflags(write=False)
        self._c = c

    @classmethod
    def monomial(cls, power: int, coefficient: float = 1.0) -> "DensePolynomial":
        c = np.zeros(power + 1)
        c[power] = coefficient
        return cls(c)

    @property
    def coefficients(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.size - 1

    def coefficient(self, j: int) -> float:
        return float(self._c[j]) if 0 <= j < self._c.size else 0.0

    def padded(self, length: int) -> np.ndarray:
        """Coefficient vector zero-padded to ``length`` entries."""
        if length < self._c.size:
            raise ValueError(f"cannot pad degree-{self.degree} polynomial to {length} coefficients")
        out = np.zeros(length)
        out[: self._c.size] = self._c
        return out

    def __call__(self, x):
        return poly_eval(self, x)

    def __add__(self, other):
        other = _as_poly(other)
        n = max(self._c.size, other._c.size)
        return DensePolynomial(self.padded(n) + other.padded(n))

    __radd__ = __add__

    def __neg__(self):
        return DensePolynomial(-self._c)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return DensePolynomial(self._c * float(other))
        other = _as_poly(other)
        if self.degree < 0 or other.degree < 0:
            return DensePolynomial()
        return DensePolynomial(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        out = DensePolynomial([1.0])
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other):
        if not isinstance(other, DensePolynomial):
            return NotImplemented
        return self._c.shape == other._c.shape and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(self._c.tobytes())

    def __repr__(self):
        return f"DensePolynomial({self._c.tolist()!r})"

    def __str__(self):
        if self.degree < 0:
            return "0"
        terms = []
        for j, a in enumerate(self._c):
            if a == 0:
                continue
            if j == 0:
                terms.append(f"{a:g}")
            elif j == 1:
                terms.append(f"{a:g}·x")
            else:
                terms.append(f"{a:g}·x^{j}")
        return " + ".join(terms).replace("+ -", "- ")


def _as_poly(value) -> DensePolynomial:
    if isinstance(value, DensePolynomial):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return DensePolynomial([float(value)])
    return DensePolynomial(value)


def poly_eval(p: DensePolynomial, x):
    """Horner evaluation; ``x`` may be a scalar or an array."""
    c = _as_poly(p).coefficients
    if c.size == 0:
        return np.zeros_like(x, dtype=float) if isinstance(x, np.ndarray) else 0.0
    acc = c[-1] * np.ones_like(x, dtype=float) if isinstance(x, np.ndarray) else float(c[-1])
    for a in c[-2::-1]:
        acc = acc * x + a
    return acc


def poly_compose(outer: DensePolynomial, inner: DensePolynomial) -> DensePolynomial:
    """Coefficients of outer(inner(x)), by Horner's scheme over polynomials."""
    outer, inner = _as_poly(outer), _as_poly(inner)
    if outer.degree < 0:
        return DensePolynomial()
    acc = DensePolynomial([outer.coefficients[-1]])
    for a in outer.coefficients[-2::-1]:
        acc = acc * inner + a
    return acc


def _channel_inner(rho: DegreeDistribution, eps: float) -> DensePolynomial:
    """1 - rho(1 - eps*x)."""
    return DensePolynomial([float(c) for c in _exact_inner(rho, eps)])


# The coefficients below alternate in sign and reach ~2**q before cancelling,
# so double-precision convolution loses up to q bits.  Floats are dyadic
# rationals; the products are formed exactly and rounded once at the end.

def _exact_mul(a: list, b: list) -> list:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] += x * y
    return out


def _exact_inner(rho: DegreeDistribution, eps: float) -> list:
    """Coefficients of 1 - rho(1 - eps*x) as exact fractions; the constant is 0 since rho(1) = 1."""
    e = Fraction(eps)
    top = max(d for d, w in rho.items() if w) - 1
    out = [Fraction(0)] * (top + 1)
    for d, w in rho.items():
        if not w:
            continue
        wf = Fraction(w)
        for k in range(1, d):
            out[k] -= wf * math.comb(d - 1, k) * (-e) ** k
    return out


def _rounded(coeffs: list) -> DensePolynomial:
    return DensePolynomial([float(c) for c in coeffs])


def p_coefficients(lam: DegreeDistribution, rho: DegreeDistribution,
                   epsilon: Union[ChannelParam, float]) -> DensePolynomial:
    """P(x) = x - lambda(1 - rho(1 - eps*x)) by composition, exact until the final rounding."""
    eps = as_channel(epsilon).epsilon
    _require(lam, "variable")
    _require(rho, "check")
    inner = _exact_inner(rho, eps)
    acc = [Fraction(0), Fraction(1)]
    power = [Fraction(1)]
    for d in range(2, lam.max_nonzero_degree + 1):
        power = _exact_mul(power, inner)
        w = lam[d]
        if w:
            wf = Fraction(w)
            acc += [Fraction(0)] * (len(power) - len(acc))
            for j, c in enumerate(power):
                acc[j] -= wf * c
    acc[0] = Fraction(0)
    return _rounded(acc)


def constraint_basis(rho: DegreeDistribution, epsilon: Union[ChannelParam, float],
                     degrees: Sequence[int]) -> list[DensePolynomial]:
    """Polynomials h_d(x) = (1 - rho(1 - eps*x))**(d-1), one per variable degree.

    P(x) = x - sum_d lambda_d * h_d(x), so these are the columns of the
    linear map from lambda to the coefficients of P.
    """
    eps = as_channel(epsilon).epsilon
    inner = _exact_inner(rho, eps)
    out, power, have = [], [Fraction(1)], 0
    cache = {}
    for d in sorted(set(int(d) for d in degrees)):
        while have < d - 1:
            power = _exact_mul(power, inner)
            have += 1
        cache[d] = _rounded(power)
    for d in degrees:
        out.append(cache[int(d)])
    return out


def constraint_values(rho: DegreeDistribution, epsilon: Union[ChannelParam, float],
                      degrees: Sequence[int], y) -> np.ndarray:
    """h_d(y) / y for y in (0, 1], evaluated without cancellation.

    With g(y) = 1 - rho(1 - eps*y), g(y)/y = eps * sum_j rho_j sum_{i<j-1} (1 - eps*y)^i
    is a sum of positive terms, and h_d(y)/y = g(y)^(d-2) * g(y)/y.
    """
    eps = as_channel(epsilon).epsilon
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise InvalidInput("constraint_values needs y > 0")
    u = 1.0 - eps * y
    ratio = np.zeros_like(y)
    for d, w in rho.items():
        if w:
            ratio = ratio + w * sum(u**i for i in range(d - 1))
    ratio = eps * ratio
    g = ratio * y
    return np.stack([g ** (d - 2) * ratio for d in degrees], axis=-1)


def phi_cross_check(lam: DegreeDistribution, n: int,
                    epsilon: Union[ChannelParam, float]) -> DensePolynomial:
    """P(x) for rho(x) = x**n from the multinomial expansion, as an oracle.

    With a_k = (-1)**(k+1) * C(n, k) * eps**k the coefficients of
    1 - (1 - eps*x)**n, the coefficient of x**K in (sum_k a_k x**k)**(i-1) is

        phi[K, i-1] = (-1)**(K+i-1) * eps**K * sum prod_l C(n, pi_l)

    over compositions pi of K into i-1 parts, each between 1 and n.  The
    composition sum is enumerated through multisets with multinomial
    multiplicities, never through polynomial products.
    """
    eps = as_channel(epsilon).epsilon
    if isinstance(n, DegreeDistribution):
        support = [d for d, w in n.items() if w != 0]
        if len(support) != 1:
            raise InvalidInput("phi_cross_check needs a single-monomial check distribution")
        n = support[0] - 1
    if int(n) != n or n < 1:
        raise InvalidInput(f"monomial exponent must be a positive integer, got {n!r}")
    n = int(n)
    _require(lam, "variable")
    q = (lam.max_nonzero_degree - 1) * n
    coeffs = [Fraction(0)] * (q + 1)
    coeffs[1] = Fraction(1)
    e = Fraction(eps)
    binom = [math.comb(n, k) for k in range(n + 1)]
    for d, weight in lam.items():
        if weight == 0:
            continue
        parts = d - 1
        sums: dict[int, int] = {}
        for multiset in itertools.combinations_with_replacement(range(1, n + 1), parts):
            counts = Counter(multiset)
            arrangements = math.factorial(parts)
            for m in counts.values():
                arrangements //= math.factorial(m)
            prod = arrangements
            for k, m in counts.items():
                prod *= binom[k] ** m
            K = sum(multiset)
            sums[K] = sums.get(K, 0) + prod
        w = Fraction(weight)
        for K, total in sums.items():
            phi = (-1) ** (K + parts) * e**K * total
            coeffs[K] -= w * phi
    return _rounded(coeffs)


def pi_transform(p: DensePolynomial, q: int | None = None) -> DensePolynomial:
    """Pi(x) = (1 + x^2)^q * P(x^2 / (1 + x^2)), expanded term by term.

    Each p_j contributes p_j * x^(2j) * (1 + x^2)^(q-j).  ``q`` defaults to
    deg(p); any q >= deg(p) describes the same sign pattern.
    """
    p = _as_poly(p)
    if p.degree < 0:
        return DensePolynomial()
    if q is None:
        q = p.degree
    if q < p.degree:
        raise InvalidInput(f"q={q} is below the polynomial degree {p.degree}")
    out = np.zeros(2 * q + 1)
    for j, pj in enumerate(p.coefficients):
        if pj == 0:
            continue
        for r in range(q - j + 1):
            out[2 * (j + r)] += pj * math.comb(q - j, r)
    return DensePolynomial(out)


def pi_transform_matrix(q: int) -> np.ndarray:
    """Matrix T with pi_transform(p, q).coefficients == T @ p (padded to q+1)."""
    T = np.zeros((2 * q + 1, q + 1))
    for j in range(q + 1):
        for r in range(q - j + 1):
            T[2 * (j + r), j] = math.comb(q - j, r)
    return T


def _require(dd, kind: str) -> None:
    if not isinstance(dd, DegreeDistribution):
        raise InvalidInput(f"expected a {kind} DegreeDistribution, got {type(dd).__name__}")
