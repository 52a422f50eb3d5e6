"""Edge-perspective degree distributions and rate bookkeeping for BEC ensembles."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Any, Iterator, Mapping, Union

import numpy as np

if TYPE_CHECKING:
    from .polyops import DensePolynomial
    from .sosrep import FeasibilityCertificate

NORMALIZATION_TOL = 1e-12
KINDS = ("variable", "check")


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class InvalidDistribution(InvalidInput):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate(coefficients: Mapping[Any, Any], max_degree: int | None = None) -> ValidationReport:
    """Check a candidate degree -> fraction map against the distribution invariants.

    Never raises; every violation is listed with the offending degree.
    """
    violations: list[str] = []
    if isinstance(coefficients, DegreeDistribution):
        max_degree = coefficients.max_degree if max_degree is None else max_degree
        coefficients = dict(coefficients.items())
    if not isinstance(coefficients, Mapping) or not coefficients:
        return ValidationReport(("distribution must be a non-empty degree -> fraction map",))
    total = 0.0
    clean: dict[int, float] = {}
    for key, value in coefficients.items():
        try:
            d = int(key)
            if str(key).strip() != str(d) and not isinstance(key, (int, np.integer)):
                raise ValueError
        except (TypeError, ValueError):
            violations.append(f"degree {key!r} is not an integer")
            continue
        try:
            w = float(value)
        except (TypeError, ValueError):
            violations.append(f"fraction at degree {d} is not a number: {value!r}")
            continue
        if not math.isfinite(w):
            violations.append(f"fraction at degree {d} is not finite")
            continue
        if d < 2:
            violations.append(f"degree {d} < 2")
        if max_degree is not None and d > max_degree:
            violations.append(f"degree {d} exceeds max_degree {max_degree}")
        if w < 0:
            violations.append(f"fraction < 0 at degree {d} ({w:g})")
        if w > 1:
            violations.append(f"fraction > 1 at degree {d} ({w:g})")
        clean[d] = clean.get(d, 0.0) + w
        total += w
    if clean and abs(total - 1.0) > NORMALIZATION_TOL:
        violations.append(f"sum = {total:.12g} ≠ 1")
    return ValidationReport(tuple(violations))


@dataclass(frozen=True)
class DegreeDistribution:
    """lambda or rho as a map degree -> edge fraction.

    The induced polynomial is sum_d w_d * x^(d-1).  Construction validates;
    zero-weight degrees may be stored and do not affect any quantity.
    """

    coefficients: Mapping[int, float]
    kind: str = "variable"
    max_degree: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"kind must be one of {KINDS}, got {self.kind!r}")
        max_degree = self.max_degree or None
        report = validate(self.coefficients, max_degree)
        if not report.ok:
            raise InvalidDistribution(list(report.violations))
        coeffs = {int(d): float(w) for d, w in sorted(self.coefficients.items(), key=lambda kv: int(kv[0]))}
        object.__setattr__(self, "coefficients", MappingProxyType(coeffs))
        if not self.max_degree:
            object.__setattr__(self, "max_degree", max(coeffs))

    @classmethod
    def parse(cls, spec: Union[str, Mapping[Any, Any], "DegreeDistribution"],
              kind: str = "variable") -> "DegreeDistribution":
        """Accept a degree map, a JSON object string, or the monomial shorthand ``"x^n"``.

        ``"x^n"`` is the polynomial x**n, i.e. all edges on degree n + 1.
        """
        if isinstance(spec, DegreeDistribution):
            return spec
        if isinstance(spec, str):
            text = spec.strip()
            m = re.fullmatch(r"x\s*(?:\^\s*(\d+))?", text)
            if m:
                n = int(m.group(1)) if m.group(1) is not None else 1
                return cls({n + 1: 1.0}, kind=kind)
            try:
                spec = json.loads(text)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"cannot parse degree distribution {spec!r}") from exc
        if not isinstance(spec, Mapping):
            raise InvalidInput(f"cannot parse degree distribution {spec!r}")
        return cls(dict(spec), kind=kind)

    def items(self) -> Iterator[tuple[int, float]]:
        return iter(self.coefficients.items())

    def __iter__(self):
        return iter(self.coefficients)

    def __getitem__(self, d: int) -> float:
        return self.coefficients.get(d, 0.0)

    @property
    def max_nonzero_degree(self) -> int:
        return max(d for d, w in self.coefficients.items() if w != 0)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(d for d, w in self.coefficients.items() if w != 0)

    def __call__(self, x):
        """Evaluate sum_d w_d x^(d-1); works elementwise on arrays."""
        acc = 0.0
        for d, w in self.coefficients.items():
            if w:
                acc = acc + w * x ** (d - 1)
        return acc

    def derivative_at_one(self) -> float:
        return sum(w * (d - 1) for d, w in self.coefficients.items())

    def inverse_average(self) -> float:
        return inverse_average(self)

    def as_polynomial(self) -> "DensePolynomial":
        from .polyops import DensePolynomial

        c = np.zeros(self.max_nonzero_degree)
        for d, w in self.coefficients.items():
            if w:
                c[d - 1] = w
        return DensePolynomial(c)

    def to_json(self) -> dict[str, float]:
        return {str(d): w for d, w in self.coefficients.items()}

    def dense(self, degrees) -> np.ndarray:
        return np.array([self[d] for d in degrees])


@dataclass(frozen=True)
class ChannelParam:
    epsilon: float

    def __post_init__(self):
        try:
            eps = float(self.epsilon)
        except (TypeError, ValueError) as exc:
            raise InvalidInput(f"epsilon must be a real number, got {self.epsilon!r}") from exc
        if not 0.0 < eps < 1.0:
            raise InvalidInput(f"epsilon must lie in (0, 1), got {eps}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def capacity(self) -> float:
        return 1.0 - self.epsilon


def as_channel(epsilon: Union[ChannelParam, float]) -> ChannelParam:
    return epsilon if isinstance(epsilon, ChannelParam) else ChannelParam(epsilon)


def _checked(dd) -> DegreeDistribution:
    if isinstance(dd, DegreeDistribution):
        return dd
    if isinstance(dd, Mapping):
        return DegreeDistribution(dict(dd))
    raise InvalidInput(f"expected a degree distribution, got {type(dd).__name__}")


def inverse_average(dd: DegreeDistribution) -> float:
    """sum_d w_d / d, the reciprocal of the average edge degree."""
    dd = _checked(dd)
    return math.fsum(w / d for d, w in dd.items())


def code_rate(lam: DegreeDistribution, rho: DegreeDistribution) -> float:
    """Design rate 1 - (sum rho_j/j) / (sum lambda_i/i).  Not clamped."""
    return 1.0 - inverse_average(rho) / inverse_average(lam)


def capacity_and_gap(rate: float, epsilon: Union[ChannelParam, float]) -> tuple[float, float]:
    ch = as_channel(epsilon)
    capacity = 1.0 - ch.epsilon
    return capacity, 1.0 - rate / capacity


def de_margin(lam: DegreeDistribution, rho: DegreeDistribution,
              epsilon: Union[ChannelParam, float], x):
    """x/eps - lambda(1 - rho(1 - x)); nonnegative where the DE condition holds.

    ``x`` may be an array; every entry must lie in [0, eps].
    """
    eps = as_channel(epsilon).epsilon
    lam, rho = _checked(lam), _checked(rho)
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > eps) or np.any(~np.isfinite(xa)):
        raise InvalidInput(f"x must lie in [0, {eps}]")
    out = xa / eps - lam(1.0 - rho(1.0 - xa))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class DesignResult:
    """A designed (lambda, rho, eps) triple with its rate figures.

    ``exactness`` is ``"exact"`` for designs certified on the whole interval
    and ``"grid-feasible only"`` for discretized-LP designs.
    """

    lam: DegreeDistribution
    rho: DegreeDistribution
    epsilon: ChannelParam
    rate: float
    capacity: float
    delta: float
    threshold: float = float("nan")
    certificate_ok: bool = False
    objective: float = float("nan")
    exactness: str = "exact"
    solver_status: str = ""
    certificate: "FeasibilityCertificate | None" = None
    extras: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_pair(cls, lam: DegreeDistribution, rho: DegreeDistribution,
                  epsilon: Union[ChannelParam, float], **kwargs) -> "DesignResult":
        ch = as_channel(epsilon)
        rate = code_rate(lam, rho)
        capacity, delta = capacity_and_gap(rate, ch)
        kwargs.setdefault("objective", inverse_average(lam))
        return cls(lam=lam, rho=rho, epsilon=ch, rate=rate, capacity=capacity, delta=delta, **kwargs)
