"""Discretized-LP baseline: impose the DE inequality only at finitely many points.

Every grid point x_k in (0, eps] gives one linear constraint

    sum_d lambda_d (1 - rho(1 - x_k))^(d-1) + s_k = x_k / eps,   s_k >= 0,

so the LP is a relaxation of the exact program and its optimum is an upper
bound on the exact rate objective.  The slacks form the diagonal block of an
``SdpProblem`` and the LP goes through the same interior-point code.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Sequence, Union

import numpy as np

from . import sdpcore
from .ensemble import ChannelParam, DegreeDistribution, DesignResult, InvalidInput, as_channel, de_margin
from .sdpcore import SdpProblem
from .sosrep import NoDesign

SCHEMES = ("uniform", "clustered")
GRID_FEASIBLE = "grid-feasible only"
VIOLATION_SAMPLES = 100_000


@dataclass(frozen=True)
class DiscretizationGrid:
    points: tuple[float, ...]
    scheme: str = "uniform"

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise InvalidInput("discretization grid needs at least one point")
        if self.scheme not in SCHEMES:
            raise InvalidInput(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if pts[0] <= 0 or any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidInput("grid points must be positive and strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def build(cls, epsilon: Union[ChannelParam, float], n: int, scheme: str = "uniform") -> "DiscretizationGrid":
        """N points ending at eps: k*eps/N, or eps*(1 - cos(pi*k/N))/2 clustered at both ends."""
        if isinstance(n, bool) or int(n) != n or n < 1:
            raise InvalidInput(f"grid size must be a positive integer, got {n!r}")
        eps = as_channel(epsilon).epsilon
        k = np.arange(1, int(n) + 1)
        if scheme == "uniform":
            pts = k * eps / n
        elif scheme == "clustered":
            pts = eps * (1.0 - np.cos(np.pi * k / n)) / 2.0
        else:
            raise InvalidInput(f"scheme must be one of {SCHEMES}, got {scheme!r}")
        pts[-1] = eps
        return cls(tuple(pts), scheme)

    def validate_for(self, epsilon: float) -> None:
        if self.points[-1] > epsilon * (1 + 1e-12):
            raise InvalidInput(f"grid point {self.points[-1]} lies beyond eps = {epsilon}")


def build_grid_lp(rho: DegreeDistribution, epsilon: Union[ChannelParam, float], dv_max: int,
                  grid: DiscretizationGrid) -> SdpProblem:
    if isinstance(dv_max, bool) or int(dv_max) != dv_max or dv_max < 2:
        raise InvalidInput(f"dv_max must be an integer >= 2, got {dv_max!r}")
    eps = as_channel(epsilon).epsilon
    grid.validate_for(eps)
    degrees = np.arange(2, int(dv_max) + 1)
    x = np.asarray(grid.points)
    g = 1.0 - rho(1.0 - x)
    G = g[:, None] ** (degrees[None, :] - 1)
    n = x.size
    m = degrees.size
    return SdpProblem(
        num_free=m, psd_dim=n,
        free_coeffs=np.vstack([G, np.ones((1, m))]),
        matrix_coeffs=np.vstack([np.eye(n), np.zeros((1, n))]),
        rhs=np.concatenate([x / eps, [1.0]]),
        objective=1.0 / degrees,
        lower=np.zeros(m), upper=np.ones(m),
        diagonal=True,
        free_labels=tuple(f"lambda_{d}" for d in degrees),
    )


def max_violation(lam: DegreeDistribution, rho: DegreeDistribution, epsilon: Union[ChannelParam, float],
                  samples: int = VIOLATION_SAMPLES) -> float:
    """Largest amount by which the DE inequality fails on a uniform sample of [0, eps] (0 if none)."""
    eps = as_channel(epsilon).epsilon
    margins = de_margin(lam, rho, eps, np.linspace(0.0, eps, samples))
    return float(max(0.0, -margins.min()))


def discretized_optimize(rho: DegreeDistribution, epsilon: Union[ChannelParam, float], dv_max: int,
                         grid: DiscretizationGrid, **solver_options) -> DesignResult:
    """Rate-maximizing lambda subject to the DE inequality on ``grid`` only."""
    ch = as_channel(epsilon)
    if not isinstance(rho, DegreeDistribution):
        rho = DegreeDistribution.parse(rho, kind="check")
    problem = build_grid_lp(rho, ch, dv_max, grid)
    sol = sdpcore.solve(problem, **solver_options)
    if sol.status != "optimal":
        raise NoDesign(sol.status)
    raw = np.clip(np.asarray(sol.free_values), 0.0, None)
    lam = raw / raw.sum()
    degrees = range(2, int(dv_max) + 1)
    lam_dd = DegreeDistribution({d: float(w) for d, w in zip(degrees, lam) if w > 0}, kind="variable")
    return DesignResult.from_pair(
        lam_dd, rho, ch, objective=float(sol.objective_value), exactness=GRID_FEASIBLE,
        solver_status=sol.status,
        extras={"grid_size": len(grid.points), "scheme": grid.scheme,
                "max_violation": max_violation(lam_dd, rho, ch)},
    )


@dataclass(frozen=True)
class SweepRow:
    n: int
    objective: float
    rate: float
    max_violation: float
    lam: DegreeDistribution

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(d for d, w in self.lam.items() if w > 1e-7)


def grid_sweep(rho: DegreeDistribution, epsilon: Union[ChannelParam, float], dv_max: int,
               n_values: Sequence[int], scheme: str = "uniform", workers: int = 1) -> list[SweepRow]:
    if not n_values:
        raise InvalidInput("N_values must be non-empty")

    def row(n: int) -> SweepRow:
        d = discretized_optimize(rho, epsilon, dv_max, DiscretizationGrid.build(epsilon, n, scheme))
        return SweepRow(int(n), d.objective, d.rate, d.extras["max_violation"], d.lam)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(row, n_values))
    return [row(n) for n in n_values]


def write_sweep_csv(rows: Sequence[SweepRow], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["N", "objective", "rate", "max_violation", "lambda_json"])
    for r in rows:
        w.writerow([r.n, repr(r.objective), repr(r.rate), repr(r.max_violation),
                    json.dumps(r.lam.to_json(), sort_keys=True)])
