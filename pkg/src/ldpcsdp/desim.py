"""Density evolution on the BEC: fixed-point iteration, BP threshold, design checks.

The recursion is x_{t+1} = eps * lambda(1 - rho(1 - x_t)) from x_0 = eps.
It is monotone, so the iterates never increase and convergence to zero at
eps implies convergence at every smaller erasure probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .ensemble import (ChannelParam, DegreeDistribution, DesignResult, as_channel, code_rate,
                       de_margin)

EXIT_TOL = 1e-12
STALL_TOL = 1e-15
THRESHOLD_MAX_ITER = 200_000
MARGIN_TOL = 1e-6
THRESHOLD_SLACK = 1e-4
RATE_TOL = 1e-10


@dataclass(frozen=True)
class DeReport:
    trajectory: list[float]
    converged_to_zero: bool
    final_value: float
    iterations_used: int


def _coeff_lists(lam: DegreeDistribution, rho: DegreeDistribution):
    lam_c = [(d - 1, w) for d, w in lam.items() if w]
    rho_c = [(d - 1, w) for d, w in rho.items() if w]
    return lam_c, rho_c


def _de_map(lam_c, rho_c, eps: float):
    def step(x: float) -> float:
        y = 1.0 - x
        g = 1.0 - sum(w * y**k for k, w in rho_c)
        return eps * sum(w * g**k for k, w in lam_c)

    return step


def de_trajectory(lam: DegreeDistribution, rho: DegreeDistribution,
                  epsilon: Union[ChannelParam, float], max_iter: int = 5000,
                  exit_tol: float = EXIT_TOL) -> DeReport:
    """Iterate DE from x_0 = eps until x <= exit_tol, a stall, or max_iter steps."""
    eps = as_channel(epsilon).epsilon
    step = _de_map(*_coeff_lists(lam, rho), eps)
    x = eps
    traj = [x]
    it = 0
    while x > exit_tol and it < max_iter:
        nxt = step(x)
        it += 1
        traj.append(nxt)
        stalled = abs(nxt - x) <= STALL_TOL
        x = nxt
        if stalled:
            break
    return DeReport(trajectory=traj, converged_to_zero=x <= exit_tol, final_value=x, iterations_used=it)


def _linear_bound_ratio(lam_c, rho_prime: float, eps: float, x: float) -> float:
    """Upper bound on f(y)/y valid for every 0 < y <= x.

    1 - rho(1 - y) <= rho'(1) y by concavity, so
    f(y)/y <= eps * sum lambda_d rho'(1)^(d-1) y^(d-2), which grows with y.
    """
    return eps * sum(w * rho_prime**k * x ** (k - 1) for k, w in lam_c)


def converges(lam: DegreeDistribution, rho: DegreeDistribution, epsilon: Union[ChannelParam, float],
              max_iter: int = THRESHOLD_MAX_ITER, exit_tol: float = EXIT_TOL) -> bool:
    """Same verdict as a long DE run, with a sound early exit.

    Once the bound on f(y)/y drops below 1 at the current iterate, the
    remaining orbit is a geometric contraction and reaches exit_tol; the loop
    stops there instead of iterating through the slow linear tail.
    """
    eps = as_channel(epsilon).epsilon
    lam_c, rho_c = _coeff_lists(lam, rho)
    step = _de_map(lam_c, rho_c, eps)
    rho_prime = sum(k * w for k, w in rho_c)
    x = eps
    for it in range(max_iter):
        if x <= exit_tol:
            return True
        if it % 16 == 0 and _linear_bound_ratio(lam_c, rho_prime, eps, x) < 1.0:
            return True
        nxt = step(x)
        if abs(nxt - x) <= STALL_TOL:
            return nxt <= exit_tol
        x = nxt
    return x <= exit_tol


def bp_threshold(lam: DegreeDistribution, rho: DegreeDistribution, tol: float = 1e-5,
                 max_iter: int = THRESHOLD_MAX_ITER) -> float:
    """sup{eps : DE converges to zero}, bisected on (0, 1) to width ``tol``.

    Returns the lower end of the final bracket, so the returned value is a
    point where convergence was observed (or 0 if none was).
    """
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if converges(lam, rho, mid, max_iter=max_iter):
            lo = mid
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class VerificationReport:
    min_margin: float
    argmin_x: float
    threshold: float
    rate: float
    recomputed_rate: float
    epsilon: float
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "min_margin": self.min_margin,
            "argmin_x": self.argmin_x,
            "threshold": self.threshold,
            "rate": self.rate,
            "recomputed_rate": self.recomputed_rate,
            "epsilon": self.epsilon,
            "checks": dict(self.checks),
            "passed": self.passed,
        }


def _rate_from_dense(lam: DegreeDistribution, rho: DegreeDistribution) -> float:
    # independent of ensemble.code_rate: dense vectors instead of fsum over items
    dl = np.arange(2, lam.max_degree + 1)
    dr = np.arange(2, rho.max_degree + 1)
    return 1.0 - float(np.dot(rho.dense(dr), 1.0 / dr)) / float(np.dot(lam.dense(dl), 1.0 / dl))


def verify_design(design: DesignResult, grid_size: int = 100_000, threshold: float | None = None
                  ) -> VerificationReport:
    """Check a design against DE directly: margin on a grid, threshold, rate.

    ``threshold`` may be passed in to skip the bisection when it is already known.
    """
    eps = design.epsilon.epsilon
    xs = np.linspace(0.0, eps, grid_size)
    margins = de_margin(design.lam, design.rho, eps, xs)
    k = int(np.argmin(margins))
    if threshold is None or not math.isfinite(threshold):
        threshold = bp_threshold(design.lam, design.rho)
    recomputed = _rate_from_dense(design.lam, design.rho)
    checks = {
        "margin": bool(margins[k] >= -MARGIN_TOL),
        "threshold": bool(threshold >= eps - THRESHOLD_SLACK),
        "rate": bool(abs(recomputed - design.rate) <= RATE_TOL
                     and abs(code_rate(design.lam, design.rho) - design.rate) <= RATE_TOL),
    }
    return VerificationReport(min_margin=float(margins[k]), argmin_x=float(xs[k]), threshold=float(threshold),
                              rate=float(design.rate), recomputed_rate=recomputed, epsilon=eps, checks=checks)
