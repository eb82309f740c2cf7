"""Geman-McClure surrogate, its influence, the soft inlier score and the mu schedule.

``r`` is always a squared pixel residual and ``mu`` carries the same
units.  The score uses ``r**2`` exactly as written, so its denominator is
fourth order in the pixel error.  Infinite residuals map to surrogate 1
and score 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoFiniteResiduals


def _check(r, mu):
    r = np.asarray(r, dtype=np.float64)
    if np.any(np.isnan(r)) or np.any(r < 0):
        raise DomainError("residual must be >= 0")
    if not (isinstance(mu, (int, float, np.floating)) and mu > 0 and math.isfinite(mu)):
        raise DomainError(f"mu must be a finite positive number, got {mu!r}")
    return r


def _scalar_or_array(out, like):
    return float(out) if np.ndim(like) == 0 else out


def gm_surrogate(r, mu):
    """r / (r + mu)."""
    ra = _check(r, mu)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(ra), 1.0, ra / (ra + mu))
    return _scalar_or_array(out, r)


def gm_influence(r, mu):
    """Derivative of the surrogate in r: mu / (r + mu)**2."""
    ra = _check(r, mu)
    with np.errstate(over="ignore"):
        out = np.where(np.isinf(ra), 0.0, mu / (ra + mu) ** 2)
    return _scalar_or_array(out, r)


def gnc_score(r, mu):
    """Soft inlier score mu**2 / (r**2 + mu**2) in [0, 1]."""
    ra = _check(r, mu)
    with np.errstate(over="ignore"):
        out = np.where(np.isinf(ra), 0.0, mu * mu / (ra * ra + mu * mu))
    return _scalar_or_array(out, r)


def median(values) -> float:
    """Median; an even count averages the two central order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = len(v)
    if n == 0:
        raise NoFiniteResiduals("median of an empty sequence")
    mid = n // 2
    if n % 2:
        return float(v[mid])
    return float((v[mid - 1] + v[mid]) / 2.0)


def initial_mu(residuals, kappa: float, epsilon: float) -> float:
    """kappa * median(finite residuals) + epsilon."""
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if len(r) == 0:
        raise NoFiniteResiduals("no residuals")
    finite = r[np.isfinite(r)]
    if len(finite) == 0:
        raise NoFiniteResiduals("every residual is infinite")
    if kappa <= 0 or epsilon < 0:
        raise DomainError("kappa must be > 0 and epsilon >= 0")
    mu = kappa * median(finite) + epsilon
    if not mu > 0:
        raise DomainError("initial mu is zero; use epsilon > 0 for exact data")
    return mu


def anneal_mu(mu: float, gamma: float, mu_final: float) -> float:
    return max(gamma * mu, mu_final)


def anneal_steps(mu0: float, gamma: float, mu_final: float) -> int:
    """Number of anneal calls needed to reach mu_final from mu0."""
    if mu0 <= mu_final:
        return 0
    return math.ceil(math.log(mu_final / mu0) / math.log(gamma))


@dataclass(frozen=True)
class GncState:
    mu: float
    iteration: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu!r}")
        if self.iteration < 0:
            raise DomainError("iteration must be >= 0")

    def annealed(self, gamma: float, mu_final: float) -> "GncState":
        return GncState(anneal_mu(self.mu, gamma, mu_final), self.iteration + 1)
