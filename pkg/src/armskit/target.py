"""Target densities: generic log-density wrappers and Gaussian mixtures.

Everything downstream works on ``V(x) = log p(x)``; p may be unnormalized.
The only structural requirements are a scalar log-density, an interval
domain (either side may be infinite), and optionally a derivative of V
for tangent-based constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NonFiniteValue, SpecError

__all__ = [
    "TargetDensity",
    "GaussianMixtureSpec",
    "gaussian_mixture",
    "benchmark_mixture",
    "mixture_mean",
]


@dataclass(frozen=True)
class TargetDensity:
    """A target distribution seen through its log density.

    Attributes:
        log_pdf: scalar x -> V(x) = log p(x); may return -inf where p = 0.
        domain: (lo, hi) interval the density lives on; -inf/+inf allowed.
        log_pdf_prime: optional scalar derivative of V.
        vector_log_pdf: optional vectorized evaluator (ndarray -> ndarray)
            used by grid diagnostics; falls back to a python loop.
    """

    log_pdf: Callable[[float], float]
    domain: tuple[float, float] = (-math.inf, math.inf)
    log_pdf_prime: Callable[[float], float] | None = None
    vector_log_pdf: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        lo, hi = self.domain
        if not lo < hi:
            raise SpecError(f"domain must satisfy lo < hi, got ({lo}, {hi})")

    @property
    def has_derivative(self) -> bool:
        return self.log_pdf_prime is not None

    def contains(self, x: float) -> bool:
        return self.domain[0] <= x <= self.domain[1]

    def log_density(self, x: float) -> float:
        """V(x), raising DomainError outside the domain and NonFiniteValue on NaN."""
        if not self.domain[0] <= x <= self.domain[1]:
            raise DomainError(f"x={x!r} outside domain {self.domain}")
        v = self.log_pdf(x)
        if v != v:  # NaN
            raise NonFiniteValue(f"log density is NaN at x={x!r}")
        return v

    def log_density_derivative(self, x: float) -> float:
        if self.log_pdf_prime is None:
            raise SpecError("target has no derivative; tangent construction needs one")
        if not self.domain[0] <= x <= self.domain[1]:
            raise DomainError(f"x={x!r} outside domain {self.domain}")
        d = self.log_pdf_prime(x)
        if d != d:
            raise NonFiniteValue(f"log density derivative is NaN at x={x!r}")
        return d

    def log_density_array(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized V over a grid (no per-point domain check; grids are trusted)."""
        if self.vector_log_pdf is not None:
            return self.vector_log_pdf(np.asarray(xs, dtype=float))
        return np.array([self.log_pdf(float(x)) for x in np.asarray(xs, dtype=float)])


@dataclass(frozen=True)
class GaussianMixtureSpec:
    """Weights, means and variances of a one-dimensional Gaussian mixture."""

    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]

    def __init__(self, weights: Sequence[float], means: Sequence[float], variances: Sequence[float]):
        object.__setattr__(self, "weights", tuple(float(w) for w in weights))
        object.__setattr__(self, "means", tuple(float(m) for m in means))
        object.__setattr__(self, "variances", tuple(float(v) for v in variances))
        self._validate()

    def _validate(self):
        n = len(self.weights)
        if n == 0:
            raise SpecError("mixture needs at least one component")
        if len(self.means) != n or len(self.variances) != n:
            raise SpecError(
                f"component count mismatch: {n} weights, {len(self.means)} means, "
                f"{len(self.variances)} variances"
            )
        for name, vals in (("weights", self.weights), ("means", self.means), ("variances", self.variances)):
            if not all(math.isfinite(v) for v in vals):
                raise SpecError(f"{name} must all be finite, got {vals}")
        if any(w <= 0 for w in self.weights):
            raise SpecError(f"weights must be positive, got {self.weights}")
        if any(v <= 0 for v in self.variances):
            raise SpecError(f"variances must be positive, got {self.variances}")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-12:
            raise SpecError(f"weights must sum to 1 within 1e-12, got {total!r}")


_LOG_2PI = math.log(2.0 * math.pi)


def gaussian_mixture(spec: GaussianMixtureSpec, total_mass: float = 1.0) -> TargetDensity:
    """Build a TargetDensity for a Gaussian mixture integrating to total_mass.

    Samplers only ever see density ratios, so total_mass does not change
    chain behaviour; it sets the scale of anything comparing the target
    and the proposal in absolute terms (the discrepancy diagnostic).

    The scalar path is written for speed (it sits inside sampling loops);
    the vector path serves grid diagnostics. Both evaluate the mixture in
    log space: each component contributes log w - log Z - (x-mu)^2/(2 s2),
    combined with a max-shifted log-sum-exp so far tails stay finite.
    """
    if not (total_mass > 0.0) or math.isinf(total_mass):
        raise SpecError(f"total_mass must be positive and finite, got {total_mass!r}")
    shift = math.log(total_mass)
    # per-component (log(mass*w) - 0.5 log(2 pi s2), mu, 0.5/s2)
    params = tuple(
        (shift + math.log(w) - 0.5 * (_LOG_2PI + math.log(s2)), mu, 0.5 / s2)
        for w, mu, s2 in zip(spec.weights, spec.means, spec.variances)
    )
    inv_vars = tuple(1.0 / s2 for s2 in spec.variances)

    def log_pdf(x: float) -> float:
        best = -math.inf
        terms = []
        for c, mu, h in params:
            d = x - mu
            t = c - d * d * h
            terms.append(t)
            if t > best:
                best = t
        if best == -math.inf:
            return -math.inf
        acc = 0.0
        for t in terms:
            acc += math.exp(t - best)
        return best + math.log(acc)

    def log_pdf_prime(x: float) -> float:
        best = -math.inf
        terms = []
        for c, mu, h in params:
            d = x - mu
            t = c - d * d * h
            terms.append(t)
            if t > best:
                best = t
        num = 0.0
        den = 0.0
        for t, (_, mu, _h), iv in zip(terms, params, inv_vars):
            e = math.exp(t - best)
            den += e
            num += e * (mu - x) * iv
        return num / den

    def vector_log_pdf(xs: np.ndarray) -> np.ndarray:
        terms = np.stack([c - (xs - mu) ** 2 * h for c, mu, h in params])
        best = terms.max(axis=0)
        out = np.full_like(best, -np.inf)
        ok = np.isfinite(best)
        if np.any(ok):
            shifted = np.exp(terms[:, ok] - best[ok])
            out[ok] = best[ok] + np.log(shifted.sum(axis=0))
        return out

    return TargetDensity(
        log_pdf=log_pdf,
        domain=(-math.inf, math.inf),
        log_pdf_prime=log_pdf_prime,
        vector_log_pdf=vector_log_pdf,
    )


def benchmark_mixture() -> GaussianMixtureSpec:
    """The three-component mixture used by the shipped benchmark (mean 1.6)."""
    return GaussianMixtureSpec(weights=(0.3, 0.3, 0.4), means=(-5.0, 1.0, 7.0), variances=(1.0, 1.0, 1.0))


def mixture_mean(spec: GaussianMixtureSpec) -> float:
    return math.fsum(w * m for w, m in zip(spec.weights, spec.means))
