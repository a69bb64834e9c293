"""Chain and proposal quality measures used by the benchmark harness."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import envelope
from .envelope import PiecewiseProposal
from .errors import DegenerateChain, GridError, SpecError
from .samplers import SamplerState
from .target import TargetDensity

__all__ = [
    "QuadratureGrid",
    "RunSummary",
    "discrepancy",
    "acceptance_rate",
    "lag1_correlation",
    "summarize",
]

# densities below this fraction of their max are treated as negligible when
# checking that a grid actually covers both distributions
_COVERAGE_RTOL = 1e-12


@dataclass(frozen=True)
class QuadratureGrid:
    """Uniform grid for trapezoid-rule integrals over proposal and target."""

    lo: float = -20.0
    hi: float = 22.0
    n_points: int = 20001

    def __post_init__(self):
        if not self.lo < self.hi:
            raise SpecError(f"grid needs lo < hi, got ({self.lo}, {self.hi})")
        if self.n_points < 2:
            raise SpecError(f"grid needs at least 2 points, got {self.n_points}")

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n_points)


def _grid_log_values(obj, xs: np.ndarray) -> np.ndarray:
    # accepts a PiecewiseProposal or any vectorized log-density callable,
    # which is what lets tests feed exact stand-ins
    if isinstance(obj, PiecewiseProposal):
        return envelope.log_eval_array(obj, xs)
    if callable(obj):
        return np.asarray(obj(xs), dtype=float)
    raise SpecError(f"cannot evaluate {type(obj).__name__} on a grid")


def _check_coverage(name: str, dens: np.ndarray, grid: QuadratureGrid) -> None:
    peak = dens.max()
    if not peak > 0.0:
        raise GridError(f"{name} has no mass on the grid [{grid.lo}, {grid.hi}]")
    tol = _COVERAGE_RTOL * peak
    if dens[0] > tol or dens[-1] > tol:
        raise GridError(
            f"{name} is non-negligible at the grid boundary; widen [{grid.lo}, {grid.hi}]"
        )


def discrepancy(
    prop,
    target: TargetDensity,
    grid: QuadratureGrid | None = None,
    *,
    check_coverage: bool = True,
) -> float:
    """L1 distance between proposal and target densities, by trapezoid rule.

    Both densities are taken as-is (unnormalized); for a normalized target
    a proposal at 2x the target gives a discrepancy of about 1.

    check_coverage=False skips the boundary guard on the proposal and
    computes the integral over the grid as given. A slowly adapting chain
    can legitimately end with tails too shallow for any fixed reporting
    window; callers comparing many runs on one declared grid truncate
    those tails rather than discard the run. The target is always checked.
    """
    grid = grid or QuadratureGrid()
    xs = grid.points()
    pi = np.exp(_grid_log_values(prop, xs))
    p = np.exp(target.log_density_array(xs))
    if check_coverage:
        _check_coverage("proposal", pi, grid)
    _check_coverage("target", p, grid)
    return float(np.trapezoid(np.abs(pi - p), xs))


def acceptance_rate(prop, target: TargetDensity, grid: QuadratureGrid | None = None) -> float:
    """Mass ratio (integral of p) / (integral of pi) on the grid.

    Estimates the RS acceptance probability under a dominating proposal;
    values above 1 simply flag that the proposal dips under the target
    somewhere.
    """
    grid = grid or QuadratureGrid()
    xs = grid.points()
    pi = np.exp(_grid_log_values(prop, xs))
    p = np.exp(target.log_density_array(xs))
    _check_coverage("proposal", pi, grid)
    _check_coverage("target", p, grid)
    return float(np.trapezoid(p, xs) / np.trapezoid(pi, xs))


def lag1_correlation(chain: np.ndarray) -> float:
    """Pearson correlation between consecutive samples."""
    chain = np.asarray(chain, dtype=float)
    if chain.size < 3:
        raise SpecError(f"need at least 3 samples for a lag-1 correlation, got {chain.size}")
    a = chain[:-1]
    b = chain[1:]
    da = a - a.mean()
    db = b - b.mean()
    sa = float(da @ da)
    sb = float(db @ db)
    if sa <= 0.0 or sb <= 0.0:
        raise DegenerateChain("zero variance in the chain; correlation undefined")
    return float((da @ db) / math.sqrt(sa * sb))


@dataclass(frozen=True)
class RunSummary:
    """Per-run record the benchmark aggregates over."""

    est_mean: float
    chain_std: float
    lag1_corr: float | None  # None when the chain was degenerate
    final_support: int
    m0: int
    rs_rejections: int
    second_control_additions: int
    mh_rejections: int
    discrepancy: float


def summarize(
    chain: np.ndarray,
    state: SamplerState,
    target: TargetDensity,
    grid: QuadratureGrid | None = None,
    *,
    check_coverage: bool = True,
) -> RunSummary:
    """Collapse one finished run into its summary record."""
    chain = np.asarray(chain, dtype=float)
    try:
        corr = lag1_correlation(chain)
    except DegenerateChain:
        corr = None
    return RunSummary(
        est_mean=float(chain.mean()),
        chain_std=float(chain.std(ddof=1)) if chain.size > 1 else 0.0,
        lag1_corr=corr,
        final_support=state.support.size,
        m0=state.m0,
        rs_rejections=state.rs_rejections,
        second_control_additions=state.second_control_additions,
        mh_rejections=state.mh_rejections,
        discrepancy=discrepancy(state.proposal, target, grid, check_coverage=check_coverage),
    )
