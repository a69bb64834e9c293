"""Piecewise proposal constructions over an ordered set of support points.

A proposal is a piecewise density on the target's domain, built from the
log-density values at the support points. Pieces come in three forms:

* ``ExpLinear(a, b)``: density exp(a + b x) (a straight line in log space),
* ``FlatLog(c)``: density exp(c) (constant),
* ``LinearPdf(p_lo, p_hi)``: density linear in pdf space between the two
  endpoint values (a trapezoid).

Six constructions are provided, selected by :class:`Procedure`:

* ``t``  tangent lines at the support points (needs the derivative),
* ``s``  secant construction: neighbour secants with a min on interiors,
* ``p1`` max/min secant combination (the classic adaptive-MH construction),
* ``p2`` plain secants with the outer secants extended as tails,
* ``p3`` piecewise-constant at the larger endpoint value, secant tails,
* ``p4`` trapezoids in pdf space, secant tails.

Intervals are half-open ``(lo, hi]``; evaluation at a shared endpoint
resolves to the piece that owns it as its upper bound.
"""

from __future__ import annotations

import enum
import math
from bisect import bisect_left
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DivergentArea,
    DomainError,
    DuplicatePoint,
    InsufficientSupport,
    NonFiniteValue,
    SpecError,
    TailSlopeError,
)
from .target import TargetDensity

__all__ = [
    "Procedure",
    "SupportSet",
    "ExpLinear",
    "FlatLog",
    "LinearPdf",
    "Piece",
    "PiecewiseProposal",
    "build",
    "insert",
    "log_eval",
    "log_eval_array",
    "piece_area",
    "sample",
    "total_mass",
    "mass_between",
    "inflate_tails",
    "duplicate_tolerance",
    "proposal_csv_rows",
]

_INF = math.inf

# denominator threshold below which two lines are treated as collinear
_COLLINEAR_EPS = 1e-12


class Procedure(enum.Enum):
    """Which piecewise construction to build from the support points."""

    TANGENT = "t"
    SECANT = "s"
    MAXMIN_SECANT = "p1"
    PLAIN_SECANT = "p2"
    STEPWISE = "p3"
    TRAPEZOID = "p4"

    @property
    def min_support(self) -> int:
        return _MIN_SUPPORT[self]

    @property
    def needs_derivative(self) -> bool:
        return self is Procedure.TANGENT

    @classmethod
    def from_name(cls, name: str) -> "Procedure":
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise SpecError(f"unknown procedure {name!r}; expected one of {valid}") from None


_MIN_SUPPORT = {
    Procedure.TANGENT: 2,
    Procedure.SECANT: 4,
    Procedure.MAXMIN_SECANT: 3,
    Procedure.PLAIN_SECANT: 2,
    Procedure.STEPWISE: 2,
    Procedure.TRAPEZOID: 2,
}


def duplicate_tolerance(s: float) -> float:
    """Minimum spacing kept between a support point at s and any new point."""
    return 1e-9 * max(1.0, abs(s))


@dataclass(frozen=True)
class SupportSet:
    """Sorted support points with cached log-density values."""

    points: tuple[float, ...]
    values: tuple[float, ...]

    @classmethod
    def from_points(cls, xs: Iterable[float], target: TargetDensity) -> "SupportSet":
        pts = sorted(float(x) for x in xs)
        for left, right in zip(pts, pts[1:]):
            if right - left < duplicate_tolerance(left):
                raise DuplicatePoint(right, left)
        vals = tuple(target.log_density(x) for x in pts)
        return cls(points=tuple(pts), values=vals)

    @property
    def size(self) -> int:
        return len(self.points)

    def contains(self, x: float) -> bool:
        """Membership up to the duplicate tolerance."""
        return self.nearest_index(x) is not None

    def nearest_index(self, x: float) -> int | None:
        """Index of a support point within duplicate tolerance of x, else None."""
        pts = self.points
        i = bisect_left(pts, x)
        for j in (i - 1, i):
            if 0 <= j < len(pts) and abs(x - pts[j]) < duplicate_tolerance(pts[j]):
                return j
        return None

    def with_point(self, x: float, v: float) -> tuple["SupportSet", int]:
        """New SupportSet with (x, v) added; returns it and the insertion index."""
        j = self.nearest_index(x)
        if j is not None:
            raise DuplicatePoint(x, self.points[j])
        if v != v:
            raise NonFiniteValue(f"log density is NaN at inserted point {x!r}")
        i = bisect_left(self.points, x)
        return (
            SupportSet(
                points=self.points[:i] + (x,) + self.points[i:],
                values=self.values[:i] + (v,) + self.values[i:],
            ),
            i,
        )


@dataclass(frozen=True, slots=True)
class ExpLinear:
    """Density exp(a + b x)."""

    a: float
    b: float


@dataclass(frozen=True, slots=True)
class FlatLog:
    """Density exp(c); c = -inf marks a zero-density piece."""

    c: float


@dataclass(frozen=True, slots=True)
class LinearPdf:
    """Density linear in pdf space: p_lo at the left edge, p_hi at the right."""

    p_lo: float
    p_hi: float


@dataclass(frozen=True, slots=True)
class Piece:
    lo: float
    hi: float
    form: ExpLinear | FlatLog | LinearPdf
    area: float


def _area(lo: float, hi: float, form) -> float:
    """Exact integral of the piece density over (lo, hi)."""
    if isinstance(form, ExpLinear):
        a, b = form.a, form.b
        if lo == -_INF and hi == _INF:
            raise DivergentArea("doubly unbounded exponential piece")
        if lo == -_INF:
            if b <= 0.0:
                raise DivergentArea(f"left tail needs positive slope, got {b}")
            return math.exp(a + b * hi) / b
        if hi == _INF:
            if b >= 0.0:
                raise DivergentArea(f"right tail needs negative slope, got {b}")
            return math.exp(a + b * lo) / -b
        if b == 0.0:
            return math.exp(a) * (hi - lo)
        # factored form: exp(larger endpoint exponent) * (1 - exp(-|b| dx)) / |b|
        # is exact for any slope, including |b| (hi-lo) far below 1e-8
        z_lo = a + b * lo
        z_hi = a + b * hi
        big, small = (z_hi, z_lo) if b > 0.0 else (z_lo, z_hi)
        try:
            return math.exp(big) * -math.expm1(small - big) / abs(b)
        except OverflowError:
            raise NonFiniteValue(f"piece area overflows: exp({big})") from None
    if isinstance(form, FlatLog):
        if form.c == -_INF:
            return 0.0
        if lo == -_INF or hi == _INF:
            raise DivergentArea("unbounded constant piece")
        return math.exp(form.c) * (hi - lo)
    if isinstance(form, LinearPdf):
        if lo == -_INF or hi == _INF:
            raise DivergentArea("unbounded trapezoid piece")
        return 0.5 * (form.p_lo + form.p_hi) * (hi - lo)
    raise SpecError(f"unknown piece form {form!r}")


def piece_area(piece: Piece) -> float:
    """Area of a piece recomputed from its form (the cached field should agree)."""
    return _area(piece.lo, piece.hi, piece.form)


def _mk(lo: float, hi: float, form) -> Piece:
    return Piece(lo=lo, hi=hi, form=form, area=_area(lo, hi, form))


_ZERO = FlatLog(-_INF)


# ---------------------------------------------------------------------------
# line helpers: a line is an (a, b) pair for x -> a + b x, or None when one
# of its defining log values is -inf (a zero-density degenerate)

def _secant(pts: Sequence[float], vals: Sequence[float], i: int, j: int):
    vi, vj = vals[i], vals[j]
    if vi == -_INF or vj == -_INF:
        return None
    b = (vj - vi) / (pts[j] - pts[i])
    return (vi - b * pts[i], b)


def _combine_line(segs: list[tuple[float, float, float, float]], line, want_max: bool):
    """min or max of a segment list with a single line, splitting at crossings."""
    ga, gb = line
    out = []
    for lo, hi, a, b in segs:
        db = b - gb
        if abs(db) < _COLLINEAR_EPS:
            # collinear: either line is acceptable; keep the incumbent
            out.append((lo, hi, a, b))
            continue
        x = (ga - a) / db
        if lo < x < hi:
            # the difference seg - line grows with slope db, so the incumbent
            # wins right of the crossing exactly when db > 0; deciding by
            # slope stays correct even when the crossing sits within float
            # noise of a segment edge (adjacent secants share an endpoint)
            seg_on_right = (db > 0.0) == want_max
            if seg_on_right:
                out.append((lo, x, ga, gb))
                out.append((x, hi, a, b))
            else:
                out.append((lo, x, a, b))
                out.append((x, hi, ga, gb))
        else:
            mid = 0.5 * (lo + hi)
            if (a + b * mid > ga + gb * mid) == want_max:
                out.append((lo, hi, a, b))
            else:
                out.append((lo, hi, ga, gb))
    return out


def _segments_to_pieces(segs) -> tuple[Piece, ...]:
    return tuple(_mk(lo, hi, ExpLinear(a, b)) for lo, hi, a, b in segs)


def _min_of_lines_pieces(lines, lo: float, hi: float) -> tuple[Piece, ...]:
    """Pieces for min over the given lines on (lo, hi); Nones drop out."""
    live = [ln for ln in lines if ln is not None]
    if not live:
        return (_mk(lo, hi, _ZERO),)
    segs = [(lo, hi, live[0][0], live[0][1])]
    for ln in live[1:]:
        segs = _combine_line(segs, ln, want_max=False)
    return _segments_to_pieces(segs)


def _maxmin_pieces(own, neighbours, lo: float, hi: float) -> tuple[Piece, ...]:
    """Pieces for max(own, min(neighbours)) on (lo, hi); Nones drop out."""
    live = [ln for ln in neighbours if ln is not None]
    if not live:
        inner = None
    else:
        segs = [(lo, hi, live[0][0], live[0][1])]
        for ln in live[1:]:
            segs = _combine_line(segs, ln, want_max=False)
        inner = segs
    if own is None:
        if inner is None:
            return (_mk(lo, hi, _ZERO),)
        return _segments_to_pieces(inner)
    if inner is None:
        return (_mk(lo, hi, ExpLinear(own[0], own[1])),)
    return _segments_to_pieces(_combine_line(inner, own, want_max=True))


def _tail_piece(side: str, line, lo: float, hi: float) -> Piece:
    """Boundary piece from the given line; validates slope on unbounded sides."""
    if line is None:
        return _mk(lo, hi, _ZERO)
    a, b = line
    if side == "left" and lo == -_INF and b <= 0.0:
        raise TailSlopeError(f"left tail slope must be positive, got {b}")
    if side == "right" and hi == _INF and b >= 0.0:
        raise TailSlopeError(f"right tail slope must be negative, got {b}")
    return _mk(lo, hi, ExpLinear(a, b))


# ---------------------------------------------------------------------------
# per-interval construction
#
# With n support points p_0 < ... < p_{n-1} the domain splits into n+1
# intervals indexed j = 0..n: (domain_lo, p_0], (p_0, p_1], ..., (p_{n-1},
# domain_hi). Each construction below returns the pieces for one interval,
# which is what makes local rebuilds after insertion possible.

def _interval_pieces(
    procedure: Procedure,
    pts: Sequence[float],
    vals: Sequence[float],
    j: int,
    domain: tuple[float, float],
    p3_level_override: float | None = None,
    p3_override_interval: int | None = None,
) -> tuple[Piece, ...]:
    n = len(pts)
    if j == 0:
        lo, hi = domain[0], pts[0]
        if lo == hi:
            return ()
        return (_tail_piece("left", _secant(pts, vals, 0, 1), lo, hi),)
    if j == n:
        lo, hi = pts[n - 1], domain[1]
        if lo == hi:
            return ()
        return (_tail_piece("right", _secant(pts, vals, n - 2, n - 1), lo, hi),)

    lo, hi = pts[j - 1], pts[j]

    if procedure is Procedure.PLAIN_SECANT:
        ln = _secant(pts, vals, j - 1, j)
        return (_mk(lo, hi, ExpLinear(*ln)) if ln else _mk(lo, hi, _ZERO),)

    if procedure is Procedure.STEPWISE:
        if j == p3_override_interval and p3_level_override is not None:
            return (_mk(lo, hi, FlatLog(p3_level_override)),)
        return (_mk(lo, hi, FlatLog(max(vals[j - 1], vals[j]))),)

    if procedure is Procedure.TRAPEZOID:
        v_l, v_r = vals[j - 1], vals[j]
        if v_l == -_INF and v_r == -_INF:
            return (_mk(lo, hi, _ZERO),)
        p_l = math.exp(v_l) if v_l > -_INF else 0.0
        p_r = math.exp(v_r) if v_r > -_INF else 0.0
        if p_l == 0.0 and p_r == 0.0:
            raise NonFiniteValue(
                f"trapezoid endpoints underflowed to zero on ({lo}, {hi}); "
                "log values are finite but too small to exponentiate"
            )
        return (_mk(lo, hi, LinearPdf(p_l, p_r)),)

    if procedure is Procedure.SECANT:
        # interiors take the lower of the two neighbouring secants; the
        # second and second-to-last intervals only have one neighbour
        if j == 1:
            ln = _secant(pts, vals, 1, 2)
            return (_mk(lo, hi, ExpLinear(*ln)) if ln else _mk(lo, hi, _ZERO),)
        if j == n - 1:
            ln = _secant(pts, vals, n - 3, n - 2)
            return (_mk(lo, hi, ExpLinear(*ln)) if ln else _mk(lo, hi, _ZERO),)
        return _min_of_lines_pieces(
            [_secant(pts, vals, j - 2, j - 1), _secant(pts, vals, j, j + 1)], lo, hi
        )

    if procedure is Procedure.MAXMIN_SECANT:
        own = _secant(pts, vals, j - 1, j)
        if j == 1 and j == n - 1:  # n == 2 never reaches here (min support 3)
            return (_mk(lo, hi, ExpLinear(*own)) if own else _mk(lo, hi, _ZERO),)
        if j == 1:
            return _maxmin_pieces(own, [_secant(pts, vals, 1, 2)], lo, hi)
        if j == n - 1:
            return _maxmin_pieces(own, [_secant(pts, vals, n - 3, n - 2)], lo, hi)
        return _maxmin_pieces(
            own,
            [_secant(pts, vals, j - 2, j - 1), _secant(pts, vals, j, j + 1)],
            lo,
            hi,
        )

    raise SpecError(f"procedure {procedure} has no interval construction")


def _tangent_groups(support: SupportSet, target: TargetDensity) -> tuple[tuple[Piece, ...], ...]:
    """Lower envelope of the tangent lines, as a single piece group."""
    pts, vals = support.points, support.values
    if any(v == -_INF for v in vals):
        raise NonFiniteValue("tangent construction needs positive density at every support point")
    lines = []
    for x, v in zip(pts, vals):
        d = target.log_density_derivative(x)
        lines.append((v - d * x, d))
    # sort by slope descending; for near-equal slopes keep the lower line
    lines.sort(key=lambda ab: (-ab[1], ab[0]))
    hull: list[tuple[float, float]] = []
    starts: list[float] = []
    for a, b in lines:
        if hull and abs(hull[-1][1] - b) < _COLLINEAR_EPS:
            continue  # same slope, incumbent is lower or equal
        while hull:
            pa, pb = hull[-1]
            x = (a - pa) / (pb - b)  # pb > b strictly here
            if x <= starts[-1]:
                hull.pop()
                starts.pop()
            else:
                break
        starts.append(-_INF if not hull else x)
        hull.append((a, b))

    lo, hi = target.domain
    pieces = []
    for i, (a, b) in enumerate(hull):
        seg_lo = max(lo, starts[i])
        seg_hi = min(hi, starts[i + 1]) if i + 1 < len(hull) else hi
        if seg_lo >= seg_hi:
            continue
        side = "left" if not pieces else "inner"
        if i + 1 == len(hull) and seg_hi == _INF and b >= 0.0:
            raise TailSlopeError(f"right tail slope must be negative, got {b}")
        if side == "left" and seg_lo == -_INF and b <= 0.0:
            raise TailSlopeError(f"left tail slope must be positive, got {b}")
        pieces.append(_mk(seg_lo, seg_hi, ExpLinear(a, b)))
    if not pieces:
        raise InsufficientSupport("tangent envelope collapsed to nothing")
    return (tuple(pieces),)


class PiecewiseProposal:
    """An assembled proposal: grouped pieces plus sampling bookkeeping.

    Treated as immutable once constructed; ``insert`` and ``inflate_tails``
    return new instances. ``groups`` holds pieces per support interval
    (a single group for the tangent construction), which is what the local
    rebuild path reuses.
    """

    __slots__ = (
        "support",
        "procedure",
        "generation",
        "domain",
        "groups",
        "pieces",
        "total_mass",
        "_uppers",
        "_cum",
        "_arrays",
    )

    def __init__(
        self,
        support: SupportSet,
        procedure: Procedure,
        generation: int,
        domain: tuple[float, float],
        groups: tuple[tuple[Piece, ...], ...],
    ):
        self.support = support
        self.procedure = procedure
        self.generation = generation
        self.domain = domain
        self.groups = groups
        pieces: list[Piece] = []
        for g in groups:
            pieces.extend(g)
        self.pieces = tuple(pieces)
        uppers = []
        cum = []
        running = 0.0
        for p in pieces:
            running += p.area
            uppers.append(p.hi)
            cum.append(running)
        self.total_mass = running
        if not (running > 0.0) or running == _INF:
            raise NonFiniteValue(f"proposal total mass must be positive and finite, got {running}")
        self._uppers = uppers
        self._cum = cum
        self._arrays = None

    def _eval_arrays(self):
        """Lazy numpy mirrors of the piece table for vectorized evaluation."""
        if self._arrays is None:
            kinds = np.empty(len(self.pieces), dtype=np.int8)
            c0 = np.empty(len(self.pieces))
            c1 = np.empty(len(self.pieces))
            los = np.empty(len(self.pieces))
            his = np.empty(len(self.pieces))
            for i, p in enumerate(self.pieces):
                los[i], his[i] = p.lo, p.hi
                f = p.form
                if isinstance(f, ExpLinear):
                    kinds[i], c0[i], c1[i] = 0, f.a, f.b
                elif isinstance(f, FlatLog):
                    kinds[i], c0[i], c1[i] = 1, f.c, 0.0
                else:
                    kinds[i], c0[i], c1[i] = 2, f.p_lo, f.p_hi
            self._arrays = (np.asarray(self._uppers), kinds, c0, c1, los, his)
        return self._arrays


def build(
    support: SupportSet,
    procedure: Procedure,
    target: TargetDensity,
    *,
    p3_bound: float | None = None,
    p3_mode: float | None = None,
    generation: int = 0,
) -> PiecewiseProposal:
    """Construct a proposal from scratch.

    ``p3_bound``/``p3_mode`` switch on the bounded stepwise variant: the
    interval containing the mode estimate gets the constant ``p3_bound``
    instead of its endpoint maximum (useful when the support does not yet
    bracket the peak). Both default to off.
    """
    n = support.size
    if n < procedure.min_support:
        raise InsufficientSupport(
            f"procedure {procedure.value} needs at least {procedure.min_support} "
            f"support points, got {n}"
        )
    if all(v == -_INF for v in support.values):
        raise NonFiniteValue("target density is zero at every support point")

    if procedure is Procedure.TANGENT:
        groups = _tangent_groups(support, target)
    else:
        override_interval = _p3_interval(support, procedure, p3_bound, p3_mode)
        groups = tuple(
            _interval_pieces(
                procedure,
                support.points,
                support.values,
                j,
                target.domain,
                p3_level_override=p3_bound,
                p3_override_interval=override_interval,
            )
            for j in range(n + 1)
        )
    return PiecewiseProposal(support, procedure, generation, target.domain, groups)


def _p3_interval(support, procedure, p3_bound, p3_mode) -> int | None:
    if procedure is not Procedure.STEPWISE or p3_bound is None or p3_mode is None:
        return None
    # interval j covers (p_{j-1}, p_j]; only interiors can take the override
    j = bisect_left(support.points, p3_mode)
    if 1 <= j <= support.size - 1:
        return j
    return None


def insert(
    support: SupportSet,
    x_new: float,
    target: TargetDensity,
    procedure: Procedure,
    *,
    previous: PiecewiseProposal | None = None,
    p3_bound: float | None = None,
    p3_mode: float | None = None,
) -> PiecewiseProposal:
    """Add a support point and rebuild.

    When ``previous`` is the proposal built from ``support``, only the
    intervals whose defining points changed are reconstructed (plus the
    boundary intervals, whose role depends on position); everything else
    reuses the existing pieces. The tangent construction always rebuilds
    in full since one new line can clip the envelope anywhere.
    """
    v_new = target.log_density(x_new)
    new_support, q = support.with_point(x_new, v_new)
    gen = previous.generation + 1 if previous is not None else 0

    if (
        previous is None
        or previous.procedure is not procedure
        or previous.support is not support
        or procedure is Procedure.TANGENT
    ):
        return build(
            new_support, procedure, target, p3_bound=p3_bound, p3_mode=p3_mode, generation=gen
        )

    n = len(new_support.points)
    override_interval = _p3_interval(new_support, procedure, p3_bound, p3_mode)
    affected = set(range(max(0, q - 3), min(n, q + 4) + 1))
    affected.update((0, 1, 2, max(0, n - 2), max(0, n - 1), n))
    if override_interval is not None:
        affected.add(override_interval)

    groups = []
    for j in range(n + 1):
        if j in affected:
            groups.append(
                _interval_pieces(
                    procedure,
                    new_support.points,
                    new_support.values,
                    j,
                    target.domain,
                    p3_level_override=p3_bound,
                    p3_override_interval=override_interval,
                )
            )
        else:
            groups.append(previous.groups[j if j < q else j - 1])
    return PiecewiseProposal(new_support, procedure, gen, target.domain, tuple(groups))


def total_mass(prop: PiecewiseProposal) -> float:
    return prop.total_mass


def log_eval(prop: PiecewiseProposal, x: float) -> float:
    """log of the proposal density at x (unnormalized), -inf on zero pieces."""
    if not prop.domain[0] <= x <= prop.domain[1]:
        raise DomainError(f"x={x!r} outside domain {prop.domain}")
    i = bisect_left(prop._uppers, x)
    if i == len(prop._uppers):
        i -= 1
    piece = prop.pieces[i]
    f = piece.form
    if type(f) is ExpLinear:
        return f.a + f.b * x
    if type(f) is FlatLog:
        return f.c
    t = (x - piece.lo) / (piece.hi - piece.lo)
    val = f.p_lo + (f.p_hi - f.p_lo) * t
    return math.log(val) if val > 0.0 else -_INF


def log_eval_array(prop: PiecewiseProposal, xs: np.ndarray) -> np.ndarray:
    """Vectorized log_eval for grids (diagnostics, tests)."""
    xs = np.asarray(xs, dtype=float)
    if np.any(xs < prop.domain[0]) or np.any(xs > prop.domain[1]):
        raise DomainError("grid extends outside the proposal domain")
    uppers, kinds, c0, c1, los, his = prop._eval_arrays()
    idx = np.searchsorted(uppers, xs, side="left")
    idx[idx == len(uppers)] = len(uppers) - 1
    out = np.empty_like(xs)
    k = kinds[idx]

    m0 = k == 0
    out[m0] = c0[idx[m0]] + c1[idx[m0]] * xs[m0]
    m1 = k == 1
    out[m1] = c0[idx[m1]]
    m2 = k == 2
    if np.any(m2):
        i2 = idx[m2]
        t = (xs[m2] - los[i2]) / (his[i2] - los[i2])
        val = c0[i2] + (c1[i2] - c0[i2]) * t
        with np.errstate(divide="ignore"):
            out[m2] = np.where(val > 0.0, np.log(np.maximum(val, 1e-320)), -np.inf)
    return out


def sample(prop: PiecewiseProposal, rng) -> tuple[float, float]:
    """Draw one x from the proposal; returns (x, log density at x).

    Consumes uniforms in a fixed order: one to pick the piece, then one
    within the piece (three for trapezoids: two positions and the side
    selector). All randomness flows through ``rng.random()``.
    """
    r = rng.random() * prop.total_mass
    cum = prop._cum
    i = bisect_left(cum, r)
    if i == len(cum):
        i -= 1
    piece = prop.pieces[i]
    lo, hi = piece.lo, piece.hi
    f = piece.form

    if type(f) is ExpLinear:
        b = f.b
        u = rng.random()
        if lo == -_INF:
            x = hi + math.log(1.0 - u) / b
        elif hi == _INF:
            x = lo + math.log(1.0 - u) / b
        elif b == 0.0:
            x = lo + u * (hi - lo)
        else:
            bdx = b * (hi - lo)
            if bdx <= 30.0:
                x = lo + math.log1p(u * math.expm1(bdx)) / b if u > 0.0 else lo
            else:
                # mass piles up at the right edge; anchor there for stability
                x = hi + math.log(u + (1.0 - u) * math.exp(-bdx)) / b if u > 0.0 else lo
        if lo > -_INF:
            x = max(x, lo)
        if hi < _INF:
            x = min(x, hi)
        return x, f.a + f.b * x

    if type(f) is FlatLog:
        x = lo + rng.random() * (hi - lo)
        return x, f.c

    u1 = rng.random()
    u2 = rng.random()
    w = rng.random()
    pick = min(u1, u2) if w * (f.p_lo + f.p_hi) < f.p_lo else max(u1, u2)
    x = lo + pick * (hi - lo)
    val = f.p_lo + (f.p_hi - f.p_lo) * pick
    return x, math.log(val) if val > 0.0 else -_INF


def mass_between(prop: PiecewiseProposal, lo: float, hi: float) -> float:
    """Exact proposal mass on (lo, hi), via the per-form closed integrals."""
    if hi <= lo:
        return 0.0
    acc = 0.0
    for p in prop.pieces:
        a = max(p.lo, lo)
        b = min(p.hi, hi)
        if b <= a:
            continue
        f = p.form
        if isinstance(f, LinearPdf) and (a > p.lo or b < p.hi):
            # clip the trapezoid: endpoint densities at the clipped edges
            width = p.hi - p.lo
            pa = f.p_lo + (f.p_hi - f.p_lo) * (a - p.lo) / width
            pb = f.p_lo + (f.p_hi - f.p_lo) * (b - p.lo) / width
            acc += _area(a, b, LinearPdf(pa, pb))
        else:
            acc += _area(a, b, f)
    return acc


def inflate_tails(prop: PiecewiseProposal, beta: float, alpha_decay: float, t: int) -> PiecewiseProposal:
    """Scale unbounded tail slopes by (1 - beta exp(-alpha_decay t)).

    The tail line pivots on its inner endpoint so the proposal stays
    continuous there; a shallower slope fattens the tail. Bounded sides
    are left alone. Raises TailSlopeError when the factor kills or flips
    the slope sign a proper tail needs.
    """
    factor = 1.0 - beta * math.exp(-alpha_decay * t)
    if factor == 1.0:
        return prop
    groups = list(prop.groups)

    def _inflated(piece: Piece, pivot: float) -> Piece:
        f = piece.form
        if not isinstance(f, ExpLinear):
            return piece
        nb = f.b * factor
        if (f.b > 0.0) != (nb > 0.0):
            raise TailSlopeError(f"inflation factor {factor} breaks tail slope {f.b}")
        na = f.a + (f.b - nb) * pivot
        return _mk(piece.lo, piece.hi, ExpLinear(na, nb))

    first = prop.pieces[0]
    if first.lo == -_INF:
        gi = next(i for i, g in enumerate(groups) if g)
        g = list(groups[gi])
        g[0] = _inflated(g[0], first.hi)
        groups[gi] = tuple(g)
    last = prop.pieces[-1]
    if last.hi == _INF:
        gi = max(i for i, g in enumerate(groups) if g)
        g = list(groups[gi])
        g[-1] = _inflated(g[-1], last.lo)
        groups[gi] = tuple(g)
    return PiecewiseProposal(prop.support, prop.procedure, prop.generation, prop.domain, tuple(groups))


def proposal_csv_rows(prop: PiecewiseProposal) -> list[tuple]:
    """Debug rows (piece_index, lo, hi, form, params, area) for CSV dumps."""
    rows = []
    for i, p in enumerate(prop.pieces):
        f = p.form
        if isinstance(f, ExpLinear):
            name, params = "explinear", f"a={f.a!r};b={f.b!r}"
        elif isinstance(f, FlatLog):
            name, params = "flatlog", f"c={f.c!r}"
        else:
            name, params = "linearpdf", f"p_lo={f.p_lo!r};p_hi={f.p_hi!r}"
        rows.append((i, p.lo, p.hi, name, params, p.area))
    return rows
