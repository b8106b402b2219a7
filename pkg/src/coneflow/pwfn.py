"""Continuous piecewise-polynomial (degree <= 2) functions with parabolic tails.

Every profile handled by this package -- terminal data, interpolation output,
height-function slices -- is a continuous function that agrees with a declared
downward parabola outside a compact interval.  Segments are stored as global
coefficient triples (c0, c1, c2) meaning ``c0 + c1*x + c2*x**2``; with n
breakpoints there are n+1 segments, the outer two being the tails.

All operations are pure; instances are immutable after construction.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field

CONTINUITY_TOL = 1e-12
BREAKPOINT_DEDUP_TOL = 1e-12
# Relative guard below which two quadratics are treated as tangent (no
# crossing breakpoint is emitted for a double root).
DISCRIMINANT_GUARD = 1e-14

STANDARD_TAIL = (0.0, 0.0, -1.0)  # the parabola -x^2


class PwfnError(ValueError):
    pass


class TailMismatchError(PwfnError):
    pass


def poly_eval(coefs, x):
    c0, c1, c2 = coefs
    return c0 + x * (c1 + x * c2)


def shifted_parabola(z: float = 0.0, shift: float = 0.0):
    """Coefficients of -(x - z)^2 + shift."""
    return (shift - z * z, 2.0 * z, -1.0)


@dataclass(frozen=True)
class PiecewisePoly:
    """Continuous piecewise polynomial of degree <= 2 with parabolic tails.

    breakpoints : strictly increasing x_1 < ... < x_n
    segments    : n+1 coefficient triples; segments[0] and segments[-1] must
                  equal the declared tail parabola exactly
    tail        : coefficients of the tail parabola (default -x^2)
    """

    breakpoints: tuple[float, ...]
    segments: tuple[tuple[float, float, float], ...]
    tail: tuple[float, float, float] = STANDARD_TAIL

    def __post_init__(self):
        bps, segs = self.breakpoints, self.segments
        if len(segs) != len(bps) + 1:
            raise PwfnError(
                f"need {len(bps)+1} segments for {len(bps)} breakpoints, got {len(segs)}"
            )
        for a, b in zip(bps, bps[1:]):
            if not a < b:
                raise PwfnError(f"breakpoints not strictly increasing: {a} >= {b}")
        if bps:
            for tail_seg in (segs[0], segs[-1]):
                if tuple(tail_seg) != tuple(self.tail):
                    raise TailMismatchError(
                        f"tail segment {tail_seg} differs from declared tail {self.tail}"
                    )
        scale = max([1.0] + [abs(x) for x in bps])
        for i, x in enumerate(bps):
            left = poly_eval(segs[i], x)
            right = poly_eval(segs[i + 1], x)
            if abs(left - right) > CONTINUITY_TOL * max(1.0, abs(left), scale * scale):
                raise PwfnError(f"discontinuity {left - right!r} at breakpoint {x!r}")

    # -- basic queries ---------------------------------------------------

    @property
    def compact_support_radius(self) -> float:
        if not self.breakpoints:
            return 0.0
        return max(abs(self.breakpoints[0]), abs(self.breakpoints[-1]))

    def segment_index(self, x: float) -> int:
        return bisect.bisect_left(self.breakpoints, x)

    def eval(self, x: float) -> float:
        return poly_eval(self.segments[self.segment_index(x)], x)

    def __call__(self, x: float) -> float:
        return self.eval(x)

    def derivative(self) -> "SlopeField":
        slopes = tuple((c1, 2.0 * c2) for (_, c1, c2) in self.segments)
        return SlopeField(self.breakpoints, slopes)

    def is_standard(self) -> bool:
        return _close_coefs(self.tail, STANDARD_TAIL)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "segments": [list(s) for s in self.segments],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewisePoly":
        bps = tuple(float(x) for x in d["breakpoints"])
        segs = tuple(tuple(float(c) for c in s) for s in d["segments"])
        tail = segs[0] if bps else STANDARD_TAIL
        return cls(bps, segs, tail)

    @classmethod
    def from_json(cls, text: str) -> "PiecewisePoly":
        return cls.from_dict(json.loads(text))

    @classmethod
    def parabola(cls, tail=STANDARD_TAIL) -> "PiecewisePoly":
        return cls((), (tail,), tail)


def _close_coefs(a, b, tol=1e-12):
    return all(abs(x - y) <= tol * max(1.0, abs(x), abs(y)) for x, y in zip(a, b))


def build_pwpoly(breakpoints, segments, tail=STANDARD_TAIL) -> PiecewisePoly:
    """Construct a PiecewisePoly, deduplicating nearly-equal breakpoints."""
    bps, segs = [], []
    for i, x in enumerate(breakpoints):
        if bps and x - bps[-1] <= BREAKPOINT_DEDUP_TOL * max(1.0, abs(x)):
            continue  # drop zero-length segment
        bps.append(x)
        segs.append(segments[i])
    segs.append(segments[len(breakpoints)])
    # drop interior breakpoints where adjacent segments coincide
    out_b, out_s = [], [segs[0]]
    for x, seg in zip(bps, segs[1:]):
        if _close_coefs(out_s[-1], seg, 1e-14):
            continue
        out_b.append(x)
        out_s.append(seg)
    return PiecewisePoly(tuple(out_b), tuple(tuple(s) for s in out_s), tuple(tail))


@dataclass(frozen=True)
class SlopeField:
    """Derivative of a PiecewisePoly: piecewise linear, jumps allowed.

    Segments are (d0, d1) meaning d0 + d1*x.  Jumps at breakpoints are
    reported as (left-limit, right-limit) pairs.
    """

    breakpoints: tuple[float, ...]
    segments: tuple[tuple[float, float], ...]

    def eval(self, x: float, side: str = "+") -> float:
        if side == "+":
            idx = bisect.bisect_right(self.breakpoints, x)
        else:
            idx = bisect.bisect_left(self.breakpoints, x)
        d0, d1 = self.segments[idx]
        return d0 + d1 * x

    def jumps(self) -> list[tuple[float, float, float]]:
        """(x, left_limit, right_limit) at every breakpoint with a jump."""
        out = []
        for i, x in enumerate(self.breakpoints):
            lo = poly_eval((*self.segments[i], 0.0), x)
            hi = poly_eval((*self.segments[i + 1], 0.0), x)
            if lo != hi:
                out.append((x, lo, hi))
        return out

    def integrate(self, anchor_x: float, anchor_value: float,
                  tail=None) -> PiecewisePoly:
        """Antiderivative through (anchor_x, anchor_value).

        Jump discontinuities integrate to kinks; the result is continuous.
        """
        segs = []
        for d0, d1 in self.segments:
            segs.append([0.0, d0, d1 / 2.0])
        # fix constants left-to-right from the anchor segment
        idx = bisect.bisect_left(self.breakpoints, anchor_x)
        segs[idx][0] = anchor_value - poly_eval(segs[idx], anchor_x)
        for i in range(idx, len(self.breakpoints)):
            x = self.breakpoints[i]
            segs[i + 1][0] += poly_eval(segs[i], x) - poly_eval(segs[i + 1], x)
        for i in range(idx - 1, -1, -1):
            x = self.breakpoints[i]
            segs[i][0] += poly_eval(segs[i + 1], x) - poly_eval(segs[i], x)
        if tail is None:
            tail = tuple(segs[0])
        return PiecewisePoly(self.breakpoints, tuple(tuple(s) for s in segs),
                             tuple(tail))


# -- energy ---------------------------------------------------------------


def _poly_sq_integral(c1, c2, a, b):
    # integral of (c1 + 2*c2*x)^2 over [a, b]
    def anti(x):
        return c1 * c1 * x + 2.0 * c1 * c2 * x * x + (4.0 / 3.0) * c2 * c2 * x ** 3

    return anti(b) - anti(a)


def q_bm(phi: PiecewisePoly) -> float:
    """Energy (1/4) * integral of ((phi')^2 - 4x^2), segment-exact.

    Defined only for profiles whose tails equal -x^2; the integrand then has
    compact support and each segment contributes in closed form.
    """
    if not phi.is_standard():
        raise TailMismatchError("energy requires -x^2 tails")
    if not phi.breakpoints:
        return 0.0
    total = 0.0
    xs = phi.breakpoints
    for i in range(len(xs) - 1):
        _, c1, c2 = phi.segments[i + 1]
        a, b = xs[i], xs[i + 1]
        total += _poly_sq_integral(c1, c2, a, b) - (4.0 / 3.0) * (b ** 3 - a ** 3)
    return 0.25 * total


def q_bm_centered(phi: PiecewisePoly) -> float:
    """Independent route: (1/4)*int (phi' + 2x)^2 dx + int (phi + x^2) dx.

    Equals q_bm(phi) identically for -x^2 tails (expand the square and
    integrate the cross term by parts; phi + x^2 is compactly supported).
    """
    if not phi.is_standard():
        raise TailMismatchError("energy requires -x^2 tails")
    if not phi.breakpoints:
        return 0.0
    total = 0.0
    xs = phi.breakpoints
    for i in range(len(xs) - 1):
        c0, c1, c2 = phi.segments[i + 1]
        a, b = xs[i], xs[i + 1]
        total += 0.25 * _poly_sq_integral(c1, c2 + 1.0, a, b)
        # integral of (c0 + c1 x + (c2+1) x^2)
        total += (c0 * (b - a) + c1 * (b * b - a * a) / 2.0
                  + (c2 + 1.0) * (b ** 3 - a ** 3) / 3.0)
    return total


# -- upper envelope -------------------------------------------------------


def _crossings(p, q, a, b):
    """Roots of p - q strictly inside (a, b), exact discriminant arithmetic."""
    d0 = p[0] - q[0]
    d1 = p[1] - q[1]
    d2 = p[2] - q[2]
    scale = max(abs(d0), abs(d1), abs(d2), 1e-300)
    roots = []
    if abs(d2) <= DISCRIMINANT_GUARD * scale:
        if abs(d1) > DISCRIMINANT_GUARD * scale:
            roots.append(-d0 / d1)
    else:
        disc = d1 * d1 - 4.0 * d2 * d0
        guard = DISCRIMINANT_GUARD * (d1 * d1 + 4.0 * abs(d2 * d0))
        if disc > guard:  # tangential touching produces no breakpoint
            s = math.sqrt(disc)
            # numerically stable quadratic roots
            qq = -0.5 * (d1 + math.copysign(s, d1))
            r1, r2 = qq / d2, (d0 / qq if qq != 0.0 else qq)
            roots.extend([r1, r2])
    eps = 1e-12 * max(1.0, abs(a), abs(b))
    return sorted(r for r in roots if a + eps < r < b - eps)


def upper_envelope(f: PiecewisePoly, g: PiecewisePoly) -> PiecewisePoly:
    """Pointwise maximum of two profiles sharing the same tail parabola."""
    if not _close_coefs(f.tail, g.tail):
        raise TailMismatchError("envelope operands must share the tail parabola")
    if not f.breakpoints:
        return g
    if not g.breakpoints:
        return f
    lo = min(f.breakpoints[0], g.breakpoints[0])
    hi = max(f.breakpoints[-1], g.breakpoints[-1])
    knots = sorted(set(f.breakpoints) | set(g.breakpoints))
    # add crossing roots inside every merged interval
    cells = [lo] + [x for x in knots if lo < x < hi] + [hi]
    refined = []
    for a, b in zip(cells, cells[1:]):
        mid = 0.5 * (a + b)
        p = f.segments[f.segment_index(mid)]
        q = g.segments[g.segment_index(mid)]
        refined.append(a)
        refined.extend(_crossings(p, q, a, b))
    refined.append(hi)
    bps, segs = [], [f.tail]
    for a, b in zip(refined, refined[1:]):
        mid = 0.5 * (a + b)
        p = f.segments[f.segment_index(mid)]
        q = g.segments[g.segment_index(mid)]
        win = p if poly_eval(p, mid) >= poly_eval(q, mid) else q
        bps.append(a)
        segs.append(win)
    bps.append(hi)
    segs.append(f.tail)
    return build_pwpoly(bps, segs, f.tail)


# -- interval unions ------------------------------------------------------


@dataclass(frozen=True)
class IntervalUnion:
    """Finitely many disjoint closed intervals, sorted; points allowed."""

    intervals: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        prev_hi = -math.inf
        for a, b in self.intervals:
            if b < a:
                raise PwfnError(f"interval [{a}, {b}] is reversed")
            if a <= prev_hi:
                raise PwfnError("intervals overlap or are unsorted")
            prev_hi = b

    def __len__(self):
        return len(self.intervals)

    def is_empty(self) -> bool:
        return not self.intervals

    def contains(self, x: float) -> bool:
        i = bisect.bisect_right([a for a, _ in self.intervals], x)
        return i > 0 and x <= self.intervals[i - 1][1]

    def bounded_gaps(self) -> list[tuple[float, float]]:
        return [(self.intervals[i][1], self.intervals[i + 1][0])
                for i in range(len(self.intervals) - 1)]

    @property
    def lo(self) -> float:
        return self.intervals[0][0]

    @property
    def hi(self) -> float:
        return self.intervals[-1][1]

    @classmethod
    def from_pairs(cls, pairs) -> "IntervalUnion":
        return cls(tuple((float(a), float(b)) for a, b in pairs))

    @classmethod
    def points(cls, xs) -> "IntervalUnion":
        return cls(tuple((float(x), float(x)) for x in sorted(xs)))

    def to_pairs(self) -> list[list[float]]:
        return [[a, b] for a, b in self.intervals]
