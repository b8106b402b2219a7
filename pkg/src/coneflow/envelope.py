"""Parabola-constrained interpolation and the associated energy values.

Conditioning data is a profile pinned on a finite union of closed intervals.
The unique minimal-energy extension agrees with the profile on the support
and, on each gap, follows the upper boundary of the convex hull of the
parabola's hypograph together with the pinned endpoint values: tangent
segment, parabola arc, tangent segment, degenerating to a single chord when
the chord clears the parabola.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .pwfn import (
    IntervalUnion,
    PiecewisePoly,
    PwfnError,
    build_pwpoly,
    poly_eval,
    q_bm,
    shifted_parabola,
)

FEASIBILITY_TOL = 1e-9
TANGENT_TIE_TOL = 1e-12


class InfeasibleDataError(ValueError):
    pass


@dataclass(frozen=True)
class ConditioningData:
    """Support set, pinned profile, and an optional shifted reference wedge."""

    support: IntervalUnion
    profile: PiecewisePoly
    wedge_origin: float = 0.0
    wedge_shift: float = 0.0


@dataclass(frozen=True)
class EnergyResult:
    """Energy value with an explicit infinity tag (never raw inf arithmetic)."""

    value: float
    minimizer: PiecewisePoly | None = None
    reason: str | None = None  # 'infeasible' | 'discontinuous' when infinite

    @property
    def finite(self) -> bool:
        return self.reason is None

    def __float__(self) -> float:
        return self.value


def tangent_abscissas(x0: float, y0: float) -> tuple[float, float]:
    """Tangency points of the two lines through (x0, y0) touching -x^2.

    The line y = -2*a*x + a^2 passes through (x0, y0) iff
    a^2 - 2*a*x0 - y0 = 0, i.e. a = x0 +- sqrt(x0^2 + y0).
    """
    disc = x0 * x0 + y0
    if disc < -FEASIBILITY_TOL * max(1.0, x0 * x0, abs(y0)):
        raise InfeasibleDataError(f"point ({x0}, {y0}) lies below -x^2")
    root = math.sqrt(max(disc, 0.0))
    return (x0 - root, x0 + root)


def _tangent_line(a: float) -> tuple[float, float, float]:
    return (a * a, -2.0 * a, 0.0)


def _chord(x0, y0, x1, y1) -> tuple[float, float, float]:
    m = (y1 - y0) / (x1 - x0)
    return (y0 - m * x0, m, 0.0)


# A block is (a, b, inner_knots, inner_segments, value_at_a, value_at_b);
# degenerate blocks have a == b and no inner structure.


def _profile_block(profile: PiecewisePoly, a: float, b: float):
    ya, yb = profile.eval(a), profile.eval(b)
    if a == b:
        return (a, b, [], [], ya, ya)
    knots = [x for x in profile.breakpoints if a < x < b]
    segs = []
    cursor = a
    for x in knots + [b]:
        mid = 0.5 * (cursor + x)
        segs.append(profile.segments[profile.segment_index(mid)])
        cursor = x
    return (a, b, knots, segs, ya, yb)


def _check_feasible_on_block(block):
    a, b, knots, segs, ya, yb = block
    if a == b:
        if ya < -a * a - FEASIBILITY_TOL * max(1.0, a * a):
            raise InfeasibleDataError(f"profile value {ya} below -x^2 at {a}")
        return
    pts = [a] + knots + [b]
    for (lo, hi), (c0, c1, c2) in zip(zip(pts, pts[1:]), segs):
        # minimum of profile + x^2 on [lo, hi]
        d0, d1, d2 = c0, c1, c2 + 1.0
        cands = [lo, hi]
        if d2 > 0.0:
            v = -d1 / (2.0 * d2)
            if lo < v < hi:
                cands.append(v)
        m = min(poly_eval((d0, d1, d2), x) for x in cands)
        if m < -FEASIBILITY_TOL * max(1.0, lo * lo, hi * hi):
            raise InfeasibleDataError(
                f"profile dips {m} below -x^2 on [{lo}, {hi}]")


def _assemble(blocks) -> PiecewisePoly:
    """Build the minimizer from constraint blocks, left to right."""
    parabola = (0.0, 0.0, -1.0)
    bps: list[float] = []
    segs: list[tuple[float, float, float]] = [parabola]

    t_left, _ = tangent_abscissas(blocks[0][0], blocks[0][4])
    bps.append(t_left)
    segs.append(_tangent_line(t_left))

    for i, (a, b, knots, inner, ya, yb) in enumerate(blocks):
        if b > a:
            bps.append(a)
            segs.append(inner[0])
            for x, s in zip(knots, inner[1:]):
                bps.append(x)
                segs.append(s)
        if i + 1 < len(blocks):
            na, nya = blocks[i + 1][0], blocks[i + 1][4]
            _, aL = tangent_abscissas(b, yb)
            aR, _ = tangent_abscissas(na, nya)
            if aL < aR - TANGENT_TIE_TOL * max(1.0, abs(aL), abs(aR)):
                bps.append(b)
                segs.append(_tangent_line(aL))
                bps.append(aL)
                segs.append(parabola)
                bps.append(aR)
                segs.append(_tangent_line(aR))
            else:
                # chord clears the parabola (tangency order reversed or tied)
                bps.append(b)
                segs.append(_chord(b, yb, na, nya))
        else:
            _, t_right = tangent_abscissas(b, yb)
            bps.append(b)
            segs.append(_tangent_line(t_right))
            bps.append(t_right)
            segs.append(parabola)
    return build_pwpoly(bps, segs, parabola)


def _standardize(data: ConditioningData):
    """Translate to the frame where the reference wedge is -x^2 at 0."""
    z, g = data.wedge_origin, data.wedge_shift
    if z == 0.0 and g == 0.0:
        return data.support, data.profile
    bps = tuple(x - z for x in data.profile.breakpoints)
    segs = []
    for c0, c1, c2 in data.profile.segments:
        # p(x + z) - g
        segs.append((c0 + c1 * z + c2 * z * z - g, c1 + 2.0 * c2 * z, c2))
    tail0 = segs[0] if bps else (0.0, 0.0, -1.0)
    prof = PiecewisePoly(bps, tuple(segs), tail0)
    sup = IntervalUnion.from_pairs([(a - z, b - z) for a, b in
                                    data.support.intervals])
    return sup, prof


def _unstandardize(phi: PiecewisePoly, z: float, g: float) -> PiecewisePoly:
    if z == 0.0 and g == 0.0:
        return phi
    bps = tuple(x + z for x in phi.breakpoints)
    segs = []
    for c0, c1, c2 in phi.segments:
        segs.append((c0 - c1 * z + c2 * z * z + g, c1 - 2.0 * c2 * z, c2))
    return PiecewisePoly(bps, tuple(segs), shifted_parabola(z, g))


def interpolate(data: ConditioningData) -> PiecewisePoly:
    """The unique minimal-energy extension of the pinned profile."""
    if data.support.is_empty():
        raise InfeasibleDataError("empty support")
    support, profile = _standardize(data)
    blocks = [_profile_block(profile, a, b) for a, b in support.intervals]
    for block in blocks:
        _check_feasible_on_block(block)
    out = _assemble(blocks)
    return _unstandardize(out, data.wedge_origin, data.wedge_shift)


def e_bm(data: ConditioningData) -> EnergyResult:
    """Energy of the minimal extension; tagged infinity when undefined."""
    try:
        support, profile = _standardize(data)
        if support.is_empty():
            raise InfeasibleDataError("empty support")
        blocks = [_profile_block(profile, a, b) for a, b in support.intervals]
        for block in blocks:
            _check_feasible_on_block(block)
        star = _assemble(blocks)
    except InfeasibleDataError:
        return EnergyResult(math.inf, None, "infeasible")
    except PwfnError:
        return EnergyResult(math.inf, None, "discontinuous")
    value = q_bm(star)
    minimizer = _unstandardize(star, data.wedge_origin, data.wedge_shift)
    return EnergyResult(value, minimizer)


def e_bm_finite(points) -> tuple[float, PiecewisePoly]:
    """Finite-dimensional energy through pinned points (y_i, alpha_i).

    The y_i must be strictly increasing and each alpha_i >= -y_i^2; the value
    is continuous in the inputs on that feasible set.
    """
    pts = [(float(y), float(a)) for y, a in points]
    for (y0, _), (y1, _) in zip(pts, pts[1:]):
        if not y0 < y1:
            raise InfeasibleDataError("abscissas must be strictly increasing")
    blocks = []
    for y, alpha in pts:
        if alpha < -y * y - FEASIBILITY_TOL * max(1.0, y * y):
            raise InfeasibleDataError(f"point ({y}, {alpha}) lies below -x^2")
        blocks.append((y, y, [], [], alpha, alpha))
    star = _assemble(blocks)
    return q_bm(star), star


def wedge_profile(alpha: float, beta: float) -> PiecewisePoly:
    """Minimal extension of the single pinned point (alpha, beta - alpha^2)."""
    _, star = e_bm_finite([(alpha, beta - alpha * alpha)])
    return star
