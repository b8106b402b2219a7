"""Front-tracking evolution of piecewise-linear Burgers velocity fields.

The convention is ``u_t = (1/4) (u^2)_x`` with height ``h_t = (1/4) h_x^2``
and ``u = h_x``.  Characteristics are linear with slope ``-u/2``, so evolving
the complete graph of ``u(s, .)`` to time t is the plane shear
``(x, u) -> (x + (s - t) u / 2, u)`` followed by equal-area vertical cuts at
every overhang (the Maxwell construction).  Evolving backward in time
(t < s) leaves only downward jumps; forward leaves only upward jumps.

All geometry is exact on polylines; cut positions are located by bisection on
the signed-area defect, which each cut preserves to machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pwfn import PiecewisePoly, build_pwpoly

REVERSAL_EPS = 1e-14
CUT_MAX_SWEEPS = 64
EVENT_TIME_TOL = 1e-10
TRACK_T_FLOOR = 1e-4


class CutError(RuntimeError):
    pass


class ContactVelocityError(ValueError):
    pass


class TrackingError(RuntimeError):
    pass


def rh_velocity(v_left: float, v_right: float) -> float:
    """Rankine-Hugoniot shock velocity -(v_left + v_right)/4."""
    if v_left == v_right:
        raise ContactVelocityError(
            "equal limits: velocity is set by characteristics, not by a jump")
    return -(v_left + v_right) / 4.0


def characteristic_velocity(u_val: float) -> float:
    return -u_val / 2.0


def a_wedge(alpha: float, beta: float, t: float, x: float) -> float:
    """Closed-form single-wedge height, self-similar in t."""
    if t <= 0.0:
        raise ValueError("t must be positive")
    y = x / t
    r = math.sqrt(beta) if beta > 0.0 else 0.0
    if y < alpha - r or y > alpha + r:
        val = -y * y
    elif y <= alpha:
        a = alpha - r
        val = -2.0 * a * y + a * a
    else:
        a = alpha + r
        val = -2.0 * a * y + a * a
    return t * val


# -- complete graphs and fronts --------------------------------------------


@dataclass(frozen=True)
class FrontState:
    """Complete graph of u(t, .) as an ordered polyline in the (x, u) plane.

    Outside [vertices[0].x, vertices[-1].x] the field follows the tail law
    u = -2x/t.  Vertical runs share the exact same x coordinate.
    """

    time: float
    vertices: tuple[tuple[float, float], ...]
    cone_radius: float

    def tail_u(self, x: float) -> float:
        return -2.0 * x / self.time

    def u(self, x: float, side: str = "+") -> float:
        import bisect as _bisect

        verts = self.vertices
        if not verts or x < verts[0][0] or x > verts[-1][0]:
            return self.tail_u(x)
        xs = [v[0] for v in verts]
        if side == "+":
            i = _bisect.bisect_right(xs, x)
            if i >= len(verts):
                return verts[-1][1]
        else:
            i = _bisect.bisect_left(xs, x)
            if i == 0:
                return verts[0][1]
        lo, hi = verts[i - 1], verts[i]
        if hi[0] == lo[0]:
            return lo[1] if side == "-" else hi[1]
        w = (x - lo[0]) / (hi[0] - lo[0])
        return lo[1] + w * (hi[1] - lo[1])

    def shocks(self) -> list[tuple[float, float, float]]:
        """(x, v_left, v_right) for every vertical run of the graph."""
        out = []
        verts = self.vertices
        i = 0
        while i < len(verts) - 1:
            j = i
            while j + 1 < len(verts) and verts[j + 1][0] == verts[i][0]:
                j += 1
            if j > i and abs(verts[j][1] - verts[i][1]) > 1e-12:
                out.append((verts[i][0], verts[i][1], verts[j][1]))
            i = max(j, i + 1)
        return out

    def validate(self, direction: str | None = None) -> None:
        verts = self.vertices
        for (x0, _), (x1, _) in zip(verts, verts[1:]):
            if x1 < x0 - REVERSAL_EPS * max(1.0, abs(x0)):
                raise CutError(f"front not x-monotone at {x0} -> {x1}")
        if verts:
            for x, u in (verts[0], verts[-1]):
                if abs(u - self.tail_u(x)) > 1e-9 * max(1.0, abs(u)):
                    raise CutError(f"tail law violated at endpoint x={x}")
        if direction is not None:
            for x, vl, vr in self.shocks():
                if direction == "backward" and vr > vl:
                    raise CutError(f"entropy jump at x={x} in backward front")
                if direction == "forward" and vr < vl:
                    raise CutError(f"non-entropy jump at x={x} in forward front")

    def height_slice(self) -> PiecewisePoly:
        """Integrate u in x, anchored to the tail height at the left edge."""
        t = self.time
        tail = (0.0, 0.0, -1.0 / t)
        if not self.vertices:
            return PiecewisePoly((), (tail,), tail)
        verts = self.vertices
        bps = [verts[0][0]]
        segs = [tail]
        h = -verts[0][0] ** 2 / t
        for (x0, u0), (x1, u1) in zip(verts, verts[1:]):
            if x1 == x0:
                continue  # verticals carry no height increment
            m = (u1 - u0) / (x1 - x0)
            c2 = 0.5 * m
            c1 = u0 - m * x0
            c0 = h - (c1 * x0 + c2 * x0 * x0)
            segs.append((c0, c1, c2))
            bps.append(x1)
            h += u0 * (x1 - x0) + 0.5 * m * (x1 - x0) ** 2
        segs.append(tail)
        return build_pwpoly(bps, segs, tail)


def complete_graph(phi: PiecewisePoly, time: float = 1.0) -> FrontState:
    """Trace the derivative of phi left to right, verticals at slope jumps."""
    expect = (0.0, 0.0, -1.0 / time)
    if any(abs(a - b) > 1e-9 * max(1.0, abs(b)) for a, b in zip(phi.tail, expect)):
        raise ValueError(f"profile tail {phi.tail} is not the time-{time} tail law")
    df = phi.derivative()
    verts: list[tuple[float, float]] = []
    for i, x in enumerate(phi.breakpoints):
        d0, d1 = df.segments[i]
        lo = d0 + d1 * x
        d0, d1 = df.segments[i + 1]
        hi = d0 + d1 * x
        if not verts or verts[-1] != (x, lo):
            verts.append((x, lo))
        if hi != lo:
            verts.append((x, hi))
    radius = phi.compact_support_radius
    return FrontState(time, tuple(verts), radius)


@dataclass(frozen=True)
class ShearedGraph:
    """Polyline obtained by shearing a complete graph; may have overhangs."""

    time: float
    points: tuple[tuple[float, float], ...]
    cone_radius: float


def shear(state: FrontState, t: float) -> ShearedGraph:
    """Move every vertex along its characteristic from state.time to t."""
    k = 0.5 * (state.time - t)
    pts = tuple((x + k * u, u) for x, u in state.vertices)
    return ShearedGraph(t, pts, state.cone_radius)


# -- equal-area cuts --------------------------------------------------------


def _first_reversal(pts) -> int | None:
    for i in range(len(pts) - 1):
        if pts[i + 1][0] < pts[i][0] - REVERSAL_EPS * max(1.0, abs(pts[i][0])):
            return i
    return None


def _area_defect(pts, apex: int, xi: float, rank: int = 1):
    """Signed area between the sub-trace cut off at abscissa xi and the cut.

    Returns (F, sigma1, sigma2) where sigma1 is the first trace point with
    x >= xi on the monotone prefix and sigma2 the rank-th rightward
    re-crossing of xi after the apex.  Replacing the sub-trace by the
    vertical at xi preserves the area under the graph iff F == 0.
    """
    # sigma1 on the x-monotone prefix [0..apex]
    lo_i, hi_i = 0, apex
    if pts[0][0] >= xi:
        m = 0
    else:
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if pts[mid][0] >= xi:
                hi_i = mid
            else:
                lo_i = mid
        m = hi_i
    x0, u0 = pts[m]
    if x0 > xi and m > 0:
        xp, up = pts[m - 1]
        w = (xi - xp) / (x0 - xp)
        s1 = (m - 1, (xi, up + w * (u0 - up)))
    else:
        s1 = (m - 1, (xi, u0))
    # sigma2: rank-th rightward crossing from strictly below xi, after apex
    s2 = None
    seen = 0
    for j in range(apex, len(pts) - 1):
        xa, ua = pts[j]
        xb, ub = pts[j + 1]
        if xa < xi <= xb:
            seen += 1
            if seen == rank:
                w = (xi - xa) / (xb - xa)
                s2 = (j, (xi, ua + w * (ub - ua)))
                break
    if s2 is None:
        return None, s1, None, 0.0
    # integrate (x - xi) du over [sigma1, sigma2]
    chain = [s1[1]] + [pts[k] for k in range(s1[0] + 1, s2[0] + 1)] + [s2[1]]
    f = 0.0
    mass = 0.0
    for (xa, ua), (xb, ub) in zip(chain, chain[1:]):
        f += (0.5 * (xa + xb) - xi) * (ub - ua)
        mass += abs(0.5 * (xa + xb) - xi) * abs(ub - ua)
    return f, s1, s2, mass


def _bisect_root(f, a, b, fa):
    for _ in range(200):
        mid = 0.5 * (a + b)
        if b - a <= 1e-16 * max(1.0, abs(mid)):
            return mid
        fm = f(mid)
        if not math.isfinite(fm):
            return 0.5 * (a + b)
        if fa * fm <= 0.0:
            b = mid
        else:
            a, fa = mid, fm
    return 0.5 * (a + b)


def _resolve_fold(pts: list, apex: int) -> list:
    """Replace the first fold by an equal-area vertical.

    The area defect F is evaluated with the cut's lower endpoint at the
    rank-th re-crossing; within one rank F is only piecewise continuous (it
    jumps where the re-crossing switches branch), so bisection roots are
    accepted only when the defect genuinely vanishes there, and failing
    ranks fall through to deeper re-crossings (shocks swallowing shocks).
    """
    x_apex = pts[apex][0]
    j = apex + 1
    while j < len(pts) and pts[j][0] < x_apex:
        j += 1
    if j >= len(pts) and pts[-1][0] < x_apex:
        raise CutError("overhang reaches the edge of the graph")
    lo_wide = pts[0][0]
    # F restricted to one rank is smooth between vertex abscissas (the
    # crossing pattern is constant there), so scan each such cell separately
    marks = sorted({p[0] for p in pts if lo_wide <= p[0] <= x_apex}
                   | {lo_wide, x_apex})
    cells = [(a, b) for a, b in zip(marks, marks[1:])
             if b - a > 1e-15 * max(1.0, abs(a), abs(b))]

    def try_accept(xi, rank):
        f_val, s1, s2, mass = _area_defect(pts, apex, xi, rank)
        if s2 is None:
            return None
        # floor covers roundoff of (x - xi) at |x| >> fold width
        jump = abs(s1[1][1] - s2[1][1])
        tol_f = 1e-9 * mass + 1e-12 * max(1.0, abs(xi)) * (jump + 1.0)
        if abs(f_val) > tol_f:
            return None  # landed on a discontinuity, not a root
        out = pts[: s1[0] + 1]
        out.append((xi, s1[1][1]))
        out.append((xi, s2[1][1]))
        out.extend(pts[s2[0] + 1:])
        return _clean(out)

    for rank in range(1, 9):
        def f_only(xi, _r=rank):
            val, _, s2, _ = _area_defect(pts, apex, xi, _r)
            return math.inf if s2 is None else val

        for a, b in reversed(cells):  # prefer cuts near the apex
            pad = 1e-15 * max(1.0, abs(a), abs(b))
            if b - a <= 2.0 * pad:
                continue
            sub = [a + pad + (b - a - 2 * pad) * i / 7.0 for i in range(8)]
            vals = [f_only(x) for x in sub]
            for k in range(len(sub) - 1, 0, -1):
                if not (math.isfinite(vals[k - 1]) and math.isfinite(vals[k])):
                    continue
                if vals[k - 1] * vals[k] > 0.0:
                    continue
                xi = _bisect_root(f_only, sub[k - 1], sub[k], vals[k - 1])
                got = try_accept(xi, rank)
                if got is not None:
                    return got
        # a root can sit exactly on a cell boundary (e.g. absorbing an
        # earlier cut at the same abscissa); test the marks directly
        for m in reversed(marks):
            got = try_accept(m, rank)
            if got is not None:
                return got
    raise CutError("no equal-area cut position found for the fold")


def _clean(pts: list) -> list:
    out = []
    for p in pts:
        if out and abs(p[0] - out[-1][0]) <= 1e-15 * max(1.0, abs(p[0])) \
                and abs(p[1] - out[-1][1]) <= 1e-13 * max(1.0, abs(p[1])):
            continue
        out.append(p)
        while len(out) >= 3:
            (x0, u0), (x1, u1), (x2, u2) = out[-3:]
            cross = (x1 - x0) * (u2 - u1) - (u1 - u0) * (x2 - x1)
            scale = (abs(x1 - x0) + abs(x2 - x1)) * (abs(u1 - u0) + abs(u2 - u1))
            if abs(cross) <= 1e-14 * max(scale, 1e-30) and (
                    (x1 - x0) * (x2 - x1) >= 0.0 and (u1 - u0) * (u2 - u1) >= 0.0):
                out[-2:] = [out[-1]]
            else:
                break
    return out


def _extend_tails(pts: list, t: float) -> list:
    # A fold can overhang past the sampled endpoints; the complete graph
    # continues there along the tail law u = -2x/t, so append far-out tail
    # vertices to give every fold a return branch, trimmed again after cuts.
    span = pts[-1][0] - pts[0][0]
    uspan = max(u for _, u in pts) - min(u for _, u in pts)
    delta = span + 0.5 * uspan * max(t, 1.0) + 1.0
    xl = pts[0][0] - delta
    xr = pts[-1][0] + delta
    return [(xl, -2.0 * xl / t)] + pts + [(xr, -2.0 * xr / t)]


def _trim_tails(pts: list, t: float) -> list:
    def on_tail(p):
        return abs(p[1] + 2.0 * p[0] / t) <= 1e-9 * max(1.0, abs(p[1]))

    while len(pts) >= 2 and on_tail(pts[0]) and on_tail(pts[1]):
        pts.pop(0)
    while len(pts) >= 2 and on_tail(pts[-1]) and on_tail(pts[-2]):
        pts.pop()
    if len(pts) == 1:
        pts = [] if on_tail(pts[0]) else pts
    return pts


def cut(sheared: ShearedGraph) -> FrontState:
    """Resolve every overhang by an equal-area vertical cut."""
    pts = _clean(list(sheared.points))
    if pts:
        pts = _extend_tails(pts, sheared.time)
    for _ in range(CUT_MAX_SWEEPS):
        idx = _first_reversal(pts)
        if idx is None:
            pts = _trim_tails(pts, sheared.time)
            return FrontState(sheared.time, tuple(pts), sheared.cone_radius)
        pts = _resolve_fold(pts, idx)
    raise CutError(f"cut did not converge in {CUT_MAX_SWEEPS} sweeps")


# -- evolution ---------------------------------------------------------------


class Evolution:
    """Lazy shear-and-cut evolution of a terminal/initial complete graph.

    Each target time is computed independently from the source graph (valid
    by the semigroup property), so queries are pure and order-independent.
    """

    def __init__(self, source: FrontState, direction: str):
        if direction not in ("backward", "forward"):
            raise ValueError(direction)
        self.source = source
        self.direction = direction
        self._fronts: dict[float, FrontState] = {}
        self._slices: dict[float, PiecewisePoly] = {}

    def front(self, t: float) -> FrontState:
        if t == self.source.time:
            return self.source
        if (self.direction == "backward" and t > self.source.time) or (
                self.direction == "forward" and t < self.source.time):
            raise ValueError(f"time {t} is on the wrong side of the source")
        if t <= 0.0:
            raise ValueError("evolution is confined to positive times")
        got = self._fronts.get(t)
        if got is None:
            got = cut(shear(self.source, t))
            got.validate(self.direction)
            self._fronts[t] = got
        return got

    def slice(self, t: float) -> PiecewisePoly:
        got = self._slices.get(t)
        if got is None:
            got = self.front(t).height_slice()
            self._slices[t] = got
        return got

    def value(self, t: float, x: float) -> float:
        return self.slice(t).eval(x)

    def shocks_at(self, t: float) -> list[tuple[float, float, float]]:
        return self.front(t).shocks()

    def locate_shock(self, t: float, x_pred: float):
        shocks = self.shocks_at(t)
        if not shocks:
            return None
        return min(shocks, key=lambda s: abs(s[0] - x_pred))


@dataclass
class ShockRecord:
    """One tracked discontinuity: sampled path, velocity traces, class."""

    ts: np.ndarray
    xs: np.ndarray
    v_left: np.ndarray
    v_right: np.ndarray
    classification: str
    born_by: str = "terminal"   # terminal | fold | merge | source
    ended_by: str = "floor"     # floor | merge | horizon
    closed_form: dict | None = None
    _evolution: Evolution | None = field(default=None, repr=False)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def position(self, t: float) -> float:
        return float(np.interp(t, self.ts, self.xs))

    def evaluate(self, t: float):
        """(x, v_left, v_right) at time t, from the evolution when available."""
        if self._evolution is not None and self.ts[0] < t < self.ts[-1]:
            hit = self._evolution.locate_shock(t, self.position(t))
            if hit is not None and abs(hit[0] - self.position(t)) < 0.2 * max(
                    1.0, abs(hit[0])):
                return hit
        return (self.position(t),
                float(np.interp(t, self.ts, self.v_left)),
                float(np.interp(t, self.ts, self.v_right)))

    def jump(self, t: float) -> float:
        _, vl, vr = self.evaluate(t)
        return vl - vr

    def rh_residual(self) -> float:
        """Max | dl/dt + (v_l + v_r)/4 | over interior sample panels.

        The first and last panels are endpoints (event pins localized to
        EVENT_TIME_TOL), so they are excluded along with sub-1e-8 panels.
        """
        if len(self.ts) < 4:
            return 0.0
        dt = np.diff(self.ts)
        good = dt > 1e-8
        good[0] = good[-1] = False
        if not good.any():
            return 0.0
        speed = np.diff(self.xs)[good] / dt[good]
        vmid = 0.25 * (self.v_left[:-1] + self.v_left[1:]
                       + self.v_right[:-1] + self.v_right[1:])[good]
        return float(np.max(np.abs(speed + 0.5 * vmid)))


def _classify(v_left: np.ndarray, v_right: np.ndarray) -> str:
    d = v_left - v_right
    if np.all(np.abs(d) <= 1e-10):
        return "contact"
    if np.all(d >= -1e-10):
        return "non_entropy"
    if np.all(d <= 1e-10):
        return "entropy"
    raise TrackingError("jump changed sign along a single record")


def _shock_speed(x, vl, vr):
    if vl == vr:
        return characteristic_velocity(vl)
    return rh_velocity(vl, vr)


class _Track:
    __slots__ = ("samples", "open", "born_by", "ended_by")

    def __init__(self, first, born_by):
        self.samples = [first]
        self.open = True
        self.born_by = born_by
        self.ended_by = "floor"

    @property
    def last(self):
        return self.samples[-1]


def _match_in_order(active, shocks, dt):
    """Match equal-count shock lists by x-order; None when positions drift."""
    if len(active) != len(shocks):
        return None
    pairs = []
    for tr, sh in zip(active, shocks):
        t0, x0, vl0, vr0 = tr.last
        pred = x0 + _shock_speed(x0, vl0, vr0) * dt
        tol = 12.0 * abs(dt) * max(1.0, abs(vl0), abs(vr0)) + 1e-7
        if abs(sh[0] - pred) > tol:
            return None
        pairs.append((tr, sh))
    return pairs


def track_shocks(ev: Evolution, t_lo: float, t_hi: float,
                 extra_times=(), pos_res: float = 5e-3) -> list[ShockRecord]:
    """Follow every discontinuity across [t_lo, t_hi].

    Topology events (births at fold formation, merges) are localized by
    bisection to EVENT_TIME_TOL and both sides of an event share the exact
    same endpoint, so the resulting paths intersect only at endpoints.
    """
    forward = ev.direction == "forward"
    grid = set(float(t) for t in extra_times if t_lo <= t <= t_hi)
    grid.update({t_lo, t_hi})
    for k in range(1, 24):
        grid.add(t_lo + (t_hi - t_lo) * k / 24.0)
    r = (t_hi / t_lo) ** (1.0 / 16.0) if t_lo > 0 else None
    if r and r > 1.0 + 1e-12:
        for k in range(1, 16):
            grid.add(t_lo * r ** k)
    times = sorted(grid, reverse=not forward)

    tracks: list[_Track] = []
    active: list[_Track] = []
    t0 = times[0]
    for sh in ev.shocks_at(t0):
        tr = _Track((t0, *sh), "terminal" if not forward else "source")
        tracks.append(tr)
        active.append(tr)

    def advance(t_prev, t_next, depth=0):
        nonlocal active
        shocks = ev.shocks_at(t_next)
        pairs = _match_in_order(active, shocks, t_next - t_prev)
        if pairs is not None:
            for tr, sh in pairs:
                tr.samples.append((t_next, *sh))
            return
        if abs(t_next - t_prev) > EVENT_TIME_TOL and depth < 80:
            mid = 0.5 * (t_prev + t_next)
            advance(t_prev, mid, depth + 1)
            advance(mid, t_next, depth + 1)
            return
        # event localized at t_event: group tracks by their nearest shock;
        # a shock claimed by several tracks is a merge (parents close at the
        # exact event point, a child opens there), an unclaimed shock is a
        # fresh fold.
        t_event = t_next
        groups: dict[int | None, list[_Track]] = {}
        for tr in active:
            t0_, x0, vl0, vr0 = tr.last
            pred = x0 + _shock_speed(x0, vl0, vr0) * (t_event - t0_)
            lim = 24.0 * abs(t_event - t0_) * max(1.0, abs(vl0), abs(vr0)) + 1e-6
            best, best_d = None, math.inf
            for i, sh in enumerate(shocks):
                d = abs(sh[0] - pred)
                if d < best_d:
                    best, best_d = i, d
            groups.setdefault(best if best_d <= lim else None, []).append(tr)
        new_active = []
        for i, sh in enumerate(shocks):
            owners = groups.get(i, [])
            if len(owners) == 1:
                owners[0].samples.append((t_event, *sh))
                new_active.append(owners[0])
                continue
            for tr in owners:
                tr.samples.append((t_event, sh[0], tr.last[2], tr.last[3]))
                tr.open = False
                tr.ended_by = "merge"
            child = _Track((t_event, *sh), "merge" if owners else "fold")
            tracks.append(child)
            new_active.append(child)
        for tr in groups.get(None, []):
            tr.open = False
            tr.ended_by = "lost"
        active = sorted(new_active, key=lambda s: s.last[1])

    for t_prev, t_next in zip(times, times[1:]):
        advance(t_prev, t_next)
        active = sorted(active, key=lambda s: s.last[1])
    for tr in active:
        tr.ended_by = "horizon" if forward else "floor"

    # densify panels where the path moves a lot
    records = []
    for tr in tracks:
        s = sorted(tr.samples, key=lambda q: q[0])
        out = [s[0]]
        stack = list(zip(s, s[1:]))[::-1]
        budget = 4000
        while stack:
            a, b = stack.pop()
            ta, xa = a[0], a[1]
            tb, xb = b[0], b[1]
            if budget > 0 and abs(xb - xa) > pos_res and tb - ta > 1e-9:
                tm = 0.5 * (ta + tb)
                hit = ev.locate_shock(tm, 0.5 * (xa + xb))
                if hit is not None:
                    budget -= 1
                    mid = (tm, *hit)
                    stack.append((mid, b))
                    stack.append((a, mid))
                    continue
            out.append(b)
        arr = np.array(out, dtype=float)
        ts, keep = np.unique(arr[:, 0], return_index=True)
        arr = arr[keep]
        ts, xs, vl, vr = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
        if ts[-1] - ts[0] <= 5 * EVENT_TIME_TOL:
            continue  # ephemeral track from event localization
        rec = ShockRecord(ts, xs, vl, vr, _classify(vl, vr),
                          born_by=tr.born_by,
                          ended_by=tr.ended_by.replace(":final", ""),
                          _evolution=ev)
        rec.closed_form = fit_shock_form(rec)
        records.append(rec)
    records.sort(key=lambda r: (r.t_start, r.xs[0]))
    return records


def fit_shock_form(rec: ShockRecord, tol: float = 1e-7) -> dict | None:
    """Least-squares fit of the path to l(t) = p1(t) +- sqrt(p2(t)).

    Linearized through l^2 = 2 p1 l - (p1^2 - p2); requires at least
    deg + 2 samples.  Returns polynomial coefficients (highest degree first)
    or None when the residual exceeds tol.
    """
    ts, xs = rec.ts, rec.xs
    if len(ts) < 8:
        return None
    d1, dq = 2, 4
    cols = [2.0 * ts ** k * xs for k in range(d1 + 1)]
    cols += [-(ts ** k) for k in range(dq + 1)]
    a = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(a, xs ** 2, rcond=None)
    p1 = coef[: d1 + 1][::-1]       # highest degree first
    q = coef[d1 + 1:][::-1]
    conv = np.convolve(p1, p1)      # p2 = p1^2 - q
    n = max(len(conv), len(q))
    p2 = np.pad(conv, (n - len(conv), 0)) - np.pad(q, (n - len(q), 0))
    val_p1 = np.polyval(p1, ts)
    rad = np.polyval(p2, ts)
    if np.any(rad < -1e-9 * max(1.0, float(np.max(np.abs(rad))))):
        return None
    root = np.sqrt(np.maximum(rad, 0.0))
    res_plus = float(np.max(np.abs(val_p1 + root - xs)))
    res_minus = float(np.max(np.abs(val_p1 - root - xs)))
    sign, res = ("+", res_plus) if res_plus <= res_minus else ("-", res_minus)
    if res > tol * max(1.0, float(np.max(np.abs(xs)))):
        return None
    return {"p1": [float(c) for c in p1], "p2": [float(c) for c in p2],
            "sign": sign, "residual": res}


@dataclass
class HeightField:
    """Height slices of an evolution at requested times, plus lazy access."""

    evolution: Evolution
    provenance: str  # backward | forward
    times: tuple[float, ...]
    cone_radius: float

    def slice(self, t: float) -> PiecewisePoly:
        return self.evolution.slice(t)

    def value(self, t: float, x: float) -> float:
        return self.evolution.value(t, x)

    @property
    def terminal_slice(self) -> PiecewisePoly:
        return self.evolution.slice(self.evolution.source.time)

    def slices(self) -> dict[float, PiecewisePoly]:
        return {t: self.slice(t) for t in self.times}


def backward_evolve(f_star: PiecewisePoly, times,
                    t_floor: float = TRACK_T_FLOOR,
                    pos_res: float = 5e-3) -> tuple[HeightField, list[ShockRecord]]:
    """Evolve terminal data at time 1 down to the requested times.

    Every jump in the result is downward (no entropy shocks).
    """
    times = tuple(sorted(float(t) for t in times))
    if times and (times[0] <= 0.0 or times[-1] > 1.0):
        raise ValueError("times must lie in (0, 1]")
    ev = Evolution(complete_graph(f_star, 1.0), "backward")
    t_lo = min([t_floor] + list(times))
    records = track_shocks(ev, t_lo, 1.0, extra_times=times, pos_res=pos_res)
    field_ = HeightField(ev, "backward", times, f_star.compact_support_radius)
    for t in times:
        ev.front(t)
    return field_, records


def forward_evolve(phi: PiecewisePoly, start_time: float, times,
                   pos_res: float = 5e-3) -> tuple[HeightField, list[ShockRecord]]:
    """Evolve initial data at time s up to the requested times (entropy side)."""
    times = tuple(sorted(float(t) for t in times))
    if not times:
        raise ValueError("forward evolution needs at least one target time")
    if times[0] <= start_time:
        raise ValueError("times must exceed the start time")
    ev = Evolution(complete_graph(phi, start_time), "forward")
    records = track_shocks(ev, start_time, times[-1], extra_times=times,
                           pos_res=pos_res)
    field_ = HeightField(ev, "forward", times, phi.compact_support_radius)
    for t in times:
        ev.front(t)
    return field_, records


# -- closed-form superpositions ---------------------------------------------


class SelfSimilarField:
    """Height field t * F(1, x/t) for a profile F(1, .) with -x^2 tails."""

    def __init__(self, terminal: PiecewisePoly):
        self.terminal = terminal
        self.provenance = "wedge_max"
        self.cone_radius = terminal.compact_support_radius

    def slice(self, t: float) -> PiecewisePoly:
        if t <= 0.0:
            raise ValueError("t must be positive")
        bps = tuple(x * t for x in self.terminal.breakpoints)
        segs = tuple((c0 * t, c1, c2 / t) for c0, c1, c2 in self.terminal.segments)
        return PiecewisePoly(bps, segs, (0.0, 0.0, -1.0 / t))

    def value(self, t: float, x: float) -> float:
        return t * self.terminal.eval(x / t)


def wedge_superposition(wedges, t_hi: float = 1.0,
                        n_samples: int = 65) -> tuple[SelfSimilarField, list[ShockRecord]]:
    """Exact field and shock rays for a max of single-wedge solutions.

    wedges: iterable of (alpha, beta).  The height is the pointwise max of
    the single-wedge closed forms; every discontinuity is a ray x = x0 * t
    with constant one-sided limits, so records are exact.
    """
    from .envelope import wedge_profile
    from .pwfn import upper_envelope

    profiles = [wedge_profile(a, b) for a, b in wedges]
    top = profiles[0]
    for p in profiles[1:]:
        top = upper_envelope(top, p)
    slope = top.derivative()
    records = []
    for x0, vl, vr in slope.jumps():
        ts = np.linspace(0.0, t_hi, n_samples)
        xs = x0 * ts
        vls = np.full_like(ts, vl)
        vrs = np.full_like(ts, vr)
        if abs(vl - vr) <= 1e-12:
            cls = "contact"
        else:
            cls = "non_entropy" if vl > vr else "entropy"
        rec = ShockRecord(ts, xs, vls, vrs, cls, born_by="source",
                          ended_by="horizon")
        rec.closed_form = {"p1": [x0, 0.0], "p2": [0.0], "sign": "+",
                           "residual": 0.0}
        records.append(rec)
    return SelfSimilarField(top), records
