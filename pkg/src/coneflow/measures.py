"""Path measures and the rate functional.

A measure is a finite list of internally disjoint piecewise-linear paths in
the (t, x) plane, each carrying a nonnegative piecewise-constant density.
The rate of an atom is the exact per-panel sum of (4/3) rho^{3/2} dt; shock
records convert to atoms with density (v_left - v_right)^2 / 16, which makes
the rate of the non-entropy (resp. entropy) part equal, panel by panel, to
the positive (resp. negative) Kruzhkov entropy production.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .burgers import HeightField, ShockRecord
from .pwfn import PiecewisePoly, q_bm

ENDPOINT_SNAP = 1e-12


class DisjointnessError(ValueError):
    pass


class IncomparableError(ValueError):
    pass


def kruzhkov_entropy(a: float) -> float:
    return a * a / 4.0


def kruzhkov_flux(a: float) -> float:
    return a ** 3 / 12.0


@dataclass(frozen=True)
class KruzhkovPair:
    """Entropy/flux values at one velocity; flux' = v*entropy'/..., i.e.
    d(flux)/dv = v^2/4 and d(entropy)/dv = v/2, both closed-form."""

    velocity: float

    @property
    def entropy(self) -> float:
        return kruzhkov_entropy(self.velocity)

    @property
    def flux(self) -> float:
        return kruzhkov_flux(self.velocity)


@dataclass
class Atom:
    """One path with a piecewise-constant density on its panels."""

    ts: np.ndarray
    xs: np.ndarray
    rho: np.ndarray  # len(ts) - 1

    def __post_init__(self):
        self.ts = np.asarray(self.ts, dtype=float)
        self.xs = np.asarray(self.xs, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.ts.ndim != 1 or len(self.ts) < 2:
            raise ValueError("an atom needs at least two time samples")
        if np.any(np.diff(self.ts) <= 0):
            raise ValueError("atom times must be strictly increasing")
        if len(self.xs) != len(self.ts) or len(self.rho) != len(self.ts) - 1:
            raise ValueError("atom arrays have inconsistent lengths")
        if np.any(self.rho < 0):
            raise ValueError("densities must be nonnegative")

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def position(self, t: float) -> float:
        return float(np.interp(t, self.ts, self.xs))

    def rate(self) -> float:
        dt = np.diff(self.ts)
        return float(np.sum((4.0 / 3.0) * self.rho ** 1.5 * dt))

    def norm32(self) -> float:
        dt = np.diff(self.ts)
        return float(np.sum(self.rho ** 1.5 * dt) ** (2.0 / 3.0))

    def dirichlet_length(self) -> float:
        dt = np.diff(self.ts)
        return float(-np.sum(np.diff(self.xs) ** 2 / dt))

    def to_dict(self) -> dict:
        return {"t": self.ts.tolist(), "x": self.xs.tolist(),
                "rho": self.rho.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Atom":
        return cls(np.array(d["t"]), np.array(d["x"]), np.array(d["rho"]))

    @classmethod
    def linear(cls, slope: float, density: float, t0: float = 0.0,
               t1: float = 1.0, offset: float = 0.0) -> "Atom":
        ts = np.array([t0, t1])
        return cls(ts, offset + slope * ts, np.array([density]))


def _orient(p, q, r):
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Exact orientation-predicate test for open-segment intersection."""
    d1 = _orient(q1, q2, p1)
    d2 = _orient(q1, q2, p2)
    d3 = _orient(p1, p2, q1)
    d4 = _orient(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and \
            d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0:
        return True
    return False


def _near(p, q, tol=ENDPOINT_SNAP):
    return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol


def _touch_points(a: Atom, b: Atom):
    """Contact points between two polylines, ignoring shared endpoints."""
    ea = [(a.ts[0], a.xs[0]), (a.ts[-1], a.xs[-1])]
    eb = [(b.ts[0], b.xs[0]), (b.ts[-1], b.xs[-1])]
    hits = []
    for i in range(len(a.ts) - 1):
        p1 = (a.ts[i], a.xs[i])
        p2 = (a.ts[i + 1], a.xs[i + 1])
        for j in range(len(b.ts) - 1):
            q1 = (b.ts[j], b.xs[j])
            q2 = (b.ts[j + 1], b.xs[j + 1])
            if max(p1[0], q1[0]) > min(p2[0], q2[0]) + ENDPOINT_SNAP:
                continue
            if _segments_cross(p1, p2, q1, q2):
                hits.append((p1, p2, q1, q2))
                continue
            # endpoint-on-segment contacts
            for pt in (q1, q2):
                if _on_segment(p1, p2, pt) and not (
                        any(_near(pt, e) for e in ea)
                        and any(_near(pt, e) for e in eb)):
                    hits.append((p1, p2, pt, pt))
    return hits


def _on_segment(p1, p2, q) -> bool:
    if abs(_orient(p1, p2, q)) > ENDPOINT_SNAP * max(
            1.0, abs(p2[0] - p1[0]) + abs(p2[1] - p1[1])):
        return False
    return (min(p1[0], p2[0]) - ENDPOINT_SNAP <= q[0]
            <= max(p1[0], p2[0]) + ENDPOINT_SNAP)


@dataclass
class PathMeasure:
    """Finitely many internally disjoint atoms inside a light cone."""

    atoms: list[Atom] = field(default_factory=list)
    cone_radius: float = 0.0

    def validate(self) -> None:
        for a in self.atoms:
            lim = self.cone_radius * a.ts + ENDPOINT_SNAP + 1e-9
            if np.any(np.abs(a.xs) > lim):
                raise ValueError("atom leaves the light cone")
        for i in range(len(self.atoms)):
            for j in range(i + 1, len(self.atoms)):
                if _touch_points(self.atoms[i], self.atoms[j]):
                    raise DisjointnessError(
                        f"atoms {i} and {j} intersect away from endpoints")

    def rate(self) -> float:
        return sum(a.rate() for a in self.atoms)

    def total_norm(self) -> float:
        return sum(a.norm32() for a in self.atoms)

    def is_zero(self) -> bool:
        return all(np.all(a.rho == 0) for a in self.atoms) or not self.atoms

    def scaled(self, factor: float) -> "PathMeasure":
        if factor < 0:
            raise ValueError("negative scaling")
        return PathMeasure([Atom(a.ts.copy(), a.xs.copy(), a.rho * factor)
                            for a in self.atoms], self.cone_radius)

    def to_dict(self) -> dict:
        return {"atoms": [a.to_dict() for a in self.atoms],
                "cone_radius": self.cone_radius}

    @classmethod
    def from_dict(cls, d: dict) -> "PathMeasure":
        return cls([Atom.from_dict(a) for a in d.get("atoms", [])],
                   float(d.get("cone_radius", 0.0)))


def rate(mu: PathMeasure) -> float:
    """Sum over atoms of the exact per-panel (4/3) rho^{3/2} integral."""
    return mu.rate()


def measure_leq(mu: PathMeasure, nu: PathMeasure) -> bool:
    """Atom-wise domination on shared graphs; nu may carry extra atoms.

    Raises IncomparableError when some atom of mu has no matching path in
    nu (the order is only decidable on a common refinement of supports).
    """
    for a in mu.atoms:
        if np.all(a.rho == 0):
            continue
        matched = False
        for b in nu.atoms:
            if len(a.ts) != len(b.ts):
                continue
            if np.allclose(a.ts, b.ts, atol=ENDPOINT_SNAP) and \
                    np.allclose(a.xs, b.xs, atol=ENDPOINT_SNAP):
                matched = True
                if np.any(a.rho > b.rho + 1e-15):
                    return False
                break
        if not matched:
            raise IncomparableError("supports do not share a common refinement")
    return True


# -- shock-derived measures -------------------------------------------------


def _record_panels(rec: ShockRecord):
    """Panel midpoint jump values (v_left - v_right), held constant."""
    vl_mid = 0.5 * (rec.v_left[:-1] + rec.v_left[1:])
    vr_mid = 0.5 * (rec.v_right[:-1] + rec.v_right[1:])
    return vl_mid - vr_mid


def _extend_to_origin(ts, xs, rho):
    """Prepend the time-zero sample by linear extrapolation of the path."""
    if ts[0] <= 0.0:
        return ts, xs, rho
    slope = (xs[1] - xs[0]) / (ts[1] - ts[0]) if len(ts) > 1 else 0.0
    x0 = xs[0] - ts[0] * slope
    return (np.concatenate([[0.0], ts]), np.concatenate([[x0], xs]),
            np.concatenate([[rho[0]], rho]))


def measure_from_shocks(records, cone_radius: float,
                        extend_floor: bool = True) -> PathMeasure:
    """One atom per shock record, density (v_left - v_right)^2 / 16.

    Contact records contribute nothing.  Records that were tracked down to
    the evaluation floor are extended to t = 0 by linear extrapolation with
    their last density held, so the measure covers the full time interval.
    """
    atoms = []
    for rec in records:
        if rec.classification == "contact":
            continue
        jumps = _record_panels(rec)
        rho = jumps * jumps / 16.0
        ts, xs = rec.ts.copy(), rec.xs.copy()
        if extend_floor and rec.ended_by == "floor":
            ts, xs, rho = _extend_to_origin(ts, xs, rho)
        atoms.append(Atom(ts, xs, rho))
    mu = PathMeasure(atoms, cone_radius)
    mu.validate()
    return mu


def split_measure(records, cone_radius: float,
                  extend_floor: bool = True) -> tuple[PathMeasure, PathMeasure]:
    """(non-entropy part, entropy part), routed by record classification."""
    non = [r for r in records if r.classification == "non_entropy"]
    ent = [r for r in records if r.classification == "entropy"]
    return (measure_from_shocks(non, cone_radius, extend_floor),
            measure_from_shocks(ent, cone_radius, extend_floor))


# -- entropy production -----------------------------------------------------


def _adaptive_simpson(f, a, b, tol, max_depth=48):
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, b, fb, fm, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return (recurse(a, fa, m, fm, flm, left, tol / 2.0, depth + 1)
                + recurse(m, fm, b, fb, frm, right, tol / 2.0, depth + 1))

    return recurse(a, fa, b, fb, fm, whole, tol, 0)


def _record_production(rec: ShockRecord, tol: float) -> float:
    """Integral of |v_left - v_right|^3 / 48 along one record (adaptive)."""

    def f(t):
        return abs(rec.jump(t)) ** 3 / 48.0

    a, b = rec.t_start, rec.t_end
    total = _adaptive_simpson(f, a, b, tol)
    if rec.ended_by == "floor" and a > 0.0:
        total += a * f(a)  # stub down to t = 0; the jump has a limit there
    return total


def entropy_production(records, method: str = "adaptive",
                       tol: float = 1e-9) -> tuple[float, float]:
    """Positive and negative Kruzhkov entropy production.

    method 'adaptive': per-record adaptive Simpson of |jump|^3/48 at `tol`,
    plus the analytic stub below the tracking floor.  method 'samples':
    panel-midpoint sums on the record grid, which agree exactly with the
    rate of the corresponding split measures.
    """
    plus = minus = 0.0
    for rec in records:
        if rec.classification == "contact":
            continue
        if method == "samples":
            jumps = _record_panels(rec)
            ts, xs, rho = rec.ts, rec.xs, jumps * jumps / 16.0
            if rec.ended_by == "floor":
                ts, xs, rho = _extend_to_origin(ts, xs, rho)
            val = float(np.sum((4.0 / 3.0) * rho ** 1.5 * np.diff(ts)))
        elif method == "adaptive":
            val = _record_production(rec, tol)
        else:
            raise ValueError(f"unknown method {method!r}")
        if rec.classification == "non_entropy":
            plus += val
        else:
            minus += val
    return plus, minus


def key_identity_residual(field: HeightField, records,
                          tol: float = 1e-9) -> float:
    """| (Entp+ - Entp-) - energy of the terminal slice |.

    The terminal slice must live at time 1 (standard -x^2 tails).
    """
    if abs(field.evolution.source.time - 1.0) > 1e-12:
        raise ValueError("key identity needs a terminal slice at t = 1")
    plus, minus = entropy_production(records, "adaptive", tol)
    rhs = q_bm(field.slice(1.0))
    return abs((plus - minus) - rhs)


def _q_excess_integral(sl: PiecewisePoly, t: float) -> float:
    """Integral of q(dh/dx) - q(-2x/t) over the slice's support."""
    if not sl.breakpoints:
        return 0.0
    total = 0.0
    xs = sl.breakpoints
    inv_t2 = 1.0 / (t * t)
    for i in range(len(xs) - 1):
        _, c1, c2 = sl.segments[i + 1]
        a, b = xs[i], xs[i + 1]

        def anti(x):
            return (c1 * c1 * x + 2.0 * c1 * c2 * x * x
                    + (4.0 / 3.0) * c2 * c2 * x ** 3
                    - (4.0 / 3.0) * inv_t2 * x ** 3)

        total += 0.25 * (anti(b) - anti(a))
    return total


def production_flux_route(field: HeightField, t_min: float) -> float:
    """Entp+ - Entp- over [t_min, 1] via the space-time conservation form.

    Integrating d/dt q(u) - d/dx r(u) over [t_min, 1] x [-2c, 2c] turns the
    production into slice integrals plus the r-flux through x = +-2c; the
    solution equals the tail law there, so that flux cancels against the
    tail-law part of the time difference, leaving the q-excess difference
        (excess at 1) - (excess at t_min),
    with excess(t) = int (q(dh/dx) - q(-2x/t)) dx, segment-exact.
    """
    top = _q_excess_integral(field.slice(1.0), 1.0)
    bot = _q_excess_integral(field.slice(t_min), t_min)
    return top - bot


def shock_route_production(records, t_min: float,
                           tol: float = 1e-9) -> float:
    """Signed production over [t_min, 1] from the shock integrals alone."""
    total = 0.0
    for rec in records:
        if rec.classification == "contact":
            continue
        a = max(rec.t_start, t_min)
        b = rec.t_end
        if b <= a:
            continue

        def f(t):
            return abs(rec.jump(t)) ** 3 / 48.0

        val = _adaptive_simpson(f, a, b, tol)
        total += val if rec.classification == "non_entropy" else -val
    return total


# -- approximation ----------------------------------------------------------


def _resample_density(ts, rho, new_ts):
    """Average a piecewise-constant density onto the new panels."""
    cum = np.concatenate([[0.0], np.cumsum(rho * np.diff(ts))])

    def integral_to(t):
        return float(np.interp(t, ts, cum))

    out = []
    for a, b in zip(new_ts, new_ts[1:]):
        out.append((integral_to(b) - integral_to(a)) / (b - a))
    return np.array(out)


def approximate(mu: PathMeasure, n: int) -> PathMeasure:
    """Per-atom polygonalization on n equal panels with endpoint matching.

    Densities are averaged per panel; the rate converges to rate(mu) as n
    grows.  If the polygonalization breaks internal disjointness, offending
    atoms are shortened by splitting at their contact times.
    """
    if n < 1:
        raise ValueError("n must be positive")
    atoms = []
    for a in mu.atoms:
        new_ts = np.linspace(a.t_start, a.t_end, n + 1)
        new_xs = np.interp(new_ts, a.ts, a.xs)
        new_rho = _resample_density(a.ts, a.rho, new_ts)
        atoms.append(Atom(new_ts, new_xs, new_rho))
    out = PathMeasure(atoms, mu.cone_radius)
    for _ in range(8):
        try:
            out.validate()
            return out
        except DisjointnessError:
            out = _shorten_once(out)
    out.validate()
    return out


def _shorten_once(mu: PathMeasure) -> PathMeasure:
    atoms = list(mu.atoms)
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            hits = _touch_points(atoms[i], atoms[j])
            if not hits:
                continue
            # split the later-starting atom at the first contact time
            k = j if atoms[j].t_start >= atoms[i].t_start else i
            a = atoms[k]
            t_hit = max(min(h[0][0] for h in hits), a.t_start)
            t_hit = min(max(t_hit, a.t_start + 1e-9), a.t_end - 1e-9)
            ts1 = np.unique(np.concatenate([a.ts[a.ts <= t_hit], [t_hit]]))
            ts2 = np.unique(np.concatenate([[t_hit], a.ts[a.ts >= t_hit]]))
            first = Atom(ts1, np.interp(ts1, a.ts, a.xs),
                         _resample_density(a.ts, a.rho, ts1))
            second = Atom(ts2, np.interp(ts2, a.ts, a.xs),
                          _resample_density(a.ts, a.rho, ts2))
            atoms[k] = first
            atoms.append(second)
            return PathMeasure(atoms, mu.cone_radius)
    return mu
