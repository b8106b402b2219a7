"""Brute-force lattice oracles for the variational pipeline.

Dynamic programming over a rectangular space-time lattice: paths move at
most max_hop cells per time step, a step from x_j to x_i costs
(x_i - x_j)^2 / dt, and an atom of a path measure adds its density rate
along the edges that trace it.  These oracles converge at first order in
(dx + dt) and are used to validate the exact geometric constructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import PathMeasure
from .pwfn import PiecewisePoly


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeSpec:
    t_min: float
    t_max: float
    n_t: int
    x_min: float
    x_max: float
    n_x: int
    max_hop: int = 8

    def __post_init__(self):
        if self.t_max <= self.t_min or self.n_t < 1:
            raise LatticeError("bad time range")
        if self.x_max <= self.x_min or self.n_x < 1:
            raise LatticeError("bad space range")
        if self.max_hop < 1:
            raise LatticeError("max_hop must be >= 1")

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / self.n_t

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_x

    def times(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n_t + 1)

    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x + 1)

    def col(self, x: float) -> int:
        return int(round((x - self.x_min) / self.dx))

    def refined(self, factor: int) -> "LatticeSpec":
        return LatticeSpec(self.t_min, self.t_max, self.n_t * factor,
                           self.x_min, self.x_max, self.n_x * factor,
                           self.max_hop)


@dataclass
class GridField:
    lattice: LatticeSpec
    values: np.ndarray                 # (n_t + 1, n_x + 1)
    parents: np.ndarray | None = None  # chosen source displacement per node
    clipped: bool = False              # optimum hit the hop budget somewhere
    snap_error: float = 0.0            # worst atom-to-lattice displacement

    def value_at(self, t: float, x: float) -> float:
        k = int(round((t - self.lattice.t_min) / self.lattice.dt))
        i = self.lattice.col(x)
        return float(self.values[k, i])

    def node(self, t: float, x: float) -> tuple[int, int]:
        return (int(round((t - self.lattice.t_min) / self.lattice.dt)),
                self.lattice.col(x))

    def cone_mask(self, radius: float, margin: float = 0.0) -> np.ndarray:
        ts = self.lattice.times()[:, None]
        xs = self.lattice.xs()[None, :]
        return np.abs(xs) <= radius * ts + margin


def _shifted(g, s):
    n = g.shape[0]
    out = np.full(n, np.inf)
    if s >= 0:
        out[: n - s] = g[s:]
    else:
        out[-s:] = g[: n + s]
    return out


def _sweep(values, dt, dx, max_hop, minimize, track_parents=False):
    """One DP layer: optimal displacement d with cost d^2/dt against the
    linear interpolant of the previous layer (semi-Lagrangian step).

    Pure integer hops quantize the path velocity to multiples of dx/dt,
    which stalls convergence when dx and dt are refined together; taking
    the cell-interior optimum restores first order in (dx + dt).  Ties
    resolve toward the smaller displacement cell.
    """
    g = values if minimize else -values
    n = g.shape[0]
    best = np.full(n, np.inf)
    disp = np.zeros(n) if track_parents else None
    for s in range(-max_hop, max_hop):
        a = _shifted(g, s)
        b = _shifted(g, s + 1)
        d0, d1 = s * dx, (s + 1) * dx
        both = np.isfinite(a) & np.isfinite(b)
        m = np.where(both, (b - a) / dx, 0.0)
        dstar = np.clip(-0.5 * dt * m, d0, d1)
        val = np.where(
            both,
            dstar * dstar / dt + a + (dstar - d0) * m,
            np.where(np.isfinite(a), d0 * d0 / dt + a, np.inf))
        dchoice = np.where(both, dstar, d0)
        better = val < best
        best = np.where(better, val, best)
        if track_parents:
            disp = np.where(better, dchoice, disp)
    # rightmost node hop (cells above cover displacements up to max_hop*dx)
    a = _shifted(g, max_hop)
    val = (max_hop * dx) ** 2 / dt + a
    better = val < best
    best = np.where(better, val, best)
    if track_parents:
        disp = np.where(better, max_hop * dx, disp)
    return (best if minimize else -best), disp


def grid_hopflax_bk(phi: PiecewisePoly, spec: LatticeSpec) -> GridField:
    """Backward Bellman recursion seeded by the terminal profile at t_max."""
    xs = spec.xs()
    h = np.empty((spec.n_t + 1, spec.n_x + 1))
    h[-1] = [phi.eval(x) for x in xs]
    clipped = False
    for k in range(spec.n_t - 1, -1, -1):
        best, par = _sweep(h[k + 1], spec.dt, spec.dx, spec.max_hop,
                           minimize=True, track_parents=True)
        h[k] = best
        if np.any(np.abs(par[spec.max_hop:-spec.max_hop or None])
                  == spec.max_hop):
            clipped = True
    return GridField(spec, h, clipped=clipped)


def grid_hopflax_fwd(phi: PiecewisePoly, spec: LatticeSpec) -> GridField:
    """Forward recursion (sup with -cost) seeded at t_min."""
    xs = spec.xs()
    h = np.empty((spec.n_t + 1, spec.n_x + 1))
    h[0] = [phi.eval(x) for x in xs]
    clipped = False
    for k in range(1, spec.n_t + 1):
        best, par = _sweep(h[k - 1], spec.dt, spec.dx, spec.max_hop,
                           minimize=False, track_parents=True)
        h[k] = best
        if np.any(np.abs(par[spec.max_hop:-spec.max_hop or None])
                  == spec.max_hop):
            clipped = True
    return GridField(spec, h, clipped=clipped)


def _atom_bonuses(mu: PathMeasure, spec: LatticeSpec):
    """Per time-layer {(col_from, col_to): bonus} for edges tracing atoms.

    The kinetic term uses the atom's own slope over the step, not the
    lattice displacement, so tracing is not double-penalized; the tracked
    edge competes against the plain lattice cost via max().
    """
    times = spec.times()
    bonus: list[dict[tuple[int, int], float]] = [dict()
                                                 for _ in range(spec.n_t)]
    snap = 0.0
    for atom in mu.atoms:
        lo = max(atom.t_start, spec.t_min)
        hi = min(atom.t_end, spec.t_max)
        if hi <= lo:
            continue
        if atom.xs.min() < spec.x_min - 1e-9 or atom.xs.max() > spec.x_max + 1e-9:
            raise LatticeError("atom leaves the lattice window")
        k_lo = int(np.ceil((lo - spec.t_min) / spec.dt - 1e-9))
        k_hi = int(np.floor((hi - spec.t_min) / spec.dt + 1e-9))
        cum = np.concatenate([[0.0], np.cumsum(atom.rho * np.diff(atom.ts))])

        def mass(a, b):
            return float(np.interp(b, atom.ts, cum) - np.interp(a, atom.ts, cum))

        for k in range(k_lo, k_hi):
            t0, t1 = times[k], times[k + 1]
            x0, x1 = atom.position(t0), atom.position(t1)
            j, i = spec.col(x0), spec.col(x1)
            snap = max(snap, abs(x0 - spec.xs()[j]), abs(x1 - spec.xs()[i]))
            if abs(i - j) > spec.max_hop:
                raise LatticeError(
                    f"atom slope needs hop {abs(i - j)} > max_hop {spec.max_hop}")
            slope = (x1 - x0) / spec.dt
            val = mass(t0, t1) - slope * slope * spec.dt
            key = (j, i)
            bonus[k][key] = max(bonus[k].get(key, -np.inf), val)
    return bonus, snap


def grid_height(mu: PathMeasure, spec: LatticeSpec,
                origin: float = 0.0) -> GridField:
    """DP value of the measure-perturbed metric from the origin.

    Anchored at t_min by the exact no-measure height -(x - origin)^2/t_min
    (the singular time-zero wedge is not resolved on the lattice).
    """
    xs = spec.xs()
    if spec.t_min <= 0.0:
        raise LatticeError("t_min must be positive for the origin anchor")
    bonus, snap = _atom_bonuses(mu, spec)
    h = np.empty((spec.n_t + 1, spec.n_x + 1))
    h[0] = -((xs - origin) ** 2) / spec.t_min
    parents = np.zeros((spec.n_t + 1, spec.n_x + 1), dtype=np.int16)
    clipped = False
    for k in range(1, spec.n_t + 1):
        best, par = _sweep(h[k - 1], spec.dt, spec.dx, spec.max_hop,
                           minimize=False, track_parents=True)
        for (j, i), val in bonus[k - 1].items():
            cand = h[k - 1, j] + val
            if cand > best[i]:
                best[i] = cand
                par[i] = i - j
        h[k] = best
        parents[k] = par
        if np.any(np.abs(par[spec.max_hop:-spec.max_hop or None])
                  == spec.max_hop):
            clipped = True
    return GridField(spec, h, parents=parents, clipped=clipped,
                     snap_error=snap)


def grid_two_point(mu: PathMeasure, spec: LatticeSpec,
                   start: tuple[int, int]) -> GridField:
    """DP values e((t_k0, x_i0); (t, x)) from a single seed node."""
    k0, i0 = start
    bonus, snap = _atom_bonuses(mu, spec)
    h = np.full((spec.n_t + 1, spec.n_x + 1), -np.inf)
    h[k0, i0] = 0.0
    for k in range(k0 + 1, spec.n_t + 1):
        best, _ = _sweep(h[k - 1], spec.dt, spec.dx, spec.max_hop,
                         minimize=False)
        for (j, i), val in bonus[k - 1].items():
            if h[k - 1, j] > -np.inf:
                best[i] = max(best[i], h[k - 1, j] + val)
        h[k] = best
    return GridField(spec, h, snap_error=snap)


def geodesic(field: GridField, t: float, x: float):
    """Backtrace the optimal lattice path from the origin row to (t, x).

    Off-lattice queries are snapped to the nearest node (flagged in the
    returned dict).
    """
    if field.parents is None:
        raise LatticeError("field was built without backpointers")
    spec = field.lattice
    k, i = field.node(t, x)
    k = min(max(k, 0), spec.n_t)
    i = min(max(i, 0), spec.n_x)
    off = abs(spec.times()[k] - t) > 1e-12 or abs(spec.xs()[i] - x) > 1e-12
    cols = [i]
    for kk in range(k, 0, -1):
        i = i - int(field.parents[kk, i])
        cols.append(i)
    cols.reverse()
    xs = field.lattice.xs()
    return {"ts": spec.times()[: k + 1], "xs": xs[cols],
            "off_lattice": off}


def reconstruct_check(field_like, records, spec: LatticeSpec,
                      cone_radius: float | None = None) -> float:
    """Sup distance on cone nodes between a height field and the DP height
    of the measure read off from its shocks."""
    from .measures import measure_from_shocks

    radius = cone_radius if cone_radius is not None else field_like.cone_radius
    mu = measure_from_shocks(records, radius)
    grid = grid_height(mu, spec)
    mask = grid.cone_mask(radius)
    worst = 0.0
    times = spec.times()
    xs = spec.xs()
    for k, t in enumerate(times):
        sl = field_like.slice(t)
        row = np.array([sl.eval(x) for x in xs])
        d = np.abs(grid.values[k] - row)[mask[k]]
        if d.size:
            worst = max(worst, float(d.max()))
    return worst


def hopflax_agreement(field_like, spec: LatticeSpec,
                      cone_radius: float | None = None) -> float:
    """Sup distance on cone nodes between the exact backward evolution and
    the lattice backward recursion seeded by the same terminal slice."""
    radius = cone_radius if cone_radius is not None else field_like.cone_radius
    grid = grid_hopflax_bk(field_like.slice(spec.t_max), spec)
    mask = grid.cone_mask(radius)
    worst = 0.0
    xs = spec.xs()
    for k, t in enumerate(spec.times()):
        sl = field_like.slice(t)
        row = np.array([sl.eval(x) for x in xs])
        d = np.abs(grid.values[k] - row)[mask[k]]
        if d.size:
            worst = max(worst, float(d.max()))
    return worst


def refinement_study(run, base: LatticeSpec, levels: int = 3):
    """Residuals of `run(spec)` across doubling refinements, with the
    fitted log-log slope and per-level constants C = err / (dx + dt)."""
    rows = []
    for lev in range(levels):
        spec = base.refined(2 ** lev)
        res = run(spec)
        rows.append({"n_t": spec.n_t, "n_x": spec.n_x, "dt": spec.dt,
                     "dx": spec.dx, "residual": res,
                     "c": res / (spec.dx + spec.dt)})
    if len(rows) >= 2:
        ds = np.log([r["dx"] + r["dt"] for r in rows])
        es = np.log([max(r["residual"], 1e-300) for r in rows])
        slope = float(np.polyfit(ds, es, 1)[0])
    else:
        slope = float("nan")
    return {"rows": rows, "slope": slope}
