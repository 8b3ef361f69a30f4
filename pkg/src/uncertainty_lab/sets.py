"""Observation sets on the sampling grid and their geometry.

A :class:`GridSet` stores, per grid cell, the fraction of the cell covered by
the set. Sets built from centre tests (ball unions) are plain 0/1 indicators;
interval and box sets get exact fractional coverage of the boundary cells, so
that integrals over them are trapezoid-accurate rather than first-order.
Each grid point ``x_n`` is the centre of the cell ``[x_n - h/2, x_n + h/2)``.
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .errors import ContainmentError
from .torus import TorusGeometry


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(1 + d / 2)


def unit_sphere_area(d):
    """Surface measure of ``S^{d-1}`` (2 for d = 1)."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _merge_periodic(intervals, period):
    pieces = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if hi < lo:
            raise ValueError(f"interval ({lo}, {hi}) is reversed")
        if hi - lo >= period:
            return [(0.0, period)]
        start = lo % period
        stop = start + (hi - lo)
        if stop > period:
            pieces.append((start, period))
            pieces.append((0.0, stop - period))
        else:
            pieces.append((start, stop))
    pieces.sort()
    merged = []
    for lo, hi in pieces:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def interval_coverage(geometry, intervals):
    """Fraction of each 1-d grid cell covered by a union of intervals (periodic)."""
    h = geometry.spacing
    period = geometry.period
    centers = geometry.axis()
    cov = np.zeros(geometry.N)
    for lo, hi in _merge_periodic(intervals, period):
        for shift in (-period, 0.0, period):
            a = np.maximum(centers - h / 2, lo + shift)
            b = np.minimum(centers + h / 2, hi + shift)
            cov += np.clip(b - a, 0.0, None)
    return np.clip(cov / h, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class GridSet:
    """Periodic subset of the torus resolved on the sampling grid."""

    geometry: TorusGeometry
    indicator: np.ndarray
    analytic: dict | None = None

    def __post_init__(self):
        ind = np.asarray(self.indicator, dtype=float)
        if ind.shape != self.geometry.shape:
            raise ValueError(f"indicator shape {ind.shape} does not match grid {self.geometry.shape}")
        if np.any(ind < 0) or np.any(ind > 1):
            raise ValueError("cell coverage must lie in [0, 1]")
        ind = ind.copy()
        ind.setflags(write=False)
        object.__setattr__(self, "indicator", ind)

    @classmethod
    def full(cls, geometry):
        return cls(geometry, np.ones(geometry.shape), {"kind": "full"})

    @classmethod
    def empty(cls, geometry):
        return cls(geometry, np.zeros(geometry.shape), {"kind": "empty"})

    @classmethod
    def from_mask(cls, geometry, mask, analytic=None):
        return cls(geometry, np.asarray(mask, dtype=bool).astype(float), analytic)

    @classmethod
    def from_intervals(cls, geometry, intervals):
        """Union of arcs ``[lo, hi]`` on a 1-d torus, with exact boundary-cell coverage."""
        if geometry.d != 1:
            raise ValueError("from_intervals needs d = 1; use from_boxes")
        intervals = [tuple(map(float, iv)) for iv in intervals]
        return cls(geometry, interval_coverage(geometry, intervals), {"kind": "intervals", "intervals": intervals})

    @classmethod
    def from_boxes(cls, geometry, boxes):
        """Union of boxes ``[(lo_1, hi_1), ..., (lo_d, hi_d)]``.

        Coverage is exact for each box; overlapping boxes are combined by the
        cellwise maximum, which is exact unless two boxes share a boundary cell.
        """
        cov = np.zeros(geometry.shape)
        for box in boxes:
            if len(box) != geometry.d:
                raise ValueError(f"box {box} does not have d={geometry.d} sides")
            one = np.ones(())
            for side in box:
                one = np.multiply.outer(one, interval_coverage(geometry, [side]))
            cov = np.maximum(cov, one)
        return cls(geometry, cov, {"kind": "boxes", "boxes": [list(map(list, b)) for b in boxes]})

    @property
    def is_binary(self):
        return bool(np.all((self.indicator == 0) | (self.indicator == 1)))

    def measure(self):
        return float(self.indicator.sum() * self.geometry.cell_volume)

    def density(self):
        return self.measure() / self.geometry.volume

    def complement(self):
        return GridSet(self.geometry, 1.0 - self.indicator)

    def union(self, other):
        return GridSet(self.geometry, np.maximum(self.indicator, other.indicator))

    def intersection(self, other):
        return GridSet(self.geometry, np.minimum(self.indicator, other.indicator))

    def issubset(self, other):
        return bool(np.all(self.indicator <= other.indicator))

    def dumps(self):
        """Run-length text form: header ``d L N``, then ``value count`` runs in C order."""
        g = self.geometry
        flat = self.indicator.ravel()
        lines = [f"{g.d} {g.L!r} {g.N}"]
        if flat.size:
            change = np.flatnonzero(np.diff(flat) != 0) + 1
            starts = np.concatenate([[0], change])
            stops = np.concatenate([change, [flat.size]])
            for a, b in zip(starts, stops):
                v = float(flat[a])
                token = "1" if v == 1.0 else "0" if v == 0.0 else repr(v)
                lines.append(f"{token} {b - a}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
        d, L, N = rows[0]
        geometry = TorusGeometry(int(d), float(L), int(N))
        values = [np.full(int(cnt), float(v)) for v, cnt in rows[1:]]
        flat = np.concatenate(values) if values else np.zeros(0)
        expected = geometry.N ** geometry.d
        if flat.size != expected:
            raise ValueError(f"run lengths add up to {flat.size}, expected {expected}")
        return cls(geometry, flat.reshape(geometry.shape))


def _as_shift(x, d):
    return np.broadcast_to(np.asarray(x, dtype=float), (d,))


@dataclass(frozen=True, eq=False)
class EquidistributedSeq:
    """Centres ``z_j``, one per cell ``Lambda_G + j`` of ``(G Z)^d`` inside the torus.

    ``Lambda_G = (-G/2, G/2)^d``; containment ``B(z_j, delta) in Lambda_G + j``
    is checked (with torus wrap-around) at construction.
    """

    G: float
    delta: float
    indices: np.ndarray
    points: np.ndarray
    mode: str = "explicit"

    def __post_init__(self):
        if not self.G > 0:
            raise ValueError("G must be positive")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        idx = np.atleast_2d(np.asarray(self.indices, dtype=float))
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if idx.shape != pts.shape:
            raise ValueError("indices and points disagree in shape")
        off = np.abs(pts - idx).max(axis=1) + self.delta
        bad = np.flatnonzero(off > self.G / 2 + 1e-12)
        if bad.size:
            raise ContainmentError(idx[bad[0]])
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "points", pts)

    @staticmethod
    def _lattice(G, geometry):
        q = geometry.period / G
        if abs(q - round(q)) > 1e-9 or round(q) < 1:
            raise ValueError(f"G={G} does not divide the torus period {geometry.period}")
        q = int(round(q))
        axes = [np.arange(q) * G] * geometry.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, geometry.d)

    @classmethod
    def periodic(cls, G, delta, geometry, offset=0.0):
        idx = cls._lattice(G, geometry)
        return cls(G, delta, idx, idx + _as_shift(offset, geometry.d)[None, :], "periodic")

    @classmethod
    def seeded_random(cls, G, delta, geometry, seed):
        idx = cls._lattice(G, geometry)
        rng = np.random.default_rng(seed)
        slack = G / 2 - delta
        return cls(G, delta, idx, idx + rng.uniform(-slack, slack, size=idx.shape), "seeded-random")

    @property
    def d(self):
        return self.indices.shape[1]

    def dumps(self):
        lines = [f"# G {self.G!r}", f"# delta {self.delta!r}", f"# mode {self.mode}"]
        for j, z in zip(self.indices, self.points):
            lines.append(" ".join(repr(float(x)) for x in (*j, *z)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        meta = {}
        rows = []
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln:
                continue
            if ln.startswith("#"):
                parts = ln[1:].split()
                if len(parts) == 2:
                    meta[parts[0]] = parts[1]
                continue
            rows.append([float(x) for x in ln.split()])
        arr = np.array(rows)
        d = arr.shape[1] // 2
        return cls(float(meta["G"]), float(meta["delta"]), arr[:, :d], arr[:, d:], meta.get("mode", "explicit"))


def _axis_offsets(geometry, c, periodic):
    x = geometry.axis() - c
    if periodic:
        x = (x + geometry.period / 2) % geometry.period - geometry.period / 2
    return x


def build_ball_union(seq, geometry, periodic=True, coverage="center"):
    """Indicator of ``union_j B(z_j, delta)`` on the grid.

    ``coverage="center"`` marks a cell iff its centre lies within `delta` of
    some ``z_j`` (torus metric when `periodic`). ``coverage="exact"`` (d = 1
    only) gives the exact covered fraction of each cell.
    """
    if seq.d != geometry.d:
        raise ValueError("sequence and geometry dimensions differ")
    analytic = {"kind": "ball-union", "G": seq.G, "delta": seq.delta, "centers": seq.points.tolist()}
    if coverage == "exact":
        if geometry.d != 1:
            raise ValueError("exact coverage is only available for d = 1")
        ivs = [(z[0] - seq.delta, z[0] + seq.delta) for z in seq.points]
        if not periodic:
            ivs = [(max(lo, 0.0), min(hi, geometry.period)) for lo, hi in ivs]
            ivs = [iv for iv in ivs if iv[1] > iv[0]]
        ind = interval_coverage(geometry, ivs) if ivs else np.zeros(geometry.N)
        return GridSet(geometry, ind, analytic)
    if coverage != "center":
        raise ValueError(f"unknown coverage rule {coverage!r}")
    mask = np.zeros(geometry.shape, dtype=bool)
    r2 = seq.delta ** 2
    for z in seq.points:
        dist2 = np.zeros(())
        for c in z:
            dist2 = np.add.outer(dist2, _axis_offsets(geometry, c, periodic) ** 2)
        mask |= dist2 < r2
    return GridSet(geometry, mask.astype(float), analytic)


def gamma_for_equidistributed(G, delta, d):
    """Thickness density of a ``(G, delta)`` ball union for windows of side ``2G``.

    Every window of side ``2G`` contains a full ball, so
    ``gamma = omega_d delta^d / (2G)^d``. The unnormalised ``omega_d delta^d``
    is only a density when ``2G = 1``.
    """
    if not 0 < delta <= G / 2:
        raise ValueError(f"need 0 < delta <= G/2, got delta={delta}, G={G}")
    return unit_ball_volume(d) * delta ** d / (2 * G) ** d


@dataclass(frozen=True)
class ThicknessReport:
    a: tuple
    gamma_est: float
    argmin_corner: tuple
    window_cells: tuple
    slack: float


def window_densities(S, a):
    """Coverage fraction of the ``a``-window starting at every grid corner, plus window sizes."""
    g = S.geometry
    a = np.broadcast_to(np.asarray(a, dtype=float), (g.d,))
    if np.any(a <= 0) or np.any(a > g.period * (1 + 1e-12)):
        raise ValueError(f"window sides {a.tolist()} must lie in (0, 2 pi L = {g.period}]")
    cells = tuple(int(min(max(round(aj / g.spacing), 1), g.N)) for aj in a)
    sums = S.indicator
    for axis, w in enumerate(cells):
        sums = kernels.periodic_window_sum(sums, w, axis)
    return sums / math.prod(cells), cells


def thickness_scan(S, a):
    """Minimum coverage density of ``S`` over all grid-aligned periodic windows of side `a`.

    Windows contain ``round(a_j / h)`` cells per axis. The reported `slack` is
    the relative volume of one cell layer on the window boundary, the largest
    gap between this grid minimum and the minimum over real corner positions.
    """
    dens, cells = window_densities(S, a)
    flat = int(np.argmin(dens))
    corner = np.unravel_index(flat, dens.shape)
    slack = min(1.0, sum(2.0 / w for w in cells))
    a = tuple(float(x) for x in np.broadcast_to(np.asarray(a, dtype=float), (S.geometry.d,)))
    return ThicknessReport(a, float(dens.ravel()[flat]), tuple(int(i) for i in corner), cells, slack)


def sphere_directions(d, count=None):
    """Deterministic, evenly spread unit vectors: 2 for d = 1, angles for d = 2, Fibonacci sphere for d = 3."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    count = 512 * d if count is None else int(count)
    if d == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if d == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z ** 2)
        phi = np.pi * (1 + 5 ** 0.5) * i
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValueError(f"unsupported dimension {d}")


@dataclass(frozen=True)
class LineSegmentResult:
    direction: np.ndarray
    ratio: float
    length: float
    set_measure: float
    lower_bound: float
    slack: float

    @property
    def meets_bound(self):
        return self.ratio >= self.lower_bound - self.slack


def cube_membership(geometry, corner):
    """Per-axis boolean masks of grid points inside ``[corner_j, corner_j + 1)`` (periodic)."""
    x = geometry.axis()
    period = geometry.period
    masks = []
    for c in np.atleast_1d(corner):
        rel = (x - c) % period
        masks.append(rel < 1.0)
    return masks


def best_line_segment(S, y, corner, n_directions=None, per_unit=None):
    """Direction from `y` to the boundary of the unit cube ``corner + [0, 1]^d`` with the highest density of `S`.

    Each segment ``{y + r eta : r >= 0} cap cube`` is sampled at `per_unit`
    (default ``4 N``) midpoints per unit length and `S` is read at the nearest
    grid point. The guaranteed value is ``|S cap cube| / (sigma_{d-1} d^{d/2})``;
    `slack` is the cell diameter relative to the shortest segment searched.
    """
    g = S.geometry
    y = np.atleast_1d(np.asarray(y, dtype=float))
    corner = np.atleast_1d(np.asarray(corner, dtype=float))
    lo, hi = corner, corner + 1.0
    if y.shape != (g.d,) or np.any(y < lo) or np.any(y > hi):
        raise ValueError(f"point {y.tolist()} is not in the cube at {corner.tolist()}")
    dirs = sphere_directions(g.d, n_directions)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hi = np.where(dirs > 0, (hi - y) / dirs, np.inf)
        t_lo = np.where(dirs < 0, (lo - y) / dirs, np.inf)
    lengths = np.minimum(t_hi, t_lo).min(axis=1)
    per_unit = 4 * g.N if per_unit is None else per_unit
    usable = lengths > 1e-12
    ratios = np.zeros(dirs.shape[0])
    if np.any(usable):
        ratios[usable] = kernels.ray_density(
            S.indicator, g.spacing, y, dirs[usable], lengths[usable], per_unit
        )
    best = int(np.argmax(ratios))
    masks = cube_membership(g, corner)
    mass = float(S.indicator[np.ix_(*masks)].sum() * g.cell_volume)
    bound = mass / (unit_sphere_area(g.d) * g.d ** (g.d / 2))
    shortest = float(lengths[usable].min()) if np.any(usable) else 1.0
    slack = min(1.0, math.sqrt(g.d) * g.spacing / max(lengths[best], shortest, 1e-12))
    return LineSegmentResult(dirs[best].copy(), float(ratios[best]), float(lengths[best]), mass, bound, slack)


def _abs_range(m):
    """Values of ``|t|`` for ``t`` in ``[m, m + 1)``: (lo, lo_included, hi, hi_included)."""
    if m >= 0:
        return m, True, m + 1, False
    return -(m + 1), False, -m, True


def shell_cover_bound(E, d):
    return unit_ball_volume(d) * d * (1 + 2 * math.sqrt(d)) * E ** (d / 2 - 1)


@dataclass(frozen=True)
class ShellCover:
    E: float
    d: int
    n_cubes: int
    bound: float

    @property
    def within_bound(self):
        return self.n_cubes <= self.bound


def shell_cover_count(E, d):
    """Count the half-open unit cubes ``m + [0, 1)^d`` meeting ``{E - 1 <= |p|^2 <= E}``.

    The half-open cubes tile ``R^d`` disjointly. `bound` is
    ``omega_d d (1 + 2 sqrt d) E^{d/2 - 1}``.
    """
    if not E > 1:
        raise ValueError(f"E must exceed 1, got {E}")
    R = math.isqrt(int(math.ceil(E))) + 2
    ranges = [_abs_range(m) for m in range(-R, R)]
    lo2 = np.array([r[0] ** 2 for r in ranges], dtype=float)
    hi2 = np.array([r[2] ** 2 for r in ranges], dtype=float)
    lo_in = np.array([r[1] for r in ranges])
    hi_in = np.array([r[3] for r in ranges])
    count = 0
    for combo in product(range(len(ranges)), repeat=d):
        c = list(combo)
        lo = lo2[c].sum()
        hi = hi2[c].sum()
        lo_closed = bool(np.all(lo_in[c]))
        hi_closed = bool(np.all(hi_in[c]))
        # |p|^2 sweeps the interval (lo, hi) with the stated endpoint closure
        a, a_closed = (lo, lo_closed) if lo > E - 1 else (E - 1, True if lo < E - 1 else lo_closed)
        b, b_closed = (hi, hi_closed) if hi < E else (E, True if hi > E else hi_closed)
        if a < b or (a == b and a_closed and b_closed):
            count += 1
    return ShellCover(float(E), int(d), count, shell_cover_bound(E, d))
