"""Concentration operators of observation sets on a frequency band.

For a band lattice ``K`` and a set ``S``, the matrix
``A[k, k'] = |T|^{-1} int_S exp(-i (k - k') . x / L) dx`` is the Gram matrix
of the exponentials on ``S``. Its smallest eigenvalue is the optimal value of
``||f||^2_{L^2(S)} / ||f||^2_{L^2(T)}`` over the band, evaluated with the
grid quadrature, which is exact for the band once the grid resolves it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .sets import EquidistributedSeq, build_ball_union, unit_ball_volume
from .torus import (
    BandLimitedFunction,
    BandSpec,
    TorusGeometry,
    adjoint_coefficients,
    dumps,
    lp_norm,
    synthesize,
    synthesize_coefficients,
)

MAX_MODES = 4096
MAX_CELLS = 1 << 24


@dataclass(frozen=True, eq=False)
class ConcentrationResult:
    geometry: TorusGeometry
    freqs: np.ndarray
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    hermitian_deviation: float
    residual: float
    set_density: float

    @property
    def m_dim(self):
        return self.freqs.shape[0]

    @property
    def lambda_min(self):
        return float(min(max(self.eigenvalues[0], 0.0), 1.0))

    @property
    def lambda_max(self):
        return float(min(max(self.eigenvalues[-1], 0.0), 1.0))

    @property
    def trace(self):
        return float(np.trace(self.matrix).real)

    @property
    def extremal(self):
        """Unit coefficient vector of the minimising eigenvector."""
        return self.eigenvectors[:, 0]

    def extremal_function(self):
        return BandLimitedFunction(self.geometry, self.freqs, self.extremal)

    def to_text(self):
        head = [
            f"# m_dim {self.m_dim}",
            f"# lambda_min {self.lambda_min!r}",
            f"# lambda_max {self.lambda_max!r}",
            f"# trace {self.trace!r}",
            f"# residual {self.residual!r}",
        ]
        return "\n".join(head) + "\n" + dumps(self.extremal_function())


def build_concentration(S, band, geometry=None):
    """Concentration matrix of `S` on the lattice of `band`, with its eigen-decomposition.

    Entries come from one FFT of the cell coverage of `S`. The matrix is made
    exactly Hermitian by averaging with its adjoint; the discarded deviation
    and the eigen-residual ``max ||A v - lambda v||`` are reported.
    """
    geometry = S.geometry if geometry is None else geometry
    if geometry != S.geometry:
        raise ValueError("set and geometry disagree")
    freqs = band.lattice_frequencies(geometry.L)
    m = freqs.shape[0]
    if m == 0:
        raise ValueError("band contains no lattice frequency")
    if m > MAX_MODES:
        raise ValueError(f"band has {m} modes, above the cap of {MAX_MODES}")
    geometry.check_frequencies(freqs)
    cells = geometry.N ** geometry.d
    if cells > MAX_CELLS:
        raise ValueError(f"grid has {cells} cells, above the cap of {MAX_CELLS}")
    chi_hat = np.fft.fftn(S.indicator) / cells
    diff = (freqs[:, None, :] - freqs[None, :, :]) % geometry.N
    A = chi_hat[tuple(np.moveaxis(diff, -1, 0))]
    dev = float(np.abs(A - A.conj().T).max())
    A = (A + A.conj().T) / 2
    w, V = np.linalg.eigh(A)
    residual = float(np.linalg.norm(A @ V - V * w[None, :], axis=0).max())
    return ConcentrationResult(geometry, freqs, A, w, V, dev, residual, S.density())


def empirical_ratio(f, S, p):
    """``||f||_{L^p(S)} / ||f||_{L^p(T)}`` on the grid."""
    vals = synthesize(f)
    den = lp_norm(vals, f.geometry, p)
    if den == 0:
        raise ValueError("the zero function has no concentration ratio")
    return lp_norm(vals, f.geometry, p, S) / den


@dataclass(frozen=True, eq=False)
class ExtremalSearchResult:
    p: float
    ratio: float
    geometry: TorusGeometry
    freqs: np.ndarray
    coeffs: np.ndarray
    history: tuple
    converged: bool
    iterations: int
    restarts: tuple = field(default=())

    def function(self):
        """The explicit band-limited function realising `ratio`."""
        return BandLimitedFunction(self.geometry, self.freqs, self.coeffs)


class _Objective:
    """``R(c) = sum w |f|^p / sum |f|^p`` for ``f = synthesis(c)`` and its conjugate gradient."""

    def __init__(self, freqs, geometry, weights, p):
        self.freqs = freqs
        self.geometry = geometry
        self.w = weights
        self.p = p

    def value(self, c):
        a = np.abs(synthesize_coefficients(self.freqs, c, self.geometry)) ** self.p
        den = a.sum()
        return float((self.w * a).sum() / den)

    def value_grad(self, c):
        f = synthesize_coefficients(self.freqs, c, self.geometry)
        mod = np.abs(f)
        a = mod ** self.p
        num = float((self.w * a).sum())
        den = float(a.sum())
        with np.errstate(divide="ignore", invalid="ignore"):
            h = np.where(mod > 0, mod ** (self.p - 2) * f, 0.0)
        g_num = adjoint_coefficients(self.w * h, self.freqs, self.geometry)
        g_den = adjoint_coefficients(h, self.freqs, self.geometry)
        R = num / den
        grad = (self.p / 2) * (g_num - R * g_den) / den
        return R, grad


def _tangent(c, v):
    return v - np.real(np.vdot(c, v)) * c


def _descend(obj, c, max_iter, tol):
    """Nonlinear conjugate gradient (Polak-Ribiere+) on the unit sphere with Armijo backtracking.

    Each line search backtracks by halving from twice the previous accepted
    step (never below 1.0). A non-descent direction falls back to the
    projected gradient. Returns the final coefficients, the per-iteration
    values and whether the relative decrease stayed below `tol` for three
    consecutive steps (or vanished).
    """
    c = c / np.linalg.norm(c)
    R, g = obj.value_grad(c)
    g = _tangent(c, g)
    direction = -g
    values = [R]
    t_prev = 1.0
    quiet = 0
    for _ in range(max_iter):
        gnorm2 = float(np.real(np.vdot(g, g)))
        if gnorm2 == 0 or not math.isfinite(gnorm2):
            return c, values, True
        # directional derivative of R along `direction` is 2 Re <g, direction>
        slope = 2 * float(np.real(np.vdot(g, direction)))
        steepest = slope >= 0
        if steepest:
            direction, slope = -g, -2 * gnorm2
        t = max(1.0, 2 * t_prev)
        while True:
            trial = c + t * direction
            trial = trial / np.linalg.norm(trial)
            Rt = obj.value(trial)
            if Rt <= R + 1e-4 * t * slope or t < 1e-14:
                break
            t *= 0.5
        if Rt > R:
            if steepest:
                return c, values, True
            direction = -g
            continue
        decrease = R - Rt
        t_prev = t
        c = trial
        R, g_new = obj.value_grad(c)
        g_new = _tangent(c, g_new)
        beta = max(0.0, float(np.real(np.vdot(g_new, g_new - _tangent(c, g)))) / gnorm2)
        direction = -g_new + beta * _tangent(c, direction)
        g = g_new
        values.append(R)
        quiet = quiet + 1 if decrease <= tol * max(R, 1e-300) else 0
        if quiet >= 3 or decrease == 0:
            return c, values, True
    return c, values, False


def extremal_search(band, S, p, seed, max_iter=2000, restarts=8, tol=1e-12, geometry=None):
    """Search for the band function minimising ``||f||_{L^p(S)} / ||f||_{L^p(T)}``.

    Runs conjugate gradient descent on the unit sphere from `restarts` random starts seeded
    ``seed + 0, seed + 1, ...``. The returned ratio is realised by the stored
    coefficients, so it is an upper bound on the true minimum. `history` is the
    best-so-far ratio after each iteration, across restarts in order.
    """
    p = float(p)
    if not (1 <= p < math.inf):
        raise ValueError(f"p must lie in [1, inf), got {p}")
    geometry = S.geometry if geometry is None else geometry
    freqs = band.lattice_frequencies(geometry.L)
    m = freqs.shape[0]
    if m == 0:
        raise ValueError("band contains no lattice frequency")
    geometry.check_frequencies(freqs)
    obj = _Objective(freqs, geometry, S.indicator, p)
    best = (math.inf, None)
    history = []
    all_converged = True
    total = 0
    per_restart = []
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        c0 = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        c, values, conv = _descend(obj, c0, max_iter, tol)
        all_converged &= conv
        total += len(values) - 1
        per_restart.append(values[-1] ** (1 / p))
        for v in values:
            if v < best[0]:
                best = (v, c)
            history.append(best[0] ** (1 / p))
        if m == 1:
            break
    coeffs = best[1] / (np.linalg.norm(best[1]) * math.sqrt(geometry.volume))
    return ExtremalSearchResult(p, best[0] ** (1 / p), geometry, freqs, coeffs, tuple(history),
                                bool(all_converged), total, tuple(per_restart))


# -------------------------------------------------------------- scale sweeps

def thick_ball_union(gamma, a, geometry, kind="periodic", seed=0, coverage=None):
    """Ball union of a ``(G, delta)`` sequence whose thickness for side ``a = 2G`` windows is `gamma`.

    ``G = a / 2`` and ``delta = (gamma (2G)^d / omega_d)^{1/d}``. In d = 1 the
    coverage is exact by default.
    """
    d = geometry.d
    if not 0 < a <= geometry.period * (1 + 1e-12):
        raise ValueError(f"window side a={a} must lie in (0, 2 pi L = {geometry.period}]")
    G = a / 2
    delta = (gamma * (2 * G) ** d / unit_ball_volume(d)) ** (1 / d)
    if delta > G / 2 * (1 + 1e-12):
        raise ValueError(f"gamma={gamma} needs delta={delta} above G/2 for d={d}")
    delta = min(delta, G / 2)
    if kind == "periodic":
        seq = EquidistributedSeq.periodic(G, delta, geometry)
    elif kind == "seeded-random":
        seq = EquidistributedSeq.seeded_random(G, delta, geometry, seed)
    else:
        raise ValueError(f"unknown sequence kind {kind!r}")
    coverage = coverage or ("exact" if d == 1 else "center")
    return build_ball_union(seq, geometry, coverage=coverage)


def sweep_geometry(d, L, band, points_per_unit=8.0):
    kmax = int(np.abs(band.lattice_frequencies(L)).max()) if band.lattice_frequencies(L).size else 0
    return TorusGeometry.fitting(d, L, kmax, points_per_unit=points_per_unit)


@dataclass(frozen=True)
class SweepRow:
    key: float
    value: float
    m_dim: int
    density: float


@dataclass(frozen=True)
class ScaleSweepResult:
    rows: tuple
    p: float

    @property
    def spread(self):
        """``max / min`` of the swept values (inf if one vanishes)."""
        vals = [r.value for r in self.rows]
        lo = min(vals)
        return math.inf if lo <= 0 else max(vals) / lo


def _observe(S, band, p, seed):
    if p == 2:
        res = build_concentration(S, band)
        return res.lambda_min, res.m_dim
    res = extremal_search(band, S, p, seed)
    return res.ratio, res.freqs.shape[0]


def scale_free_sweep(gamma, a, b, L_list, p=2.0, d=1, center=None, kind="periodic", seed=0,
                     points_per_unit=8.0):
    """``lambda_min`` (p = 2) or the searched ratio at fixed ``(gamma, a, b)`` for each ``L``.

    The band is the box of sides `b` about `center` (default 0), and the set is
    the ball union of :func:`thick_ball_union`.
    """
    a = float(a)
    sides = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    band = BandSpec.box(sides, None if center is None else np.broadcast_to(center, (d,)))
    rows = []
    for L in L_list:
        if a > 2 * math.pi * L * (1 + 1e-12):
            raise ValueError(f"L={L} is below the admissible bound a / (2 pi) = {a / (2 * math.pi)}")
        g = sweep_geometry(d, L, band, points_per_unit)
        S = thick_ball_union(gamma, a, g, kind, seed)
        val, m = _observe(S, band, p, seed)
        rows.append(SweepRow(float(L), float(val), int(m), S.density()))
    return ScaleSweepResult(tuple(rows), float(p))


def gamma_sweep(gammas, a, b, L, p=2.0, d=1, center=None, kind="periodic", seed=0,
                points_per_unit=8.0):
    """Same observable as :func:`scale_free_sweep` at fixed ``L``, for each thickness in `gammas`."""
    sides = np.broadcast_to(np.asarray(b, dtype=float), (d,))
    band = BandSpec.box(sides, None if center is None else np.broadcast_to(center, (d,)))
    g = sweep_geometry(d, L, band, points_per_unit)
    rows = []
    for gamma in gammas:
        S = thick_ball_union(gamma, a, g, kind, seed)
        val, m = _observe(S, band, p, seed)
        rows.append(SweepRow(float(gamma), float(val), int(m), S.density()))
    return ScaleSweepResult(tuple(rows), float(p))


def translated_band(band, shift, L):
    """Band moved by the lattice vector `shift` (integer indices)."""
    return band.translate(np.asarray(shift, dtype=float) / L)


__all__ = [
    "ConcentrationResult", "ExtremalSearchResult", "ScaleSweepResult", "SweepRow",
    "build_concentration", "empirical_ratio", "extremal_search", "gamma_sweep",
    "scale_free_sweep", "thick_ball_union", "translated_band",
]
