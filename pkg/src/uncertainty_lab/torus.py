"""Band-limited functions on the torus ``[0, 2 pi L]^d``.

A function is stored sparsely as integer lattice indices ``k`` and complex
coefficients, with ``f(x) = sum_k coeff(k) exp(i (k / L) . x)``. Sampling
happens on the uniform grid ``x_n = 2 pi L n / N`` (per axis), where Riemann
sums integrate the trigonometric polynomials we care about exactly.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AliasingError

MAX_DIM = 3


def _readonly(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


def next_pow2(n):
    n = max(int(n), 1)
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class TorusGeometry:
    """Torus ``[0, 2 pi L]^d`` sampled with `N` points per axis."""

    d: int
    L: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.d, (int, np.integer)) and 1 <= self.d <= MAX_DIM):
            raise ValueError(f"dimension d must be 1, 2 or 3, got {self.d!r}")
        if not (math.isfinite(self.L) and self.L > 0):
            raise ValueError(f"scale L must be positive and finite, got {self.L!r}")
        n = int(self.N)
        if n < 4 or n & (n - 1):
            raise ValueError(f"N must be a power of two >= 4, got {self.N!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", n)

    @classmethod
    def fitting(cls, d, L, max_frequency, points_per_unit=0.0, min_N=4):
        """Smallest power-of-two grid that satisfies the oversampling guard.

        `points_per_unit` additionally asks for at least that many samples per
        unit length, which controls how finely sets are resolved.
        """
        need = max(4 * int(max_frequency) + 4, math.ceil(points_per_unit * 2 * math.pi * L), min_N)
        return cls(d, L, next_pow2(need))

    @property
    def period(self):
        return 2 * math.pi * self.L

    @property
    def spacing(self):
        return self.period / self.N

    @property
    def cell_volume(self):
        return self.spacing ** self.d

    @property
    def volume(self):
        return self.period ** self.d

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def max_frequency(self):
        """Largest ``|k|`` allowed by ``N >= 4 |k| + 4``."""
        return (self.N - 4) // 4

    def axis(self):
        return np.arange(self.N) * self.spacing

    def grid(self):
        """Grid coordinates, shape ``(N,) * d + (d,)``."""
        axes = [self.axis()] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def points(self):
        return self.grid().reshape(-1, self.d)

    def check_frequencies(self, freqs):
        freqs = np.asarray(freqs)
        if freqs.size == 0:
            return
        kmax = int(np.abs(freqs).max())
        if kmax > self.max_frequency:
            raise AliasingError(
                f"frequency |k|={kmax} needs N >= {4 * kmax + 4}, grid has N={self.N}"
            )


@dataclass(frozen=True, eq=False)
class BandSpec:
    """Union of axis-parallel boxes ``J_l = centers[l] + [-sides/2, sides/2]`` in frequency space."""

    centers: np.ndarray
    sides: np.ndarray

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        sides = np.atleast_1d(np.asarray(self.sides, dtype=float))
        if centers.shape[0] < 1:
            raise ValueError("a band needs at least one box")
        if sides.ndim != 1 or centers.shape[1] != sides.shape[0]:
            raise ValueError(f"centers {centers.shape} and sides {sides.shape} disagree on dimension")
        if not np.all(sides > 0):
            raise ValueError("every side length must be positive")
        object.__setattr__(self, "centers", _readonly(centers))
        object.__setattr__(self, "sides", _readonly(sides))

    @classmethod
    def box(cls, sides, center=None):
        sides = np.atleast_1d(np.asarray(sides, dtype=float))
        center = np.zeros_like(sides) if center is None else np.atleast_1d(center)
        return cls(center[None, :], sides)

    @classmethod
    def symmetric(cls, half_widths):
        """The box ``[-b_1, b_1] x ... x [-b_d, b_d]``."""
        half_widths = np.atleast_1d(np.asarray(half_widths, dtype=float))
        return cls.box(2 * half_widths)

    @property
    def n(self):
        return self.centers.shape[0]

    @property
    def d(self):
        return self.sides.shape[0]

    def _box_ranges(self, l, L):
        lo = self.centers[l] - self.sides / 2
        hi = self.centers[l] + self.sides / 2
        kmin = np.ceil(L * lo - 1e-9).astype(np.int64)
        kmax = np.floor(L * hi + 1e-9).astype(np.int64)
        return kmin, kmax

    def box_frequencies(self, l, L):
        L = getattr(L, "L", L)
        kmin, kmax = self._box_ranges(l, L)
        if np.any(kmax < kmin):
            return np.zeros((0, self.d), dtype=np.int64)
        axes = [np.arange(a, b + 1) for a, b in zip(kmin, kmax)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d)

    def lattice_frequencies(self, L):
        """All ``k`` in ``Z^d`` with ``k / L`` inside some box, sorted lexicographically.

        `L` may also be a :class:`TorusGeometry`.
        """
        L = getattr(L, "L", L)
        parts = [self.box_frequencies(l, L) for l in range(self.n)]
        allk = np.concatenate(parts, axis=0)
        if allk.shape[0] == 0:
            return allk
        return np.unique(allk, axis=0)

    def contains(self, freqs, L):
        """Boolean mask: which lattice indices lie in the union of boxes."""
        L = getattr(L, "L", L)
        freqs = np.atleast_2d(freqs)
        inside = np.zeros(freqs.shape[0], dtype=bool)
        for l in range(self.n):
            kmin, kmax = self._box_ranges(l, L)
            inside |= np.all((freqs >= kmin) & (freqs <= kmax), axis=1)
        return inside

    def translate(self, shift):
        return BandSpec(self.centers + np.asarray(shift, dtype=float)[None, :], self.sides)

    def __repr__(self):
        return f"BandSpec(centers={self.centers.tolist()}, sides={self.sides.tolist()})"


@dataclass(frozen=True, eq=False)
class BandLimitedFunction:
    """Trigonometric polynomial on a torus, stored as lattice indices and coefficients."""

    geometry: TorusGeometry
    freqs: np.ndarray
    coeffs: np.ndarray
    band: BandSpec | None = None

    def __post_init__(self):
        d = self.geometry.d
        freqs = np.asarray(self.freqs, dtype=np.int64).reshape(-1, d)
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).reshape(-1)
        if freqs.shape[0] != coeffs.shape[0]:
            raise ValueError("freqs and coeffs differ in length")
        if freqs.shape[0] and np.unique(freqs, axis=0).shape[0] != freqs.shape[0]:
            raise ValueError("duplicate frequency index")
        if self.band is not None:
            if self.band.d != d:
                raise ValueError("band dimension does not match geometry")
            if freqs.shape[0] and not np.all(self.band.contains(freqs, self.geometry.L)):
                raise ValueError("coefficient support leaves the declared band")
        object.__setattr__(self, "freqs", _readonly(freqs))
        object.__setattr__(self, "coeffs", _readonly(coeffs))

    @classmethod
    def from_dict(cls, geometry, mapping, band=None):
        keys = [np.atleast_1d(np.asarray(k, dtype=np.int64)) for k in mapping]
        freqs = np.array(keys, dtype=np.int64).reshape(-1, geometry.d)
        coeffs = np.array([complex(v) for v in mapping.values()], dtype=np.complex128)
        return cls(geometry, freqs, coeffs, band)

    def as_dict(self):
        return {tuple(int(x) for x in k): complex(c) for k, c in zip(self.freqs, self.coeffs)}

    @property
    def physical_freqs(self):
        return self.freqs / self.geometry.L

    def with_coeffs(self, coeffs):
        return BandLimitedFunction(self.geometry, self.freqs, coeffs, self.band)

    def __call__(self, points):
        """Evaluate at real or complex points of shape ``(..., d)`` (``(...)`` when d = 1)."""
        pts = np.asarray(points, dtype=np.complex128)
        if self.geometry.d == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
            pts = pts[..., None]
        lead = pts.shape[:-1]
        vals = kernels.expsum_eval(pts.reshape(-1, self.geometry.d), self.physical_freqs, self.coeffs)
        return vals.reshape(lead)

    def l2_norm(self):
        """Exact ``L^2(T^d_L)`` norm by Plancherel."""
        return math.sqrt(self.geometry.volume * float(np.sum(np.abs(self.coeffs) ** 2)))

    def is_real(self, tol=0.0):
        table = self.as_dict()
        for k, c in table.items():
            other = table.get(tuple(-x for x in k), 0.0)
            if abs(other - c.conjugate()) > tol:
                return False
        return True

    def __repr__(self):
        return f"BandLimitedFunction(d={self.geometry.d}, L={self.geometry.L}, modes={len(self.coeffs)})"


def _grid_index(freqs, geometry):
    return tuple((np.asarray(freqs) % geometry.N).T)


def synthesize_coefficients(freqs, coeffs, geometry):
    """Grid values of ``sum_k c_k e^{i k.x/L}`` via one inverse FFT.

    `coeffs` may carry trailing batch dimensions, shape ``(m, ...)``.
    """
    geometry.check_frequencies(freqs)
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    arr = np.zeros(geometry.shape + coeffs.shape[1:], dtype=np.complex128)
    arr[_grid_index(freqs, geometry)] = coeffs
    axes = tuple(range(geometry.d))
    return np.fft.ifftn(arr, axes=axes) * geometry.N ** geometry.d


def adjoint_coefficients(values, freqs, geometry):
    """Adjoint of :func:`synthesize_coefficients`: ``sum_n conj(e^{i k.x_n/L}) g_n``."""
    axes = tuple(range(geometry.d))
    return np.fft.fftn(values, axes=axes)[_grid_index(freqs, geometry)]


def synthesize(f):
    """Sample `f` on its geometry's grid."""
    return synthesize_coefficients(f.freqs, f.coeffs, f.geometry)


def analyze(values, geometry, band, atol=0.0):
    """Recover the coefficients of grid samples on the band's lattice.

    Coefficients with modulus ``<= atol`` are dropped, so an all-zero grid
    yields an empty map.
    """
    values = np.asarray(values)
    if values.shape != geometry.shape:
        raise ValueError(f"values have shape {values.shape}, grid is {geometry.shape}")
    freqs = band.lattice_frequencies(geometry.L)
    geometry.check_frequencies(freqs)
    chat = np.fft.fftn(values) / geometry.N ** geometry.d
    coeffs = chat[_grid_index(freqs, geometry)] if freqs.shape[0] else np.zeros(0, complex)
    keep = np.abs(coeffs) > atol
    return BandLimitedFunction(geometry, freqs[keep], coeffs[keep], band)


def _weights_of(mask):
    if mask is None:
        return None
    return np.asarray(getattr(mask, "indicator", mask), dtype=float)


def lp_norm(values, geometry, p, mask=None):
    """Riemann-sum ``L^p`` norm on the grid, optionally restricted to a set.

    `mask` is a :class:`~uncertainty_lab.sets.GridSet` or an array of cell
    weights in ``[0, 1]``. ``p = inf`` gives the maximum of ``|values|`` over
    cells with positive weight.
    """
    p = float(p)
    if p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    mod = np.abs(values)
    w = _weights_of(mask)
    if math.isinf(p):
        if w is None:
            return float(mod.max())
        sel = w > 0
        return float(mod[sel].max()) if np.any(sel) else 0.0
    integrand = mod ** p if w is None else w * mod ** p
    return float((integrand.sum() * geometry.cell_volume) ** (1.0 / p))


def derivative_multiplier(freqs, alpha, L):
    freqs = np.atleast_2d(freqs)
    mult = np.ones(freqs.shape[0], dtype=np.complex128)
    for j, a in enumerate(alpha):
        if a:
            mult *= (1j * freqs[:, j] / L) ** int(a)
    return mult


def partial_derivative(f, alpha):
    """``d^alpha f``: each coefficient gets the factor ``prod_j (i k_j / L)^{alpha_j}``."""
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    if len(alpha) != f.geometry.d or min(alpha) < 0:
        raise ValueError(f"multi-index {alpha} invalid for d={f.geometry.d}")
    return f.with_coeffs(f.coeffs * derivative_multiplier(f.freqs, alpha, f.geometry.L))


ENSEMBLES = ("complex-gaussian", "unit-sphere")


def random_band_limited(band, geometry, seed, ensemble="complex-gaussian", normalize=None):
    """Random function with i.i.d. coefficients on every lattice point of `band`.

    ``complex-gaussian`` draws standard complex normals. ``unit-sphere`` draws
    the same and rescales so that ``||f||_{L^2(T^d_L)} = 1``; `normalize`
    overrides that choice for either ensemble.
    """
    if ensemble not in ENSEMBLES:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    freqs = band.lattice_frequencies(geometry.L)
    if freqs.shape[0] == 0:
        raise ValueError("band contains no lattice frequency")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m = freqs.shape[0]
    coeffs = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / math.sqrt(2)
    if normalize is None:
        normalize = ensemble == "unit-sphere"
    if normalize:
        coeffs /= np.linalg.norm(coeffs) * math.sqrt(geometry.volume)
    return BandLimitedFunction(geometry, freqs, coeffs, band)


def modulate(f, c):
    """Multiply by ``exp(i (c / L) . x)``, which shifts every index by the lattice vector `c`."""
    c = np.atleast_1d(np.asarray(c, dtype=np.int64))
    if c.shape != (f.geometry.d,):
        raise ValueError(f"shift {c} does not match d={f.geometry.d}")
    freqs = f.freqs + c[None, :]
    f.geometry.check_frequencies(freqs)
    band = None if f.band is None else f.band.translate(c / f.geometry.L)
    return BandLimitedFunction(f.geometry, freqs, f.coeffs, band)


def dumps(f):
    """Text form: header lines ``d``, ``L``, ``N`` then ``k_1 ... k_d re im`` per coefficient."""
    g = f.geometry
    lines = [f"d {g.d}", f"L {g.L!r}", f"N {g.N}"]
    for k, c in zip(f.freqs, f.coeffs):
        ks = " ".join(str(int(x)) for x in k)
        lines.append(f"{ks} {float(c.real)!r} {float(c.imag)!r}")
    return "\n".join(lines) + "\n"


def loads(text, band=None):
    header = {}
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in ("d", "L", "N") and len(header) < 3 and parts[0] not in header:
            header[parts[0]] = parts[1]
            continue
        rows.append(parts)
    try:
        geometry = TorusGeometry(int(header["d"]), float(header["L"]), int(header["N"]))
    except KeyError as exc:
        raise ValueError(f"missing header line {exc.args[0]!r}") from None
    d = geometry.d
    freqs = np.array([[int(x) for x in r[:d]] for r in rows], dtype=np.int64).reshape(-1, d)
    coeffs = np.array([complex(float(r[d]), float(r[d + 1])) for r in rows], dtype=np.complex128)
    return BandLimitedFunction(geometry, freqs, coeffs, band)
