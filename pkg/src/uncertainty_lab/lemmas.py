"""Numerical checks of the analytic tools behind the spectral inequalities.

Every check evaluates both sides of an inequality for a concrete instance and
reports them together with a log-space slack, ``log(rhs) - log(lhs)``. Sup
norms are taken over dense deterministic samples, so each check documents its
mesh in ``details``. Checks that compare against an unconditional theorem pass
when ``log(lhs) <= log(rhs) + SAMPLING_SLACK``.
"""

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import kernels
from .errors import SeparationError
from .sets import cube_membership, unit_sphere_area
from .torus import (
    BandLimitedFunction,
    BandSpec,
    derivative_multiplier,
    lp_norm,
    modulate,
    synthesize,
    synthesize_coefficients,
)

TURAN_CONSTANT = 316.0
REMEZ_CONSTANT = 12.0
SAMPLING_SLACK = 1e-6
ALPHA_MAX = 12
TAYLOR_ORDER_BUDGET = 24
PROJECTION_CONSTANT = 6.0


def segment_constant(d):
    """``sigma_{d-1} d^{d/2}``: the line-segment density loss in a unit cube."""
    return unit_sphere_area(d) * d ** (d / 2)


def level_set_constant(d):
    """The constant ``C`` used when the level-set lemma is applied on a unit cube."""
    return REMEZ_CONSTANT * segment_constant(d)


def _log(x):
    return math.log(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class InequalityCheck:
    """Both sides of ``lhs <= rhs`` for one instance.

    `passed` is None when the instance violates a hypothesis, in which case
    no verdict is given.
    """

    lemma: str
    lhs: float
    rhs: float
    passed: bool | None
    hypothesis_ok: bool = True
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        """``log(rhs) - log(lhs)``; nonnegative exactly when the inequality holds."""
        if self.lhs == 0:
            return math.inf
        return _log(self.rhs) - _log(self.lhs)


def _verdict(log_lhs, log_rhs):
    return bool(log_lhs <= log_rhs + SAMPLING_SLACK)


# ---------------------------------------------------------------- intervals

def merge_intervals(intervals):
    """Sorted, disjoint closed intervals covering the union of the input."""
    out = []
    for lo, hi in sorted((float(a), float(b)) for a, b in intervals):
        if hi < lo:
            raise ValueError(f"interval ({lo}, {hi}) is reversed")
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def intervals_measure(intervals):
    return sum(hi - lo for lo, hi in merge_intervals(intervals))


def sample_intervals(intervals, per_unit):
    """Equispaced samples with both endpoints on every interval, at least `per_unit` per unit length."""
    pts = []
    for lo, hi in merge_intervals(intervals):
        n = max(int(math.ceil((hi - lo) * per_unit)) + 1, 2)
        pts.append(np.linspace(lo, hi, n))
    return np.concatenate(pts) if pts else np.zeros(0)


def _check_inside(A, I):
    lo, hi = I
    for a, b in merge_intervals(A):
        if a < lo - 1e-12 or b > hi + 1e-12:
            raise ValueError(f"subinterval ({a}, {b}) is not inside I = ({lo}, {hi})")


# ---------------------------------------------------------- exponential sums

@dataclass(frozen=True, eq=False)
class ExponentialSum:
    """``r(x) = sum_k p_k(x) exp(i lambda_k x)`` with polynomials of degree at most ``m - 1``.

    ``poly[k]`` holds the ascending coefficients of ``p_k``.
    """

    poly: np.ndarray
    lambdas: np.ndarray

    def __post_init__(self):
        poly = np.atleast_2d(np.asarray(self.poly, dtype=np.complex128))
        lam = np.atleast_1d(np.asarray(self.lambdas, dtype=np.complex128))
        if poly.shape[0] != lam.shape[0]:
            raise ValueError("one polynomial per frequency is required")
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def from_terms(cls, terms):
        """Build from ``[(coefficients, lambda), ...]``; shorter coefficient lists are zero-padded."""
        m = max(len(c) for c, _ in terms)
        poly = np.zeros((len(terms), m), dtype=np.complex128)
        for k, (c, _) in enumerate(terms):
            poly[k, :len(c)] = c
        return cls(poly, [lam for _, lam in terms])

    @property
    def n(self):
        return self.poly.shape[0]

    @property
    def m(self):
        return self.poly.shape[1]

    def __call__(self, x):
        x = np.asarray(x)
        return kernels.poly_expsum_eval(x, self.poly, self.lambdas).reshape(x.shape)


def remez_check(phi, z0, interval, A, n_circle=4096, per_unit=20000):
    """Remez-type bound for an analytic `phi` near the real point `z0`.

    ``M`` is the largest modulus over `n_circle` samples of ``|z - z0| = 4``,
    and the bound reads ``sup_I |phi| <= (12/|A|)^{2 log M / log 2} sup_A |phi|``.
    `interval` must have unit length, contain `z0`, and lie in
    ``[z0 - 1, z0 + 1]``. If ``|phi(z0)| < 1`` the hypothesis is flagged and
    no verdict is returned.
    """
    lo, hi = map(float, interval)
    if abs((hi - lo) - 1.0) > 1e-12:
        raise ValueError(f"I must have unit length, got {hi - lo}")
    if not lo - 1e-12 <= z0 <= hi + 1e-12:
        raise ValueError(f"z0={z0} is not in I")
    _check_inside(A, (lo, hi))
    measure = intervals_measure(A)
    if measure <= 0:
        raise ValueError("A must have positive measure")
    v0 = float(np.abs(phi(np.array([complex(z0)])))[0])
    details = {"z0": float(z0), "I": (lo, hi), "measure_A": measure, "phi_z0": v0,
               "n_circle": n_circle, "per_unit": per_unit}
    theta = 2 * np.pi * np.arange(n_circle) / n_circle
    M = max(float(np.abs(phi(z0 + 4 * np.exp(1j * theta))).max()), v0)
    lhs = float(np.abs(phi(sample_intervals([(lo, hi)], per_unit))).max())
    sup_a = float(np.abs(phi(sample_intervals(A, per_unit))).max())
    exponent = 2 * math.log(M) / math.log(2) if M > 0 else 0.0
    details.update(M=M, exponent=exponent, sup_A=sup_a)
    log_rhs = exponent * math.log(REMEZ_CONSTANT / measure) + _log(sup_a)
    rhs = math.exp(min(log_rhs, 700.0))
    if v0 < 1:
        return InequalityCheck("remez", lhs, rhs, None, False, details)
    return InequalityCheck("remez", lhs, rhs, _verdict(_log(lhs), log_rhs), True, details)


def turan_check(r, interval, A, per_unit=10000):
    """Turan-type bound ``||r||_I <= (316 |I| / |A|)^{nm-1} e^{|I| max |Im lambda|} ||r||_A``.

    The exponential factor is 1 for real frequencies; without it the bound
    fails for complex frequencies already when ``n = m = 1``.
    """
    lo, hi = map(float, interval)
    if hi <= lo:
        raise ValueError("I must have positive length")
    _check_inside(A, (lo, hi))
    measure = intervals_measure(A)
    if measure <= 0:
        raise ValueError("A must have positive measure")
    length = hi - lo
    lhs = float(np.abs(r(sample_intervals([(lo, hi)], per_unit))).max())
    sup_a = float(np.abs(r(sample_intervals(A, per_unit))).max())
    exponent = r.n * r.m - 1
    growth = length * float(np.abs(r.lambdas.imag).max())
    log_rhs = exponent * math.log(TURAN_CONSTANT * length / measure) + growth + _log(sup_a)
    details = {"n": r.n, "m": r.m, "exponent": exponent, "measure_A": measure, "length_I": length,
               "sup_A": sup_a, "growth": growth, "per_unit": per_unit}
    rhs = math.exp(min(log_rhs, 700.0))
    return InequalityCheck("turan", lhs, rhs, _verdict(_log(lhs), log_rhs), True, details)


# ---------------------------------------------------------------- level sets

@dataclass(frozen=True, eq=False)
class LevelSetInstance:
    """Samples of ``f`` on a unit-measure domain ``Lambda`` with cell weights summing to 1.

    `U` is a weight array in ``[0, 1]`` (a boolean mask is accepted), giving
    the covered fraction of each cell.
    """

    values: np.ndarray
    weights: np.ndarray
    U: np.ndarray
    Q: float = 0.0
    C: float = 1.0
    alpha: float = 1.0
    p: float = 2.0
    q: float = 2.0

    def __post_init__(self):
        vals = np.abs(np.asarray(self.values)).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        u = np.asarray(self.U, dtype=float).ravel()
        if not (vals.shape == w.shape == u.shape):
            raise ValueError("values, weights and U must have the same size")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"domain weights must be nonnegative and sum to 1, got {w.sum()}")
        if np.any(u < 0) or np.any(u > 1):
            raise ValueError("U weights must lie in [0, 1]")
        if not float((w * u).sum()) > 0:
            raise ValueError("U must have positive measure")
        if self.Q < 0 or self.C < 1 or self.alpha < 1:
            raise ValueError("need Q >= 0, C >= 1 and alpha >= 1")
        if not (1 <= self.q <= self.p and math.isfinite(self.q)):
            raise ValueError(f"need 1 <= q <= p and q finite, got q={self.q}, p={self.p}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "U", u)

    def norm(self, r):
        if math.isinf(r):
            return float(self.values[self.weights > 0].max())
        return float((self.weights * self.values ** r).sum() ** (1.0 / r))


@dataclass(frozen=True)
class LevelSetResult:
    W: np.ndarray
    W_measure: float
    eps: float
    vacuous: bool
    W_bound_ok: bool | None
    lhs: float
    rhs: float
    passed: bool | None

    @property
    def slack(self):
        """``log(lhs) - log(rhs)``: the conclusion is a lower bound on `lhs`."""
        if self.rhs == 0:
            return math.inf
        return _log(self.lhs) - _log(self.rhs)


def level_set_apply(inst):
    """Build the exceptional set ``W`` and test the level-set conclusion.

    ``W = {|f| + Q < (eps / C)^alpha ||f||_p}`` with ``eps = C |U| / (1 + C)``.
    The conclusion is ``|W| <= eps`` and
    ``int_U (|f| + Q)^q >= (|U| / (1 + C))^{q alpha + 1} ||f||_q^q``. If
    either hypothesis fails the instance is vacuous and no verdict is given.
    """
    f, w, u = inst.values, inst.weights, inst.U
    norm_p = inst.norm(inst.p)
    U_meas = float((w * u).sum())
    eps = inst.C / (1 + inst.C) * U_meas
    W = f + inst.Q < (eps / inst.C) ** inst.alpha * norm_p
    W_meas = float(w[W].sum())
    sup_U = float(f[u > 0].max())
    hyp1 = sup_U + inst.Q >= (U_meas / inst.C) ** inst.alpha * norm_p
    if W_meas > 0:
        hyp2 = float(f[W].max()) + inst.Q >= (W_meas / inst.C) ** inst.alpha * norm_p
    else:
        hyp2 = True
    q = inst.q
    lhs = float((w * u * (f + inst.Q) ** q).sum())
    rhs = (U_meas / (1 + inst.C)) ** (q * inst.alpha + 1) * float((w * f ** q).sum())
    if not (hyp1 and hyp2):
        return LevelSetResult(W, W_meas, eps, True, None, lhs, rhs, None)
    w_ok = W_meas <= eps * (1 + 1e-12)
    ok = w_ok and (rhs == 0 or _log(lhs) >= _log(rhs) - SAMPLING_SLACK)
    return LevelSetResult(W, W_meas, eps, False, w_ok, lhs, rhs, bool(ok))


# ------------------------------------------------------- multi-index helpers

def multi_indices(d, order):
    """All ``alpha`` in ``N_0^d`` with ``|alpha| = order``, in lexicographic order."""
    if d == 1:
        return [(order,)]
    out = []
    for a in range(order, -1, -1):
        out.extend((a,) + rest for rest in multi_indices(d - 1, order - a))
    return out


def multi_indices_up_to(d, max_order, start=1):
    return [a for k in range(start, max_order + 1) for a in multi_indices(d, k)]


def _factorial_multi(alpha):
    return math.prod(math.factorial(a) for a in alpha)


def _power_multi(b, alpha):
    return math.prod(float(bj) ** a for bj, a in zip(b, alpha))


def _half_widths(f, b=None):
    if b is not None:
        return np.broadcast_to(np.asarray(b, dtype=float), (f.geometry.d,)).copy()
    if f.freqs.shape[0] == 0:
        return np.zeros(f.geometry.d)
    return np.abs(f.freqs).max(axis=0) / f.geometry.L


def _grid_derivatives(f, alphas, chunk=16):
    """Yield ``(alpha, grid values of d^alpha f)`` in chunks to bound memory."""
    for start in range(0, len(alphas), chunk):
        block = alphas[start:start + chunk]
        mults = np.stack([derivative_multiplier(f.freqs, a, f.geometry.L) for a in block], axis=1)
        vals = synthesize_coefficients(f.freqs, f.coeffs[:, None] * mults, f.geometry)
        for i, a in enumerate(block):
            yield a, vals[..., i]


def _point_derivatives(f, points, alphas):
    """``d^alpha f`` at real or complex `points` (shape ``(P, d)``), one column per alpha."""
    omegas = f.physical_freqs
    E = np.exp(1j * (np.asarray(points, dtype=np.complex128) @ omegas.T))
    mults = np.stack([derivative_multiplier(f.freqs, a, f.geometry.L) for a in alphas], axis=1)
    return E @ (f.coeffs[:, None] * mults)


def cube_quadrature(corner, n_per_axis):
    """Midpoint nodes of ``corner + [0, 1]^d`` and their (equal) weights."""
    corner = np.atleast_1d(np.asarray(corner, dtype=float))
    t = (np.arange(n_per_axis) + 0.5) / n_per_axis
    axes = [c + t for c in corner]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, corner.size)
    return pts, np.full(pts.shape[0], 1.0 / pts.shape[0])


_DEFAULT_QUAD = {1: 64, 2: 24, 3: 10}


# ----------------------------------------------------------------- Bernstein

def bernstein_ratio(f, alpha, p, b=None):
    """``||d^alpha f||_p / (b^alpha ||f||_p)`` on the torus grid.

    `b` defaults to the per-axis maximum of ``|k_j| / L`` over the support,
    so ``supp f^ in [-b, b]``. A derivative along an axis with ``b_j = 0``
    vanishes identically and gives ratio 0.
    """
    alpha = tuple(int(a) for a in np.atleast_1d(alpha))
    vals = synthesize(f)
    base = lp_norm(vals, f.geometry, p)
    if base == 0:
        raise ValueError("the zero function has no Bernstein ratio")
    b = _half_widths(f, b)
    scale = _power_multi(b, alpha)
    if scale == 0:
        return 0.0
    mult = derivative_multiplier(f.freqs, alpha, f.geometry.L)
    dvals = synthesize_coefficients(f.freqs, f.coeffs * mult, f.geometry)
    return lp_norm(dvals, f.geometry, p) / (scale * base)


# ------------------------------------------------------- good and bad cubes

def cube_corners(geometry):
    """Corners ``j`` with entries in ``{0, ..., ceil(2 pi L) - 1}``: the unit cubes covering the torus."""
    k = max(int(math.ceil(geometry.period - 1e-12)), 1)
    axes = [np.arange(k)] * geometry.d
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, geometry.d)


def _membership_matrix(geometry):
    k = max(int(math.ceil(geometry.period - 1e-12)), 1)
    return np.stack([cube_membership(geometry, [j])[0] for j in range(k)]).astype(float)


def _cube_reduce(arr, M, d, op="sum"):
    """Per-cube sums (or maxima) of a grid array, for cubes that are products of 1-d masks."""
    if op == "sum":
        if d == 1:
            return M @ arr
        if d == 2:
            return M @ arr @ M.T
        return np.einsum("ai,bj,ck,ijk->abc", M, M, M, arr, optimize=True)
    k = M.shape[0]
    out = np.empty((k,) * d)
    masks = [M[j] > 0 for j in range(k)]
    for idx in product(range(k), repeat=d):
        out[idx] = arr[np.ix_(*[masks[i] for i in idx])].max()
    return out


def bad_tail_bound(d, p, A, alpha_max=ALPHA_MAX):
    """Bound on the bad-cube mass fraction from multi-indices beyond `alpha_max`."""
    if math.isinf(p):
        return 0.0
    ratio = A ** (-p)
    total = (1 - ratio) ** (-d)
    head = sum(len(multi_indices(d, k)) * ratio ** k for k in range(alpha_max + 1))
    return max(total - head, 0.0) / 2 ** d


def bad_mass_bound(d, p, A):
    """The bad-cube mass fraction ``2^{-d} ((1 - A^{-p})^{-d} - 1)`` from the Bernstein argument."""
    if math.isinf(p):
        return 0.0
    return ((1 - A ** (-p)) ** (-d) - 1) / 2 ** d


@dataclass(frozen=True, eq=False)
class CubeClassification:
    """Good/bad labels for the unit cubes ``[0, 1]^d + j`` covering the torus.

    `norms` holds ``||f||^p_{L^p(cube)}`` per cube (the cube maximum for
    ``p = inf``); `total` is the same quantity on the whole torus.
    """

    corners: np.ndarray
    good: np.ndarray
    norms: np.ndarray
    total: float
    bad_mass: float
    A: float
    C_B: float
    b: np.ndarray
    p: float
    alpha_max: int
    tail_bound: float
    cell_slack: float

    @property
    def bad_fraction(self):
        return self.bad_mass / self.total if self.total > 0 else 0.0

    @property
    def bad_mass_ok(self):
        """Bad-cube mass at most half the total, up to one cell layer per cube face."""
        return self.bad_fraction <= 0.5 + self.cell_slack


def classify_cubes(f, p, A=3.0, C_B=1.0, b=None, alpha_max=ALPHA_MAX):
    """Label every unit cube good or bad by the amplified Bernstein thresholds.

    A cube is bad when some ``1 <= |alpha| <= alpha_max`` has
    ``||d^alpha f||_cube >= 2^{2d/p} A^{|alpha|} (C_B b)^alpha ||f||_cube``.
    Derivatives that vanish identically are never counted as violations.
    """
    g = f.geometry
    d = g.d
    p = float(p)
    ip = 0.0 if math.isinf(p) else 1.0 / p
    b = _half_widths(f, b)
    M = _membership_matrix(g)
    vals = np.abs(synthesize(f))
    op = "max" if math.isinf(p) else "sum"
    if op == "sum":
        fcube = _cube_reduce(vals ** p, M, d) * g.cell_volume
        fnorm = fcube ** ip
        total = float((vals ** p).sum() * g.cell_volume)
    else:
        fcube = _cube_reduce(vals, M, d, "max")
        fnorm = fcube
        total = float(vals.max())
    factor = 2.0 ** (2 * d) if op == "max" else 2.0 ** (2 * d * ip)
    scale = max(float(vals.max()), 1e-300)
    bad = np.zeros(fcube.shape, dtype=bool)
    alphas = multi_indices_up_to(d, alpha_max)
    for alpha, dv in _grid_derivatives(f, alphas):
        dmod = np.abs(dv)
        if float(dmod.max()) <= 1e-12 * scale * max(_power_multi(b, alpha), 1.0):
            continue
        if op == "sum":
            dn = (_cube_reduce(dmod ** p, M, d) * g.cell_volume) ** ip
        else:
            dn = _cube_reduce(dmod, M, d, "max")
        thr = factor * A ** sum(alpha) * _power_multi(C_B * b, alpha) * fnorm
        bad |= dn >= thr
    corners = cube_corners(g)
    good = ~bad.reshape(-1)
    union = np.zeros(g.shape, dtype=bool)
    for j in np.flatnonzero(~good):
        masks = cube_membership(g, corners[j])
        one = np.ones((), dtype=bool)
        for mk in masks:
            one = np.logical_and.outer(one, mk)
        union |= one
    if op == "sum":
        bad_mass = float((vals[union] ** p).sum() * g.cell_volume)
    else:
        bad_mass = float(vals[union].max()) if union.any() else 0.0
    return CubeClassification(
        corners=corners, good=good, norms=fcube.reshape(-1), total=total, bad_mass=bad_mass,
        A=float(A), C_B=float(C_B), b=b, p=p, alpha_max=int(alpha_max),
        tail_bound=bad_tail_bound(d, p, A, alpha_max), cell_slack=2 * d * g.spacing,
    )


@dataclass(frozen=True)
class TaylorBoundResult:
    x_star: np.ndarray | None
    inconclusive: bool
    max_modulus: float
    bound: float
    local_norm: float
    passed: bool | None


def good_cube_taylor_bound(f, corner, p, B=9.0, C_B=1.0, b=None, alpha_max=ALPHA_MAX,
                           n_quad=None, n_circle=None):
    """Find a point of the cube obeying the pointwise derivative claim, then bound ``f`` on a polydisc.

    The claim at ``x`` is ``|d^alpha f(x)| <= 2^{3d/p} B^{|alpha|} (C_B b)^alpha ||f||_{L^p(cube)}``
    for all ``|alpha| <= alpha_max``. The polydisc is the product of discs of
    radius 4.5 about the cube centre, sampled on its distinguished boundary,
    where ``|f|`` is maximal. The bound is ``2^{3d/p} exp(5 B C_B |b|_1) ||f||_{L^p(cube)}``.
    """
    d = f.geometry.d
    p = float(p)
    ip = 0.0 if math.isinf(p) else 1.0 / p
    corner = np.atleast_1d(np.asarray(corner, dtype=float))
    b = _half_widths(f, b)
    pts, w = cube_quadrature(corner, n_quad or _DEFAULT_QUAD[d])
    alphas = [(0,) * d] + multi_indices_up_to(d, alpha_max)
    D = np.abs(_point_derivatives(f, pts, alphas))
    local = float(D[:, 0].max()) if ip == 0 else float((w * D[:, 0] ** p).sum() ** ip)
    pref = 2.0 ** (3 * d * ip)
    thr = np.array([pref * B ** sum(a) * _power_multi(C_B * b, a) for a in alphas]) * local
    ok = np.all(D <= thr[None, :] * (1 + 1e-12) + 1e-12 * max(local, 1e-300), axis=1)
    log_bound = math.log(pref) + 5 * B * C_B * float(b.sum()) + _log(local)
    bound = math.exp(min(log_bound, 700.0))
    if not ok.any():
        return TaylorBoundResult(None, True, math.nan, bound, local, None)
    x_star = pts[int(np.flatnonzero(ok)[0])]
    nc = n_circle or {1: 512, 2: 96, 3: 32}[d]
    theta = 2 * np.pi * np.arange(nc) / nc
    circles = [c + 0.5 + 4.5 * np.exp(1j * theta) for c in corner]
    zs = np.stack(np.meshgrid(*circles, indexing="ij"), axis=-1).reshape(-1, d)
    mod = float(np.abs(f(zs)).max())
    return TaylorBoundResult(x_star, False, mod, bound, local, _verdict(_log(mod), log_bound))


# -------------------------------------------------- spectral decomposition

def _box_lattice(band, l, L):
    return band.box_frequencies(l, L)


def decompose_spectrum(f, band=None):
    """Split ``f = sum_l f_l e^{i c_l . x}`` along the separated boxes of `band`.

    ``c_l`` is the lattice point of box ``l`` nearest its centre (returned as
    the integer index, the frequency being ``c_l / L``), and each ``f_l`` is
    supported in ``[-b, b]`` where ``b`` are the box sides. Boxes must be
    separated by more than ``2 b_j`` in every coordinate.
    """
    band = band if band is not None else f.band
    if band is None:
        raise ValueError("a band is required to decompose the spectrum")
    L = f.geometry.L
    sides = band.sides
    for l in range(band.n):
        for k in range(l + 1, band.n):
            gap = np.abs(band.centers[l] - band.centers[k])
            if not np.all(gap > 2 * sides):
                raise SeparationError(
                    f"boxes {l} and {k} are separated by {gap.tolist()}, need more than {(2 * sides).tolist()}"
                )
    assigned = np.zeros(f.freqs.shape[0], dtype=bool)
    half = BandSpec.symmetric(sides)
    pieces = []
    for l in range(band.n):
        one = BandSpec(band.centers[l:l + 1], sides)
        members = one.contains(f.freqs, L) if f.freqs.shape[0] else np.zeros(0, bool)
        lattice = _box_lattice(band, l, L)
        target = L * band.centers[l]
        if lattice.shape[0]:
            c = lattice[int(np.argmin(np.abs(lattice - target).sum(axis=1)))]
        else:
            c = np.round(target).astype(np.int64)
        shifted = BandLimitedFunction(f.geometry, f.freqs[members] - c[None, :], f.coeffs[members], half)
        pieces.append((shifted, np.asarray(c, dtype=np.int64)))
        assigned |= members
    if not np.all(assigned):
        raise ValueError("some coefficients lie outside every box of the band")
    return pieces


@dataclass(frozen=True)
class DecompositionReport:
    reconstruction_error: float
    ratios: tuple
    bound: float

    @property
    def passed(self):
        return self.reconstruction_error <= 1e-10 and max(self.ratios) <= self.bound


def check_decomposition(f, pieces, p):
    """Reconstruction error on the grid and piece norms relative to ``||f||_p``."""
    g = f.geometry
    vals = synthesize(f)
    total = np.zeros_like(vals)
    for fl, c in pieces:
        total += synthesize(modulate(fl, c))
    base = lp_norm(vals, g, p)
    ratios = tuple(lp_norm(synthesize(fl), g, p) / base for fl, _ in pieces)
    err = float(np.abs(total - vals).max())
    return DecompositionReport(err, ratios, PROJECTION_CONSTANT ** g.d)


def multiplier_l1_norm(d=1, n=1 << 16):
    """Normalised ``L^1`` norm of ``prod_j (1 + 2 cos x_j)``, the kernel with symbol ``1`` on ``{-1, 0, 1}^d``.

    Computed with the composite midpoint rule on a period; the norm of a
    product kernel is the product of the 1-d norms.
    """
    x = 2 * np.pi * (np.arange(n) + 0.5) / n
    return float(np.abs(1 + 2 * np.cos(x)).mean()) ** d


# ---------------------------------------------------------- Taylor majorant

def _as_functions(pieces):
    return [pc[0] if isinstance(pc, tuple) else pc for pc in pieces]


def taylor_majorant(pieces, corner, m, n_quad=None, max_order=TAYLOR_ORDER_BUDGET):
    """``M = (1/m!) sum_l sum_{|alpha|=m} (m!/alpha!) sum_{beta in {0,1}^d} ||d^{alpha+beta} f_l||_{L^1(cube)}``.

    `pieces` holds the ``f_l`` (or ``(f_l, c_l)`` pairs from
    :func:`decompose_spectrum`); the ``L^1`` norms use midpoint quadrature.
    """
    fs = _as_functions(pieces)
    d = fs[0].geometry.d
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if m + d > max_order:
        raise ValueError(f"order m + d = {m + d} exceeds the derivative budget {max_order}")
    pts, w = cube_quadrature(corner, n_quad or _DEFAULT_QUAD[d])
    alphas = multi_indices(d, int(m))
    betas = list(product((0, 1), repeat=d))
    combos = [tuple(a + bb for a, bb in zip(al, be)) for al in alphas for be in betas]
    weights = np.array([1.0 / _factorial_multi(al) for al in alphas for _ in betas])
    total = 0.0
    for fl in fs:
        if fl.freqs.shape[0] == 0:
            continue
        D = np.abs(_point_derivatives(fl, pts, combos))
        total += float(weights @ (w @ D))
    return total


def local_estimate_check(f, pieces, S, corner, m, n_quad=None, turan_constant=TURAN_CONSTANT):
    """Local sup bound on one unit cube from the Turan lemma and the Taylor remainder.

    Checks ``||f||_{L^inf(cube)} <= X^{nm-1} ||f||_{L^inf(cube cap S)} + (X^{nm-1} + 1) M``
    with ``X = C_3 sigma_{d-1} d^{d/2} / |S cap cube|``. The compact form with
    ``C_4^d = 2 C_3 sigma_{d-1} d^{d/2}`` is reported in ``details``.
    """
    g = f.geometry
    d = g.d
    corner = np.atleast_1d(np.asarray(corner, dtype=float))
    masks = cube_membership(g, corner)
    sub = np.abs(synthesize(f))[np.ix_(*masks)]
    cover = S.indicator[np.ix_(*masks)]
    measure = float(cover.sum() * g.cell_volume)
    if measure <= 0:
        raise ValueError("S does not meet the cube")
    n = len(pieces)
    e = n * int(m) - 1
    M = taylor_majorant(pieces, corner, m, n_quad)
    lhs = float(sub.max())
    sup_s = float(sub[cover > 0].max())
    log_x = math.log(turan_constant * segment_constant(d) / measure)
    log_rhs = float(np.logaddexp(e * log_x + _log(sup_s), np.logaddexp(e * log_x, 0.0) + _log(M)))
    compact = e * (log_x + math.log(2)) + _log(sup_s + M)
    details = {"n": n, "m": int(m), "exponent": e, "measure": measure, "majorant": M,
               "sup_S": sup_s, "log_compact_rhs": compact}
    rhs = math.exp(min(log_rhs, 700.0))
    return InequalityCheck("local-estimate", lhs, rhs, _verdict(_log(lhs), log_rhs), True, details)


# ---------------------------------------------------------- order selection

def choose_taylor_order(gamma, b_l1, n, d, C_B=1.0, C_7=10.0):
    """``m = ceil(2 e C_B (C_7^d / gamma)^n |b|_1)``, at least 1."""
    return max(1, int(math.ceil(2 * math.e * C_B * (C_7 ** d / gamma) ** n * b_l1)))


def taylor_order_log_factor(m, gamma, b_l1, n, d, p, C_B=1.0, C_7=10.0):
    """Log of ``|b|_1^{mp} e^{p C_B |b|_1} (C_7^d / gamma)^{pnm} / m^{mp}``, which must not exceed ``log(1/2)``."""
    if b_l1 == 0:
        return -math.inf
    return (m * p * math.log(b_l1) + p * C_B * b_l1 + p * n * m * math.log(C_7 ** d / gamma)
            - m * p * math.log(m))
