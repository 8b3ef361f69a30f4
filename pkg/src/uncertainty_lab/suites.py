"""Seeded random instances for every lemma check, one row per instance.

Each generator takes an integer seed and returns a :class:`LemmaRow`. The
same seed always yields the same instance, so suite CSVs are reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .concentration import thick_ball_union
from .lemmas import (
    ExponentialSum,
    LevelSetInstance,
    bernstein_ratio,
    check_decomposition,
    classify_cubes,
    decompose_spectrum,
    good_cube_taylor_bound,
    level_set_apply,
    level_set_constant,
    local_estimate_check,
    remez_check,
    turan_check,
)
from .sets import best_line_segment, cube_membership
from .torus import BandLimitedFunction, BandSpec, TorusGeometry, random_band_limited, synthesize

LEMMA_CSV_HEADER = "lemma,seed,params,lhs,rhs,slack,pass"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return "/".join(_fmt(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class LemmaRow:
    lemma: str
    seed: int
    params: dict
    lhs: float
    rhs: float
    slack: float
    passed: bool | None

    @property
    def key(self):
        return (self.lemma, self.seed)

    def csv_row(self):
        params = ";".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        verdict = "NA" if self.passed is None else ("1" if self.passed else "0")
        return ",".join([self.lemma, str(self.seed), params, _fmt(float(self.lhs)), _fmt(float(self.rhs)),
                         _fmt(float(self.slack)), verdict])


def _random_subintervals(rng, lo, hi, min_measure=0.05, max_pieces=3):
    """Up to `max_pieces` disjoint subintervals of ``[lo, hi]`` with total length at least `min_measure`."""
    length = hi - lo
    k = int(rng.integers(1, max_pieces + 1))
    cuts = np.sort(rng.uniform(lo, hi, size=2 * k))
    pieces = [(cuts[2 * i], cuts[2 * i + 1]) for i in range(k)]
    total = sum(b - a for a, b in pieces)
    if total < min_measure:
        start = rng.uniform(lo, hi - min_measure * 1.5) if length > min_measure * 1.5 else lo
        pieces.append((start, min(start + min_measure * 1.5, hi)))
    return pieces


def turan_instance(seed):
    rng = np.random.default_rng([seed, 1])
    n = int(rng.integers(1, 5))
    m = int(rng.integers(1, 4))
    length = float(rng.uniform(0.5, 2.0))
    poly = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    lambdas = rng.uniform(-20, 20, size=n)
    r = ExponentialSum(poly, lambdas)
    A = _random_subintervals(rng, 0.0, length)
    chk = turan_check(r, (0.0, length), A)
    params = {"n": n, "m": m, "I": length, "A": chk.details["measure_A"]}
    return LemmaRow("turan", seed, params, chk.lhs, chk.rhs, chk.slack, chk.passed)


def remez_instance(seed):
    rng = np.random.default_rng([seed, 2])
    z0 = float(rng.uniform(-1, 1))
    kind = "exponential" if rng.random() < 0.5 else "polynomial"
    while True:
        if kind == "exponential":
            k = int(rng.integers(1, 4))
            coeffs = rng.standard_normal((k, 1)) + 1j * rng.standard_normal((k, 1))
            phi = ExponentialSum(coeffs, rng.uniform(-3, 3, size=k))
        else:
            deg = int(rng.integers(0, 5))
            coeffs = rng.standard_normal((1, deg + 1)) + 1j * rng.standard_normal((1, deg + 1))
            phi = ExponentialSum(coeffs, [0.0])
        v0 = abs(complex(phi(np.array([z0]))[0]))
        if v0 > 1e-3:
            break
    scale = float(rng.uniform(1.0, 3.0)) / v0
    phi = ExponentialSum(phi.poly * scale, phi.lambdas)
    s = float(rng.uniform(0, 1))
    I = (z0 - s, z0 - s + 1.0)
    A = _random_subintervals(rng, *I)
    chk = remez_check(phi, z0, I, A)
    params = {"kind": kind, "z0": z0, "A": chk.details["measure_A"], "M": chk.details["M"]}
    return LemmaRow("remez", seed, params, chk.lhs, chk.rhs, chk.slack, chk.passed)


def _unwrap(x, corner, period):
    return corner + (x - corner) % period


def level_set_instance(seed):
    """Random band-limited ``f`` on a unit cube, ``U = S cap cube`` for a thick ball union.

    ``C`` is the level-set constant of the dimension and ``alpha`` the
    doubling exponent ``2 log M / log 2`` of ``f`` along the densest segment
    through its maximum.
    """
    rng = np.random.default_rng([seed, 3])
    d = int(rng.integers(1, 3))
    L = float(rng.choice([1.0, 2.0]))
    b = float(rng.uniform(0.5, 2.0))
    band = BandSpec.symmetric([b] * d)
    kmax = int(math.floor(b * L))
    g = TorusGeometry.fitting(d, L, kmax, points_per_unit=16 if d == 1 else 8)
    f = random_band_limited(band, g, rng)
    q_cells = int(round(g.period))
    a = g.period / q_cells
    gamma = float(rng.uniform(0.1, 0.5) if d == 1 else rng.uniform(0.05, 0.19))
    S = thick_ball_union(gamma, a, g, "seeded-random", int(rng.integers(1 << 30)), coverage="center")
    corner = rng.integers(0, int(math.ceil(g.period))).astype(float) * np.ones(d)
    masks = cube_membership(g, corner)
    vals = synthesize(f)[np.ix_(*masks)]
    U = S.indicator[np.ix_(*masks)]
    p = float(rng.choice([1.0, 2.0, 4.0]))
    q = float(rng.uniform(1.0, p))
    weights = np.full(vals.shape, 1.0 / vals.size)
    norm_p = float((weights * np.abs(vals) ** p).sum() ** (1 / p))
    flat = int(np.argmax(np.abs(vals)))
    idx = np.unravel_index(flat, vals.shape)
    axis = g.axis()
    y0 = np.array([_unwrap(axis[np.flatnonzero(masks[j])[idx[j]]], corner[j], g.period) for j in range(d)])
    y0 = np.clip(y0, corner, corner + 1)
    seg = best_line_segment(S, y0, corner) if U.sum() > 0 else None
    if seg is None:
        return LemmaRow("level-set", seed, {"d": d, "L": L, "empty_U": 1}, 0.0, 0.0, math.nan, None)
    theta = 2 * np.pi * np.arange(4096) / 4096
    zs = y0[None, :] + (4 * np.exp(1j * theta))[:, None] * seg.length * seg.direction[None, :]
    M = max(float(np.abs(f(zs)).max()) / norm_p, 1.0)
    alpha = max(1.0, 2 * math.log(M) / math.log(2))
    C = level_set_constant(d)
    inst = LevelSetInstance(vals, weights, U, Q=0.0, C=C, alpha=alpha, p=p, q=q)
    res = level_set_apply(inst)
    params = {"d": d, "L": L, "b": b, "gamma": gamma, "p": p, "q": q, "alpha": alpha,
              "U": float((weights * U).sum()), "W": res.W_measure, "vacuous": res.vacuous}
    return LemmaRow("level-set", seed, params, res.lhs, res.rhs, res.slack, res.passed)


def bernstein_instance(seed):
    rng = np.random.default_rng([seed, 4])
    d = int(rng.integers(1, 4))
    L = float(rng.choice([1.0, 2.0]))
    b = rng.uniform(0.3, 2.0, size=d)
    band = BandSpec.symmetric(b)
    g = TorusGeometry.fitting(d, L, int(math.floor(b.max() * L)))
    f = random_band_limited(band, g, rng)
    order = int(rng.integers(1, 5))
    alpha = tuple(int(x) for x in rng.multinomial(order, [1 / d] * d))
    ratio = bernstein_ratio(f, alpha, 2.0, b=b)
    params = {"d": d, "L": L, "alpha": alpha, "p": 2.0}
    return LemmaRow("bernstein", seed, params, ratio, 1.0, -math.log(ratio) if ratio > 0 else math.inf,
                    bool(ratio <= 1 + 1e-9))


def bad_mass_instance(seed):
    rng = np.random.default_rng([seed, 5])
    d = int(rng.integers(1, 3))
    L = float(rng.choice([1.0, 2.0, 4.0]))
    b = float(rng.uniform(0.5, 3.0))
    p = float(rng.choice([1.0, 2.0, 4.0]))
    band = BandSpec.symmetric([b] * d)
    g = TorusGeometry.fitting(d, L, int(math.floor(b * L)), points_per_unit=16 if d == 1 else 8)
    f = random_band_limited(band, g, rng)
    cls = classify_cubes(f, p, A=3.0, C_B=1.0, b=[b] * d)
    lhs = cls.bad_fraction
    rhs = 0.5 + cls.cell_slack
    params = {"d": d, "L": L, "b": b, "p": p, "bad": int((~cls.good).sum()), "cubes": int(cls.good.size)}
    slack = math.log(rhs) - math.log(lhs) if lhs > 0 else math.inf
    return LemmaRow("bad-mass", seed, params, lhs, rhs, slack, bool(lhs <= rhs))


def decomposition_instance(seed):
    rng = np.random.default_rng([seed, 6])
    d = int(rng.integers(1, 3))
    n = int(rng.integers(1, 4))
    L = float(rng.choice([1.0, 2.0]))
    sides = rng.uniform(max(0.5, 1 / L), 1.5, size=d)
    gaps = 2 * sides + rng.uniform(0.2, 1.0, size=(n, d))
    centers = np.cumsum(gaps, axis=0) - gaps[0] + rng.uniform(-1, 1, size=d)
    band = BandSpec(centers, sides)
    kmax = int(math.ceil(np.abs(centers).max() * L + sides.max() * L)) + 1
    g = TorusGeometry.fitting(d, L, kmax, min_N=64 if d == 1 else 16)
    f = random_band_limited(band, g, rng)
    p = float(rng.choice([1.0, 2.0, 4.0, math.inf]))
    pieces = decompose_spectrum(f)
    rep = check_decomposition(f, pieces, p)
    lhs = max(rep.ratios)
    params = {"d": d, "n": n, "L": L, "p": p, "reconstruction": rep.reconstruction_error}
    return LemmaRow("decomposition", seed, params, lhs, rep.bound, math.log(rep.bound / lhs), rep.passed)


def good_cube_instance(seed):
    rng = np.random.default_rng([seed, 7])
    d = int(rng.integers(1, 3))
    L = float(rng.choice([1.0, 2.0]))
    g = TorusGeometry.fitting(d, L, 8, points_per_unit=8)
    freqs = np.unique(rng.integers(-2, 3, size=(5, d)), axis=0)
    coeffs = rng.standard_normal(len(freqs)) + 1j * rng.standard_normal(len(freqs))
    f = BandLimitedFunction(g, freqs, coeffs)
    b = np.maximum(np.abs(freqs).max(axis=0) / L, 1.0 / L)
    p = float(rng.choice([1.0, 2.0, math.inf]))
    cls = classify_cubes(f, p, b=b)
    good = np.flatnonzero(cls.good)
    params = {"d": d, "L": L, "p": p}
    if good.size == 0:
        return LemmaRow("good-cube", seed, params | {"good": 0}, math.nan, math.nan, math.nan, None)
    corner = cls.corners[int(good[int(rng.integers(good.size))])]
    res = good_cube_taylor_bound(f, corner, p, b=b)
    if res.inconclusive:
        return LemmaRow("good-cube", seed, params | {"inconclusive": 1}, math.nan, res.bound, math.nan, None)
    slack = math.log(res.bound) - math.log(res.max_modulus)
    return LemmaRow("good-cube", seed, params, res.max_modulus, res.bound, slack, res.passed)


def local_estimate_instance(seed):
    rng = np.random.default_rng([seed, 8])
    L = float(rng.choice([1.0, 2.0]))
    n = int(rng.integers(1, 3))
    sides = np.array([float(rng.uniform(0.5, 1.0))])
    centers = (np.arange(n) * (2 * sides[0] + 1.0))[:, None]
    band = BandSpec(centers, sides)
    g = TorusGeometry.fitting(1, L, int(math.ceil(centers.max() * L + sides[0] * L)) + 1, points_per_unit=32)
    f = random_band_limited(band, g, rng)
    S = thick_ball_union(float(rng.uniform(0.1, 0.5)), g.period / int(round(g.period)), g,
                         "seeded-random", int(rng.integers(1 << 30)))
    corner = [float(rng.integers(0, int(math.ceil(g.period))))]
    m = int(rng.integers(1, 4))
    masks = cube_membership(g, corner)
    if S.indicator[np.ix_(*masks)].sum() == 0:
        return LemmaRow("local-estimate", seed, {"L": L, "n": n, "m": m}, math.nan, math.nan, math.nan, None)
    chk = local_estimate_check(f, decompose_spectrum(f), S, corner, m)
    return LemmaRow("local-estimate", seed, {"L": L, "n": n, "m": m}, chk.lhs, chk.rhs, chk.slack, chk.passed)


SUITES = {
    "turan": turan_instance,
    "remez": remez_instance,
    "level-set": level_set_instance,
    "bernstein": bernstein_instance,
    "bad-mass": bad_mass_instance,
    "decomposition": decomposition_instance,
    "good-cube": good_cube_instance,
    "local-estimate": local_estimate_instance,
}
