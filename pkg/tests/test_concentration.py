import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncertainty_lab.concentration import (
    build_concentration,
    empirical_ratio,
    extremal_search,
    gamma_sweep,
    scale_free_sweep,
    thick_ball_union,
    translated_band,
)
from uncertainty_lab.sets import GridSet, thickness_scan
from uncertainty_lab.torus import BandLimitedFunction, BandSpec, TorusGeometry, loads, random_band_limited


def arc_matrix():
    """Closed form of ``(1/2 pi) int_0^pi e^{-i (k - k') x} dx`` for ``k, k' in {-1, 0, 1}``."""
    ks = (-1, 0, 1)
    return np.array([[0.5 if k == kp else (1 - (-1) ** (k - kp)) / (2j * math.pi * (k - kp)) for kp in ks]
                     for k in ks])


def random_instance(rng, d=1, max_modes=33):
    L = float(rng.choice([1.0, 2.0]))
    half = float(rng.uniform(0.5, (max_modes - 1) / (2 * L)))
    band = BandSpec.symmetric([half] * d)
    g = TorusGeometry.fitting(d, L, int(half * L), points_per_unit=8)
    S = GridSet(g, (rng.random(g.shape) < rng.uniform(0.1, 0.9)).astype(float))
    return band, S


class TestMatrix:
    def test_full_torus_identity(self):
        g = TorusGeometry(2, 1.0, 32)
        res = build_concentration(GridSet.full(g), BandSpec.symmetric([1.0, 2.0]))
        np.testing.assert_allclose(res.matrix, np.eye(res.m_dim), atol=1e-10)
        assert res.lambda_min == 1.0 and res.lambda_max == 1.0

    def test_empty_set(self):
        g = TorusGeometry(1, 1.0, 32)
        res = build_concentration(GridSet.empty(g), BandSpec.symmetric([2.0]))
        assert res.lambda_min == 0.0 and res.residual <= 1e-9

    def test_arc_closed_form(self):
        g = TorusGeometry(1, 1.0, 1 << 16)
        res = build_concentration(GridSet.from_intervals(g, [(0.0, math.pi)]), BandSpec.symmetric([1.0]))
        np.testing.assert_allclose(res.matrix, arc_matrix(), atol=1e-8)
        assert res.lambda_min == pytest.approx(0.5 - math.sqrt(2) / math.pi, abs=1e-8)

    def test_caps(self):
        g = TorusGeometry(1, 1.0, 16)
        with pytest.raises(ValueError):
            build_concentration(GridSet.full(g), BandSpec([[10.0]], [0.1]))

    def test_text_report(self):
        g = TorusGeometry(1, 1.0, 64)
        res = build_concentration(GridSet.from_intervals(g, [(0, 2)]), BandSpec.symmetric([2.0]))
        text = res.to_text()
        assert text.startswith(f"# m_dim {res.m_dim}\n")
        f = loads(text)
        np.testing.assert_array_equal(f.coeffs, res.extremal)


class TestRatios:
    def test_constant_density(self):
        g = TorusGeometry(1, 1.0, 256)
        S = GridSet.from_intervals(g, [(0, 1.5)])
        const = BandLimitedFunction(g, [[0]], [1.0])
        assert empirical_ratio(const, S, 1) == pytest.approx(S.density(), rel=1e-12)

    def test_extremal_eigenvector(self):
        g = TorusGeometry(1, 2.0, 128)
        S = GridSet.from_intervals(g, [(0, 3), (5, 6)])
        res = build_concentration(S, BandSpec.symmetric([1.5]))
        assert empirical_ratio(res.extremal_function(), S, 2) == pytest.approx(math.sqrt(res.lambda_min), abs=1e-8)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0, math.inf])
    def test_full_torus_ratio(self, p):
        g = TorusGeometry(2, 1.0, 32)
        f = random_band_limited(BandSpec.symmetric([1.0, 1.0]), g, 0)
        assert empirical_ratio(f, GridSet.full(g), p) == pytest.approx(1.0)


class TestSearch:
    def test_p2_matches_eigensolver(self):
        rng = np.random.default_rng(7)
        band, S = random_instance(rng, max_modes=9)
        res = extremal_search(band, S, 2.0, seed=1)
        lam = build_concentration(S, band).lambda_min
        assert res.ratio ** 2 == pytest.approx(lam, rel=1e-6)
        assert empirical_ratio(res.function(), S, 2.0) == pytest.approx(res.ratio, rel=1e-9)

    @pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
    def test_zero_band(self, p):
        g = TorusGeometry(1, 1.0, 64)
        S = GridSet.from_intervals(g, [(0, 2.5)])
        res = extremal_search(BandSpec.symmetric([0.4]), S, p, seed=0)
        assert res.ratio == pytest.approx(S.density() ** (1 / p), rel=1e-12)
        assert res.iterations <= 1

    def test_p4_dominates_random_functions(self):
        g = TorusGeometry(1, 1.0, 128)
        band = BandSpec.symmetric([2.0])
        S = GridSet.from_intervals(g, [(0.0, 1.0), (3.0, 3.5)])
        res = extremal_search(band, S, 4.0, seed=3)
        for s in range(100):
            assert res.ratio <= empirical_ratio(random_band_limited(band, g, s), S, 4.0) + 1e-12

    def test_rejects_sup_norm(self):
        g = TorusGeometry(1, 1.0, 16)
        with pytest.raises(ValueError):
            extremal_search(BandSpec.symmetric([1.0]), GridSet.full(g), math.inf, seed=0)

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        band, S = random_instance(rng, max_modes=7)
        a = extremal_search(band, S, 3.0, seed=5, max_iter=200, restarts=2)
        b = extremal_search(band, S, 3.0, seed=5, max_iter=200, restarts=2)
        assert a.ratio == b.ratio and a.history == b.history


class TestSweeps:
    def test_thick_union_density(self):
        g = TorusGeometry(1, 4.0, 1024)
        S = thick_ball_union(0.25, 2 * math.pi, g)
        # a window of side a = 2G spans two cells but may hold only one ball
        assert S.density() == pytest.approx(0.5, abs=1e-12)
        assert thickness_scan(S, 2 * math.pi).gamma_est >= 0.25 - 1e-12

    def test_thick_union_rejects_dense_balls(self):
        g = TorusGeometry(2, 1.0, 32)
        with pytest.raises(ValueError):
            thick_ball_union(0.5, math.pi, g)

    def test_trivial_band_scale_free(self):
        res = scale_free_sweep(0.25, 2 * math.pi, 0.05, [1, 2, 4, 8])
        assert [r.m_dim for r in res.rows] == [1, 1, 1, 1]
        for r in res.rows:
            assert r.value == pytest.approx(r.density, abs=1e-12)
        assert res.spread == pytest.approx(1.0)

    def test_scale_sweep_small_L_rejected(self):
        with pytest.raises(ValueError):
            scale_free_sweep(0.25, 2 * math.pi, 3.0, [0.5])

    def test_position_independence(self):
        L = 2.0
        g = TorusGeometry.fitting(1, L, 12, points_per_unit=8)
        S = thick_ball_union(0.3, math.pi, g, "seeded-random", seed=4)
        band = BandSpec.symmetric([1.0])
        base = build_concentration(S, band).eigenvalues
        moved = build_concentration(S, translated_band(band, [7], L)).eigenvalues
        np.testing.assert_allclose(moved, base, atol=1e-10)

    def test_gamma_sweep_monotone(self):
        res = gamma_sweep([0.1, 0.2, 0.4], math.pi, 3 / math.pi, 4.0, kind="seeded-random", seed=5)
        vals = [r.value for r in res.rows]
        assert vals == sorted(vals)


# ------------------------------------------------------------------ properties

@given(st.integers(0, 2 ** 31), st.integers(1, 2))
def test_spectrum_invariants(seed, d):
    rng = np.random.default_rng(seed)
    band, S = random_instance(rng, d=d, max_modes=9)
    res = build_concentration(S, band)
    assert res.eigenvalues[0] >= -1e-9 and res.eigenvalues[-1] <= 1 + 1e-9
    assert res.trace == pytest.approx(res.m_dim * S.density(), rel=1e-9)
    assert res.residual <= 1e-9
    assert res.hermitian_deviation <= 1e-12


@given(st.integers(0, 2 ** 31))
def test_monotone_in_set(seed):
    rng = np.random.default_rng(seed)
    band, S = random_instance(rng, max_modes=17)
    bigger = GridSet(S.geometry, np.maximum(S.indicator, rng.random(S.geometry.shape) < 0.3))
    assert build_concentration(S, band).lambda_min <= build_concentration(bigger, band).lambda_min + 1e-10


@given(st.integers(0, 2 ** 31), st.integers(-9, 9))
def test_modulation_invariance(seed, shift):
    rng = np.random.default_rng(seed)
    L = 1.0
    band = BandSpec.symmetric([float(rng.uniform(0.5, 3))])
    g = TorusGeometry.fitting(1, L, 16)
    S = GridSet(g, rng.random(g.shape))
    a = build_concentration(S, band).eigenvalues
    b = build_concentration(S, translated_band(band, [shift], L)).eigenvalues
    np.testing.assert_allclose(a, b, atol=1e-10)


@given(st.integers(0, 2 ** 31))
def test_search_ratio_realised(seed):
    rng = np.random.default_rng(seed)
    band, S = random_instance(rng, max_modes=7)
    res = extremal_search(band, S, float(rng.uniform(1.2, 5)), seed=seed % 1000, max_iter=100, restarts=2)
    assert empirical_ratio(res.function(), S, res.p) == pytest.approx(res.ratio, rel=1e-9)
