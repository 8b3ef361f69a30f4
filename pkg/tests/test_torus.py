import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncertainty_lab.errors import AliasingError
from uncertainty_lab.sets import GridSet
from uncertainty_lab.torus import (
    BandLimitedFunction,
    BandSpec,
    TorusGeometry,
    analyze,
    dumps,
    loads,
    lp_norm,
    modulate,
    partial_derivative,
    random_band_limited,
    synthesize,
)


def g1(L=1.0, N=64):
    return TorusGeometry(1, L, N)


class TestGeometry:
    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            TorusGeometry(4, 1.0, 16)
        with pytest.raises(ValueError):
            TorusGeometry(1, 1.0, 12)
        with pytest.raises(ValueError):
            TorusGeometry(1, -1.0, 16)

    def test_fitting_respects_guard(self):
        g = TorusGeometry.fitting(2, 2.0, 7)
        assert g.N >= 4 * 7 + 4 and g.N & (g.N - 1) == 0

    def test_volume(self):
        g = TorusGeometry(3, 0.5, 8)
        assert g.volume == pytest.approx(math.pi ** 3)

    def test_aliasing_guard(self):
        g = g1(N=16)
        with pytest.raises(AliasingError):
            synthesize(BandLimitedFunction(g, [[4]], [1.0]))


class TestBand:
    def test_lattice_frequencies_exact(self):
        band = BandSpec.symmetric([1.0])
        assert band.lattice_frequencies(2.0)[:, 0].tolist() == [-2, -1, 0, 1, 2]

    def test_union_of_boxes(self):
        band = BandSpec([[0.0], [3.0]], [1.0])
        assert band.lattice_frequencies(1.0)[:, 0].tolist() == [0, 3]

    def test_rejects_nonpositive_sides(self):
        with pytest.raises(ValueError):
            BandSpec([[0.0]], [0.0])


class TestSynthesize:
    def test_constant(self):
        g = g1()
        v = synthesize(BandLimitedFunction(g, [[0]], [1.0]))
        np.testing.assert_allclose(v, 1.0, atol=1e-15)

    def test_two_cos(self):
        g = g1()
        v = synthesize(BandLimitedFunction.from_dict(g, {1: 1.0, -1: 1.0}))
        np.testing.assert_allclose(v, 2 * np.cos(g.axis()), atol=1e-13)

    def test_direct_summation_oracle(self):
        g = g1(L=2.0)
        v = synthesize(BandLimitedFunction.from_dict(g, {2: 1j}))
        np.testing.assert_allclose(v, 1j * np.exp(1j * g.axis()), atol=1e-13)

    def test_matches_pointwise_evaluation(self):
        g = TorusGeometry(2, 1.0, 16)
        f = random_band_limited(BandSpec.symmetric([1.0, 1.0]), g, 3)
        np.testing.assert_allclose(synthesize(f), f(g.points()).reshape(g.shape), atol=1e-12)


class TestAnalyze:
    def test_constant_round_trip(self):
        g = g1()
        band = BandSpec.symmetric([1.0])
        f = analyze(synthesize(BandLimitedFunction(g, [[0]], [3.0])), g, band, atol=1e-12)
        assert f.as_dict() == pytest.approx({(0,): 3.0})

    def test_random_nine_modes(self):
        g = g1(L=1.0, N=64)
        band = BandSpec.symmetric([4.0])
        f = random_band_limited(band, g, 11)
        assert len(f.coeffs) == 9
        back = analyze(synthesize(f), g, band)
        np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-10)

    def test_zero_grid_gives_empty_map(self):
        g = g1()
        assert analyze(np.zeros(g.shape), g, BandSpec.symmetric([2.0])).as_dict() == {}


class TestNorms:
    def test_constant_l2(self):
        g = g1()
        assert lp_norm(np.ones(g.shape), g, 2) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)

    def test_mask_measure(self):
        g = g1(N=256)
        S = GridSet.from_intervals(g, [(0.3, 2.1)])
        assert abs(lp_norm(np.ones(g.shape), g, 1, S) - 1.8) <= g.cell_volume

    def test_sup_norm_of_two_cos(self):
        g = g1(N=256)
        v = synthesize(BandLimitedFunction.from_dict(g, {1: 1.0, -1: 1.0}))
        assert lp_norm(v, g, math.inf) == pytest.approx(2.0, abs=1e-12)

    def test_rejects_p_below_one(self):
        with pytest.raises(ValueError):
            lp_norm(np.ones(4), g1(N=4), 0.5)


class TestDerivative:
    def test_zero_order_identity(self):
        g = TorusGeometry(2, 1.0, 16)
        f = random_band_limited(BandSpec.symmetric([1.0, 1.0]), g, 0)
        np.testing.assert_array_equal(partial_derivative(f, (0, 0)).coeffs, f.coeffs)

    def test_single_mode(self):
        g = g1()
        df = partial_derivative(BandLimitedFunction(g, [[1]], [1.0]), (1,))
        assert df.as_dict() == {(1,): 1j}

    def test_mixed_derivative_matches_finite_differences(self):
        g = TorusGeometry(2, 1.0, 32)
        f = random_band_limited(BandSpec.symmetric([2.0, 2.0]), g, 5)
        h = 1e-4
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, g.period, size=(20, 2))
        e1, e2 = np.array([h, 0]), np.array([0, h])
        fd = (f(pts + e1 + e2) - f(pts + e1 - e2) - f(pts - e1 + e2) + f(pts - e1 - e2)) / (4 * h * h)
        exact = partial_derivative(f, (1, 1))(pts)
        assert np.abs(fd - exact).max() <= 1e-6 * np.abs(exact).max()


class TestRandom:
    def test_deterministic(self):
        g = g1()
        band = BandSpec.symmetric([2.0])
        a = random_band_limited(band, g, 42)
        b = random_band_limited(band, g, 42)
        assert a.as_dict() == b.as_dict()

    def test_unit_sphere(self):
        g = TorusGeometry(2, 1.5, 32)
        f = random_band_limited(BandSpec.symmetric([1.0, 2.0]), g, 1, ensemble="unit-sphere")
        assert f.l2_norm() == pytest.approx(1.0, abs=1e-9)

    def test_five_modes(self):
        f = random_band_limited(BandSpec.symmetric([2.0]), g1(), 7)
        assert np.count_nonzero(f.coeffs) == 5


class TestModulate:
    def test_zero_shift(self):
        f = random_band_limited(BandSpec.symmetric([2.0]), g1(), 7)
        assert modulate(f, [0]).as_dict() == f.as_dict()

    def test_constant_shift(self):
        g = g1()
        f = BandLimitedFunction(g, [[0]], [1.0])
        h = modulate(f, [1])
        assert h.as_dict() == {(1,): 1.0}
        assert h.l2_norm() == pytest.approx(f.l2_norm())

    @pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
    def test_norm_invariance(self, p):
        g = TorusGeometry(2, 1.0, 32)
        f = random_band_limited(BandSpec.symmetric([1.0, 1.0]), g, 9)
        h = modulate(f, [2, -1])
        assert lp_norm(synthesize(h), g, p) == pytest.approx(lp_norm(synthesize(f), g, p), rel=1e-10)


class TestSerialization:
    def test_round_trip_bit_exact(self):
        g = TorusGeometry(2, 1.7, 16)
        f = random_band_limited(BandSpec.symmetric([1.0, 1.0]), g, 4)
        back = loads(dumps(f))
        assert back.geometry == g
        np.testing.assert_array_equal(back.freqs, f.freqs)
        np.testing.assert_array_equal(back.coeffs, f.coeffs)

    def test_missing_header(self):
        with pytest.raises(ValueError):
            loads("d 1\nL 1.0\n0 1.0 0.0\n")


# ------------------------------------------------------------------ properties

@st.composite
def functions(draw, max_modes=81):
    d = draw(st.integers(1, 3))
    L = draw(st.sampled_from([0.5, 1.0, 1.5, 2.0]))
    half = [draw(st.floats(0.1, 1.5)) for _ in range(d)]
    band = BandSpec.symmetric(half)
    freqs = band.lattice_frequencies(L)
    if freqs.shape[0] == 0 or freqs.shape[0] > max_modes:
        band = BandSpec.symmetric([0.5 / L] * d)
    kmax = int(np.abs(band.lattice_frequencies(L)).max())
    g = TorusGeometry.fitting(d, L, kmax)
    return random_band_limited(band, g, draw(st.integers(0, 2 ** 32 - 1)))


@given(functions())
def test_round_trip_property(f):
    back = analyze(synthesize(f), f.geometry, f.band)
    np.testing.assert_allclose(back.coeffs, f.coeffs, atol=1e-10)


@given(functions())
def test_plancherel_property(f):
    grid = lp_norm(synthesize(f), f.geometry, 2) ** 2
    assert grid == pytest.approx(f.l2_norm() ** 2, rel=1e-9)


@given(functions(), st.sampled_from([1.0, 2.0, 3.5, math.inf]), st.integers(0, 1000))
def test_mask_monotonicity(f, p, seed):
    g = f.geometry
    rng = np.random.default_rng(seed)
    big = rng.random(g.shape)
    small = big * rng.random(g.shape)
    v = synthesize(f)
    assert lp_norm(v, g, p, small) <= lp_norm(v, g, p, big)


@given(functions(max_modes=27), st.integers(-3, 3))
def test_modulation_isometry(f, shift):
    c = [shift] * f.geometry.d
    try:
        h = modulate(f, c)
    except AliasingError:
        return
    for p in (1.0, 2.0, math.inf):
        a = lp_norm(synthesize(h), f.geometry, p)
        b = lp_norm(synthesize(f), f.geometry, p)
        assert a == pytest.approx(b, rel=1e-10)


@given(functions(max_modes=27))
def test_serialization_property(f):
    back = loads(dumps(f))
    np.testing.assert_array_equal(back.coeffs, f.coeffs)


@given(functions(max_modes=27))
def test_real_iff_hermitian_coefficients(f):
    sym = f.with_coeffs(f.coeffs)
    table = sym.as_dict()
    herm = {k: (c + np.conj(table.get(tuple(-x for x in k), 0))) / 2 for k, c in table.items()}
    h = BandLimitedFunction.from_dict(f.geometry, herm)
    assert h.is_real(tol=1e-14)
    assert np.abs(synthesize(h).imag).max() <= 1e-12 * max(np.abs(synthesize(h)).max(), 1)
