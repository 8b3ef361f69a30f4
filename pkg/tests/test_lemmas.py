import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncertainty_lab import suites
from uncertainty_lab.errors import SeparationError
from uncertainty_lab.lemmas import (
    ExponentialSum,
    LevelSetInstance,
    bad_mass_bound,
    bernstein_ratio,
    check_decomposition,
    choose_taylor_order,
    classify_cubes,
    decompose_spectrum,
    good_cube_taylor_bound,
    intervals_measure,
    level_set_apply,
    merge_intervals,
    multi_indices,
    multiplier_l1_norm,
    remez_check,
    segment_constant,
    taylor_majorant,
    taylor_order_log_factor,
    turan_check,
)
from uncertainty_lab.torus import (
    BandLimitedFunction,
    BandSpec,
    TorusGeometry,
    lp_norm,
    modulate,
    random_band_limited,
    synthesize,
)


class TestIntervals:
    def test_merge(self):
        assert merge_intervals([(2, 3), (0, 1), (0.5, 2.5)]) == [(0, 3)]

    def test_measure(self):
        assert intervals_measure([(0, 1), (0.5, 2), (3, 4)]) == pytest.approx(3.0)


class TestExponentialSum:
    def test_termwise_evaluation(self):
        r = ExponentialSum.from_terms([([1, 2], 1.0), ([3], -2.0)])
        x = np.linspace(0, 1, 7)
        np.testing.assert_allclose(r(x), (1 + 2 * x) * np.exp(1j * x) + 3 * np.exp(-2j * x), rtol=1e-13)
        assert (r.n, r.m) == (2, 2)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ExponentialSum(np.ones((2, 2)), [1.0])


class TestRemez:
    def test_constant(self):
        chk = remez_check(ExponentialSum([[1.0]], [0.0]), 0.0, (-0.5, 0.5), [(0.0, 0.2)])
        assert chk.details["M"] == pytest.approx(1.0)
        assert chk.details["exponent"] == 0.0
        assert chk.lhs == pytest.approx(1.0) and chk.rhs == pytest.approx(1.0)
        assert chk.passed

    def test_pure_exponentials(self):
        rng = np.random.default_rng(0)
        for omega in rng.uniform(-3, 3, size=200):
            chk = remez_check(ExponentialSum([[1.0]], [omega]), 0.0, (-0.5, 0.5), [(-0.5, 0.0)],
                              n_circle=512, per_unit=2000)
            assert chk.passed

    def test_vanishing_center_flags_hypothesis(self):
        chk = remez_check(ExponentialSum([[-0.3, 1.0]], [0.0]), 0.3, (0.0, 1.0), [(0.0, 0.5)])
        assert chk.passed is None and not chk.hypothesis_ok

    @pytest.mark.parametrize("interval,A", [((0, 2), [(0, 1)]), ((1, 2), [(1, 1.5)]), ((0, 1), [(0.5, 1.5)])])
    def test_preconditions(self, interval, A):
        with pytest.raises(ValueError):
            remez_check(ExponentialSum([[1.0]], [0.0]), 0.0, interval, A)


class TestTuran:
    def test_single_pure_exponential(self):
        chk = turan_check(ExponentialSum([[2.0]], [5.0]), (0.0, 1.0), [(0.2, 0.3)])
        assert chk.details["exponent"] == 0
        assert chk.lhs == pytest.approx(chk.rhs, rel=1e-12)
        assert chk.passed

    @pytest.mark.parametrize("K", [1, 5, 20])
    def test_sine_away_from_zeros(self, K):
        r = ExponentialSum([[1 / 2j], [-1 / 2j]], [K, -K])
        zeros = [j * math.pi / K for j in range(int(K / math.pi) + 2)]
        cuts = sorted(z for z in zeros if 0 <= z <= 1)
        A, start = [], 0.0
        for z in cuts:
            if z - 0.05 / K > start:
                A.append((start, z - 0.05 / K))
            start = z + 0.05 / K
        if start < 1:
            A.append((start, 1.0))
        assert turan_check(r, (0.0, 1.0), A).passed

    def test_complex_frequency_needs_growth_factor(self):
        r = ExponentialSum([[1.0]], [3j])
        chk = turan_check(r, (0.0, 1.0), [(0.9, 1.0)])
        # |r(x)| = e^{-3x}: the sup on I is 1, the sup on A is e^{-2.7}
        assert chk.lhs == pytest.approx(1.0)
        assert chk.details["sup_A"] < chk.lhs
        assert chk.details["growth"] == pytest.approx(3.0)
        assert chk.passed

    def test_rejects_subset_outside(self):
        with pytest.raises(ValueError):
            turan_check(ExponentialSum([[1.0]], [0.0]), (0.0, 1.0), [(0.5, 1.5)])


class TestLevelSet:
    def test_constant_function(self):
        n = 50
        inst = LevelSetInstance(np.ones(n), np.full(n, 1 / n), np.ones(n), Q=0, C=1, alpha=1, p=2, q=1.5)
        res = level_set_apply(inst)
        assert res.W_measure == 0 and not res.vacuous
        assert res.lhs == pytest.approx(1.0)
        assert res.rhs == pytest.approx(0.5 ** (1.5 + 1))
        assert res.passed

    def test_violated_assumption_is_vacuous(self):
        vals = np.array([1e-6, 100.0, 100.0, 100.0])
        U = np.array([1.0, 0, 0, 0])
        res = level_set_apply(LevelSetInstance(vals, np.full(4, 0.25), U, C=1, alpha=1, p=2, q=2))
        assert res.vacuous and res.passed is None

    def test_instance_validation(self):
        with pytest.raises(ValueError):
            LevelSetInstance(np.ones(2), np.array([0.5, 0.4]), np.ones(2))
        with pytest.raises(ValueError):
            LevelSetInstance(np.ones(2), np.full(2, 0.5), np.zeros(2))
        with pytest.raises(ValueError):
            LevelSetInstance(np.ones(2), np.full(2, 0.5), np.ones(2), p=2, q=3)


class TestBernstein:
    def test_single_mode_is_extremal(self):
        g = TorusGeometry(1, 2.0, 64)
        f = BandLimitedFunction(g, [[3]], [1.0 - 2j])
        assert bernstein_ratio(f, (1,), 2.0, b=[1.5]) == pytest.approx(1.0, rel=1e-12)

    def test_zero_function(self):
        g = TorusGeometry(1, 1.0, 16)
        with pytest.raises(ValueError):
            bernstein_ratio(BandLimitedFunction(g, [[1]], [0.0]), (1,), 2.0)

    def test_sup_norm_study(self):
        g = TorusGeometry(1, 1.0, 64)
        band = BandSpec.symmetric([4.0])
        ratios = [bernstein_ratio(random_band_limited(band, g, s), (1,), math.inf) for s in range(500)]
        assert all(math.isfinite(r) for r in ratios)
        assert max(ratios) <= 1 + 1e-9


class TestCubes:
    def test_bad_mass_bound_for_A3(self):
        for d in (1, 2, 3):
            for p in (1.0, 2.0, 4.0):
                assert bad_mass_bound(d, p, 3.0) <= 0.5

    def test_single_mode_all_good(self):
        g = TorusGeometry(2, 1.0, 32)
        f = BandLimitedFunction(g, [[1, -1]], [1.0])
        for p in (1.0, 2.0, math.inf):
            assert classify_cubes(f, p).good.all()

    def test_constant_all_good(self):
        g = TorusGeometry(1, 2.0, 64)
        cls = classify_cubes(BandLimitedFunction(g, [[0]], [2.0]), 2.0, b=[0.5])
        assert cls.good.all() and cls.bad_mass == 0.0
        assert len(cls.corners) == math.ceil(g.period)

    def test_bad_labels_when_threshold_is_tight(self):
        g = TorusGeometry(1, 2.0, 128)
        f = random_band_limited(BandSpec.symmetric([2.0]), g, 3)
        cls = classify_cubes(f, 2.0, A=0.05)
        assert not cls.good.all()
        assert 0 < cls.bad_mass <= cls.total * (1 + 1e-12)

    def test_taylor_bound_constant(self):
        g = TorusGeometry(1, 1.0, 32)
        res = good_cube_taylor_bound(BandLimitedFunction(g, [[0]], [1.0]), [0.0], 2.0, b=[1.0])
        assert not res.inconclusive and res.max_modulus == pytest.approx(1.0) and res.passed

    def test_taylor_bound_single_mode(self):
        g = TorusGeometry(1, 1.0, 32)
        for p in (1.0, 2.0, math.inf):
            res = good_cube_taylor_bound(BandLimitedFunction(g, [[1]], [1.0]), [2.0], p, b=[1.0])
            assert res.max_modulus == pytest.approx(math.exp(4.5), rel=1e-4)
            ip = 0 if math.isinf(p) else 1 / p
            assert res.bound == pytest.approx(2 ** (3 * ip) * math.exp(45))
            assert res.passed


class TestDecomposition:
    def test_single_box(self):
        g = TorusGeometry(1, 2.0, 64)
        band = BandSpec([[1.5]], [1.0])
        f = random_band_limited(band, g, 0)
        [(f1, c1)] = decompose_spectrum(f)
        assert c1.tolist() == [3]
        np.testing.assert_allclose(synthesize(modulate(f1, c1)), synthesize(f), atol=1e-12)
        assert check_decomposition(f, [(f1, c1)], 2.0).ratios[0] == pytest.approx(1.0)

    def test_two_single_modes(self):
        g = TorusGeometry(1, 1.0, 64)
        band = BandSpec([[-3.0], [3.0]], [0.5])
        f = BandLimitedFunction(g, [[-3], [3]], [1.0, 2.0], band)
        pieces = decompose_spectrum(f)
        assert [len(p.coeffs) for p, _ in pieces] == [1, 1]
        rep = check_decomposition(f, pieces, 2.0)
        assert max(rep.ratios) <= 1 and rep.reconstruction_error <= 1e-12 and rep.passed

    def test_separation_enforced(self):
        g = TorusGeometry(1, 1.0, 64)
        band = BandSpec([[0.0], [1.5]], [1.0])
        with pytest.raises(SeparationError):
            decompose_spectrum(random_band_limited(band, g, 0))

    def test_multiplier_norm_closed_form(self):
        # (1/2 pi) int |1 + 2 cos x| dx = 1/3 + 2 sqrt(3) / pi
        exact = 1 / 3 + 2 * math.sqrt(3) / math.pi
        assert multiplier_l1_norm() == pytest.approx(exact, abs=1e-9)
        assert multiplier_l1_norm(2) == pytest.approx(exact ** 2, abs=1e-8)
        assert multiplier_l1_norm(3) <= 6 ** 3


class TestTaylorMajorant:
    def test_constant_vanishes(self):
        g = TorusGeometry(1, 1.0, 32)
        assert taylor_majorant([BandLimitedFunction(g, [[0]], [1.0])], [0.0], 1) == 0.0

    def test_single_mode_hand_sum(self):
        g = TorusGeometry(1, 2.0, 32)
        c, k = 0.7 - 0.2j, 3
        w = k / g.L
        expect = 0.5 * (w ** 2 + w ** 3) * abs(c)
        got = taylor_majorant([BandLimitedFunction(g, [[k]], [c])], [1.0], 2)
        assert got == pytest.approx(expect, rel=1e-12)

    def test_order_guard(self):
        g = TorusGeometry(1, 1.0, 32)
        with pytest.raises(ValueError):
            taylor_majorant([BandLimitedFunction(g, [[1]], [1.0])], [0.0], 0)
        with pytest.raises(ValueError):
            taylor_majorant([BandLimitedFunction(g, [[1]], [1.0])], [0.0], 30)

    @pytest.mark.parametrize("gamma", [0.05, 0.2, 0.5, 1.0])
    @pytest.mark.parametrize("b1", [0.1, 1.0, 3.0])
    @pytest.mark.parametrize("n", [1, 2])
    @pytest.mark.parametrize("d", [1, 2])
    def test_order_choice_makes_factor_small(self, gamma, b1, n, d):
        m = choose_taylor_order(gamma, b1, n, d)
        for p in (1.0, 2.0):
            assert taylor_order_log_factor(m, gamma, b1, n, d, p) <= math.log(0.5)


def test_segment_constant():
    assert segment_constant(1) == pytest.approx(2.0)
    assert segment_constant(2) == pytest.approx(2 * math.pi * 2)


def test_multi_indices_count():
    assert len(multi_indices(2, 3)) == 4
    assert len(multi_indices(3, 2)) == 6


# ------------------------------------------------------------------ properties

seeds = st.integers(0, 2 ** 31)


@given(seeds)
def test_turan_suite_instances_pass(seed):
    assert suites.turan_instance(seed).passed


@given(seeds)
def test_remez_suite_instances_pass(seed):
    assert suites.remez_instance(seed).passed is not False


@given(seeds)
def test_bernstein_l2_bound(seed):
    assert suites.bernstein_instance(seed).passed


@given(st.integers(1, 40), seeds, st.floats(0, 2), st.floats(1, 20), st.floats(1, 4), st.floats(1, 4))
def test_level_set_conclusion_whenever_hypotheses_hold(n, seed, Q, C, alpha, p):
    rng = np.random.default_rng(seed)
    vals = rng.exponential(size=n) * (rng.random(n) < 0.8)
    if vals.max() == 0:
        vals[0] = 1.0
    w = rng.random(n) + 0.01
    w /= w.sum()
    U = rng.random(n) * (rng.random(n) < 0.6)
    if (w * U).sum() <= 0:
        U[0] = 1.0
    q = float(rng.uniform(1, p))
    res = level_set_apply(LevelSetInstance(vals, w, U, Q=Q, C=C, alpha=alpha, p=p, q=q))
    assert res.vacuous or res.passed


@given(seeds, st.sampled_from([1.0, 2.0, math.inf]))
def test_decomposition_reconstructs(seed, p):
    rng = np.random.default_rng(seed)
    centers = np.array([[-3.0], [0.0], [3.5]])[: int(rng.integers(1, 4))]
    band = BandSpec(centers, [1.0])
    g = TorusGeometry.fitting(1, 2.0, 10)
    f = random_band_limited(band, g, rng)
    rep = check_decomposition(f, decompose_spectrum(f), p)
    assert rep.reconstruction_error <= 1e-10
    assert max(rep.ratios) <= 6.0


@given(seeds, st.floats(0.1, 3.0))
def test_taylor_majorant_triangle_structure(seed, scale):
    rng = np.random.default_rng(seed)
    g = TorusGeometry(1, 1.0, 32)
    freqs = np.array([[-2], [1], [3]])
    c = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    f = BandLimitedFunction(g, freqs, c)
    whole = taylor_majorant([f], [0.0], 2)
    modes = sum(taylor_majorant([BandLimitedFunction(g, freqs[i:i + 1], c[i:i + 1])], [0.0], 2) for i in range(3))
    assert whole <= modes * (1 + 1e-12)
    assert taylor_majorant([f.with_coeffs(c * scale)], [0.0], 2) == pytest.approx(scale * whole, rel=1e-12)
    other = BandLimitedFunction(g, [[0], [2]], rng.standard_normal(2))
    assert taylor_majorant([f, other], [0.0], 2) >= whole


@given(seeds)
def test_single_mode_never_bad(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    g = TorusGeometry(d, 1.0, 32)
    k = rng.integers(-3, 4, size=(1, d))
    f = BandLimitedFunction(g, k, [1.0])
    assert classify_cubes(f, float(rng.choice([1.0, 2.0, math.inf]))).good.all()


@given(seeds)
def test_cube_norms_add_up(seed):
    g = TorusGeometry(2, 1.0, 32)
    f = random_band_limited(BandSpec.symmetric([2.0, 2.0]), g, seed)
    cls = classify_cubes(f, 2.0, alpha_max=2)
    # the 7 x 7 unit cubes overlap past 2 pi, so their masses cover the torus at least once
    assert cls.norms.sum() >= lp_norm(synthesize(f), g, 2) ** 2 * (1 - 1e-12)
