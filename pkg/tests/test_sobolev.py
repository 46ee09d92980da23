import numpy as np
import pytest

from fracloops.spectral import TWO_PI, Grid, LoopSample, derivative
from fracloops.sobolev import (
    LipschitzMap,
    SobolevParams,
    bessel_norm,
    closed_form_p2_constant,
    duality_pair,
    estimate_equivalence_constant,
    gagliardo_seminorm,
    homogeneous_h_s2,
    littlewood_paley_norm,
    lp_norm,
    nemytskii,
    sample_loop,
    spectral_norm,
    weighted_difference_sum,
)

SP2 = SobolevParams(0.5, 2.0)


def mode_loop(n, k, m=1):
    g = Grid(n)
    t = g.nodes
    return LoopSample(g, np.stack([np.cos(k * t)] * m, axis=1))


class TestParams:
    def test_conjugate(self):
        sp = SobolevParams(0.25, 1.5)
        assert abs(sp.p_conj - 3.0) < 1e-14
        assert abs(sp.kernel_exponent - (1 + 0.25 * 1.5)) < 1e-14

    def test_range_validation(self):
        with pytest.raises(ValueError):
            SobolevParams(0.0, 2.0)
        with pytest.raises(ValueError):
            SobolevParams(0.6, 2.0)
        with pytest.raises(ValueError):
            SobolevParams(0.5, 1.0)


class TestGagliardo:
    def test_constant_loop_vanishes(self):
        g = Grid(32)
        u = LoopSample(g, np.full((32, 2), 1.7))
        assert gagliardo_seminorm(u, SP2) == 0.0

    def test_constant_shift_invariance(self):
        g = Grid(64)
        u = LoopSample(g, np.cos(g.nodes)[:, None])
        v = LoopSample(g, np.cos(g.nodes)[:, None] + 5.0)
        a = gagliardo_seminorm(u, SP2)
        b = gagliardo_seminorm(v, SP2)
        assert abs(a - b) < 1e-12 * (1 + a)

    def test_cos_matches_spectral_sum_with_estimated_constant(self):
        # independent oracle: at s=1/2 the continuum constant is 4*pi^2 (Fejer)
        u = mode_loop(256, 1)
        val2 = gagliardo_seminorm(u, SP2) ** 2
        spec2 = homogeneous_h_s2(u, 0.5) ** 2
        assert abs(val2 / spec2 - 4 * np.pi ** 2) < 0.01 * 4 * np.pi ** 2

    def test_resolution_doubling_changes_under_one_percent(self):
        a = gagliardo_seminorm(mode_loop(256, 1), SP2)
        b = gagliardo_seminorm(mode_loop(512, 1), SP2)
        assert abs(a - b) / b < 0.01

    def test_small_grid_rejected(self):
        g = Grid(8)
        with pytest.raises(ValueError):
            gagliardo_seminorm(LoopSample(g, np.ones((8, 1))), SP2)

    def test_periodized_kernel_closed_form(self):
        # quadratic-form constant of the periodized kernel, closed form
        for s in (0.25, 0.5):
            sp = SobolevParams(s, 2.0)
            u = sample_loop(1.5, 1, 11, Grid(512))
            num = weighted_difference_sum(u, 2.0, sp.kernel_exponent, "periodized")
            den = homogeneous_h_s2(u, s) ** 2
            assert abs(num / den - closed_form_p2_constant(s)) < 0.01 * closed_form_p2_constant(s)


class TestSpectralNorms:
    def test_single_mode_homogeneous(self):
        g = Grid(64)
        t = g.nodes
        for k in (1, 3, 7):
            u = LoopSample(g, np.stack([np.cos(k * t), np.sin(k * t)], axis=1))
            for s in (0.25, 0.5):
                got = homogeneous_h_s2(u, s)
                assert abs(got - k ** s) < 1e-12 * k

    def test_s_zero_bessel_is_lp(self):
        rng = np.random.default_rng(0)
        u = LoopSample(Grid(64), rng.standard_normal((64, 2)))
        for p in (1.5, 2.0, 3.0):
            assert abs(bessel_norm(u, 0.0, p) - lp_norm(u, p)) < 1e-13

    def test_bessel_inverse_pair_preserves_lp(self):
        from fracloops.spectral import bessel_power
        rng = np.random.default_rng(1)
        u = LoopSample(Grid(64), rng.standard_normal((64, 1)))
        v = bessel_power(bessel_power(u, 0.5), -0.5)
        for p in (1.5, 3.0):
            assert abs(lp_norm(v, p) - lp_norm(u, p)) < 1e-12

    def test_littlewood_paley_comparable_to_bessel(self):
        # cross-validation: same scaling family, bounded two-sided ratio
        sp = SobolevParams(0.5, 2.0)
        ratios = []
        for seed in range(5):
            u = sample_loop(1.0, 1, 40 + seed, Grid(256))
            ratios.append(littlewood_paley_norm(u, sp) / bessel_norm(u, sp.s, sp.p))
        ratios = np.array(ratios)
        assert ratios.max() / ratios.min() < 2.0


class TestDuality:
    def test_pair_with_self_is_l2_squared(self):
        rng = np.random.default_rng(2)
        f = LoopSample(Grid(64), rng.standard_normal((64, 2)))
        assert abs(duality_pair(f, f) - lp_norm(f, 2.0) ** 2) < 1e-10

    def test_integration_by_parts(self):
        rng = np.random.default_rng(3)
        f = LoopSample(Grid(64), rng.standard_normal((64, 2)))
        g = LoopSample(Grid(64), rng.standard_normal((64, 2)))
        a = duality_pair(derivative(f), g)
        b = duality_pair(f, derivative(g))
        assert abs(a + b) < 1e-11

    def test_skewness_of_dt_against_itself(self):
        rng = np.random.default_rng(4)
        u = LoopSample(Grid(64), rng.standard_normal((64, 3)))
        assert abs(duality_pair(derivative(u), u)) < 1e-11

    def test_grid_mismatch_rejected(self):
        from fracloops.spectral import GridMismatchError
        f = LoopSample(Grid(32), np.ones((32, 1)))
        g = LoopSample(Grid(64), np.ones((64, 1)))
        with pytest.raises(GridMismatchError):
            duality_pair(f, g)

    def test_holder_duality_bound_battery(self):
        rng = np.random.default_rng(5)
        for s in (0.25, 0.5):
            for p in (1.5, 2.0, 3.0):
                sp = SobolevParams(s, p)
                for _ in range(10):
                    xi = LoopSample(Grid(128), rng.standard_normal((128, 2)))
                    h = LoopSample(Grid(128), rng.standard_normal((128, 2)))
                    lhs = abs(duality_pair(xi, h))
                    rhs = bessel_norm(xi, -s, p) * bessel_norm(h, s, sp.p_conj)
                    assert lhs <= rhs + 1e-9


class TestEquivalence:
    def test_battery_spread_s_half(self):
        g = Grid(512)
        t = g.nodes
        loops = [
            LoopSample(g, np.cos(t)[:, None]),
            LoopSample(g, np.sin(2 * t)[:, None]),
            LoopSample(g, np.cos(3 * t)[:, None]),
            sample_loop(1.5, 1, 21, g),
            sample_loop(1.5, 1, 22, g),
        ]
        rep = estimate_equivalence_constant(loops, SP2)
        assert rep.spread < 1.01

    def test_ratio_mode1_vs_mode5_within_one_percent(self):
        loops = [mode_loop(512, 1), mode_loop(512, 5), mode_loop(512, 2)]
        rep = estimate_equivalence_constant(loops, SP2)
        r = rep.per_sample_ratios
        assert abs(r[0] - r[1]) / r[0] < 0.01

    def test_scaling_invariance_exact(self):
        u = mode_loop(256, 2)
        u2 = LoopSample(u.grid, 2.0 * u.values)
        rep = estimate_equivalence_constant([u, u2, mode_loop(256, 3)], SP2)
        r = rep.per_sample_ratios
        assert abs(r[0] - r[1]) < 1e-10 * r[0]

    def test_periodized_spread_shrinks_with_resolution(self):
        for s in (0.25, 0.5):
            sp = SobolevParams(s, 2.0)
            spreads = []
            for n in (256, 512):
                loops = [sample_loop(1.5, 1, 30 + i, Grid(n)) for i in range(5)]
                rep = estimate_equivalence_constant(loops, sp, kernel="periodized")
                spreads.append(rep.spread)
            assert spreads[1] < spreads[0]
            assert spreads[1] < 1.01

    def test_all_constant_rejected(self):
        g = Grid(64)
        const = [LoopSample(g, np.full((64, 1), c)) for c in (1.0, 2.0, 3.0)]
        with pytest.raises(ValueError):
            estimate_equivalence_constant(const, SP2)

    def test_p3_band_reported(self):
        sp = SobolevParams(0.5, 3.0)
        loops = [sample_loop(1.0, 1, 50 + i, Grid(128)) for i in range(4)]
        rep = estimate_equivalence_constant(loops, sp)
        assert rep.spread >= 1.0 and np.isfinite(rep.estimated_constant)


class TestNemytskii:
    def test_identity_map(self):
        u = mode_loop(64, 2, m=2)
        a = LipschitzMap(apply=lambda x: x, lip_bound=1.0)
        assert np.array_equal(nemytskii(u, a).values, u.values)

    def test_constant_map_kills_seminorm(self):
        u = mode_loop(64, 1)
        a = LipschitzMap(apply=lambda x: np.full_like(x, 3.0), lip_bound=0.0)
        assert gagliardo_seminorm(nemytskii(u, a), SP2) == 0.0

    def test_sin_composition_inequality_battery(self):
        a = LipschitzMap(apply=np.sin, lip_bound=1.0, sup_bound=1.0)
        rng = np.random.default_rng(6)
        count = 0
        for seed in range(100):
            g = Grid(64)
            u = sample_loop(0.8, 2, 1000 + seed, g)
            u = LoopSample(g, 3.0 * u.values)
            sa = gagliardo_seminorm(nemytskii(u, a), SP2)
            su = gagliardo_seminorm(u, SP2)
            assert sa <= 1.0 * su + 1e-9
            count += 1
        assert count == 100

    def test_difference_quotient_certificate(self):
        a = LipschitzMap(apply=np.sin, lip_bound=1.0)
        rng = np.random.default_rng(7)
        x = rng.standard_normal((50, 2))
        y = rng.standard_normal((50, 2))
        assert a.check_quotients(x, y)


class TestSampler:
    def test_deterministic(self):
        a = sample_loop(0.7, 2, 123, Grid(128))
        b = sample_loop(0.7, 2, 123, Grid(128))
        assert np.array_equal(a.values, b.values)

    def test_mean_zero(self):
        u = sample_loop(1.2, 3, 9, Grid(128))
        assert np.max(np.abs(u.mean())) < 1e-13

    def test_low_mode_prefix_shared_across_resolutions(self):
        from fracloops.spectral import dft
        a = sample_loop(1.0, 1, 5, Grid(128))
        b = sample_loop(1.0, 1, 5, Grid(256))
        ca = dft(a).coeffs[:, 0]
        cb = dft(b).coeffs[:, 0]
        np.testing.assert_allclose(ca[1:60], cb[1:60], rtol=0, atol=1e-13)

    def test_spectral_sum_growth_tracks_regularity(self):
        # sigma = 2: H^1 sum stabilizes; sigma = 0.3: H^{1/2} sum keeps growing
        h1 = [homogeneous_h_s2(sample_loop(2.0, 1, 77, Grid(n)), 1.0) for n in (128, 256, 512)]
        assert abs(h1[2] - h1[1]) < 0.05 * h1[1]
        hhalf = [homogeneous_h_s2(sample_loop(0.3, 1, 77, Grid(n)), 0.5) for n in (128, 256, 512)]
        assert hhalf[2] > hhalf[1] > hhalf[0]

    def test_regularity_metadata(self):
        u = sample_loop(0.4, 1, 3, Grid(64))
        assert u.regularity == 0.4
