import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ostd.errors import InvalidArgumentError
from ostd.kernels import (KernelFamily, KernelSpec, RFMap, approx_kernel, exact_kernel, feature_map,
                          gram, sample_frequencies)

FAMILIES = list(KernelFamily)
finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


class TestKernelSpec:
    def test_rejects_bad_parameters(self):
        with pytest.raises(InvalidArgumentError):
            KernelSpec("gaussian", 0.0)
        with pytest.raises(InvalidArgumentError):
            KernelSpec("gaussian", 1.0, -1.0)
        with pytest.raises(InvalidArgumentError):
            KernelSpec("matern", 1.0)

    def test_family_parsing_is_case_insensitive(self):
        assert KernelSpec("Laplace").family is KernelFamily.LAPLACE

    def test_dict_round_trip(self):
        spec = KernelSpec("cauchy", 0.3, 2.0)
        assert KernelSpec.from_dict(spec.to_dict()) == spec


class TestExactKernel:
    def test_unit_at_zero(self):
        assert exact_kernel(KernelSpec(), [1.0, 2.0], [1.0, 2.0]) == 1.0

    def test_gaussian_closed_form(self):
        # |s - s'| = sqrt(2), lengthscale 1
        assert exact_kernel(KernelSpec(), [0.0, 0.0], [1.0, 1.0]) == pytest.approx(math.exp(-1), abs=1e-12)

    def test_magnitude_scaling(self):
        assert exact_kernel(KernelSpec("gaussian", 1.0, 4.0), [3.0], [3.0]) == 4.0

    def test_laplace_and_cauchy_closed_forms(self):
        s, sp = np.array([0.0, 0.0]), np.array([0.5, -1.0])
        assert exact_kernel(KernelSpec("laplace", 2.0), s, sp) == pytest.approx(math.exp(-0.75))
        assert exact_kernel(KernelSpec("cauchy", 2.0), s, sp) == pytest.approx(1 / (1 + 1 / 16) / (1 + 1 / 4))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            exact_kernel(KernelSpec(), [0.0], [0.0, 1.0])

    @pytest.mark.parametrize("family", FAMILIES)
    def test_gram_is_psd(self, family, rng):
        K = gram(KernelSpec(family, 0.7), rng.standard_normal((30, 3)))
        np.testing.assert_allclose(K, K.T)
        assert np.linalg.eigvalsh(K)[0] > -1e-10


class TestSampleFrequencies:
    def test_shape_and_determinism(self):
        a = sample_frequencies(KernelSpec(), 3, 2, seed=7)
        b = sample_frequencies(KernelSpec(), 3, 2, seed=7)
        assert a.frequencies.shape == (3, 2)
        assert np.array_equal(a.frequencies, b.frequencies)

    def test_different_seeds_differ(self):
        a = sample_frequencies(KernelSpec(), 3, 2, seed=7)
        b = sample_frequencies(KernelSpec(), 3, 2, seed=8)
        assert not np.array_equal(a.frequencies, b.frequencies)

    def test_frequencies_are_read_only(self):
        rf = sample_frequencies(KernelSpec(), 3, 2, seed=7)
        with pytest.raises(ValueError):
            rf.frequencies[0, 0] = 1.0

    def test_large_lengthscale_concentrates_at_zero(self):
        rf = sample_frequencies(KernelSpec("gaussian", 1e6), 1000, 2, seed=1)
        assert np.mean(rf.frequencies ** 2) < 1e-10

    def test_gaussian_spectral_variance(self):
        # spectral density of the unit Gaussian kernel is N(0, I)
        rf = sample_frequencies(KernelSpec("gaussian", 1.0), 10000, 2, seed=3)
        np.testing.assert_allclose(rf.frequencies.var(axis=0), 1.0, atol=0.05)

    def test_gaussian_variance_scales_with_lengthscale(self):
        rf = sample_frequencies(KernelSpec("gaussian", 0.5), 10000, 2, seed=3)
        np.testing.assert_allclose(rf.frequencies.var(axis=0), 4.0, rtol=0.05)

    def test_laplace_family_draws_cauchy(self):
        # Cauchy(0, 1/l): median |z| equals the scale
        rf = sample_frequencies(KernelSpec("laplace", 2.0), 20000, 1, seed=5)
        assert np.median(np.abs(rf.frequencies)) == pytest.approx(0.5, rel=0.05)

    def test_cauchy_family_draws_laplace(self):
        # Laplace(0, 1/l): mean |z| equals the scale
        rf = sample_frequencies(KernelSpec("cauchy", 2.0), 20000, 1, seed=5)
        assert np.mean(np.abs(rf.frequencies)) == pytest.approx(0.5, rel=0.05)

    @pytest.mark.parametrize("D,d", [(0, 2), (3, 0), (-1, 1)])
    def test_rejects_bad_sizes(self, D, d):
        with pytest.raises(InvalidArgumentError):
            sample_frequencies(KernelSpec(), D, d, seed=0)


class TestFeatureMap:
    def test_zero_frequency(self):
        rf = RFMap.from_frequencies([[0.0, 0.0]])
        np.testing.assert_array_equal(feature_map(rf, [3.0, -1.0]), [0.0, 1.0])

    def test_quarter_turn(self):
        rf = RFMap.from_frequencies([[math.pi / 2]])
        np.testing.assert_allclose(feature_map(rf, [1.0]), [1.0, 0.0], atol=1e-12)

    def test_interleaved_layout(self):
        rf = RFMap.from_frequencies([[1.0], [2.0]])
        s = 0.3
        expected = np.array([math.sin(s), math.cos(s), math.sin(2 * s), math.cos(2 * s)]) / math.sqrt(2)
        np.testing.assert_allclose(feature_map(rf, [s]), expected, atol=1e-15)

    def test_dimension_mismatch(self):
        rf = sample_frequencies(KernelSpec(), 4, 2, seed=0)
        with pytest.raises(InvalidArgumentError):
            feature_map(rf, [1.0, 2.0, 3.0])

    def test_transform_matches_pointwise(self, rng):
        rf = sample_frequencies(KernelSpec("laplace", 0.5), 16, 3, seed=2)
        S = rng.standard_normal((5, 3))
        np.testing.assert_allclose(rf.transform(S), np.stack([feature_map(rf, s) for s in S]), atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(arrays(float, 3, elements=finite), st.integers(1, 64), st.sampled_from(FAMILIES),
           st.integers(0, 2 ** 32))
    def test_unit_norm(self, s, D, family, seed):
        phi = feature_map(sample_frequencies(KernelSpec(family, 0.8), D, 3, seed), s)
        assert phi.shape == (2 * D,)
        assert abs(phi @ phi - 1.0) < 1e-12

    def test_feature_gram_is_psd(self, rng):
        rf = sample_frequencies(KernelSpec(), 5, 2, seed=0)
        P = rf.transform(rng.standard_normal((40, 2)))
        assert np.linalg.eigvalsh(P @ P.T)[0] > -1e-12


class TestApproxKernel:
    def test_self_similarity(self, rng):
        rf = sample_frequencies(KernelSpec(), 10, 4, seed=0)
        s = rng.standard_normal(4)
        assert approx_kernel(rf, s, s) == pytest.approx(1.0, abs=1e-12)

    def test_constant_feature(self, rng):
        rf = RFMap.from_frequencies([[0.0, 0.0]])
        assert approx_kernel(rf, rng.standard_normal(2), rng.standard_normal(2)) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(arrays(float, 2, elements=finite), arrays(float, 2, elements=finite), st.integers(0, 1000))
    def test_symmetric_and_bounded(self, s, sp, seed):
        rf = sample_frequencies(KernelSpec("cauchy", 1.3), 8, 2, seed)
        k = approx_kernel(rf, s, sp)
        assert k == approx_kernel(rf, sp, s)
        assert -1.0 - 1e-12 <= k <= 1.0 + 1e-12

    def test_uniform_error_gaussian(self, rng):
        rf = sample_frequencies(KernelSpec(), 2000, 2, seed=11)
        pairs = rng.standard_normal((100, 2, 2))
        err = [abs(approx_kernel(rf, a, b) - exact_kernel(KernelSpec(), a, b)) for a, b in pairs]
        assert max(err) < 0.1

    @pytest.mark.parametrize("family", FAMILIES)
    def test_monte_carlo_oracle_per_family(self, family, rng):
        # the spectral draws must reproduce each family's closed form
        spec = KernelSpec(family, 1.5)
        rf = sample_frequencies(spec, 20000, 2, seed=4)
        pairs = rng.standard_normal((30, 2, 2))
        err = [abs(approx_kernel(rf, a, b) - exact_kernel(spec, a, b)) for a, b in pairs]
        assert max(err) < 0.05

    def test_error_decreases_with_D(self, rng):
        spec = KernelSpec()
        pairs = rng.standard_normal((20, 2, 2))
        exact = np.array([exact_kernel(spec, a, b) for a, b in pairs])
        mae = []
        for D in (10, 100, 1000):
            errs = []
            for seed in range(20):
                rf = sample_frequencies(spec, D, 2, seed)
                errs.append(np.mean(np.abs([approx_kernel(rf, a, b) for a, b in pairs] - exact)))
            mae.append(np.mean(errs))
        assert mae[0] > mae[1] > mae[2]


class TestSnapshot:
    def test_round_trip_rederives_frequencies(self):
        rf = sample_frequencies(KernelSpec("laplace", 0.4, 2.0), 6, 3, seed=99)
        text = rf.to_json()
        assert "frequencies" not in json.loads(text)
        back = RFMap.from_json(text)
        assert back.spec == rf.spec and back.seed == 99
        assert np.array_equal(back.frequencies, rf.frequencies)

    def test_handmade_map_cannot_snapshot(self):
        with pytest.raises(InvalidArgumentError):
            RFMap.from_frequencies([[1.0]]).snapshot()
