import numpy as np
import pytest

from conftest import random_batch
from ostd import posterior as pst
from ostd.errors import InvalidArgumentError
from ostd.exact import rf_posterior
from ostd.kernels import KernelSpec, feature_map, sample_frequencies


def hand_state():
    s0 = pst.init(1.0, 1, noise_var=1.0)
    return pst.update(s0, pst.TransitionFeatures(np.array([1.0, 0.0]), 1.0))


def run(rf, batch, noise_var, prior_var, step=pst.update):
    Phi = rf.transform(batch.states)
    state = pst.init(prior_var, rf.num_features, noise_var)
    states = [state]
    for t in range(batch.t):
        h = pst.transition_vector(Phi[t], Phi[t + 1], batch.discount)
        state = step(state, pst.TransitionFeatures(h, batch.rewards[t]))
        states.append(state)
    return states


class TestInit:
    def test_standard_prior(self):
        s = pst.init(1.0, 2)
        np.testing.assert_array_equal(s.mean, np.zeros(4))
        np.testing.assert_array_equal(s.covariance, np.eye(4))
        assert s.slot == 0

    def test_scaled_prior(self):
        np.testing.assert_array_equal(pst.init(4.0, 1).covariance, np.diag([4.0, 4.0]))

    def test_prior_predictive(self, rng):
        rf = sample_frequencies(KernelSpec(), 7, 3, seed=0)
        mean, var = pst.predict(pst.init(2.5, 7), feature_map(rf, rng.standard_normal(3)))
        assert mean == 0.0 and var == pytest.approx(2.5, abs=1e-12)

    @pytest.mark.parametrize("prior", [0.0, -1.0, float("nan")])
    def test_rejects_bad_prior(self, prior):
        with pytest.raises(InvalidArgumentError):
            pst.init(prior, 2)


class TestTransitionVector:
    def test_zero_discount(self):
        np.testing.assert_array_equal(pst.transition_vector([0.6, 0.8], [1.0, 0.0], 0.0), [0.6, 0.8])

    def test_arithmetic(self):
        np.testing.assert_array_equal(pst.transition_vector([1.0, 0.0], [0.0, 1.0], 0.5), [1.0, -0.5])

    def test_self_loop_cancels(self):
        h = pst.transition_vector([0.6, 0.8], [0.6, 0.8], 0.999999)
        assert np.linalg.norm(h) < 1e-5

    def test_norm_bound(self, rng):
        rf = sample_frequencies(KernelSpec(), 10, 2, seed=0)
        for a, b in rng.standard_normal((20, 2, 2)):
            assert np.linalg.norm(pst.transition_vector(feature_map(rf, a), feature_map(rf, b), 0.9)) <= 1.9 + 1e-12

    def test_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            pst.transition_vector([1.0], [1.0, 0.0], 0.5)


class TestHandExample:
    def test_update(self):
        s = hand_state()
        np.testing.assert_allclose(s.mean, [0.5, 0.0], atol=1e-15)
        np.testing.assert_allclose(s.covariance, np.diag([0.5, 1.0]), atol=1e-15)
        assert s.slot == 1

    def test_predict(self):
        np.testing.assert_allclose(pst.predict(hand_state(), [1.0, 0.0]), (0.5, 0.5), atol=1e-15)

    def test_info_matrix(self):
        np.testing.assert_allclose(pst.info_matrix(hand_state()), np.diag([2.0, 1.0]), atol=1e-12)
        np.testing.assert_allclose(pst.info_matrix(pst.init(4.0, 2)), np.eye(4) / 4.0)

    def test_gradient_form(self):
        s = pst.gradient_form_step(pst.init(1.0, 1, 1.0), pst.TransitionFeatures(np.array([1.0, 0.0]), 1.0))
        np.testing.assert_allclose(s.mean, [0.5, 0.0], atol=1e-12)


class TestUpdate:
    def test_zero_gain(self):
        s0 = hand_state()
        s1 = pst.update(s0, pst.TransitionFeatures(np.zeros(2), 3.0))
        np.testing.assert_array_equal(s1.mean, s0.mean)
        np.testing.assert_array_equal(s1.covariance, s0.covariance)
        assert s1.slot == 2

    def test_variance_shrinks_along_h(self, rng):
        rf = sample_frequencies(KernelSpec(), 5, 2, seed=0)
        phi = feature_map(rf, rng.standard_normal(2))
        s = pst.update(pst.init(1.0, 5, 0.1), pst.TransitionFeatures(phi, 0.3))
        assert pst.predict(s, phi)[1] < 1.0

    @pytest.mark.parametrize("bad", [float("nan"), float("inf")])
    def test_rejects_non_finite(self, bad):
        s = pst.init(1.0, 1)
        with pytest.raises(InvalidArgumentError):
            pst.update(s, pst.TransitionFeatures(np.array([1.0, 0.0]), bad))
        with pytest.raises(InvalidArgumentError):
            pst.update(s, pst.TransitionFeatures(np.array([bad, 0.0]), 1.0))

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            pst.update(pst.init(1.0, 2), pst.TransitionFeatures(np.ones(2), 1.0))
        with pytest.raises(InvalidArgumentError):
            pst.predict(pst.init(1.0, 2), np.ones(3))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_batch_posterior_every_prefix(self, seed):
        r = np.random.default_rng(seed)
        rf = sample_frequencies(KernelSpec("gaussian", 1.1), 8, 3, seed=seed)
        batch = random_batch(r, 50, 3, gamma=0.75)
        states = run(rf, batch, 0.1, 1.3)
        for t in (1, 10, 50):
            mean, cov = rf_posterior(rf, batch.prefix(t), 0.1, 1.3)
            np.testing.assert_allclose(states[t].mean, mean, atol=1e-8)
            np.testing.assert_allclose(states[t].covariance, cov, atol=1e-8)

    def test_order_invariance(self, rng):
        rf = sample_frequencies(KernelSpec(), 4, 2, seed=3)
        batch = random_batch(rng, 10, 2)
        Phi = rf.transform(batch.states)
        tfs = [pst.TransitionFeatures(pst.transition_vector(Phi[t], Phi[t + 1], 0.9), batch.rewards[t])
               for t in range(10)]
        finals = []
        for order in (range(10), rng.permutation(10)):
            s = pst.init(1.0, 4, 0.2)
            for i in order:
                s = pst.update(s, tfs[i])
            finals.append(s)
        np.testing.assert_allclose(finals[0].mean, finals[1].mean, atol=1e-10)
        np.testing.assert_allclose(finals[0].covariance, finals[1].covariance, atol=1e-10)

    def test_invariants_over_long_run(self, rng):
        rf = sample_frequencies(KernelSpec("gaussian", 0.5), 10, 2, seed=0)
        batch = random_batch(rng, 3000, 2, gamma=0.9)
        states = run(rf, batch, 0.01, 1.0)
        q = feature_map(rf, rng.standard_normal(2))
        prev = np.inf
        for s in states[::100] + [states[-1]]:
            pst.check_invariants(s)
            var = pst.predict(s, q)[1]
            assert var <= prev + 1e-12
            prev = var

    def test_covariance_decreases_in_psd_order(self, rng):
        rf = sample_frequencies(KernelSpec(), 5, 2, seed=0)
        states = run(rf, random_batch(rng, 30, 2), 0.1, 1.0)
        for a, b in zip(states, states[1:]):
            assert np.linalg.eigvalsh(a.covariance - b.covariance)[0] > -1e-12


class TestGradientForm:
    def test_zero_residual_keeps_mean(self):
        s = hand_state()
        h = np.array([0.3, 0.4])
        s2 = pst.gradient_form_step(s, pst.TransitionFeatures(h, float(h @ s.mean)))
        np.testing.assert_allclose(s2.mean, s.mean, atol=1e-15)

    def test_slotwise_agreement(self, rng):
        rf = sample_frequencies(KernelSpec(), 10, 5, seed=2)
        batch = random_batch(rng, 50, 5, gamma=0.75)
        Phi = rf.transform(batch.states)
        a = pst.init(1.0, 10, 0.1)
        b = a
        J = pst.info_matrix(a)
        for t in range(batch.t):
            tf = pst.TransitionFeatures(pst.transition_vector(Phi[t], Phi[t + 1], 0.75), batch.rewards[t])
            a = pst.update(a, tf)
            b = pst.gradient_form_step(b, tf)
            J = J + np.outer(tf.h, tf.h) / 0.1
            assert np.max(np.abs(a.mean - b.mean)) <= 1e-9
        assert np.max(np.abs(pst.info_matrix(a) - J)) <= 1e-6


class TestSnapshot:
    def test_round_trip(self):
        s = hand_state()
        back = pst.PosteriorState.from_json(s.to_json())
        np.testing.assert_array_equal(back.mean, s.mean)
        np.testing.assert_array_equal(back.covariance, s.covariance)
        assert (back.slot, back.noise_var, back.prior_var) == (1, 1.0, 1.0)

    def test_row_major_layout(self):
        s = pst.PosteriorState(np.zeros(2), np.array([[1.0, 0.2], [0.2, 3.0]]), 0, 1.0, 3.0)
        assert s.snapshot()["covariance"] == [1.0, 0.2, 0.2, 3.0]

    def test_rejects_inconsistent_snapshot(self):
        snap = hand_state().snapshot()
        snap["dim"] = 3
        with pytest.raises(InvalidArgumentError):
            pst.PosteriorState.restore(snap)


class TestOSGPTD:
    def test_resume_from_snapshot(self, rng):
        rf = sample_frequencies(KernelSpec(), 6, 2, seed=0)
        est = pst.OSGPTD(rf, noise_var=0.1)
        S = rng.standard_normal((11, 2))
        for t in range(5):
            est.observe(S[t], 0.5, S[t + 1], 0.9)
        resumed = pst.OSGPTD(rf, noise_var=0.1)
        resumed.state = pst.PosteriorState.from_json(est.state.to_json())
        for t in range(5, 10):
            est.observe(S[t], -0.2, S[t + 1], 0.9)
            resumed.observe(S[t], -0.2, S[t + 1], 0.9)
        np.testing.assert_array_equal(est.state.mean, resumed.state.mean)

    def test_reset(self):
        rf = sample_frequencies(KernelSpec(), 3, 1, seed=0)
        est = pst.OSGPTD(rf, noise_var=0.1)
        est.observe([0.0], 1.0, [1.0], 0.5)
        est.reset()
        assert est.state.slot == 0 and est.value([0.3]) == 0.0
