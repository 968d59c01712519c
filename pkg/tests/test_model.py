import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_model
from wlkalman.algebra import SecondOrderStats, augment_blocks, augment_vector
from wlkalman.errors import MissingObservation, StructureError
from wlkalman.model import (
    StateSpaceModel,
    ar2_model,
    augment_model,
    neighbourhood_model,
    projectile_model,
    simulate,
    simulate_batch,
    stack_neighbourhood,
)
from wlkalman.network import NetworkTopology
from wlkalman.stats import NoiseSampler, NoiseSpec, RngStream, ar2_sequence


def scalar_model(F=0.5, A=0.0, q=1.0, p=0.0, n_nodes=1):
    return StateSpaceModel([[F]], [[1.0]], SecondOrderStats.scalar(q, p), NoiseSpec(np.ones(n_nodes)), A=[[A]])


class TestStateSpaceModel:
    def test_strictly_linear_flag(self, rng):
        assert random_model(rng, widely=False).strictly_linear
        assert not random_model(rng, widely=True).strictly_linear

    def test_dimension_mismatch(self):
        with pytest.raises(StructureError):
            StateSpaceModel(np.eye(2), [[1.0, 0.0]], SecondOrderStats(np.eye(3)), NoiseSpec([1.0]))

    def test_broadcast_observation_matrix(self):
        m = StateSpaceModel(np.eye(2), [[1.0, 0.0]], SecondOrderStats(np.eye(2)), NoiseSpec([1.0, 2.0, 3.0]))
        assert m.H.shape == (3, 1, 2) and m.n_nodes == 3


class TestAugmentModel:
    def test_strictly_linear_block_diagonal(self, rng):
        m = random_model(rng, widely=False, circular=True)
        a = augment_model(m)
        np.testing.assert_array_equal(a.Fa.full, augment_blocks(m.F, np.zeros_like(m.F)))
        for h in a.Ha:
            assert h.is_strictly_linear()
        assert a.Qa.is_strictly_linear()

    def test_scalar_assembly(self):
        a = augment_model(scalar_model(0.5, 0.1))
        np.testing.assert_allclose(a.Fa.full, [[0.5, 0.1], [0.1, 0.5]])

    def test_state_noise_eta(self):
        a = augment_model(scalar_model(q=2.0, p=1.7))
        np.testing.assert_allclose(a.Qa.full, [[2, 1.7], [1.7, 2]])


class TestNeighbourhood:
    def test_singleton(self, rng):
        m = random_model(rng, N=3, K=2)
        nb = neighbourhood_model(m, [1])
        np.testing.assert_array_equal(nb.H, m.H[1])
        np.testing.assert_array_equal(nb.R, m.obs_noise.cov[2:4, 2:4])

    def test_builtin_pair(self):
        var = 4 + 1 / np.sqrt(np.arange(1, 11))
        m = ar2_model((1.2, -0.8), SecondOrderStats.scalar(2.0), NoiseSpec(var, cross_cov=4.0))
        nb = neighbourhood_model(m, [1, 0])
        np.testing.assert_allclose(nb.R, [[5, 4], [4, 4 + 1 / np.sqrt(2)]])
        assert nb.nodes == (0, 1)

    def test_uncorrelated_block_diagonal(self, rng):
        m = random_model(rng, N=4, K=1, correlated=False)
        nb = neighbourhood_model(m, [0, 2, 3])
        assert np.count_nonzero(nb.R - np.diag(np.diag(nb.R))) == 0

    def test_stack_full_network_is_centralised(self, rng):
        m = random_model(rng, N=4, K=1)
        y = rng.standard_normal((4, 1)) + 0j
        nb = stack_neighbourhood(0, NetworkTopology.complete(4), m, y)
        np.testing.assert_array_equal(nb.H, m.H.reshape(-1, m.L))
        np.testing.assert_array_equal(nb.R, m.obs_noise.cov)
        np.testing.assert_array_equal(nb.y, y[:, 0])

    def test_missing_observation(self, rng):
        m = random_model(rng, N=3, K=1)
        with pytest.raises(MissingObservation):
            stack_neighbourhood(1, NetworkTopology.path(3), m, {0: [1.0], 1: [2.0]})

    def test_strict_augmented_observation_has_zero_off_blocks(self, rng):
        m = random_model(rng, N=3, widely=False)
        Ha = neighbourhood_model(m, [0, 1]).Ha
        q, L = Ha.shape[0] // 2, m.L
        assert not np.any(Ha[:q, L:]) and not np.any(Ha[q:, :L])


class TestSimulate:
    def test_constant_trajectory(self):
        m = StateSpaceModel(np.eye(2), [[1.0, 0.0]], SecondOrderStats(np.eye(2)), NoiseSpec([1.0]),
                            x0=[1 + 1j, 2.0])
        tr = simulate(m, 10, state_noise=np.zeros((10, 2)), obs_noise=np.zeros((10, 1)))
        np.testing.assert_array_equal(tr.x, np.tile([1 + 1j, 2.0], (10, 1)))
        np.testing.assert_array_equal(tr.y[:, 0, 0], np.full(10, 1 + 1j))

    def test_ballistic_closed_form(self):
        T = 0.05
        m = projectile_model(T, NoiseSpec([1.0]), 1.0)
        n = 400
        tr = simulate(m, n, state_noise=np.zeros((n, 2)), obs_noise=np.zeros((n, 1)))
        t = T * np.arange(1, n + 1)
        np.testing.assert_allclose(tr.x[:, 0].imag, 10 * t - 4.9 * t ** 2, rtol=0, atol=1e-9)
        np.testing.assert_allclose(tr.x[:, 0].real, 20 * t, rtol=0, atol=1e-9)
        np.testing.assert_allclose(tr.x[:, 1], 20 + 1j * (10 - 9.8 * t), rtol=0, atol=1e-9)

    def test_companion_form_reproduces_ar2(self):
        driving = SecondOrderStats.scalar(2.0, 0.6)
        m = ar2_model((1.2, -0.8), driving, NoiseSpec([1.0]))
        z = ar2_sequence((1.2, -0.8), driving, 300, RngStream(11, 4), burn_in=0)
        # same driving draws, injected into the companion-form state noise
        u = NoiseSampler(driving).sample(RngStream(11, 4), 300)[:, 0]
        w = np.stack([u, np.zeros_like(u)], axis=1)
        tr = simulate(m, 300, state_noise=w, obs_noise=np.zeros((300, 1)))
        np.testing.assert_allclose(tr.x[:, 0], z, atol=1e-10)
        np.testing.assert_allclose(tr.x[1:, 1], z[:-1], atol=1e-10)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1))
    def test_augmented_recursion(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, L=2, N=2)
        w = rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))
        v = rng.standard_normal((30, 2)) + 1j * rng.standard_normal((30, 2))
        tr = simulate(m, 30, state_noise=w, obs_noise=v)
        Fa = augment_blocks(m.F, m.A)
        prev = augment_vector(m.x0)
        for n in range(30):
            prev = Fa @ prev + augment_vector(w[n])
            np.testing.assert_allclose(augment_vector(tr.x[n]), prev, atol=1e-10)

    def test_batch_matches_single(self, rng):
        m = random_model(rng, N=3)
        streams = [RngStream(5, t) for t in range(3)]
        x, y = simulate_batch(m, 20, streams, burn_in=7)
        for t, s in enumerate(streams):
            tr = simulate(m, 27, s)
            np.testing.assert_allclose(x[t], tr.x[7:], atol=1e-12)
            np.testing.assert_allclose(y[t], tr.y[7:], atol=1e-12)
