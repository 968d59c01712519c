import numpy as np
import pytest

from conftest import random_model, random_topology
from wlkalman.algebra import SecondOrderStats
from wlkalman.analysis import (
    MseReport,
    empirical_bias,
    node_bounds,
    propagate_covariance,
    sigma_from_gamma,
    stationary_covariance,
)
from wlkalman.errors import ConfigurationError, InsufficientTrials
from wlkalman.filters import FilterModel, run_batch
from wlkalman.model import StateSpaceModel, simulate_batch
from wlkalman.network import NetworkTopology
from wlkalman.stats import NoiseSpec, RngStream


def ar1_model(n_nodes, a=0.9, q=1.0, eta=0.0, var=None, cross=0.0, u=None, x0=None):
    var = np.linspace(1.0, 2.0, n_nodes) if var is None else var
    return StateSpaceModel([[a]], [[1.0]], SecondOrderStats.scalar(q, eta * q),
                           NoiseSpec.with_eta(var, 0.0, cross_cov=cross), u=u, x0=x0)


def monte_carlo_mse(fm, trials, horizon, seed=0):
    x, y = simulate_batch(fm.model, horizon, [RngStream(seed, t) for t in range(trials)])
    err = x[:, :, None, :] - fm.estimate(run_batch(fm, y))
    return np.mean(np.sum(np.abs(err) ** 2, axis=-1), axis=0), err


class TestPropagate:
    def test_noiseless_limit(self):
        m = StateSpaceModel(np.array([[0.9, 0.1], [0.0, 0.7]]), np.eye(2), SecondOrderStats(np.zeros((2, 2))),
                            SecondOrderStats(1e-8 * np.eye(4)))
        prop = propagate_covariance(FilterModel("DACKF", m, NetworkTopology.complete(2)), 200)
        assert prop.mse[-1].max() < 1e-9

    def test_single_node_equals_M(self, rng):
        m = random_model(rng, L=2, N=1, x0=False)
        fm = FilterModel("DACKF", m, NetworkTopology.isolated(1))
        prop = propagate_covariance(fm, 40, init_cov=fm.M0, init_error=np.zeros(2))
        for n, step in enumerate(fm.recursion(40)):
            np.testing.assert_allclose(prop.sigma[n, 0], step[0][1], atol=1e-10 * np.abs(step[0][1]).max())

    def test_hermitian_psd(self, rng):
        m = random_model(rng, L=2, N=4)
        prop = propagate_covariance(FilterModel("DACKF", m, random_topology(rng, 4)), 80)
        for s in prop.sigma.reshape(-1, 4, 4):
            np.testing.assert_allclose(s, s.conj().T, atol=1e-10 * np.abs(s).max())
            assert np.linalg.eigvalsh(s).min() >= -1e-9 * np.abs(s).max()
        tr = np.trace(prop.sigma, axis1=-2, axis2=-1)
        assert np.abs(tr.imag).max() < 1e-12 * np.abs(tr).max()

    @pytest.mark.parametrize("variant", ["DACKF", "DCKF", "DRKF", "LOCAL", "CENTRAL_ACKF"])
    def test_double_sum_form(self, rng, variant):
        m = random_model(rng, L=2, N=5, widely=variant in ("DACKF", "DRKF", "CENTRAL_ACKF"))
        fm = FilterModel(variant, m, random_topology(rng, 5))
        prop = propagate_covariance(fm, 30)
        alt = sigma_from_gamma(prop.gamma, fm.C, prop.d)
        np.testing.assert_allclose(alt, prop.sigma[-1], atol=1e-10 * np.abs(alt).max())

    def test_settling(self, rng):
        m = random_model(rng, L=2, N=3)
        prop = propagate_covariance(FilterModel("DACKF", m, random_topology(rng, 3)), 400)
        k = prop.settling_index
        assert k is not None
        sig = prop.sigma.reshape(400, -1)
        later = np.linalg.norm(np.diff(sig[k:], axis=0), axis=1) / np.linalg.norm(sig[k + 1:], axis=1)
        assert later.max() <= 1e-8

    def test_strict_on_widely_linear_rejected(self, rng):
        m = random_model(rng, widely=True)
        with pytest.raises(ConfigurationError):
            propagate_covariance(FilterModel("DCKF", m, NetworkTopology.complete(3)), 5)

    def test_monte_carlo_path(self):
        m = ar1_model(3, eta=0.6, cross=0.3)
        fm = FilterModel("DACKF", m, NetworkTopology.path(3))
        mse, _ = monte_carlo_mse(fm, 20000, 50)
        prop = propagate_covariance(fm, 50)
        np.testing.assert_allclose(mse[-1], prop.mse[-1], rtol=0.03)

    def test_stationary_start(self):
        m = ar1_model(2, a=0.8, q=2.0)
        s = stationary_covariance(m)
        assert s[0, 0].real == pytest.approx(2.0 / (1 - 0.64))


class TestWorstNodeBound:
    def test_identical_nodes(self):
        m = ar1_model(4, var=np.full(4, 1.5))
        fm = FilterModel("DCKF", m, NetworkTopology.complete(4))
        prop = propagate_covariance(fm, 100)
        np.testing.assert_allclose(node_bounds(prop, fm.hoods), prop.mse[-1], rtol=1e-10)

    def test_singleton(self):
        m = ar1_model(3)
        fm = FilterModel("LOCAL", m, NetworkTopology.isolated(3))
        prop = propagate_covariance(fm, 100)
        np.testing.assert_allclose(node_bounds(prop, fm.hoods), prop.mse[-1], rtol=1e-10)

    def test_bound_holds(self, rng):
        m = random_model(rng, L=2, N=6)
        fm = FilterModel("DACKF", m, random_topology(rng, 6))
        prop = propagate_covariance(fm, 200)
        bounds = node_bounds(prop, fm.hoods)
        assert np.all(prop.mse[-1] <= bounds + 1e-9)
        rep = MseReport("DACKF", prop.mse[-1], prop.mse[-1], bounds)
        assert rep.bound_holds()
        assert rep.worst_node_bound >= rep.network_theoretical


class TestBias:
    def test_noiseless_exact_start(self):
        m = StateSpaceModel([[0.9]], [[1.0]], SecondOrderStats.scalar(0.0), SecondOrderStats(1e-9 * np.eye(2)))
        fm = FilterModel("DACKF", m, NetworkTopology.complete(2))
        x, y = simulate_batch(m, 10, [RngStream(0, t) for t in range(100)])
        y = np.zeros_like(y)
        x = np.zeros_like(x)
        err = x[:, :, None, :] - fm.estimate(run_batch(fm, y))
        b = empirical_bias(err[:, -1])
        assert not np.any(b.mean)

    def test_insufficient(self):
        with pytest.raises(InsufficientTrials):
            empirical_bias(np.zeros((20, 3)))

    def test_unbiased_and_mismatched(self):
        m = ar1_model(3, a=0.9, u=[1.0])
        _, err = monte_carlo_mse(FilterModel("DACKF", m, NetworkTopology.path(3)), 400, 120)
        assert empirical_bias(err[:, -1]).within(3)
        wrong = ar1_model(3, a=0.6, u=[1.0])
        fm = FilterModel("DACKF", wrong, NetworkTopology.path(3))
        x, y = simulate_batch(m, 120, [RngStream(0, t) for t in range(400)])
        err = x[:, :, None, :] - fm.estimate(run_batch(fm, y))
        assert not empirical_bias(err[:, -1]).within(3)
