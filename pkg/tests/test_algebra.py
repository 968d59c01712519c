import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_complex, random_stats
from wlkalman.algebra import (
    AugmentedMatrix,
    DualityMap,
    SecondOrderStats,
    augment_blocks,
    augment_vector,
    build_augmented_cov,
    checked_inv,
    circularity_degree,
    complex_to_real,
    min_eigenvalue,
    real_to_complex,
    wl_mmse_coefficients,
)
from wlkalman.errors import NotAugmented, NotPSD, Singular, StructureError, ZeroVariance


class TestAugmentVector:
    def test_scalar(self):
        np.testing.assert_array_equal(augment_vector([1 + 2j]), [1 + 2j, 1 - 2j])

    def test_zero(self):
        np.testing.assert_array_equal(augment_vector([0, 0]), np.zeros(4))

    def test_real(self):
        np.testing.assert_array_equal(augment_vector([3, -1]), [3, -1, 3, -1])


class TestSecondOrderStats:
    def test_circular_scalar(self):
        m = build_augmented_cov(SecondOrderStats.scalar(1.0, 0.0))
        np.testing.assert_array_equal(m.full, np.eye(2))

    def test_maximally_noncircular(self):
        m = build_augmented_cov(SecondOrderStats.scalar(2.0, 2.0))
        np.testing.assert_array_equal(m.full, [[2, 2], [2, 2]])
        assert abs(min_eigenvalue(m.full)) < 1e-12

    def test_improper_beyond_variance(self):
        with pytest.raises(NotPSD):
            SecondOrderStats.scalar(2.0, 3.0)

    def test_non_hermitian(self):
        with pytest.raises(StructureError):
            SecondOrderStats(np.array([[1, 1j], [1j, 1]]))

    def test_non_symmetric_pseudocovariance(self):
        with pytest.raises(StructureError):
            SecondOrderStats(np.eye(2) * 3, np.array([[0, 1], [0.5, 0]]))

    def test_real_covariance(self):
        s = SecondOrderStats.scalar(2.0, 1.0 + 0.4j)
        np.testing.assert_allclose(s.real_covariance(), [[1.5, 0.2], [0.2, 0.5]])

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
    def test_augmented_hermitian_psd(self, n, seed):
        m = random_stats(np.random.default_rng(seed), n).augmented().full
        np.testing.assert_allclose(m, m.conj().T, atol=1e-12)
        assert min_eigenvalue(m) >= -1e-10


class TestCircularity:
    @pytest.mark.parametrize("p, eta", [(0.0, 0.0), (2.0, 1.0), (1.7, 0.85), (1.7j, 0.85)])
    def test_values(self, p, eta):
        assert circularity_degree((2.0, p)) == pytest.approx(eta)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            circularity_degree((0.0, 0.0))

    def test_vector_rejected(self):
        with pytest.raises(StructureError):
            circularity_degree(SecondOrderStats(np.eye(2)))


class TestDuality:
    @pytest.mark.parametrize("q", [1, 2, 4, 8])
    def test_inverse_is_half_hermitian(self, q):
        j = DualityMap(q)
        J = np.block([[np.eye(q), 1j * np.eye(q)], [np.eye(q), -1j * np.eye(q)]])
        np.testing.assert_array_equal(j.J, J)
        np.testing.assert_allclose(J @ (0.5 * J.conj().T), np.eye(2 * q), atol=1e-15)

    def test_scalar_example(self):
        np.testing.assert_allclose(complex_to_real([1 + 2j, 1 - 2j]), [1, 2])

    def test_not_augmented(self):
        with pytest.raises(NotAugmented):
            complex_to_real([1 + 2j, 1 + 2j])

    def test_identity_transport(self):
        j = DualityMap(3)
        np.testing.assert_allclose(DualityMap.transport(np.eye(6), j, j), np.eye(6), atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 64), st.integers(0, 2 ** 32 - 1))
    def test_round_trip(self, q, seed):
        v = augment_vector(random_complex(np.random.default_rng(seed), q))
        np.testing.assert_allclose(real_to_complex(complex_to_real(v)), v, atol=1e-12)

    def test_transport_matches_real_product(self, rng):
        # augmented operator acting on x^a equals transported operator acting on [Re; Im]
        a = augment_blocks(random_complex(rng, 3, 2), random_complex(rng, 3, 2))
        jl, jr = DualityMap(3), DualityMap(2)
        x = random_complex(rng, 2)
        lhs = jl.to_real(a @ augment_vector(x))
        rhs = DualityMap.transport(a, jl, jr) @ np.concatenate([x.real, x.imag])
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_transport_cov(self, rng):
        s = random_stats(rng, 3)
        np.testing.assert_allclose(DualityMap(3).transport_cov(s.augmented().full), s.real_covariance(),
                                   atol=1e-12)


class TestAugmentedMatrix:
    def test_pattern_enforced(self):
        with pytest.raises(StructureError):
            AugmentedMatrix.from_full(np.arange(4.0).reshape(2, 2) + 1j)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
    def test_closure(self, n, seed):
        rng = np.random.default_rng(seed)
        a = AugmentedMatrix(random_complex(rng, n, n), random_complex(rng, n, n))
        b = AugmentedMatrix(random_complex(rng, n, n), random_complex(rng, n, n))
        np.testing.assert_allclose((a @ b).full, a.full @ b.full, atol=1e-10 * n)
        AugmentedMatrix.from_full(a.full @ b.full)
        inv = a.inv()
        np.testing.assert_allclose(inv.full @ a.full, np.eye(2 * n), atol=1e-8)

    def test_hermitian_transpose(self, rng):
        a = AugmentedMatrix(random_complex(rng, 2, 3), random_complex(rng, 2, 3))
        np.testing.assert_array_equal(a.H.full, a.full.conj().T)

    def test_strictly_linear(self):
        assert AugmentedMatrix(np.eye(2), np.zeros((2, 2))).is_strictly_linear()


class TestWlMmse:
    def test_proper_case(self, rng):
        sx, sy = random_stats(rng, 2), random_complex(rng, 3, 2)
        R = sx.cov
        B, C = wl_mmse_coefficients(R, np.zeros((2, 2)), sy, np.zeros((3, 2)))
        np.testing.assert_allclose(B, sy @ np.linalg.inv(R), atol=1e-12)
        assert np.linalg.norm(C) <= 1e-12

    def test_singular(self):
        with pytest.raises(Singular):
            wl_mmse_coefficients([[2.0]], [[2.0]], [[1.0]], [[0.0]])

    @pytest.mark.parametrize("seed", range(5))
    def test_augmented_normal_equations(self, seed):
        # joint (y, x) statistics from one random improper vector
        rng = np.random.default_rng(seed)
        s = random_stats(rng, 4)
        R, P = s.cov, s.pcov
        Rx, Px = R[2:, 2:], P[2:, 2:]
        Ryx, Pyx = R[:2, 2:], P[:2, 2:]
        B, C = wl_mmse_coefficients(Rx, Px, Ryx, Pyx)
        # oracle: W = R_{y x^a} (R^a_x)^{-1}
        Ryxa = np.hstack([Ryx, Pyx])
        W = np.linalg.solve(augment_blocks(Rx, Px).T, Ryxa.T).T
        np.testing.assert_allclose(np.hstack([B, C]), W, atol=1e-10)

    def test_sample_regression(self, rng):
        # least squares on samples converges to the widely linear coefficients
        s = random_stats(rng, 3)
        n = 200_000
        from wlkalman.stats import NoiseSampler
        z = NoiseSampler(s).sample(rng, n)
        y, x = z[:, :1], z[:, 1:]
        design = np.hstack([x, x.conj()])
        coef = np.linalg.lstsq(design, y, rcond=None)[0].T
        B, C = wl_mmse_coefficients(s.cov[1:, 1:], s.pcov[1:, 1:], s.cov[:1, 1:], s.pcov[:1, 1:])
        np.testing.assert_allclose(coef, np.hstack([B, C]), atol=0.02)


class TestCheckedInverse:
    def test_ill_conditioned(self):
        with pytest.raises(Singular):
            checked_inv(np.diag([1.0, 1e-14]))
