"""Noncircular complex Gaussian noise generation and the AR(2) benchmark signal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .algebra import SecondOrderStats
from .errors import InfeasiblePseudovariance, NotPSD, UnstableAR

AR_BURN_IN = 500
CLAMP_TOL = 1e-10


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream: ``(seed, stream, substream)`` -> generator.

    Distinct index tuples are mapped to independent PCG64 states through
    :class:`numpy.random.SeedSequence` spawn keys.
    """

    seed: int
    stream: int = 0
    substream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream, self.substream))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, substream: int) -> "RngStream":
        return RngStream(self.seed, self.stream, substream)


def _as_generator(rng):
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def bivariate_params(variance, pseudovariance):
    """Real/imaginary second moments of a scalar complex variable.

    Returns ``(var_real, var_imag, cov_ri)`` for ``u = a + jb`` with
    ``E{|u|^2} = variance`` and ``E{u^2} = pseudovariance``.
    """
    p = complex(pseudovariance)
    if abs(p) > variance * (1 + 1e-12):
        raise InfeasiblePseudovariance(f"|p|={abs(p)} exceeds variance {variance}")
    return (variance + p.real) / 2, (variance - p.real) / 2, p.imag / 2


def _offdiag(value, n):
    m = np.array(value, dtype=complex)
    if m.ndim == 0:
        m = np.full((n, n), complex(m))
    if m.shape != (n, n):
        raise ValueError(f"cross terms must be scalar or {n}x{n}")
    m = m.copy()
    np.fill_diagonal(m, 0)
    return m


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Scalar-per-node noise across a network.

    ``cross_cov[i, k] = E{v_i v_k*}`` and ``cross_pseudo[i, k] = E{v_i v_k}``
    for ``i != k``; diagonals are ignored.  Scalars broadcast to every pair.
    """

    variances: np.ndarray
    pseudovariances: np.ndarray = None
    cross_cov: np.ndarray = 0.0
    cross_pseudo: np.ndarray = 0.0

    def __post_init__(self):
        var = np.atleast_1d(np.asarray(self.variances, dtype=float))
        n = var.size
        if np.any(var <= 0):
            raise ValueError("variances must be positive")
        pv = np.zeros(n, complex) if self.pseudovariances is None else np.atleast_1d(
            np.asarray(self.pseudovariances, dtype=complex))
        if pv.shape != var.shape:
            pv = np.broadcast_to(pv, var.shape).copy()
        bad = np.abs(pv) > var * (1 + 1e-12)
        if np.any(bad):
            raise InfeasiblePseudovariance(f"|p_i| > variance at nodes {np.flatnonzero(bad) + 1}")
        object.__setattr__(self, "variances", var)
        object.__setattr__(self, "pseudovariances", pv)
        object.__setattr__(self, "cross_cov", _offdiag(self.cross_cov, n))
        object.__setattr__(self, "cross_pseudo", _offdiag(self.cross_pseudo, n))
        self.stats()  # joint PSD check

    @classmethod
    def with_eta(cls, variances, eta=0.0, phase=0.0, cross_cov=0.0, cross_pseudo=None):
        """Pseudovariances ``eta * variance * exp(j phase)`` at every node.

        With ``cross_pseudo=None`` the cross-pseudocovariances follow the same
        rule, ``eta * exp(j phase) * cross_cov``, so the whole network noise
        has pseudocovariance ``eta e^{j phase} R``.  This is always feasible;
        zero cross-pseudocovariances combined with strongly correlated,
        noncircular nodes generally are not.
        """
        var = np.atleast_1d(np.asarray(variances, dtype=float))
        rot = eta * np.exp(1j * phase)
        if cross_pseudo is None:
            cross_pseudo = rot * np.asarray(cross_cov, dtype=complex)
        return cls(var, rot * var, cross_cov, cross_pseudo)

    @property
    def n_nodes(self):
        return self.variances.size

    def covariance(self):
        return self.cross_cov + np.diag(self.variances).astype(complex)

    def pseudocovariance(self):
        return self.cross_pseudo + np.diag(self.pseudovariances)

    def stats(self) -> SecondOrderStats:
        return SecondOrderStats(self.covariance(), self.pseudocovariance())

    def circularity(self):
        return np.abs(self.pseudovariances) / self.variances


def real_square_root(c, clamp=CLAMP_TOL):
    """Symmetric square root of a real PSD matrix via its eigendecomposition.

    Eigenvalues in ``[-clamp * scale, 0)`` are treated as zero; anything
    more negative raises :class:`NotPSD`.
    """
    c = 0.5 * (c + c.T)
    lam, vec = np.linalg.eigh(c)
    scale = max(1.0, float(np.max(np.abs(c))))
    if lam[0] < -clamp * scale:
        raise NotPSD(f"joint real covariance has eigenvalue {lam[0]:.3e}")
    lam = np.clip(lam, 0.0, None)
    return (vec * np.sqrt(lam)) @ vec.T


class NoiseSampler:
    """Draws from the zero-mean complex Gaussian with given second-order stats.

    The ``2n x 2n`` covariance of ``[Re v; Im v]`` is factorized once; each
    draw transforms ``2n`` i.i.d. standard normals.
    """

    def __init__(self, stats):
        if isinstance(stats, NoiseSpec):
            stats = stats.stats()
        self.stats = stats
        self.n = stats.dim
        self.factor = real_square_root(stats.real_covariance())

    def transform(self, xi):
        """Map standard normals of shape ``(..., 2n)`` to complex draws ``(..., n)``."""
        r = np.asarray(xi) @ self.factor.T
        return r[..., : self.n] + 1j * r[..., self.n:]

    def sample(self, rng, size=()):
        gen = _as_generator(rng)
        size = (size,) if np.isscalar(size) else tuple(size)
        return self.transform(gen.standard_normal(size + (2 * self.n,)))


def sample_network_noise(spec: NoiseSpec, rng, size=()):
    """One joint draw per node (or ``size`` independent draws of the network)."""
    return NoiseSampler(spec).sample(rng, size)


def check_ar2(coeffs):
    a1, a2 = coeffs
    roots = np.roots([1.0, -a1, -a2])
    if np.any(np.abs(roots) >= 1.0):
        raise UnstableAR(f"AR({a1}, {a2}) has pole magnitude {np.max(np.abs(roots)):.4f} >= 1")
    return float(np.max(np.abs(roots)))


def ar2_variance(coeffs, driving_variance):
    """Stationary variance of ``z_n = a1 z_{n-1} + a2 z_{n-2} + u_n``."""
    a1, a2 = coeffs
    check_ar2(coeffs)
    return (1 - a2) * driving_variance / ((1 + a2) * ((1 - a2) ** 2 - a1 ** 2))


def ar2_filter(coeffs, u):
    """Run the AR(2) recursion from zero initial conditions over driving ``u``."""
    a1, a2 = coeffs
    check_ar2(coeffs)
    return lfilter([1.0], [1.0, -a1, -a2], np.asarray(u, dtype=complex), axis=0)


def ar2_sequence(coeffs, driving, length, rng=None, burn_in=AR_BURN_IN):
    """Complex AR(2) sequence of ``length`` samples after discarding ``burn_in``.

    Parameters
    ----------
    coeffs : (float, float)
        ``(a1, a2)`` in ``z_n = a1 z_{n-1} + a2 z_{n-2} + u_n``.
    driving : SecondOrderStats or NoiseSpec or None
        Scalar driving noise statistics; ``None`` gives the noise-free
        (all-zero) sequence.
    """
    check_ar2(coeffs)
    if length < 1:
        raise ValueError("length must be positive")
    total = burn_in + length
    if driving is None:
        u = np.zeros(total, complex)
    else:
        sampler = NoiseSampler(driving)
        if sampler.n != 1:
            raise ValueError("AR(2) driving noise must be scalar")
        u = sampler.sample(rng, total)[:, 0]
    return ar2_filter(coeffs, u)[burn_in:]


def empirical_moments(samples):
    """Sample covariance and pseudocovariance of draws arranged ``(draws, n)``."""
    v = np.asarray(samples)
    if v.ndim == 1:
        v = v[:, None]
    m = v.shape[0]
    return v.T @ v.conj() / m, v.T @ v / m

