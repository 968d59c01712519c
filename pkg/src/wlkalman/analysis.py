"""Theoretical error analysis of the diffusion filters.

The diffused errors of all nodes are propagated jointly in augmented
algebra.  With ``E`` the stack of diffused errors, ``K_i`` node ``i``'s gain
on the global augmented observation and ``W = C^T (x) I``:

    E_pred = (I (x) F^a) E_prev + 1 (x) w^a
    E_loc  = blockdiag(I - K_i H^a) E_pred - [K_1; ...; K_N] v^a
    E      = W E_loc

Second moments follow exactly; the neighbourhood cross-correlations
``Gamma_jk = E{e_loc_j e_loc_k^H}`` are the blocks of ``E{E_loc E_loc^H}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .algebra import DualityMap, augment_blocks
from .errors import ConfigurationError, InsufficientTrials
from .filters import FilterModel

STEADY_RTOL = 1e-8
STEADY_STEPS = 5
FIXED_RTOL = 1e-15


def stationary_covariance(model):
    """Augmented covariance of the stationary state (F^a must be stable)."""
    Fa = augment_blocks(model.F, model.A)
    if np.max(np.abs(np.linalg.eigvals(Fa))) >= 1:
        raise ConfigurationError("state transition is not stable; no stationary covariance")
    Qa = augment_blocks(model.state_noise.cov, model.state_noise.pcov)
    S = solve_discrete_lyapunov(Fa, Qa)
    return 0.5 * (S + S.conj().T)


def _augmented_gain(fm: FilterModel, Kg):
    """Express a gain on the global observation vector in augmented algebra."""
    if fm.algebra == "augmented":
        return Kg
    if fm.algebra == "strict":
        return augment_blocks(Kg, np.zeros_like(Kg))
    nk = Kg.shape[1] // 2
    return DualityMap(fm.L).J @ Kg @ DualityMap(nk).J_inv


@dataclass
class Propagation:
    """Output of :func:`propagate_covariance`.

    ``sigma[n, i]`` is the augmented second moment ``E{e e^H}`` of node
    ``i``'s diffused error after step ``n + 1``; ``mean`` holds the error
    means.  ``gamma`` and ``joint`` are the final-step second moments of
    the stacked local and diffused errors.
    """

    sigma: np.ndarray
    mean: np.ndarray
    gamma: np.ndarray
    joint: np.ndarray
    weights: np.ndarray
    settling_index: int = None
    d: int = 0

    @property
    def mse(self):
        """Per-node MSE ``tr(Sigma)/2`` for every step, shape ``(steps, N)``."""
        return np.trace(self.sigma, axis1=-2, axis2=-1).real / 2

    @property
    def steady_mse(self):
        return self.mse[-1]

    def gamma_block(self, j, k):
        d = self.d
        return self.gamma[j * d:(j + 1) * d, k * d:(k + 1) * d]


def propagate_covariance(fm: FilterModel, steps, init_cov=None, init_error=None):
    """Exact second moments of every node's diffused error.

    Parameters
    ----------
    fm : FilterModel
        Prepared filter.  Strictly linear variants are only analysable on
        strictly linear models.
    steps : int
    init_cov : (2L, 2L) array, optional
        Augmented covariance of the initial state around its mean; zero
        (deterministic start) if omitted.
    init_error : (L,) array, optional
        Mean initial error ``E{x_0} - xhat_0``; defaults to ``x0 - xhat_0``.
    """
    m = fm.model
    if fm.algebra == "strict" and not m.strictly_linear:
        raise ConfigurationError("strictly linear filters cannot be analysed on a widely linear model")
    N, L = m.n_nodes, m.L
    d = 2 * L
    Fa = augment_blocks(m.F, m.A)
    Qa = augment_blocks(m.state_noise.cov, m.state_noise.pcov)
    Ra = augment_blocks(m.obs_noise.cov, m.obs_noise.pcov)
    Hs = m.H.reshape(-1, L)
    Bs = m.B.reshape(-1, L)
    Hglob = augment_blocks(Hs, Bs)
    W = np.kron(fm.C.T, np.eye(d))
    Fblk = np.kron(np.eye(N), Fa)
    Qjoint = np.kron(np.ones((N, N)), Qa)

    if init_error is None:
        x0_hat = fm.estimate(fm.x0)
        init_error = m.x0 - x0_hat
    mean = np.tile(np.concatenate([init_error, np.conj(init_error)]), N).astype(complex)
    # raw second moments: noises are zero-mean and independent of the past,
    # so E{E E^H} obeys the covariance recursion and carries the bias along
    P = np.outer(mean, mean.conj())
    if init_cov is not None:
        P = P + np.kron(np.ones((N, N)), np.asarray(init_cov, dtype=complex))

    seq = fm.recursion(steps)
    sigma = np.empty((steps, N, d, d), complex)
    means = np.empty((steps, N, d), complex)
    settling = None
    quiet = 0
    prev = None
    gamma = None
    maps = {}
    fixed = 0
    n = 0
    while n < steps:
        step = seq[n]
        if id(step) not in maps:
            Ks = [_augmented_gain(fm, s[3]) for s in step]
            Kst = np.vstack(Ks)
            Tb = np.zeros((N * d, N * d), complex)
            for i, Ki in enumerate(Ks):
                Tb[i * d:(i + 1) * d, i * d:(i + 1) * d] = np.eye(d) - Ki @ Hglob
            maps[id(step)] = (Tb, Kst @ Ra @ Kst.conj().T)
        Tb, KRK = maps[id(step)]
        P_pred = Fblk @ P @ Fblk.conj().T + Qjoint
        gamma = Tb @ P_pred @ Tb.conj().T + KRK
        gamma = 0.5 * (gamma + gamma.conj().T)
        P = W @ gamma @ W.T
        P = 0.5 * (P + P.conj().T)
        mean = W @ (Tb @ (Fblk @ mean))
        for i in range(N):
            sigma[n, i] = P[i * d:(i + 1) * d, i * d:(i + 1) * d]
            means[n, i] = mean[i * d:(i + 1) * d]
        rel = np.inf
        if prev is not None:
            rel = np.linalg.norm(P - prev) / max(np.linalg.norm(P), 1e-300)
            quiet = quiet + 1 if rel < STEADY_RTOL else 0
            if quiet >= STEADY_STEPS and settling is None:
                settling = n + 1 - STEADY_STEPS
        prev = P
        n += 1
        # gains frozen and moments at a fixed point: the rest is constant
        fixed = fixed + 1 if rel < FIXED_RTOL else 0
        if fixed >= STEADY_STEPS and n < steps and seq[n] is step \
                and np.vdot(mean, mean).real < FIXED_RTOL * np.trace(P).real:
            sigma[n:] = sigma[n - 1]
            means[n:] = means[n - 1]
            break
    return Propagation(sigma, means, gamma, P, fm.C, settling, d)


def sigma_from_gamma(gamma, weights, d):
    """Per-node ``Sigma_i = sum_j sum_k c_ji c_ki Gamma_jk`` (double-sum form)."""
    C = np.asarray(weights)
    N = C.shape[0]
    out = np.zeros((N, d, d), complex)
    for i in range(N):
        for j in range(N):
            if C[j, i] == 0:
                continue
            for k in range(N):
                if C[k, i] == 0:
                    continue
                out[i] += C[j, i] * C[k, i] * gamma[j * d:(j + 1) * d, k * d:(k + 1) * d]
    return out


def worst_node_bound(gamma, hood, d):
    """``max_{k in hood} tr(Gamma_kk) / 2``: worst local MSE in a neighbourhood."""
    return max(np.trace(gamma[k * d:(k + 1) * d, k * d:(k + 1) * d]).real / 2 for k in hood)


def node_bounds(prop: Propagation, hoods):
    return np.array([worst_node_bound(prop.gamma, hood, prop.d) for hood in hoods])


@dataclass
class BiasEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    trials: int

    def z_scores(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.mean) / self.stderr
        return np.where(self.stderr == 0, np.where(self.mean == 0, 0.0, np.inf), z)

    def within(self, k=3.0):
        return bool(np.all(self.z_scores() <= k))


def empirical_bias(errors, min_trials=100):
    """Componentwise mean error and its standard error across trials.

    ``errors`` has the trial axis first; complex components are split into
    real and imaginary parts (appended as a last axis of length 2).
    """
    e = np.asarray(errors)
    if e.shape[0] < min_trials:
        raise InsufficientTrials(f"need >= {min_trials} trials, got {e.shape[0]}")
    if np.iscomplexobj(e):
        e = np.stack([e.real, e.imag], axis=-1)
    t = e.shape[0]
    return BiasEstimate(e.mean(axis=0), e.std(axis=0, ddof=1) / np.sqrt(t), t)


@dataclass
class MseReport:
    """Theoretical vs. empirical steady-state MSE of one variant."""

    variant: str
    theoretical: np.ndarray
    empirical: np.ndarray
    bounds: np.ndarray
    settling_index: int = None

    @property
    def network_theoretical(self):
        return float(np.mean(self.theoretical))

    @property
    def network_empirical(self):
        return float(np.mean(self.empirical))

    @property
    def worst_node_bound(self):
        return float(np.max(self.bounds))

    def bound_holds(self, tol=1e-9):
        return bool(np.all(self.theoretical <= self.bounds + tol))

    def rows(self):
        for i, (t, e, b) in enumerate(zip(self.theoretical, self.empirical, self.bounds)):
            yield {"variant": self.variant, "node": i + 1, "theoretical_mse": float(t),
                   "empirical_mse": float(e), "worst_node_bound": float(b)}
