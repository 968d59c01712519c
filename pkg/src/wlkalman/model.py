"""Widely linear distributed state-space models.

    x_n     = F x_{n-1} + A x*_{n-1} + u_n + w_n
    y_{i,n} = H_i x_n + B_i x*_n + v_{i,n}

``A = 0`` and ``B_i = 0`` give the strictly linear model.  Observation
noise is described jointly over all nodes, stacked node by node, so the
cross-covariances between nodes are part of the model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import AugmentedMatrix, SecondOrderStats, augment_blocks, augment_vector, as_matrix
from .errors import MissingObservation, StructureError
from .stats import NoiseSampler, NoiseSpec, RngStream, _as_generator


def _per_node(mats, n_nodes, shape_hint=None):
    arr = np.array(mats, dtype=complex)
    if arr.ndim == 2:
        arr = np.broadcast_to(arr, (n_nodes,) + arr.shape).copy()
    if arr.ndim != 3 or arr.shape[0] != n_nodes:
        raise StructureError(f"expected {n_nodes} per-node matrices, got shape {arr.shape}")
    if shape_hint is not None and arr.shape[1:] != shape_hint:
        raise StructureError(f"per-node matrices must be {shape_hint}, got {arr.shape[1:]}")
    return arr


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Time-invariant widely linear model over ``N`` nodes.

    Parameters
    ----------
    F, A : (L, L) arrays
    H, B : (N, K, L) arrays (a single (K, L) matrix is broadcast to all nodes)
    state_noise : SecondOrderStats of dimension L
    obs_noise : SecondOrderStats of dimension N*K, or a NoiseSpec when K = 1
    u : None, (L,) constant input, or (horizon, L) input sequence; ``u[n-1]`` is u_n
    x0 : (L,) initial state
    """

    F: np.ndarray
    H: np.ndarray
    state_noise: SecondOrderStats
    obs_noise: SecondOrderStats
    A: np.ndarray = None
    B: np.ndarray = None
    u: np.ndarray = None
    x0: np.ndarray = None

    def __post_init__(self):
        F = as_matrix(self.F)
        L = F.shape[0]
        if F.shape != (L, L):
            raise StructureError("F must be square")
        A = np.zeros_like(F) if self.A is None else as_matrix(self.A)
        if A.shape != F.shape:
            raise StructureError("A must match F")
        obs = self.obs_noise
        if isinstance(obs, NoiseSpec):
            obs = obs.stats()
        n_nodes = None
        H = np.array(self.H, dtype=complex)
        if H.ndim == 3:
            n_nodes = H.shape[0]
        elif H.ndim == 2:
            n_nodes = obs.dim // H.shape[0]
        elif H.ndim == 1:
            H = H[None, :]
            n_nodes = obs.dim
        else:
            raise StructureError("H must be (K, L) or (N, K, L)")
        H = _per_node(H, n_nodes)
        K = H.shape[1]
        if H.shape[2] != L:
            raise StructureError("observation matrices must have L columns")
        B = np.zeros_like(H) if self.B is None else _per_node(self.B, n_nodes, (K, L))
        if obs.dim != n_nodes * K:
            raise StructureError(f"observation noise has dim {obs.dim}, expected {n_nodes * K}")
        if self.state_noise.dim != L:
            raise StructureError("state noise dimension must equal L")
        u = None
        if self.u is not None:
            u = np.array(self.u, dtype=complex)
            if u.shape[-1] != L or u.ndim not in (1, 2):
                raise StructureError("known input must be (L,) or (horizon, L)")
        x0 = np.zeros(L, complex) if self.x0 is None else np.array(self.x0, dtype=complex).reshape(L)
        for name, val in dict(F=F, A=A, H=H, B=B, obs_noise=obs, u=u, x0=x0).items():
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def L(self):
        return self.F.shape[0]

    @property
    def K(self):
        return self.H.shape[1]

    @property
    def n_nodes(self):
        return self.H.shape[0]

    @property
    def strictly_linear(self):
        return not np.any(self.A) and not np.any(self.B)

    def input_at(self, n):
        """Known input u_n for n >= 1."""
        if self.u is None:
            return np.zeros(self.L, complex)
        if self.u.ndim == 1:
            return self.u
        return self.u[n - 1]

    def inputs(self, horizon):
        if self.u is None:
            return np.zeros((horizon, self.L), complex)
        if self.u.ndim == 1:
            return np.broadcast_to(self.u, (horizon, self.L))
        if self.u.shape[0] < horizon:
            raise StructureError(f"input sequence shorter than horizon {horizon}")
        return self.u[:horizon]

    def obs_index(self, nodes):
        """Positions of the given nodes' observations in the stacked vector."""
        K = self.K
        return np.concatenate([np.arange(k * K, (k + 1) * K) for k in nodes])

    def with_noise(self, state_noise=None, obs_noise=None):
        return StateSpaceModel(
            self.F, self.H, state_noise or self.state_noise, obs_noise or self.obs_noise,
            self.A, self.B, self.u, self.x0,
        )

    def permute(self, perm):
        """Relabel nodes so that old node ``perm[j]`` becomes new node ``j``."""
        idx = self.obs_index(perm)
        obs = SecondOrderStats(self.obs_noise.cov[np.ix_(idx, idx)], self.obs_noise.pcov[np.ix_(idx, idx)])
        return StateSpaceModel(self.F, self.H[perm], self.state_noise, obs, self.A, self.B[perm], self.u, self.x0)


@dataclass(frozen=True, eq=False)
class AugmentedModel:
    Fa: AugmentedMatrix
    Ha: tuple
    Qa: AugmentedMatrix
    Ra: AugmentedMatrix
    model: StateSpaceModel

    def input_at(self, n):
        return augment_vector(self.model.input_at(n))

    def neighbourhood_R(self, nodes):
        idx = self.model.obs_index(nodes)
        return AugmentedMatrix(self.Ra.a1[np.ix_(idx, idx)], self.Ra.a2[np.ix_(idx, idx)])


def augment_model(m: StateSpaceModel) -> AugmentedModel:
    return AugmentedModel(
        Fa=AugmentedMatrix(m.F, m.A),
        Ha=tuple(AugmentedMatrix(h, b) for h, b in zip(m.H, m.B)),
        Qa=m.state_noise.augmented(),
        Ra=m.obs_noise.augmented(),
        model=m,
    )


@dataclass(frozen=True, eq=False)
class NeighbourhoodObservation:
    """Stacked observation model of a neighbourhood, in ascending node order."""

    nodes: tuple
    H: np.ndarray
    B: np.ndarray
    R: np.ndarray
    U: np.ndarray
    y: np.ndarray = None

    @property
    def Ha(self):
        return augment_blocks(self.H, self.B)

    @property
    def Ra(self):
        return augment_blocks(self.R, self.U)

    @property
    def ya(self):
        return None if self.y is None else augment_vector(self.y)


def neighbourhood_model(m: StateSpaceModel, nodes, y=None):
    nodes = tuple(sorted(int(k) for k in nodes))
    idx = m.obs_index(nodes)
    return NeighbourhoodObservation(
        nodes=nodes,
        H=np.concatenate([m.H[k] for k in nodes]),
        B=np.concatenate([m.B[k] for k in nodes]),
        R=m.obs_noise.cov[np.ix_(idx, idx)],
        U=m.obs_noise.pcov[np.ix_(idx, idx)],
        y=y,
    )


def stack_neighbourhood(i, topology, m: StateSpaceModel, observations):
    """Collective observation of node ``i``'s neighbourhood at one time step.

    ``observations`` is an ``(N, K)`` array or a mapping ``node -> (K,)``.
    """
    if not 0 <= i < topology.n_nodes:
        raise IndexError(f"node {i} not in network of {topology.n_nodes}")
    hood = topology.neighbourhoods[i]
    parts = []
    for k in hood:
        try:
            yk = observations[k]
        except (KeyError, IndexError):
            raise MissingObservation(f"no observation from node {k + 1}") from None
        if yk is None:
            raise MissingObservation(f"no observation from node {k + 1}")
        parts.append(np.atleast_1d(np.asarray(yk, dtype=complex)))
    return neighbourhood_model(m, hood, np.concatenate(parts))


@dataclass(frozen=True)
class Trajectory:
    """Simulated states ``x[n-1] = x_n`` (n = 1..horizon) and observations ``y[n-1, i]``."""

    x0: np.ndarray
    x: np.ndarray
    y: np.ndarray


def propagate(m: StateSpaceModel, w, v, x0=None):
    """Deterministic part of :func:`simulate`: drive the model with given noises.

    ``w`` is ``(..., horizon, L)`` and ``v`` is ``(..., horizon, N*K)``; leading
    axes are batch axes.
    """
    w = np.asarray(w, dtype=complex)
    v = np.asarray(v, dtype=complex)
    horizon = w.shape[-2]
    u = m.inputs(horizon)
    x = np.empty(w.shape, complex)
    prev = np.broadcast_to(m.x0 if x0 is None else x0, w.shape[:-2] + (m.L,))
    Ft, At = m.F.T, m.A.T
    for n in range(horizon):
        prev = prev @ Ft + prev.conj() @ At + u[n] + w[..., n, :]
        x[..., n, :] = prev
    Hs = m.H.reshape(-1, m.L)
    Bs = m.B.reshape(-1, m.L)
    y = x @ Hs.T + x.conj() @ Bs.T + v
    return x, y.reshape(y.shape[:-1] + (m.n_nodes, m.K))


def draw_noises(m: StateSpaceModel, horizon, rng):
    """Standard normals for one trial: state noise from substream 0, observation noise from 1."""
    if isinstance(rng, RngStream):
        gw, gv = rng.child(0).generator(), rng.child(1).generator()
    else:
        gw = gv = _as_generator(rng)
    xi_w = gw.standard_normal((horizon, 2 * m.L))
    xi_v = gv.standard_normal((horizon, 2 * m.n_nodes * m.K))
    return xi_w, xi_v


def simulate(m: StateSpaceModel, horizon, rng=None, state_noise=None, obs_noise=None):
    """Simulate states and per-node observations for ``n = 1..horizon``.

    Noise realizations may be injected through ``state_noise`` (horizon, L)
    and ``obs_noise`` (horizon, N*K); otherwise they are drawn from ``rng``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if state_noise is None or obs_noise is None:
        xi_w, xi_v = draw_noises(m, horizon, rng)
        if state_noise is None:
            state_noise = NoiseSampler(m.state_noise).transform(xi_w)
        if obs_noise is None:
            obs_noise = NoiseSampler(m.obs_noise).transform(xi_v)
    x, y = propagate(m, state_noise, obs_noise)
    return Trajectory(m.x0, x, y)


def simulate_batch(m: StateSpaceModel, horizon, streams, burn_in=0):
    """Simulate one trajectory per stream; returns ``(x, y)`` with a leading trial axis.

    The first ``burn_in`` steps are simulated and then dropped.
    """
    total = horizon + burn_in
    draws = [draw_noises(m, total, s) for s in streams]
    w = NoiseSampler(m.state_noise).transform(np.stack([d[0] for d in draws]))
    v = NoiseSampler(m.obs_noise).transform(np.stack([d[1] for d in draws]))
    x, y = propagate(m, w, v)
    return x[:, burn_in:], y[:, burn_in:]


def ar2_model(coeffs, driving: SecondOrderStats, obs_noise, x0=None):
    """Companion-form embedding of a complex AR(2) observed at every node.

    State ``[z_n, z_{n-1}]``; every node observes ``z_n``.
    """
    a1, a2 = coeffs
    F = np.array([[a1, a2], [1.0, 0.0]])
    Q = np.zeros((2, 2), complex)
    P = np.zeros((2, 2), complex)
    Q[0, 0] = driving.cov[0, 0]
    P[0, 0] = driving.pcov[0, 0]
    n_nodes = obs_noise.n_nodes if isinstance(obs_noise, NoiseSpec) else obs_noise.dim
    H = np.array([[1.0, 0.0]])
    return StateSpaceModel(F, np.broadcast_to(H, (n_nodes, 1, 2)), SecondOrderStats(Q, P), obs_noise, x0=x0)


GRAVITY = 9.8


def projectile_model(T, obs_noise, state_variance, state_pseudovariance=0.0,
                     velocity=(20.0, 10.0), position=(0.0, 0.0), g=GRAVITY):
    """Two-dimensional projectile in complex form (horizontal + j vertical).

    State ``[position, velocity]``; the known input ``-j K g`` applies gravity
    and the scalar state noise enters through ``K = [T^2/2, T]``.
    """
    F = np.array([[1.0, T], [0.0, 1.0]])
    Kv = np.array([T * T / 2, T])
    KK = np.outer(Kv, Kv)
    state = SecondOrderStats(state_variance * KK, state_pseudovariance * KK)
    n_nodes = obs_noise.n_nodes if isinstance(obs_noise, NoiseSpec) else obs_noise.dim
    H = np.array([[1.0, 0.0]])
    x0 = np.array([complex(*position), complex(*velocity)])
    return StateSpaceModel(F, np.broadcast_to(H, (n_nodes, 1, 2)), state, obs_noise,
                           u=-1j * g * Kv, x0=x0)
