"""Distributed Kalman filters in strict complex, augmented and real algebras.

Variants
--------
DCKF          strictly linear diffusion filter over neighbourhood observations
DACKF         augmented (widely linear) diffusion filter
DACKF_INFO    information-form DACKF; valid only for uncorrelated node noises
CENTRAL_CKF   one strictly linear filter on the whole network's observations
CENTRAL_ACKF  one augmented filter on the whole network's observations
DRKF          real bivariate dual of DACKF
LOCAL         non-cooperative strictly linear filter at every node
BASELINE      strictly linear information-form diffusion filter that treats
              node noises as uncorrelated (drops cross-covariances)

Every variant follows the same schedule per time step: predict, local
update over the node's neighbourhood, then diffusion of the estimates.
Diffusion does not touch the M matrices.

The M/gain recursion does not depend on the data, so
:meth:`FilterModel.schedule` computes it once and :func:`run_batch` applies
the resulting linear maps to many trials at once.  :func:`step_network` is
the direct per-node implementation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .algebra import DualityMap, augment_blocks, augment_vector, checked_inv, checked_solve
from .errors import ConfigurationError, SingularInnovation, SingularM
from .model import StateSpaceModel, neighbourhood_model
from .network import DiffusionWeights, NetworkTopology, nearest_neighbour_weights

DEFAULT_DELTA = 100.0
FREEZE_TOL = 1e-14
FREEZE_STEPS = 5


class FilterVariant(str, Enum):
    DCKF = "DCKF"
    DACKF = "DACKF"
    DACKF_INFO = "DACKF_INFO"
    CENTRAL_CKF = "CENTRAL_CKF"
    CENTRAL_ACKF = "CENTRAL_ACKF"
    DRKF = "DRKF"
    LOCAL = "LOCAL"
    BASELINE = "BASELINE"

    @property
    def algebra(self):
        if self in (FilterVariant.DACKF, FilterVariant.DACKF_INFO, FilterVariant.CENTRAL_ACKF):
            return "augmented"
        if self is FilterVariant.DRKF:
            return "real"
        return "strict"

    @property
    def information_form(self):
        return self in (FilterVariant.DACKF_INFO, FilterVariant.BASELINE)

    @property
    def scope(self):
        if self in (FilterVariant.CENTRAL_CKF, FilterVariant.CENTRAL_ACKF):
            return "central"
        if self is FilterVariant.LOCAL:
            return "local"
        return "distributed"

    @classmethod
    def parse(cls, name):
        key = str(name).strip().upper()
        aliases = {"CENTRALISED_CKF": "CENTRAL_CKF", "CENTRALISED_ACKF": "CENTRAL_ACKF"}
        # "D-ACKF" -> "DACKF", "centralised-ckf" -> "CENTRAL_CKF"
        for cand in (key.replace("-", "_"), key.replace("-", "")):
            cand = aliases.get(cand, cand)
            if cand in cls.__members__:
                return cls(cand)
        raise ConfigurationError(f"unknown filter variant {name!r}")


@dataclass(frozen=True)
class NodeFilterState:
    """Estimate ``x`` and matrix ``M`` of one node, in the variant's algebra."""

    x: np.ndarray
    M: np.ndarray
    G: np.ndarray = None


def _herm(m):
    return 0.5 * (m + m.conj().T)


def predict(state: NodeFilterState, F, Q, u=None) -> NodeFilterState:
    """``x = F x + u``, ``M = F M F^H + Q``."""
    x = F @ state.x
    if u is not None:
        x = x + u
    return NodeFilterState(x, _herm(F @ state.M @ F.conj().T + Q))


def local_update(pred: NodeFilterState, H, R, y=None) -> NodeFilterState:
    """Kalman update of a predicted state with a (stacked) observation.

    The M update uses the Joseph form, which equals ``(I - G H) M`` in exact
    arithmetic and keeps M Hermitian PSD under roundoff.  With ``y=None``
    only M and the gain are updated.
    """
    M = pred.M
    MHh = M @ H.conj().T
    S = _herm(H @ MHh + R)
    # G = M H^H S^{-1}; S and M are Hermitian
    G = checked_solve(S, MHh.conj().T, exc=SingularInnovation, what="innovation covariance").conj().T
    IKH = np.eye(M.shape[0]) - G @ H
    M_new = _herm(IKH @ M @ IKH.conj().T + G @ R @ G.conj().T)
    x = None
    if y is not None and pred.x is not None:
        x = pred.x + G @ (y - H @ pred.x)
    return NodeFilterState(x, M_new, G)


def info_update(pred: NodeFilterState, terms) -> NodeFilterState:
    """Information-form update from per-node terms ``[(H_k, R_k, y_k), ...]``.

    ``S = sum H^H R^{-1} H``, ``r = sum H^H R^{-1} y``,
    ``M^{-1} = M_pred^{-1} + S`` and ``x = x_pred + M (r - S x_pred)``.
    """
    d = pred.M.shape[0]
    dtype = np.result_type(pred.M, *(t[0] for t in terms)) if terms else pred.M.dtype
    S = np.zeros((d, d), dtype)
    r = np.zeros(d, dtype)
    for H, R, y in terms:
        RiH = checked_solve(R, H, exc=SingularInnovation, what="node noise covariance")
        S = S + H.conj().T @ RiH
        if y is not None:
            r = r + RiH.conj().T @ y
    if not terms:
        return NodeFilterState(pred.x, pred.M)
    M_inv = checked_inv(pred.M, exc=SingularM, what="predicted M") + S
    M = _herm(checked_inv(_herm(M_inv), exc=SingularM, what="updated information matrix"))
    x = None
    if pred.x is not None:
        x = pred.x + M @ (r - S @ pred.x)
    return NodeFilterState(x, M)


def diffuse(estimates, weights):
    """Convex combination ``sum_k c_k x_k`` of the neighbourhood estimates."""
    est = np.asarray(estimates)
    w = np.asarray(weights, dtype=float)
    return np.tensordot(w, est, axes=(0, 0))


@dataclass
class _NodeObs:
    sel: np.ndarray          # positions in the global observation vector
    H: np.ndarray
    R: np.ndarray


class FilterModel:
    """A model, topology and weights prepared for one filter variant.

    All matrices are expressed in the variant's algebra: complex ``L``-vectors
    (strict), augmented ``2L``-vectors, or real composite ``2L``-vectors.
    The global observation vector at one step is ``y`` stacked over nodes
    (strict), ``[y; y*]`` (augmented) or ``[Re y; Im y]`` (real).
    """

    def __init__(self, variant, model: StateSpaceModel, topology: NetworkTopology = None,
                 weights: DiffusionWeights = None, delta=DEFAULT_DELTA, x0=None):
        self.variant = variant = FilterVariant.parse(variant)
        self.model = model
        N = model.n_nodes
        if topology is None:
            topology = NetworkTopology.complete(N)
        if topology.n_nodes != N:
            raise ConfigurationError(f"topology has {topology.n_nodes} nodes, model has {N}")
        self.topology = topology
        if variant.scope == "central":
            self.hoods = [tuple(range(N))] * N
            self.C = np.eye(N)
        elif variant.scope == "local":
            self.hoods = [(i,) for i in range(N)]
            self.C = np.eye(N)
        else:
            self.hoods = list(topology.neighbourhoods)
            if weights is None:
                weights = nearest_neighbour_weights(topology)
            if weights.n_nodes != N:
                raise ConfigurationError("weight matrix size does not match the network")
            self.C = np.asarray(weights.matrix)
        self.algebra = variant.algebra
        L = model.L
        self.L = L
        self.d = L if self.algebra == "strict" else 2 * L
        self.dtype = float if self.algebra == "real" else complex
        self._jx = DualityMap(L)

        if self.algebra == "strict":
            self.F, self.Q = np.asarray(model.F), model.state_noise.cov
        else:
            Fa = augment_blocks(model.F, model.A)
            Qa = augment_blocks(model.state_noise.cov, model.state_noise.pcov)
            if self.algebra == "augmented":
                self.F, self.Q = Fa, Qa
            else:
                self.F = DualityMap.transport(Fa, self._jx, self._jx)
                self.Q = self._jx.transport_cov(Qa)

        if variant is FilterVariant.DACKF_INFO:
            self._check_uncorrelated()
        self.node_obs = [self._obs_for(hood) for hood in self.hoods]
        self.single_obs = [self._obs_for((k,)) for k in range(N)] if variant.information_form else None

        if x0 is None:
            x0 = np.zeros(L, complex)
        self.x0 = self.lift(np.asarray(x0, dtype=complex))
        scale = 0.5 if self.algebra == "real" else 1.0
        self.M0 = delta * scale * np.eye(self.d, dtype=self.dtype)

    def _check_uncorrelated(self):
        m = self.model
        for hood in self.hoods:
            for a in hood:
                for b in hood:
                    if a == b:
                        continue
                    ia, ib = m.obs_index([a]), m.obs_index([b])
                    if np.any(m.obs_noise.cov[np.ix_(ia, ib)]) or np.any(m.obs_noise.pcov[np.ix_(ia, ib)]):
                        raise ConfigurationError(
                            "information-form DACKF requires uncorrelated node noises "
                            f"(nodes {a + 1} and {b + 1} are correlated)")

    def _obs_for(self, nodes):
        m = self.model
        nb = neighbourhood_model(m, nodes)
        idx = m.obs_index(nb.nodes)
        NK = m.n_nodes * m.K
        if self.algebra == "strict":
            return _NodeObs(idx, nb.H, nb.R)
        sel = np.concatenate([idx, idx + NK])
        Ha, Ra = nb.Ha, nb.Ra
        if self.algebra == "augmented":
            return _NodeObs(sel, Ha, Ra)
        jy = DualityMap(len(idx))
        return _NodeObs(sel, DualityMap.transport(Ha, jy, self._jx), jy.transport_cov(Ra))

    # conversions between the complex state and the variant's algebra
    def lift(self, x):
        if self.algebra == "strict":
            return x
        xa = augment_vector(x)
        return xa if self.algebra == "augmented" else self._jx.to_real(xa)

    def estimate(self, xv):
        """Complex state estimate from a vector (or stack of vectors) in the algebra."""
        xv = np.asarray(xv)
        if self.algebra == "strict":
            return xv
        if self.algebra == "augmented":
            return xv[..., : self.L]
        return xv[..., : self.L] + 1j * xv[..., self.L:]

    def observe(self, y):
        """Global observation vector(s) from per-node observations ``(..., N, K)``."""
        y = np.asarray(y, dtype=complex)
        flat = y.reshape(y.shape[:-2] + (-1,))
        if self.algebra == "strict":
            return flat
        if self.algebra == "augmented":
            return augment_vector(flat)
        return np.concatenate([flat.real, flat.imag], axis=-1)

    def input_at(self, n):
        return self.lift(self.model.input_at(n))

    def inputs(self, horizon):
        u = self.model.inputs(horizon)
        return np.stack([self.lift(un) for un in u]) if horizon else np.zeros((0, self.d), self.dtype)

    def initial_states(self):
        return [NodeFilterState(self.x0.copy(), self.M0.copy()) for _ in range(self.model.n_nodes)]

    def node_update(self, i, pred: NodeFilterState, g=None) -> NodeFilterState:
        """Local (non-diffused) update at node ``i``; ``g`` is the global observation vector."""
        if self.variant.information_form:
            terms = [(o.H, o.R, None if g is None else g[o.sel])
                     for o in (self.single_obs[k] for k in self.hoods[i])]
            return info_update(pred, terms)
        o = self.node_obs[i]
        return local_update(pred, o.H, o.R, None if g is None else g[o.sel])

    def _linear_update(self, i, pred_M):
        """``(M_new, T, Kg)`` with ``x_local = T x_pred + Kg g`` at node ``i``."""
        gdim = self._gdim
        Kg = np.zeros((self.d, gdim), self.dtype)
        if self.variant.information_form:
            st = self.node_update(i, NodeFilterState(None, pred_M))
            T = np.eye(self.d, dtype=self.dtype)
            for k in self.hoods[i]:
                o = self.single_obs[k]
                RiH = checked_solve(o.R, o.H, exc=SingularInnovation, what="node noise covariance")
                Kg[:, o.sel] += st.M @ RiH.conj().T
                T = T - st.M @ o.H.conj().T @ RiH
            return st.M, T, Kg
        st = self.node_update(i, NodeFilterState(None, pred_M))
        o = self.node_obs[i]
        Kg[:, o.sel] = st.G
        return st.M, np.eye(self.d) - st.G @ o.H, Kg

    @property
    def _gdim(self):
        nk = self.model.n_nodes * self.model.K
        return nk if self.algebra == "strict" else 2 * nk

    def recursion(self, horizon):
        """Per-step ``[(M_pred, M, T, Kg), ...]`` for every node, ``n = 1..horizon``.

        ``x_local = T x_pred + Kg g`` is node ``i``'s update as a linear map.
        Nodes sharing a neighbourhood share the computation.  Once every
        node's M has settled (relative change below 1e-14 for five steps) the
        last step is reused.
        """
        N = self.model.n_nodes
        Ms = [self.M0] * N
        seq = []
        quiet = 0
        for n in range(horizon):
            if quiet >= FREEZE_STEPS:
                seq.append(seq[-1])
                continue
            cache = {}
            step = []
            for i in range(N):
                key = (self.hoods[i], id(Ms[i]))
                if key not in cache:
                    Mp = _herm(self.F @ Ms[i] @ self.F.conj().T + self.Q)
                    cache[key] = (Mp,) + self._linear_update(i, Mp)
                step.append(cache[key])
            newMs = [s[1] for s in step]
            change = max(np.linalg.norm(a - b) / max(np.linalg.norm(a), 1e-300)
                         for a, b in zip(newMs, Ms))
            quiet = quiet + 1 if change < FREEZE_TOL else 0
            seq.append(step)
            Ms = newMs
        return seq

    def schedule(self, horizon):
        """Per-step network maps ``(Tstack, Psi)`` for ``n = 1..horizon``.

        With all node estimates stacked into ``X`` (length ``N d``),
        ``X_n = Tstack (blockdiag(F) X_{n-1} + 1 (x) u_n) + Psi g_n``.
        """
        W = np.kron(self.C.T, np.eye(self.d))
        out = []
        memo = {}
        for step in self.recursion(horizon):
            key = id(step)
            if key not in memo:
                memo[key] = (W @ _blockdiag([s[2] for s in step]), W @ np.vstack([s[3] for s in step]))
            out.append(memo[key])
        return out


def _blockdiag(blocks):
    d = blocks[0].shape[0]
    out = np.zeros((d * len(blocks),) * 2, dtype=np.result_type(*blocks))
    for i, b in enumerate(blocks):
        out[i * d:(i + 1) * d, i * d:(i + 1) * d] = b
    return out


def step_network(states, fm: FilterModel, y_n, n):
    """One predict / local update / diffusion step for every node.

    Parameters
    ----------
    states : list of NodeFilterState
    fm : FilterModel
    y_n : (N, K) observations at step ``n``
    n : int, time index (>= 1), selects the known input u_n
    """
    g = fm.observe(y_n)
    u = fm.input_at(n)
    local = []
    for i, st in enumerate(states):
        pred = predict(st, fm.F, fm.Q, u)
        local.append(fm.node_update(i, pred, g))
    xs = np.stack([s.x for s in local])
    new = []
    for i, hood in enumerate(fm.hoods):
        hood = list(hood)
        x = diffuse(xs[hood], fm.C[hood, i]) if fm.variant.scope == "distributed" else xs[i]
        new.append(NodeFilterState(x, local[i].M, local[i].G))
    return new


def run_states(fm: FilterModel, y):
    """Run :func:`step_network` over observations ``(horizon, N, K)``.

    Returns estimates in the variant's algebra, shape ``(horizon, N, d)``.
    """
    states = fm.initial_states()
    out = np.empty((y.shape[0], fm.model.n_nodes, fm.d), fm.dtype)
    for n in range(y.shape[0]):
        states = step_network(states, fm, y[n], n + 1)
        out[n] = np.stack([s.x for s in states])
    return out


def run_batch(fm: FilterModel, y, schedule=None):
    """Filter a batch of observation trajectories ``(B, horizon, N, K)``.

    Returns estimates in the variant's algebra, shape ``(B, horizon, N, d)``.
    """
    y = np.asarray(y)
    B, horizon, N = y.shape[:3]
    d = fm.d
    if schedule is None:
        schedule = fm.schedule(horizon)
    g = fm.observe(y)
    if fm.algebra == "real":
        g = g.real
    u = fm.inputs(horizon)
    Fblk_t = np.kron(np.eye(N), fm.F).T
    X = np.broadcast_to(np.tile(fm.x0, N), (B, N * d)).astype(fm.dtype)
    out = np.empty((B, horizon, N * d), fm.dtype)
    for n in range(horizon):
        Tstack, Psi = schedule[n]
        X = (X @ Fblk_t + np.tile(u[n], N)) @ Tstack.T + g[:, n] @ Psi.T
        out[:, n] = X
    return out.reshape(B, horizon, N, d)
