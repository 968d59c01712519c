"""Network topology, self-inclusive neighbourhoods and diffusion weights.

Nodes are 0-based internally; fixture files and reports use 1-based ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import AsymmetricAdjacency, ConnectivityFailure, StructureError


def neighbourhoods(adjacency):
    """Sorted neighbour lists, each including the node itself."""
    a = np.asarray(adjacency)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise StructureError(f"adjacency must be square, got {a.shape}")
    a = a != 0
    if not np.array_equal(a, a.T):
        raise AsymmetricAdjacency("adjacency matrix is not symmetric")
    a = a | np.eye(a.shape[0], dtype=bool)
    return [tuple(int(k) for k in np.flatnonzero(row)) for row in a]


@dataclass(frozen=True, eq=False)
class NetworkTopology:
    adjacency: np.ndarray
    positions: np.ndarray = None
    neighbourhoods: tuple = field(init=False)
    connected: bool = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.adjacency) != 0
        hoods = tuple(neighbourhoods(a))
        np.fill_diagonal(a, False)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "neighbourhoods", hoods)
        ncomp, _ = connected_components(a.astype(np.int8), directed=False)
        object.__setattr__(self, "connected", ncomp == 1)

    @classmethod
    def from_edges(cls, n, edges):
        a = np.zeros((n, n), dtype=bool)
        for i, k in edges:
            if not (0 <= i < n and 0 <= k < n):
                raise StructureError(f"edge ({i}, {k}) outside 0..{n - 1}")
            a[i, k] = a[k, i] = True
        return cls(a)

    @classmethod
    def complete(cls, n):
        return cls(~np.eye(n, dtype=bool))

    @classmethod
    def path(cls, n):
        return cls.from_edges(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def isolated(cls, n):
        return cls(np.zeros((n, n), dtype=bool))

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def sizes(self):
        """``|N_i|`` for every node."""
        return np.array([len(h) for h in self.neighbourhoods])

    def edges(self):
        i, k = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), k.tolist()))

    def permute(self, perm):
        """Relabel nodes so that old node ``perm[j]`` becomes new node ``j``."""
        perm = np.asarray(perm)
        return NetworkTopology(self.adjacency[np.ix_(perm, perm)])

    def to_fixture(self):
        lines = [f"nodes {self.n_nodes}"]
        lines += [f"{i + 1} {k + 1}" for i, k in self.edges()]
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_fixture())

    @classmethod
    def from_fixture(cls, text):
        n = None
        edges = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "nodes":
                n = int(parts[1])
                continue
            if n is None:
                raise StructureError(f"line {lineno}: edge before 'nodes N' header")
            if len(parts) != 2:
                raise StructureError(f"line {lineno}: expected 'i j', got {raw!r}")
            edges.append((int(parts[0]) - 1, int(parts[1]) - 1))
        if n is None:
            raise StructureError("missing 'nodes N' header")
        return cls.from_edges(n, edges)

    @classmethod
    def load(cls, path):
        return cls.from_fixture(Path(path).read_text())


@dataclass(frozen=True, eq=False)
class DiffusionWeights:
    """Weights ``c[k, i]``: contribution of node ``k`` to node ``i``'s estimate."""

    matrix: np.ndarray
    topology: NetworkTopology = None

    def __post_init__(self):
        c = np.array(self.matrix, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise StructureError("weight matrix must be square")
        if np.any(c < 0):
            raise StructureError("weights must be nonnegative")
        if not np.allclose(c.sum(axis=0), 1.0, rtol=0, atol=1e-12):
            raise StructureError("weight columns must sum to one")
        if self.topology is not None:
            mask = np.zeros_like(c, dtype=bool)
            for i, hood in enumerate(self.topology.neighbourhoods):
                mask[list(hood), i] = True
            if np.any(c[~mask] != 0):
                raise StructureError("nonzero weight outside a neighbourhood")
        c.setflags(write=False)
        object.__setattr__(self, "matrix", c)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @property
    def n_nodes(self):
        return self.matrix.shape[0]

    def column(self, i):
        return self.matrix[:, i]


def nearest_neighbour_weights(topology: NetworkTopology) -> DiffusionWeights:
    """``c[k, i] = |N_k| / sum_{m in N_i} |N_m|`` for ``k`` in ``N_i``."""
    sizes = topology.sizes.astype(float)
    c = np.zeros((topology.n_nodes,) * 2)
    for i, hood in enumerate(topology.neighbourhoods):
        hood = list(hood)
        c[hood, i] = sizes[hood] / sizes[hood].sum()
    return DiffusionWeights(c, topology)


def uniform_weights(topology: NetworkTopology) -> DiffusionWeights:
    c = np.zeros((topology.n_nodes,) * 2)
    for i, hood in enumerate(topology.neighbourhoods):
        c[list(hood), i] = 1.0 / len(hood)
    return DiffusionWeights(c, topology)


WEIGHT_SCHEMES = {
    "nearest_neighbour": nearest_neighbour_weights,
    "uniform": uniform_weights,
}


def random_geometric_topology(n, radius, seed, max_retries=20):
    """Nodes uniform in the unit square, linked when within ``radius``.

    The radius grows by 10% per retry until the graph is connected.
    """
    if n < 1:
        raise ValueError("need at least one node")
    pos = np.random.default_rng(seed).uniform(size=(n, 2))
    dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
    r = float(radius)
    for _ in range(max_retries + 1):
        a = dist <= r
        np.fill_diagonal(a, False)
        topo = NetworkTopology(a, positions=pos)
        if topo.connected:
            return topo
        r *= 1.1
    raise ConnectivityFailure(f"no connected graph for n={n} after {max_retries} retries")
