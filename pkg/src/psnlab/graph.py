"""Sparse undirected networks, directed proposal networks and their statistics.

Adjacency is stored both as a dense boolean matrix (the desk-scale sizes here
never exceed a few thousand nodes) and, lazily, as sorted neighbor lists for
the degree / common-neighbor hot paths.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .model import DomainError, StatisticSpec

__all__ = [
    "UndirectedNetwork",
    "ProposalNetwork",
    "EdgeSet",
    "stable_from_proposals",
    "node_statistic",
    "edge_statistic",
    "subnetwork",
    "pair_order",
]


class UndirectedNetwork:
    """Simple undirected unweighted graph on nodes 0..n-1, no self-links."""

    def __init__(self, n: int, edges=()):
        if n < 1:
            raise DomainError("network needs at least one node")
        self.n = int(n)
        self._adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            self.add_edge(i, j)
        self._frozen = False

    @classmethod
    def from_matrix(cls, mat) -> "UndirectedNetwork":
        mat = np.asarray(mat, dtype=bool)
        if mat.shape[0] != mat.shape[1]:
            raise DomainError("adjacency matrix must be square")
        if not np.array_equal(mat, mat.T):
            raise DomainError("adjacency must be symmetric")
        if mat.diagonal().any():
            raise DomainError("self-links are not allowed")
        g = cls(mat.shape[0])
        g._adj = mat.copy()
        return g

    def add_edge(self, i, j):
        if i == j:
            raise DomainError("self-links are not allowed")
        self._adj[i, j] = True
        self._adj[j, i] = True

    def remove_edge(self, i, j):
        self._adj[i, j] = False
        self._adj[j, i] = False

    def has_edge(self, i, j) -> bool:
        return bool(self._adj[i, j])

    def freeze(self):
        """Mark construction finished; read-only sharing is safe afterwards."""
        self._adj.setflags(write=False)
        self._frozen = True
        return self

    @property
    def matrix(self) -> np.ndarray:
        return self._adj

    def degrees(self) -> np.ndarray:
        return self._adj.sum(axis=1).astype(np.int64)

    def neighbors(self, i) -> np.ndarray:
        return np.flatnonzero(self._adj[i])

    def edge_list(self):
        ii, jj = np.nonzero(np.triu(self._adj, k=1))
        return list(zip(ii.tolist(), jj.tolist()))

    def edge_count(self) -> int:
        return int(self._adj.sum()) // 2

    def copy(self) -> "UndirectedNetwork":
        g = UndirectedNetwork(self.n)
        g._adj = self._adj.copy()
        return g

    def relabel(self, perm) -> "UndirectedNetwork":
        """Apply the node permutation tau: new[tau[i], tau[j]] = old[i, j]."""
        perm = np.asarray(perm)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(self.n)
        g = UndirectedNetwork(self.n)
        g._adj = self._adj[np.ix_(inv, inv)].copy()
        return g

    def __eq__(self, other):
        return isinstance(other, UndirectedNetwork) and np.array_equal(
            self._adj, other._adj
        )

    def __hash__(self):
        return hash((self.n, self._adj.tobytes()))

    def __repr__(self):
        return f"UndirectedNetwork(n={self.n}, edges={self.edge_list()})"


class ProposalNetwork:
    """Directed 0/1 acceptance indicators D_ij, no self-proposals."""

    def __init__(self, n: int, directed_edges=()):
        self.n = int(n)
        self._d = np.zeros((n, n), dtype=bool)
        for i, j in directed_edges:
            self.set(i, j, True)

    @classmethod
    def from_matrix(cls, mat) -> "ProposalNetwork":
        mat = np.asarray(mat, dtype=bool)
        if mat.diagonal().any():
            raise DomainError("self-proposals are not allowed")
        p = cls(mat.shape[0])
        p._d = mat.copy()
        return p

    def set(self, i, j, value=True):
        if i == j:
            raise DomainError("self-proposals are not allowed")
        self._d[i, j] = bool(value)

    def get(self, i, j) -> bool:
        return bool(self._d[i, j])

    @property
    def matrix(self) -> np.ndarray:
        return self._d


@dataclass(frozen=True)
class EdgeSet:
    """An ordered collection of directed pairs (the 2 x r matrix of the text)."""

    columns: tuple

    def __post_init__(self):
        cols = tuple((int(i), int(j)) for i, j in self.columns)
        object.__setattr__(self, "columns", cols)

    def __len__(self):
        return len(self.columns)

    @classmethod
    def out_edges(cls, source, n, include=None) -> "EdgeSet":
        """All directed edges from `source` to other nodes (optionally filtered)."""
        targets = range(n) if include is None else include
        return cls(tuple((source, j) for j in targets if j != source))


def stable_from_proposals(d: ProposalNetwork) -> UndirectedNetwork:
    """Mutual-consent network L = D (hadamard) D'."""
    return UndirectedNetwork.from_matrix(d.matrix & d.matrix.T)


def node_statistic(spec: StatisticSpec, net: UndirectedNetwork, X, i) -> float:
    """Evaluate a node-level statistic at node i (value on the declared support)."""
    if i >= net.n:
        raise DomainError("node index out of range")
    if spec.kind == "degree":
        return spec.clamp(int(net.matrix[i].sum()))
    if spec.kind == "composition_share":
        nbrs = net.neighbors(i)
        if nbrs.size == 0:
            return spec.clamp(0.0)
        flagged = sum(1 for j in nbrs if float(X[j]) == spec.flag_value)
        return spec.clamp(flagged / nbrs.size)
    raise DomainError(f"{spec.kind} is not a node-level statistic")


def edge_statistic(spec: StatisticSpec, net: UndirectedNetwork, X, i, j) -> int:
    """Evaluate an edge-level statistic at the (unordered) pair i, j."""
    if i == j:
        raise DomainError("edge statistic needs two distinct nodes")
    common = int(np.count_nonzero(net.matrix[i] & net.matrix[j]))
    if spec.kind == "transitive_count":
        return spec.clamp(common)
    if spec.kind == "transitive_indicator":
        return spec.clamp(common > 0)
    raise DomainError(f"{spec.kind} is not an edge-level statistic")


def node_statistics_all(spec: StatisticSpec, net: UndirectedNetwork, X) -> np.ndarray:
    """Vector of node statistics for every node (hot path, vectorized)."""
    deg = net.matrix.sum(axis=1)
    if spec.kind == "degree":
        return np.minimum(deg, spec.cap).astype(np.int64)
    if spec.kind == "composition_share":
        flags = (np.asarray(X, dtype=float) == spec.flag_value).astype(np.int64)
        flagged = net.matrix @ flags
        share = np.divide(flagged, deg, out=np.zeros(net.n), where=deg > 0)
        return np.clip(np.round(share * spec.cap), 0, spec.cap) / spec.cap
    raise DomainError(f"{spec.kind} is not a node-level statistic")


def pair_order(nodes):
    """Canonical lexicographic pair order (i1 i2, i1 i3, ..., i_{D-1} i_D)."""
    nodes = tuple(nodes)
    return tuple(
        (nodes[a], nodes[b])
        for a in range(len(nodes))
        for b in range(a + 1, len(nodes))
    )


def subnetwork(net: UndirectedNetwork, nodes) -> tuple:
    """Bit configuration of the induced subnetwork, canonical pair order."""
    nodes = tuple(nodes)
    if len(set(nodes)) != len(nodes):
        raise DomainError("subnetwork nodes must be distinct")
    return tuple(int(net.matrix[i, j]) for i, j in pair_order(nodes))


# --- adjacency / attribute I/O -------------------------------------------

def write_edge_csv(net: UndirectedNetwork, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["i", "j"])
    for i, j in sorted(net.edge_list()):
        w.writerow([i, j])


def read_edge_csv(fh, n) -> UndirectedNetwork:
    rows = list(csv.reader(fh))
    if not rows or rows[0] != ["i", "j"]:
        raise DomainError("edge csv must start with header i,j")
    return UndirectedNetwork(n, edges=[(int(r[0]), int(r[1])) for r in rows[1:]])


def write_attr_csv(x_indices, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["node", "x_index"])
    for node, xi in enumerate(x_indices):
        w.writerow([node, int(xi)])


def read_attr_csv(fh) -> np.ndarray:
    rows = list(csv.reader(fh))
    if not rows or rows[0] != ["node", "x_index"]:
        raise DomainError("attribute csv must start with header node,x_index")
    out = np.empty(len(rows) - 1, dtype=np.int64)
    for r in rows[1:]:
        out[int(r[0])] = int(r[1])
    return out


def edges_to_text(net: UndirectedNetwork) -> str:
    buf = io.StringIO()
    write_edge_csv(net, buf)
    return buf.getvalue()
