"""Undirected graphs in compressed sparse form, plus discrete calculus.

Edges are stored once with the canonical orientation i < j, sorted
lexicographically, so every derived quantity is a deterministic function
of the edge *set* (input order never matters). Node functions are length-n
vectors, edge functions length-m vectors in canonical edge order.

Conventions: the gradient on edge (i, j) is f[j] - f[i]; the adjoint of
the gradient under the plain inner products is
``adjoint(F)[i] = 0.5 * sum_{j ~ i} (F(j,i) - F(i,j))`` with edge values
extended antisymmetrically, and the divergence is -2 times that adjoint.
With these choices ``divergence(grad f) = -2 L f`` for the combinatorial
Laplacian L = D - A.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import SymOperator


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with canonical (i < j) edges.

    ``indptr``/``indices`` form the CSR neighbor structure; neighbor lists
    are ascending, so m = indices.size / 2.
    """

    n: int
    edges: np.ndarray   # (m, 2) int64, i < j, lexicographically sorted
    indptr: np.ndarray  # (n + 1,) offsets
    indices: np.ndarray # concatenated sorted neighbor lists

    @property
    def m(self) -> int:
        return self.edges.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def adjacency_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        if self.m:
            a[self.edges[:, 0], self.edges[:, 1]] = 1.0
            a[self.edges[:, 1], self.edges[:, 0]] = 1.0
        return a

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edge_list) -> Graph:
    """Validate, deduplicate and canonically orient an edge list.

    Raises ``ValueError`` on out-of-range endpoints or self-loops.
    Duplicate edges (in either orientation) collapse to one.
    """
    n = int(n)
    if n <= 0:
        raise ValueError(f"node count must be positive, got {n}")
    e = np.asarray(list(edge_list), dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= n):
        bad = e[(e < 0).any(axis=1) | (e >= n).any(axis=1)][0]
        raise ValueError(f"edge {tuple(bad)} has endpoint outside [0, {n})")
    if e.size and (e[:, 0] == e[:, 1]).any():
        i = int(e[e[:, 0] == e[:, 1]][0, 0])
        raise ValueError(f"self-loop at node {i} is not allowed")
    if e.size:
        canon = np.stack([e.min(axis=1), e.max(axis=1)], axis=1)
        canon = np.unique(canon, axis=0)  # sorts lexicographically
    else:
        canon = np.empty((0, 2), dtype=np.int64)

    both = np.concatenate([canon, canon[:, ::-1]], axis=0)
    order = np.lexsort((both[:, 1], both[:, 0]))
    both = both[order]
    counts = np.bincount(both[:, 0], minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    indices = np.ascontiguousarray(both[:, 1])

    for a in (canon, indptr, indices):
        a.setflags(write=False)
    return Graph(n=n, edges=canon, indptr=indptr, indices=indices)


def _check_node_signal(g: Graph, f: np.ndarray, name: str = "f") -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != g.n:
        raise ValueError(f"{name} has length {f.shape[0]}, graph has n={g.n}")
    if not np.isfinite(f).all():
        raise ValueError(f"{name} contains non-finite entries")
    return f


def _check_edge_signal(g: Graph, F: np.ndarray, name: str = "F") -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.shape[0] != g.m:
        raise ValueError(f"{name} has length {F.shape[0]}, graph has m={g.m}")
    if not np.isfinite(F).all():
        raise ValueError(f"{name} contains non-finite entries")
    return F


def degree_matrix(g: Graph) -> SymOperator:
    """Diagonal operator of neighbor counts."""
    return SymOperator.from_edges(
        g.n, np.empty((0, 2), dtype=np.int64), np.empty(0), g.degrees.astype(np.float64)
    )


def grad(g: Graph, f: np.ndarray) -> np.ndarray:
    """Edge signal f[j] - f[i] per canonical edge (i < j).

    Accepts (n,) or (n, c); returns (m,) or (m, c).
    """
    f = _check_node_signal(g, f)
    return f[g.edges[:, 1]] - f[g.edges[:, 0]]


def grad_adjoint(g: Graph, F: np.ndarray) -> np.ndarray:
    """Adjoint of ``grad``: <grad f, F>_E = <f, grad_adjoint F>_V exactly."""
    F = _check_edge_signal(g, F)
    out = np.zeros((g.n,) + F.shape[1:])
    np.add.at(out, g.edges[:, 0], -F)
    np.add.at(out, g.edges[:, 1], F)
    return out


def divergence(g: Graph, F: np.ndarray) -> np.ndarray:
    """Divergence, defined as -2 times the gradient adjoint."""
    return -2.0 * grad_adjoint(g, F)


def laplacian(g: Graph) -> SymOperator:
    """Combinatorial Laplacian L = D - A (integer entries, zero row sums)."""
    w = -np.ones(g.m)
    return SymOperator.from_edges(g.n, g.edges, w, g.degrees.astype(np.float64))


def dirichlet_form(g: Graph, f: np.ndarray, h: np.ndarray) -> float:
    """0.5 * f^T L h, evaluated as half the edge sum of grad f * grad h."""
    f = _check_node_signal(g, f)
    h = _check_node_signal(g, h, "h")
    if f.ndim != 1 or h.ndim != 1:
        raise ValueError("dirichlet_form expects single-channel signals")
    return 0.5 * float(np.dot(grad(g, f), grad(g, h)))


# --- convenience constructors used across tasks and checks ---

def ring_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("ring needs n >= 3")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int) -> Graph:
    if n < 2:
        raise ValueError("path needs n >= 2")
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def star_graph(n: int) -> Graph:
    """Star on n nodes: center 0 joined to leaves 1..n-1."""
    if n < 2:
        raise ValueError("star needs n >= 2")
    return build_graph(n, [(0, i) for i in range(1, n)])


def complete_graph(n: int) -> Graph:
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def barbell_graph(n_clique: int, k_path: int) -> Graph:
    """Two complete graphs joined by a path of ``k_path`` bridge nodes.

    Nodes 0..n_clique-1 form the first bell, the next k_path nodes the
    bridge, the rest the second bell. The bells attach at nodes
    n_clique - 1 and n_clique + k_path.
    """
    if n_clique < 2:
        raise ValueError("bell size must be >= 2")
    if k_path < 1:
        raise ValueError("bridge must have at least one node")
    a = list(range(n_clique))
    bridge = list(range(n_clique, n_clique + k_path))
    b = list(range(n_clique + k_path, 2 * n_clique + k_path))
    edges = [(i, j) for i in a for j in a if i < j]
    edges += [(i, j) for i in b for j in b if i < j]
    chain = [a[-1]] + bridge + [b[0]]
    edges += [(chain[t], chain[t + 1]) for t in range(len(chain) - 1)]
    return build_graph(2 * n_clique + k_path, edges)
