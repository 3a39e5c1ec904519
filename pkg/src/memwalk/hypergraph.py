"""Directed k-uniform hypergraphs and their tensor representations.

A directed hyperedge consists of a head node and an ordered tail of k-1
nodes; a walker whose recent history matches the tail may jump to the head.
Undirected hyperedges stand for the set of every (head, ordered tail)
arrangement of their nodes.  This module builds the adjacency, degree, and
normalized tensors, converts them into transition or rate tensors, and
offers the memoryless comparison walk on the pairwise projected graph.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from . import graphs
from .ctmc import RateTensor
from .errors import IterationLimitError, ValidationError
from .markov import TransitionTensor

__all__ = [
    "AdjacencyBundle",
    "DirectedHypergraph",
    "ProjectedGraph",
    "adjacency_bundle",
    "classical_walk_stationary",
    "expand_undirected",
    "project",
    "to_rate",
    "to_transition",
]


def expand_undirected(nodes: Iterable[int], weight: float = 1.0) -> list[tuple[int, tuple[int, ...], float]]:
    """All directed arrangements of an undirected hyperedge.

    Each of the k nodes serves as head once per ordering of the remaining
    k-1 nodes, giving k! configurations, all carrying the given weight.
    """
    members = tuple(int(v) for v in nodes)
    if len(set(members)) != len(members):
        raise ValidationError(f"hyperedge nodes must be distinct, got {members}")
    out = []
    for head in members:
        rest = [v for v in members if v != head]
        for tail in permutations(rest):
            out.append((head, tail, float(weight)))
    return out


class DirectedHypergraph:
    """k-uniform directed hypergraph on nodes ``1..n``.

    Edges are ``(head, ordered tail, weight)`` with positive weights;
    duplicate (head, tail) pairs merge by summing weights.  When built from
    undirected hyperedges the original node sets are kept so the projected
    graph can be formed without double counting.
    """

    __slots__ = ("n", "k", "_edges", "undirected_source")

    def __init__(
        self,
        n: int,
        k: int,
        edges: Iterable[tuple[int, Sequence[int], float]],
        undirected_source: tuple[tuple[tuple[int, ...], float], ...] | None = None,
    ):
        self.n = int(n)
        self.k = int(k)
        if self.n < 1 or self.k < 2:
            raise ValidationError("need n >= 1 nodes and hyperedge size k >= 2")
        merged: dict[tuple[int, tuple[int, ...]], float] = {}
        for head, tail, weight in edges:
            head = int(head)
            tail = tuple(int(v) for v in tail)
            weight = float(weight)
            if len(tail) != self.k - 1:
                raise ValidationError(
                    f"tail {tail} has length {len(tail)}, expected {self.k - 1}"
                )
            for v in (head, *tail):
                if not 1 <= v <= self.n:
                    raise ValidationError(f"node {v} outside 1..{self.n}")
            if weight <= 0:
                raise ValidationError(f"edge ({head}|{tail}) has nonpositive weight")
            merged[(head, tail)] = merged.get((head, tail), 0.0) + weight
        self._edges = tuple(
            (head, tail, merged[(head, tail)]) for head, tail in sorted(merged)
        )
        self.undirected_source = undirected_source

    @classmethod
    def from_undirected(
        cls, n: int, k: int, hyperedges: Iterable[tuple[Iterable[int], float]]
    ) -> "DirectedHypergraph":
        """Expand undirected hyperedges into all directed configurations."""
        source = []
        directed: list[tuple[int, tuple[int, ...], float]] = []
        for nodes, weight in hyperedges:
            members = tuple(sorted(int(v) for v in nodes))
            if len(members) != int(k):
                raise ValidationError(
                    f"hyperedge {members} has {len(members)} nodes, expected {k}"
                )
            source.append((members, float(weight)))
            directed.extend(expand_undirected(members, weight))
        return cls(n, k, directed, undirected_source=tuple(source))

    @property
    def edges(self) -> tuple[tuple[int, tuple[int, ...], float], ...]:
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def __repr__(self) -> str:
        return f"DirectedHypergraph(n={self.n}, k={self.k}, edges={self.num_edges})"


@dataclass(frozen=True)
class AdjacencyBundle:
    """Adjacency tensor, tail degrees, and the tail-normalized tensor.

    ``normalized`` has unit head-sums on every tail with positive degree;
    zero-degree tails stay zero and are resolved by the downstream
    dangling-history policy.
    """

    adjacency: np.ndarray
    tail_degree: np.ndarray
    normalized: np.ndarray


def adjacency_bundle(graph: DirectedHypergraph) -> AdjacencyBundle:
    shape = (graph.n,) * graph.k
    A = np.zeros(shape)
    for head, tail, weight in graph.edges:
        A[(head - 1,) + tuple(v - 1 for v in tail)] += weight
    degree = A.sum(axis=0)
    normalized = np.divide(
        A, degree, out=np.zeros_like(A), where=degree > 0
    )
    for arr in (A, degree, normalized):
        arr.setflags(write=False)
    return AdjacencyBundle(A, degree, normalized)


def to_transition(
    graph: DirectedHypergraph, policy: str = "restrict", tol: float = 1e-12
) -> TransitionTensor:
    """Memory-walk transition tensor of a hypergraph.

    The walk conditions on the last k-1 visited nodes, so the tensor order
    equals the hyperedge size.  ``restrict`` is the natural default here:
    hypergraphs routinely leave many histories unrealizable.
    """
    bundle = adjacency_bundle(graph)
    return TransitionTensor(bundle.normalized, policy=policy, tol=tol)


def to_rate(graph: DirectedHypergraph) -> RateTensor:
    """Continuous-time inflow rates: the raw adjacency weights, unnormalized."""
    return RateTensor(adjacency_bundle(graph).adjacency)


class ProjectedGraph:
    """Weighted pairwise graph obtained by replacing hyperedges with cliques."""

    __slots__ = ("_W",)

    def __init__(self, weights):
        W = np.asarray(weights, dtype=float).copy()
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValidationError("projected graph needs a square weight matrix")
        if not np.allclose(W, W.T):
            raise ValidationError("projected graph weights must be symmetric")
        if W.min() < 0:
            raise ValidationError("projected graph weights must be nonnegative")
        np.fill_diagonal(W, 0.0)
        W.setflags(write=False)
        self._W = W

    @property
    def weights(self) -> np.ndarray:
        return self._W

    @property
    def n(self) -> int:
        return self._W.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self._W.sum(axis=0)

    def __repr__(self) -> str:
        return f"ProjectedGraph(n={self.n})"


def project(source, n: int | None = None) -> ProjectedGraph:
    """Clique expansion of hyperedges into a weighted pairwise graph.

    ``source`` may be a :class:`DirectedHypergraph` (its undirected origin is
    used when available, otherwise each directed edge contributes its
    head-plus-tail node set) or an iterable of ``(nodes, weight)`` pairs /
    bare node collections.
    """
    if isinstance(source, DirectedHypergraph):
        size = source.n
        if source.undirected_source is not None:
            items = source.undirected_source
        else:
            items = tuple(
                (set((head,) + tail), weight) for head, tail, weight in source.edges
            )
    else:
        items = []
        size = n or 0
        for entry in source:
            if (
                isinstance(entry, tuple)
                and len(entry) == 2
                and isinstance(entry[0], (set, frozenset, list, tuple))
            ):
                nodes, weight = entry
            else:
                nodes, weight = entry, 1.0
            nodes = tuple(int(v) for v in nodes)
            items.append((nodes, float(weight)))
            size = max(size, max(nodes))
    if size < 1:
        raise ValidationError("cannot project an empty hyperedge list without n")
    W = np.zeros((size, size))
    for nodes, weight in items:
        for u, v in combinations(sorted(set(nodes)), 2):
            W[u - 1, v - 1] += weight
            W[v - 1, u - 1] += weight
    return ProjectedGraph(W)


def classical_walk_stationary(
    graph: ProjectedGraph, tol: float = 1e-13, max_iter: int = 500000
) -> np.ndarray:
    """Stationary law of the memoryless degree-normalized walk.

    Computed by power iteration averaged over two consecutive iterates, which
    stays convergent on bipartite components.  A disconnected graph warns and
    returns the uniform-start limit: each component weighted by its share of
    nodes, isolated nodes keeping their own mass.
    """
    W = graph.weights
    n = graph.n
    deg = graph.degrees
    n_comp, labels = graphs.scc_labels(sp.csr_matrix(W > 0))
    if n_comp > 1:
        warnings.warn(
            f"projected graph has {n_comp} connected components; "
            "returning the uniform-start mixture",
            stacklevel=2,
        )
    out = np.zeros(n)
    for lab in range(n_comp):
        members = np.flatnonzero(labels == lab)
        share = members.size / n
        sub_deg = deg[members]
        if sub_deg.sum() == 0:
            # Isolated node: the walker never leaves.
            out[members] += share / members.size
            continue
        P = W[np.ix_(members, members)] / sub_deg[None, :]
        x = np.full(members.size, 1.0 / members.size)
        converged = False
        for _ in range(max_iter):
            x_next = P @ x
            avg = 0.5 * (x + x_next)
            avg /= avg.sum()
            if np.abs(P @ avg - avg).sum() <= tol:
                x = avg
                converged = True
                break
            x = x_next / x_next.sum()
        if not converged:
            raise IterationLimitError(
                "projected-walk power iteration did not converge",
                iterate=x,
                residual=float(np.abs(P @ x - x).sum()),
            )
        out[members] += share * x
    return out
