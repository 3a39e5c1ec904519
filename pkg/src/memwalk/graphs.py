"""Directed-graph structure helpers shared by the chain analyses.

All functions take a *successor matrix* ``S`` in sparse form, where
``S[u, v] != 0`` means there is a directed edge ``u -> v``.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

__all__ = [
    "component_period",
    "is_strongly_connected",
    "scc_labels",
    "terminal_components",
]


def scc_labels(successors: sp.spmatrix) -> tuple[int, np.ndarray]:
    """Number of strongly connected components and a label per node."""
    n_comp, labels = csgraph.connected_components(
        successors, directed=True, connection="strong"
    )
    return int(n_comp), labels


def is_strongly_connected(successors: sp.spmatrix) -> bool:
    if successors.shape[0] <= 1:
        return True
    n_comp, _ = scc_labels(successors)
    return n_comp == 1


def terminal_components(successors: sp.spmatrix) -> list[np.ndarray]:
    """Strongly connected components with no edge leaving them.

    Returns one sorted node-index array per terminal component, ordered by
    smallest member so the output is deterministic.
    """
    n_comp, labels = scc_labels(successors)
    coo = successors.tocoo()
    has_exit = np.zeros(n_comp, dtype=bool)
    cross = labels[coo.row] != labels[coo.col]
    has_exit[labels[coo.row[cross]]] = True
    comps = [
        np.flatnonzero(labels == lab) for lab in range(n_comp) if not has_exit[lab]
    ]
    comps.sort(key=lambda members: int(members[0]))
    return comps


def component_period(successors: sp.spmatrix, members: np.ndarray) -> int:
    """Cycle-length gcd of one strongly connected component.

    Runs a BFS from an arbitrary member and folds ``level(u) + 1 - level(v)``
    over every internal edge ``u -> v`` into a gcd.  A component with no
    internal edge (a single node without self-loop) reports period 1.
    """
    sub = successors[members, :][:, members].tocsr()
    k = sub.shape[0]
    level = np.full(k, -1, dtype=np.int64)
    level[0] = 0
    queue = [0]
    indptr, indices = sub.indptr, sub.indices
    head = 0
    while head < len(queue):
        u = queue[head]
        head += 1
        for v in indices[indptr[u] : indptr[u + 1]]:
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(int(v))
    # Strong connectivity guarantees BFS reaches every member; tree edges
    # contribute gcd(g, 0) and are harmless.
    g = 0
    coo = sub.tocoo()
    for u, v in zip(coo.row, coo.col):
        g = math.gcd(g, int(level[u]) + 1 - int(level[v]))
    return g if g != 0 else 1
