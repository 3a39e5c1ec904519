"""Shared fixtures and independent oracles used across the test suite."""

import itertools
from pathlib import Path

import numpy as np
import pytest

from memwalk import DirectedHypergraph, to_transition

DATA_DIR = Path(__file__).resolve().parents[1] / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def triangles_graph():
    return DirectedHypergraph.from_undirected(
        5, 3, [((1, 2, 3), 1.0), ((3, 4, 5), 1.0)]
    )


@pytest.fixture(scope="session")
def triangles_transition(triangles_graph):
    return to_transition(triangles_graph, policy="restrict")


def random_transition(n, m, rng, alpha=1.0, floor=0.0):
    """Random column-stochastic order-m tensor with Dirichlet(alpha) columns."""
    P = np.zeros((n,) * m)
    for tail in itertools.product(range(n), repeat=m - 1):
        col = rng.dirichlet(np.full(n, alpha))
        if floor:
            col = (1.0 - floor) * col + floor / n
        P[(slice(None),) + tail] = col
    return P


def augmented_matrix_oracle(P):
    """Brute-force transition matrix of the history process.

    Enumerates every index tuple directly and flattens with
    numpy's own column-major ravel, independently of the library's index map.
    """
    n = P.shape[0]
    m = P.ndim
    size = n ** (m - 1)
    M = np.zeros((size, size))
    for idx in itertools.product(range(n), repeat=m):
        r = np.ravel_multi_index(idx[: m - 1], (n,) * (m - 1), order="F")
        c = np.ravel_multi_index(idx[1:], (n,) * (m - 1), order="F")
        M[r, c] += P[idx]
    return M


def stationary_eig_oracle(M):
    """Stationary vector from a dense eigensolve of a stochastic matrix."""
    vals, vecs = np.linalg.eig(M)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    pi = np.abs(pi)
    return pi / pi.sum()


def supersymmetric_rates(n, m, rng, low=0.2, high=1.0):
    """Random rate tensor that is exactly invariant under index permutations.

    One value is drawn per index multiset and written to every arrangement,
    so symmetry holds bit for bit (permutation-averaging would differ by an
    ulp across addition orders).
    """
    R = np.zeros((n,) * m)
    values = {}
    for idx in itertools.product(range(n), repeat=m):
        key = tuple(sorted(idx))
        if key not in values:
            values[key] = rng.uniform(low, high)
        R[idx] = values[key]
    return R


def reversible_rates(n, m, rng, low=0.5, high=1.5):
    """Rates engineered to satisfy flux symmetry at a known positive xstar.

    Choose sigma symmetric in its first two indices and set
    r[i1, i2, I] = sigma[i1, i2, I] / xstar[i2]; then
    r[i1, i2, I] xstar[i2] = sigma = r[i2, i1, I] xstar[i1].
    """
    xstar = rng.uniform(low, high, size=n)
    sigma = rng.uniform(low, high, size=(n,) * m)
    sigma = 0.5 * (sigma + np.swapaxes(sigma, 0, 1))
    shape = (1, n) + (1,) * (m - 2)
    R = sigma / xstar.reshape(shape)
    return R, xstar
