"""Discrete-time Markov chains with finite memory.

A chain with memory depth m-1 on n states is specified by an order-m
transition tensor ``P`` where ``P[i1, i2, .., im]`` is the probability of
moving to ``i1`` given the history ``(i2, .., im)`` listed most recent
first.  The joint law of the last m-1 states is an order-(m-1) tensor that
evolves linearly under the paired lift of ``P``; this module builds that
lift, iterates and marginalizes joint distributions, decomposes the
unfolded chain into closed classes, and solves for stationary behavior.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import graphs
from .errors import (
    DimensionError,
    IterationLimitError,
    StructuralError,
    ValidationError,
)
from .tensor import (
    PairedOperator,
    as_cubical_array,
    contract_power,
    ivec,
    ivec_inverse,
)

__all__ = [
    "ClosedClass",
    "JointDistribution",
    "SpectralSummary",
    "TransitionTensor",
    "UnfoldedChain",
    "check_primitivity",
    "lift_transition",
    "marginalize",
    "memory_lift",
    "simulate_discrete",
    "stationary_joint",
    "step_joint",
    "unfolded_chain",
    "zeig_fixed_point",
]

POLICIES = ("strict", "restrict", "uniform")

# Above this many unfolded states, dense eigensolves give way to sparse
# iteration.
DENSE_LIMIT = 2000


class TransitionTensor:
    """Validated order-m transition tensor with a dangling-history policy.

    Histories whose outgoing column sums to zero ("dangling") arise
    naturally when the tensor is read off a hypergraph.  The policy decides
    their fate: ``strict`` rejects them, ``uniform`` patches each dangling
    column with the uniform distribution, and ``restrict`` keeps the tensor
    as-is but restricts every analysis to histories that survive iterated
    removal of dangling states.
    """

    __slots__ = ("_P", "policy", "tol", "dangling")

    def __init__(self, data, policy: str = "strict", tol: float = 1e-12):
        if policy not in POLICIES:
            raise ValidationError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        P = as_cubical_array(data, 2).copy()
        if not np.all(np.isfinite(P)):
            raise ValidationError("transition tensor entries must be finite")
        if P.min() < 0:
            raise ValidationError("transition tensor entries must be nonnegative")
        n = P.shape[0]
        sums = P.sum(axis=0)
        dangling_mask = np.abs(sums) <= tol
        bad = ~dangling_mask & (np.abs(sums - 1.0) > tol)
        if np.any(bad):
            tail = _first_bad_tails(bad, sums, P.ndim - 1)
            raise ValidationError(f"columns must sum to 1: {tail}")
        dangling = _mask_tails(dangling_mask, P.ndim - 1)
        if dangling:
            if policy == "strict":
                shown = ", ".join(str(t) for t in dangling[:5])
                more = "" if len(dangling) <= 5 else f" and {len(dangling) - 5} more"
                raise ValidationError(
                    f"dangling histories under strict policy: {shown}{more}"
                )
            if policy == "uniform":
                P[(slice(None),) + np.nonzero(dangling_mask)] = 1.0 / n
                dangling = ()
        P.setflags(write=False)
        self._P = P
        self.policy = policy
        self.tol = float(tol)
        self.dangling = dangling

    @property
    def P(self) -> np.ndarray:
        """The (possibly patched) transition tensor, read-only."""
        return self._P

    @property
    def n(self) -> int:
        return self._P.shape[0]

    @property
    def m(self) -> int:
        """Tensor order; the memory depth is ``m - 1``."""
        return self._P.ndim

    @property
    def tail_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.m - 1)

    def __repr__(self) -> str:
        return (
            f"TransitionTensor(n={self.n}, m={self.m}, policy={self.policy!r}, "
            f"dangling={len(self.dangling)})"
        )


def _mask_tails(mask: np.ndarray, order: int) -> tuple[tuple[int, ...], ...]:
    """1-based history tuples flagged in a boolean array of the tail shape."""
    if not np.any(mask):
        return ()
    if order == 0:
        return ((),)
    idx = np.argwhere(mask)
    return tuple(tuple(int(v) + 1 for v in row) for row in idx)


def _first_bad_tails(bad: np.ndarray, sums: np.ndarray, order: int, limit: int = 3) -> str:
    tails = _mask_tails(bad, order)[:limit]
    parts = [f"history {t} sums to {sums[tuple(v - 1 for v in t)]:.6g}" for t in tails]
    return "; ".join(parts)


class JointDistribution:
    """Joint law of the last m-1 states as an order-(m-1) cubical tensor."""

    __slots__ = ("_array",)

    def __init__(self, array, tol: float = 1e-12, normalize: bool = False):
        arr = as_cubical_array(array, 1).copy()
        if arr.min() < -tol:
            raise ValidationError(
                f"joint distribution entries must be nonnegative (min {arr.min():.3g})"
            )
        np.clip(arr, 0.0, None, out=arr)
        total = arr.sum()
        if normalize:
            if total <= 0:
                raise ValidationError("cannot normalize a zero distribution")
            arr /= total
        elif abs(total - 1.0) > tol:
            raise ValidationError(f"joint distribution sums to {total!r}, expected 1")
        arr.setflags(write=False)
        self._array = arr

    @classmethod
    def uniform(cls, n: int, order: int) -> "JointDistribution":
        shape = (n,) * order
        return cls(np.full(shape, 1.0 / n**order))

    @classmethod
    def from_product(cls, x: Sequence[float], order: int) -> "JointDistribution":
        """Product law ``x ⊗ .. ⊗ x`` with ``order`` factors."""
        v = np.asarray(x, dtype=float)
        if v.ndim != 1:
            raise DimensionError("x must be a vector")
        return cls(reduce(np.multiply.outer, [v] * order), normalize=False)

    @classmethod
    def point(cls, history: Sequence[int], n: int) -> "JointDistribution":
        """Unit mass on a single 1-based history."""
        shape = (n,) * len(tuple(history))
        arr = np.zeros(shape)
        arr[tuple(int(h) - 1 for h in history)] = 1.0
        return cls(arr)

    @property
    def array(self) -> np.ndarray:
        return self._array

    @property
    def n(self) -> int:
        return self._array.shape[0]

    @property
    def order(self) -> int:
        return self._array.ndim

    @property
    def m(self) -> int:
        return self._array.ndim + 1

    def vec(self) -> np.ndarray:
        return self._array.ravel(order="F")

    def marginal(self) -> np.ndarray:
        return marginalize(self)

    def __repr__(self) -> str:
        return f"JointDistribution(n={self.n}, order={self.order})"


def memory_lift(data) -> PairedOperator:
    """Pair an order-m cubical array into its shift operator.

    The result maps order-(m-1) joint tensors over histories to their
    one-step update: column ``(j1, .., j(m-1))`` carries weight
    ``data[h, j1, .., j(m-1)]`` into row ``(h, j1, .., j(m-2))`` for every
    head ``h``.  For m = 2 the lift is the matrix itself.
    """
    arr = as_cubical_array(data, 2)
    n = arr.shape[0]
    m = arr.ndim
    size = n ** (m - 1)
    flat = arr.reshape(n, size, order="F")
    heads, cols = np.nonzero(flat)
    rows = heads + n * (cols % n ** (m - 2))
    mat = sp.csc_matrix((flat[heads, cols], (rows, cols)), shape=(size, size))
    shape = (n,) * (m - 1)
    return PairedOperator(shape, shape, mat)


def lift_transition(T: TransitionTensor) -> PairedOperator:
    """Paired lift of a transition tensor; its unfolding is column-stochastic
    on every non-dangling history."""
    return memory_lift(T.P)


def step_joint(T: TransitionTensor, joint):
    """One step of the joint-law update.

    Contracts the last history mode of the transition tensor against the
    joint tensor; equals applying the paired lift.  Returns the same kind of
    object as ``joint``.
    """
    wrap = isinstance(joint, JointDistribution)
    arr = joint.array if wrap else np.asarray(joint, dtype=float)
    if arr.shape != T.tail_shape:
        raise DimensionError(
            f"joint shape {arr.shape} does not match history shape {T.tail_shape}"
        )
    letters = "abcdefghijklmnopqrstuvwxyz"
    if T.m > len(letters):
        raise DimensionError("tensor order too large")
    spec = f"{letters[:T.m]},{letters[1:T.m]}->{letters[:T.m - 1]}"
    out = np.einsum(spec, T.P, arr)
    return JointDistribution(out) if wrap else out


def marginalize(joint) -> np.ndarray:
    """Node marginal of a joint law: sum over all but the most recent state."""
    arr = joint.array if isinstance(joint, JointDistribution) else np.asarray(joint, dtype=float)
    if arr.ndim == 1:
        return arr.copy()
    return arr.sum(axis=tuple(range(1, arr.ndim)))


@dataclass(frozen=True)
class UnfoldedChain:
    """Column-stochastic matrix of the unfolded chain over active histories.

    ``active`` lists the surviving 0-based flat history positions (all of
    them unless the policy is ``restrict``); ``matrix[i, j]`` is the
    probability of moving from active history j to active history i.
    """

    matrix: sp.csc_matrix
    active: np.ndarray
    tail_shape: tuple[int, ...]
    renormalized: bool = False

    @property
    def size(self) -> int:
        return int(self.active.size)

    @property
    def full_size(self) -> int:
        return math.prod(self.tail_shape)

    @property
    def n(self) -> int:
        return self.tail_shape[0]

    def history(self, position: int) -> tuple[int, ...]:
        """1-based history tuple of an active position."""
        return ivec_inverse(int(self.active[position]) + 1, self.tail_shape)

    def position(self, history: Sequence[int]) -> int:
        """Active position of a 1-based history tuple."""
        flat = ivec(history, self.tail_shape) - 1
        pos = int(np.searchsorted(self.active, flat))
        if pos >= self.active.size or self.active[pos] != flat:
            raise StructuralError(
                f"history {tuple(history)} is not realizable under the restriction"
            )
        return pos

    def successors(self) -> sp.csr_matrix:
        """Successor matrix S with S[u, v] != 0 iff the walk can move u -> v."""
        return self.matrix.transpose().tocsr()

    def embed(self, local: np.ndarray) -> np.ndarray:
        """Lift a vector over active histories to the full history space."""
        full = np.zeros(self.full_size)
        full[self.active] = local
        return full


def unfolded_chain(T: TransitionTensor) -> UnfoldedChain:
    """Build the unfolded chain matrix, applying the restrict policy if set."""
    op = lift_transition(T)
    M = op.unfolded
    full = M.shape[0]
    if T.policy != "restrict" or not T.dangling:
        return UnfoldedChain(M, np.arange(full), T.tail_shape)
    colsum = np.asarray(M.sum(axis=0)).ravel()
    active = np.flatnonzero(colsum > T.tol)
    sub = None
    sums = None
    while True:
        if active.size == 0:
            raise StructuralError("no history survives the dangling restriction")
        sub = M[active, :][:, active].tocsc()
        sums = np.asarray(sub.sum(axis=0)).ravel()
        dead = sums <= T.tol
        if not dead.any():
            break
        active = active[~dead]
    renormalized = bool(np.any(np.abs(sums - 1.0) > max(T.tol, 1e-12)))
    if renormalized:
        warnings.warn(
            "restriction dropped transition mass into unrealizable histories; "
            "surviving columns were renormalized",
            stacklevel=2,
        )
        sub = (sub @ sp.diags(1.0 / sums)).tocsc()
    return UnfoldedChain(sub, active, T.tail_shape, renormalized)


@dataclass(frozen=True)
class ClosedClass:
    """A closed class of the unfolded chain, grouped by node support.

    Terminal strongly connected components that share the same node support
    are reported as one class; ``histories`` lists every member history and
    ``period`` is the least common multiple of the member cycle periods.
    """

    histories: tuple[tuple[int, ...], ...]
    support: tuple[int, ...]
    period: int
    stationary: JointDistribution | None = None
    lambda2_modulus: float = float("nan")


@dataclass(frozen=True)
class SpectralSummary:
    """Stationary and spectral report for a memory chain."""

    lambda1: float
    lambda2_modulus: float
    stationary: JointDistribution | None
    is_irreducible: bool
    is_primitive: bool
    classes: tuple[ClosedClass, ...]
    residual: float = float("nan")


@dataclass(frozen=True)
class _Structure:
    chain: UnfoldedChain
    successors: sp.csr_matrix
    n_components: int
    labels: np.ndarray
    terminal: list[np.ndarray]            # member positions per terminal SCC
    periods: list[int]                    # aligned with ``terminal``
    groups: list[list[int]] = field(default_factory=list)  # indices into ``terminal``
    group_supports: list[tuple[int, ...]] = field(default_factory=list)


def _structure(chain: UnfoldedChain) -> _Structure:
    S = chain.successors()
    n_comp, labels = graphs.scc_labels(S)
    terminal = graphs.terminal_components(S)
    periods = [graphs.component_period(S, members) for members in terminal]
    supports = []
    for members in terminal:
        nodes: set[int] = set()
        for pos in members:
            nodes.update(chain.history(int(pos)))
        supports.append(tuple(sorted(nodes)))
    order = sorted(range(len(terminal)), key=lambda k: (supports[k], int(terminal[k][0])))
    grouped: dict[tuple[int, ...], list[int]] = {}
    for k in order:
        grouped.setdefault(supports[k], []).append(k)
    group_supports = sorted(grouped)
    groups = [grouped[s] for s in group_supports]
    return _Structure(chain, S, n_comp, labels, terminal, periods, groups, group_supports)


def _power_stationary(M: sp.spmatrix, period: int, tol: float, max_iter: int = 200000) -> np.ndarray:
    """Power iteration with period-safe averaging for a stochastic matrix.

    Averaging over one full period removes the rotating spectrum of a
    periodic irreducible class, so the averaged iterate converges
    geometrically to the stationary distribution.
    """
    size = M.shape[0]
    x = np.full(size, 1.0 / size)
    p = max(1, int(period))
    outer = max(1, max_iter // p)
    for _ in range(outer):
        window = [x]
        for _ in range(p):
            x = M @ x
            s = x.sum()
            if s > 0:
                x = x / s
            window.append(x)
        avg = np.mean(window[:p], axis=0)
        total = avg.sum()
        if total > 0:
            avg = avg / total
        residual = np.abs(M @ avg - avg).sum()
        if residual <= tol:
            np.clip(avg, 0.0, None, out=avg)
            return avg / avg.sum()
    raise IterationLimitError(
        f"power iteration did not reach residual {tol:g}",
        iterate=x,
        residual=float(residual),
    )


def _solve_stationary(M: sp.spmatrix, period: int, tol: float) -> np.ndarray:
    """Stationary distribution of an irreducible column-stochastic matrix."""
    size = M.shape[0]
    if size == 1:
        return np.ones(1)
    if size <= DENSE_LIMIT:
        A = M.toarray() - np.eye(size)
        A[0, :] = 1.0
        b = np.zeros(size)
        b[0] = 1.0
        try:
            pi = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            return _power_stationary(M, period, tol)
        np.clip(pi, 0.0, None, out=pi)
        total = pi.sum()
        if total <= 0:
            return _power_stationary(M, period, tol)
        pi /= total
        if np.abs(M @ pi - pi).sum() <= tol:
            return pi
    return _power_stationary(M, period, tol)


def _moduli(M: sp.spmatrix, how_many: int = 2) -> tuple[float, ...]:
    """Largest eigenvalue moduli of a matrix, descending; nan when unavailable."""
    size = M.shape[0]
    if size == 1:
        return (abs(float(M.toarray()[0, 0])),) + (0.0,) * (how_many - 1)
    if size <= DENSE_LIMIT:
        mods = np.sort(np.abs(np.linalg.eigvals(M.toarray())))[::-1]
    else:
        try:
            k = min(max(how_many + 2, 6), size - 2)
            # Fixed start vector keeps the Arnoldi run deterministic.
            vals = spla.eigs(
                M.astype(float),
                k=k,
                which="LM",
                v0=np.full(size, 1.0 / size),
                return_eigenvectors=False,
            )
            mods = np.sort(np.abs(vals))[::-1]
        except Exception:
            return (float("nan"),) * how_many
    mods = np.concatenate([mods, np.zeros(how_many)])
    return tuple(float(v) for v in mods[:how_many])


def _class_from_group(
    struct: _Structure,
    group: list[int],
    support: tuple[int, ...],
    solve: bool,
    tol: float,
) -> tuple[ClosedClass, list[tuple[int, np.ndarray, np.ndarray]]]:
    """Build one reported class; optionally solve member stationaries.

    Returns the class plus ``(terminal index, members, local stationary)``
    triples for reuse by the caller.
    """
    chain = struct.chain
    histories: list[tuple[int, ...]] = []
    solutions: list[tuple[int, np.ndarray, np.ndarray]] = []
    period = 1
    lam2 = 0.0
    joint_full = np.zeros(chain.full_size)
    for k in group:
        members = struct.terminal[k]
        histories.extend(chain.history(int(pos)) for pos in members)
        period = period * struct.periods[k] // math.gcd(period, struct.periods[k])
        sub = struct.chain.matrix[members, :][:, members]
        if solve:
            pi = _solve_stationary(sub.tocsc(), struct.periods[k], tol)
            solutions.append((k, members, pi))
            full = np.zeros(chain.full_size)
            full[chain.active[members]] = pi
            joint_full += full / len(group)
            lam2 = max(lam2, _moduli(sub)[1])
    stationary = None
    if solve:
        stationary = JointDistribution(
            joint_full.reshape(chain.tail_shape, order="F"), normalize=True
        )
    else:
        lam2 = float("nan")
    return (
        ClosedClass(tuple(sorted(histories)), support, period, stationary, lam2),
        solutions,
    )


def check_primitivity(T: TransitionTensor) -> tuple[bool, bool, tuple[ClosedClass, ...]]:
    """Irreducibility, primitivity, and the closed classes of the unfolded chain.

    Primitivity means irreducible with cycle-length gcd 1.  Closed classes
    are terminal strongly connected components grouped by node support;
    their stationaries are left unsolved here.
    """
    struct = _structure(unfolded_chain(T))
    classes = tuple(
        _class_from_group(struct, group, support, solve=False, tol=1e-10)[0]
        for group, support in zip(struct.groups, struct.group_supports)
    )
    is_irr = struct.n_components == 1
    is_prim = bool(is_irr and struct.periods and struct.periods[0] == 1)
    return is_irr, is_prim, classes


def stationary_joint(
    T: TransitionTensor,
    init: JointDistribution | None = None,
    class_index: int | None = None,
    tol: float = 1e-10,
) -> SpectralSummary:
    """Stationary joint law and spectral summary of the unfolded chain.

    For an irreducible chain the unique stationary joint is returned.  For a
    reducible chain the stationary is resolved per closed class; pass
    ``init`` to weight classes by where the initial mass is absorbed, or
    ``class_index`` (1-based, matching the reported class order) to select
    one class.  With neither, ``stationary`` is ``None`` whenever more than
    one closed class exists and the per-class results live in ``classes``.
    """
    chain = unfolded_chain(T)
    struct = _structure(chain)
    classes = []
    solutions: list[tuple[int, np.ndarray, np.ndarray]] = []
    for group, support in zip(struct.groups, struct.group_supports):
        cls, sols = _class_from_group(struct, group, support, solve=True, tol=tol)
        classes.append(cls)
        solutions.extend(sols)
    classes = tuple(classes)
    is_irr = struct.n_components == 1
    is_prim = bool(is_irr and struct.periods and struct.periods[0] == 1)

    if class_index is not None and init is not None:
        raise ValidationError("pass either init or class_index, not both")

    stationary: JointDistribution | None = None
    lam2 = float("nan")
    if class_index is not None:
        if not 1 <= class_index <= len(classes):
            raise StructuralError(
                f"class index {class_index} out of range 1..{len(classes)}"
            )
        chosen = classes[class_index - 1]
        stationary = chosen.stationary
        lam2 = chosen.lambda2_modulus
    elif init is not None:
        if init.array.shape != T.tail_shape:
            raise DimensionError("init shape does not match the history shape")
        init_active = init.vec()[chain.active]
        covered = init_active.sum()
        if covered <= tol:
            raise StructuralError(
                "init support does not reach any closed class "
                "(all mass sits on unrealizable histories)"
            )
        weights = _terminal_weights(struct, init_active / covered, tol)
        if weights.sum() <= tol:
            raise StructuralError("init support does not reach any closed class")
        weights = weights / weights.sum()
        joint_full = np.zeros(chain.full_size)
        lam2 = 0.0
        for k, members, pi in solutions:
            if weights[k] <= 0:
                continue
            full = np.zeros(chain.full_size)
            full[chain.active[members]] = pi
            joint_full += weights[k] * full
            lam2 = max(lam2, _moduli(chain.matrix[members, :][:, members])[1])
        stationary = JointDistribution(
            joint_full.reshape(chain.tail_shape, order="F"), normalize=True
        )
    elif len(classes) == 1:
        stationary = classes[0].stationary
        lam2 = classes[0].lambda2_modulus

    if is_irr:
        lam1, full_lam2 = _moduli(chain.matrix)
        if math.isnan(lam1):
            lam1 = 1.0  # column-stochastic, spectral radius is exactly 1
        if stationary is not None:
            lam2 = full_lam2
    else:
        lam1_est, full_lam2 = _moduli(chain.matrix)
        lam1 = 1.0 if math.isnan(lam1_est) else lam1_est
        if math.isnan(lam2):
            lam2 = full_lam2

    residual = float("nan")
    if stationary is not None:
        vec = stationary.vec()[chain.active]
        residual = float(np.abs(chain.matrix @ vec - vec).sum())
    return SpectralSummary(lam1, lam2, stationary, is_irr, is_prim, classes, residual)


def _terminal_weights(struct: _Structure, init_active: np.ndarray, tol: float) -> np.ndarray:
    """Absorption probability into each terminal SCC from an initial law."""
    chain = struct.chain
    n_term = len(struct.terminal)
    weights = np.zeros(n_term)
    in_terminal = np.zeros(chain.size, dtype=bool)
    for k, members in enumerate(struct.terminal):
        in_terminal[members] = True
        weights[k] = float(init_active[members].sum())
    transient = np.flatnonzero(~in_terminal)
    if transient.size == 0 or init_active[transient].sum() <= tol:
        return weights
    M = chain.matrix
    Mtt = M[transient, :][:, transient].tocsc()
    A = sp.identity(transient.size, format="csc") - Mtt
    # Expected visit counts to transient states before absorption.
    visits = np.atleast_1d(spla.spsolve(A, init_active[transient]))
    for k, members in enumerate(struct.terminal):
        Mct = M[members, :][:, transient]
        weights[k] += float((Mct @ visits).sum())
    return weights


def zeig_fixed_point(
    T: TransitionTensor,
    z0: Sequence[float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> np.ndarray:
    """Fixed point of the closed nonlinear update ``z -> P z^(m-1)``.

    This is the low-dimensional surrogate of the joint iteration obtained by
    forcing the joint law to stay a product measure.  Column stochasticity
    keeps the iterates on the simplex; convergence is declared when the
    one-step l1 change falls below ``tol``.
    """
    if z0 is None:
        z = np.full(T.n, 1.0 / T.n)
    else:
        z = np.asarray(z0, dtype=float)
        if z.shape != (T.n,):
            raise DimensionError(f"z0 must have length {T.n}")
        if z.min() < 0 or abs(z.sum() - 1.0) > 1e-9:
            raise ValidationError("z0 must be a probability vector")
    residual = float("inf")
    for _ in range(max_iter):
        z_next = contract_power(T.P, z)
        residual = float(np.abs(z_next - z).sum())
        total = z_next.sum()
        if total > 0:
            z_next = z_next / total
        if residual <= tol:
            return z_next
        z = z_next
    raise IterationLimitError(
        f"fixed-point iteration did not converge in {max_iter} iterations",
        iterate=z,
        residual=residual,
    )


def simulate_discrete(
    T: TransitionTensor,
    history0: Sequence[int],
    steps: int,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Sample a trajectory of visited nodes from an initial history.

    ``history0`` lists the last m-1 visited nodes, most recent first.  The
    returned array holds the next ``steps`` visited nodes (1-based).
    Deterministic for a fixed seed.
    """
    chain = unfolded_chain(T)
    pos = chain.position(tuple(int(h) for h in history0))
    if rng is None:
        rng = np.random.default_rng(seed)
    M = chain.matrix
    indptr, indices, data = M.indptr, M.indices, M.data
    n = T.n
    out = np.empty(int(steps), dtype=np.int64)
    for t in range(int(steps)):
        start, end = indptr[pos], indptr[pos + 1]
        if start == end:
            raise StructuralError(
                f"history {chain.history(pos)} has no outgoing transitions"
            )
        weights = data[start:end]
        cdf = np.cumsum(weights)
        u = rng.random() * cdf[-1]
        k = int(np.searchsorted(cdf, u, side="right"))
        if k >= cdf.size:
            k = cdf.size - 1
        pos = int(indices[start + k])
        out[t] = chain.active[pos] % n + 1
    return out
