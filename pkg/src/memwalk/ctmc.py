"""Continuous-time Markov chains with finite memory.

An order-m inflow rate tensor ``R`` assigns the jump rate ``R[i1, i2, .., im]``
for moving to node ``i1`` from the history ``(i2, .., im)``.  The joint law
over histories obeys a linear master equation driven by the paired generator
``Q = lift(R) - diag(outflow)``; closing the joint law as a product measure
yields the n-dimensional polynomial system

    dx/dt = R x^(m-1) - F x^(m-1) = -L x^(m-1),

whose equilibria, flux balance, and relative-entropy decay this module
computes alongside fixed-step integration of both descriptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import graphs
from .errors import (
    CertificationError,
    DimensionError,
    IntegrationError,
    IterationLimitError,
    StructuralError,
    ValidationError,
)
from .markov import (
    DENSE_LIMIT,
    ClosedClass,
    JointDistribution,
    marginalize,
    memory_lift,
)
from .tensor import PairedOperator, as_cubical_array, contract_power, ivec_inverse

__all__ = [
    "GeneratorPair",
    "InteractionGraph",
    "LaplacianPair",
    "RateTensor",
    "TrajectoryRecord",
    "build_generator",
    "build_laplacian",
    "check_detailed_balance",
    "ct_closed_classes",
    "flux",
    "flux_divergence",
    "integrate_exact",
    "integrate_mean_field",
    "interaction_graph",
    "lyapunov_value",
    "mean_field_rhs",
    "outflow",
    "predict_limit",
    "stationary_ct",
]


class RateTensor:
    """Validated nonnegative order-m inflow rate tensor."""

    __slots__ = ("_R",)

    def __init__(self, data):
        R = as_cubical_array(data, 2).copy()
        if not np.all(np.isfinite(R)):
            raise ValidationError("rate tensor entries must be finite")
        if R.min() < 0:
            raise ValidationError("rate tensor entries must be nonnegative")
        R.setflags(write=False)
        self._R = R

    @property
    def R(self) -> np.ndarray:
        return self._R

    @property
    def n(self) -> int:
        return self._R.shape[0]

    @property
    def m(self) -> int:
        return self._R.ndim

    @property
    def tail_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.m - 1)

    @property
    def outflow(self) -> np.ndarray:
        """Total outflow rate per history: sum of rates over the head mode."""
        return self._R.sum(axis=0)

    def __repr__(self) -> str:
        return f"RateTensor(n={self.n}, m={self.m})"


def outflow(rates) -> np.ndarray:
    """Total outflow rate per history for a rate tensor or bare array."""
    if isinstance(rates, RateTensor):
        return rates.outflow
    return as_cubical_array(rates, 2).sum(axis=0)


@dataclass(frozen=True)
class GeneratorPair:
    """Paired inflow operator, diagonal outflow, and their difference."""

    inflow: PairedOperator
    outflow_diag: PairedOperator
    generator: PairedOperator

    @property
    def tail_shape(self) -> tuple[int, ...]:
        return self.generator.row_shape

    @property
    def n(self) -> int:
        return self.tail_shape[0]

    @property
    def max_outflow(self) -> float:
        d = self.outflow_diag.unfolded.diagonal()
        return float(d.max()) if d.size else 0.0


def build_generator(rates: RateTensor) -> GeneratorPair:
    """Assemble the paired generator ``Q = lift(R) - diag(outflow)``.

    Column sums of the unfolded generator vanish, so the master equation
    conserves probability mass.
    """
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    inflow = memory_lift(rates.R)
    rho = rates.outflow.ravel(order="F")
    shape = rates.tail_shape
    diag = PairedOperator(shape, shape, sp.diags(rho, format="csc"))
    return GeneratorPair(inflow, diag, inflow - diag)


@dataclass(frozen=True)
class LaplacianPair:
    """Embedded outflow tensor F and the Laplacian ``L = F - R``.

    ``F`` is zero except on repeated leading indices, where
    ``F[i, i, rest] = outflow[i, rest]``; contracting ``-L`` with powers of a
    state vector gives the mean-field vector field.
    """

    outflow_embed: np.ndarray
    laplacian: np.ndarray

    @property
    def n(self) -> int:
        return self.laplacian.shape[0]

    @property
    def m(self) -> int:
        return self.laplacian.ndim


def build_laplacian(rates: RateTensor) -> LaplacianPair:
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    rho = rates.outflow
    F = np.zeros_like(rates.R)
    idx = np.arange(rates.n)
    F[idx, idx] = rho[idx]
    L = F - rates.R
    F.setflags(write=False)
    L.setflags(write=False)
    return LaplacianPair(F, L)


def mean_field_rhs(lap: LaplacianPair, x: np.ndarray) -> np.ndarray:
    """Vector field of the closed system: ``-L x^(m-1)``."""
    return -contract_power(lap.laplacian, x)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled trajectory with conservation diagnostics.

    ``states`` holds node marginals row per stored time; ``mass`` the total
    mass, which stays constant up to integration tolerance.  ``lyapunov`` is
    filled when a reference equilibrium was supplied.
    """

    times: np.ndarray
    states: np.ndarray
    mass: np.ndarray
    lyapunov: np.ndarray | None = None
    final_joint: JointDistribution | None = None

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def default_dt(max_outflow: float) -> float:
    """Default integration step: 1e-2, shrunk so ``dt * max_outflow <= 0.1``."""
    if max_outflow > 0:
        return min(1e-2, 0.1 / max_outflow)
    return 1e-2


def _rk4_steps(f: Callable[[np.ndarray], np.ndarray], y0: np.ndarray, t_end: float, dt: float):
    """Classical 4th-order fixed-step integration; yields (t, y) per step."""
    if dt <= 0 or t_end <= 0:
        raise ValidationError("t_end and dt must be positive")
    y = y0
    n_full = int(math.floor(t_end / dt + 1e-12))
    rem = t_end - n_full * dt
    t = 0.0
    for k in range(n_full):
        y = _rk4_step(f, y, dt)
        t = (k + 1) * dt
        yield t, y
    if rem > 1e-12 * max(1.0, t_end):
        y = _rk4_step(f, y, rem)
        yield t_end, y


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _marginal_of_vec(vec: np.ndarray, tail_shape: tuple[int, ...]) -> np.ndarray:
    arr = vec.reshape(tail_shape, order="F")
    return marginalize(arr)


def integrate_exact(
    gen: GeneratorPair,
    joint0,
    t_end: float,
    dt: float | None = None,
    record_every: int = 1,
) -> TrajectoryRecord:
    """Integrate the master equation ``dPi/dt = Q * Pi`` at fixed step.

    Marginals are recorded every ``record_every`` steps (plus the initial and
    final states).  Raises :class:`IntegrationError` when mass drifts beyond
    1e-6 or an entry falls below -1e-9; both indicate the step is too large.
    """
    arr = joint0.array if isinstance(joint0, JointDistribution) else np.asarray(joint0, float)
    if arr.shape != gen.tail_shape:
        raise DimensionError(
            f"joint shape {arr.shape} does not match generator shape {gen.tail_shape}"
        )
    Q = gen.generator.unfolded
    pi = arr.ravel(order="F").astype(float)
    mass0 = pi.sum()
    if dt is None:
        dt = default_dt(gen.max_outflow)
    times = [0.0]
    states = [_marginal_of_vec(pi, gen.tail_shape)]
    mass = [mass0]
    step = 0
    recorded_step = 0
    for t, pi in _rk4_steps(lambda v: Q @ v, pi, float(t_end), float(dt)):
        step += 1
        total = pi.sum()
        if abs(total - mass0) > 1e-6:
            raise IntegrationError(
                f"mass drifted by {abs(total - mass0):.3g} at t={t:.6g}; use a smaller dt"
            )
        if pi.min() < -1e-9:
            raise IntegrationError(
                f"entry fell to {pi.min():.3g} at t={t:.6g}; use a smaller dt"
            )
        if step % record_every == 0:
            times.append(t)
            states.append(_marginal_of_vec(pi, gen.tail_shape))
            mass.append(total)
            recorded_step = step
    if recorded_step != step:
        times.append(t)
        states.append(_marginal_of_vec(pi, gen.tail_shape))
        mass.append(pi.sum())
    final = JointDistribution(
        np.clip(pi, 0.0, None).reshape(gen.tail_shape, order="F"), normalize=True
    )
    return TrajectoryRecord(np.array(times), np.vstack(states), np.array(mass), None, final)


def integrate_mean_field(
    lap: LaplacianPair,
    x0: Sequence[float],
    t_end: float,
    dt: float | None = None,
    xstar: Sequence[float] | None = None,
    record_every: int = 1,
) -> TrajectoryRecord:
    """Integrate the closed system ``dx/dt = -L x^(m-1)`` at fixed step.

    The flow is a positive system that conserves total mass; integration
    aborts with :class:`IntegrationError` when either property is violated
    beyond 1e-9.  Pass ``xstar`` to record the relative-entropy value
    against that equilibrium along the trajectory.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.ndim != 1 or x.shape[0] != lap.n:
        raise DimensionError(f"x0 must be a vector of length {lap.n}")
    if x.min() < 0:
        raise ValidationError("x0 must be nonnegative")
    ref = None
    if xstar is not None:
        ref = np.asarray(xstar, dtype=float)
        if ref.shape != x.shape or ref.min() <= 0:
            raise ValidationError("xstar must be a strictly positive vector of length n")
    L = lap.laplacian
    if dt is None:
        rho_max = float(lap.outflow_embed.max()) if lap.outflow_embed.size else 0.0
        dt = default_dt(rho_max)
    mass0 = x.sum()
    times = [0.0]
    states = [x.copy()]
    mass = [mass0]
    lyap = [lyapunov_value(np.clip(x, 0.0, None), ref)] if ref is not None else None
    step = 0
    recorded_step = 0
    for t, x in _rk4_steps(lambda v: -contract_power(L, v), x, float(t_end), float(dt)):
        step += 1
        total = x.sum()
        if abs(total - mass0) > 1e-9:
            raise IntegrationError(
                f"mass drifted by {abs(total - mass0):.3g} at t={t:.6g}; use a smaller dt"
            )
        if x.min() < -1e-9:
            raise IntegrationError(
                f"entry fell to {x.min():.3g} at t={t:.6g}; use a smaller dt"
            )
        if step % record_every == 0:
            times.append(t)
            states.append(x.copy())
            mass.append(total)
            if lyap is not None:
                lyap.append(lyapunov_value(np.clip(x, 0.0, None), ref))
            recorded_step = step
    if recorded_step != step:
        times.append(t)
        states.append(x.copy())
        mass.append(x.sum())
        if lyap is not None:
            lyap.append(lyapunov_value(np.clip(x, 0.0, None), ref))
    return TrajectoryRecord(
        np.array(times),
        np.vstack(states),
        np.array(mass),
        np.array(lyap) if lyap is not None else None,
        None,
    )


def _generator_successors(Q: sp.csc_matrix) -> sp.csr_matrix:
    """Successor matrix of the jump structure: edge u -> v iff Q[v, u] > 0."""
    coo = Q.tocoo()
    keep = (coo.row != coo.col) & (coo.data > 0)
    return sp.csr_matrix(
        (np.ones(int(keep.sum())), (coo.col[keep], coo.row[keep])), shape=Q.shape
    )


def _solve_ct_class(Q_sub: sp.csc_matrix, tol: float) -> np.ndarray:
    """Stationary law of one closed class of the generator."""
    size = Q_sub.shape[0]
    if size == 1:
        return np.ones(1)
    diag = Q_sub.diagonal()
    sigma = float(np.abs(diag).max())
    if sigma == 0.0:
        raise StructuralError("class has a zero generator but more than one state")
    if size <= DENSE_LIMIT:
        A = (Q_sub / sigma).toarray()
        A[0, :] = 1.0
        b = np.zeros(size)
        b[0] = 1.0
        try:
            pi = np.linalg.solve(A, b)
        except np.linalg.LinAlgError:
            pi = None
        if pi is not None:
            np.clip(pi, 0.0, None, out=pi)
            total = pi.sum()
            if total > 0:
                pi = pi / total
                if np.abs(Q_sub @ pi).sum() <= tol * max(1.0, sigma):
                    return pi
    # Uniformization: power iteration on I + Q/sigma, which is column
    # stochastic with positive diagonal, hence aperiodic.
    M = sp.identity(size, format="csc") + Q_sub / sigma
    x = np.full(size, 1.0 / size)
    for _ in range(500000):
        x = M @ x
        total = x.sum()
        if total > 0:
            x = x / total
        if np.abs(Q_sub @ x).sum() <= tol * max(1.0, sigma):
            np.clip(x, 0.0, None, out=x)
            return x / x.sum()
    raise IterationLimitError(
        "uniformized power iteration did not converge",
        iterate=x,
        residual=float(np.abs(Q_sub @ x).sum()),
    )


def ct_closed_classes(gen: GeneratorPair, tol: float = 1e-10) -> tuple[ClosedClass, ...]:
    """Closed classes of the generator with their stationary laws.

    Terminal strongly connected components of the jump structure are grouped
    by node support, mirroring the discrete-time analysis.
    """
    Q = gen.generator.unfolded
    tail_shape = gen.tail_shape
    S = _generator_successors(Q)
    terminal = graphs.terminal_components(S)
    full_size = Q.shape[0]
    decorated = []
    for members in terminal:
        tuples = [ivec_inverse(int(p) + 1, tail_shape) for p in members]
        support = tuple(sorted({v for t in tuples for v in t}))
        decorated.append((support, members, tuples))
    grouped: dict[tuple[int, ...], list[tuple[np.ndarray, list]]] = {}
    for support, members, tuples in sorted(decorated, key=lambda d: (d[0], int(d[1][0]))):
        grouped.setdefault(support, []).append((members, tuples))
    classes = []
    for support in sorted(grouped):
        parts = grouped[support]
        joint_full = np.zeros(full_size)
        histories: list[tuple[int, ...]] = []
        for members, tuples in parts:
            histories.extend(tuples)
            pi = _solve_ct_class(Q[members, :][:, members].tocsc(), tol)
            joint_full[members] += pi / len(parts)
        stationary = JointDistribution(
            joint_full.reshape(tail_shape, order="F"), normalize=True
        )
        classes.append(
            ClosedClass(tuple(sorted(histories)), support, 1, stationary, float("nan"))
        )
    return tuple(classes)


def stationary_ct(
    gen: GeneratorPair, class_index: int | None = None, tol: float = 1e-10
) -> JointDistribution:
    """Stationary joint law of the master equation.

    An irreducible generator has a unique stationary law.  A reducible one
    needs ``class_index`` (1-based, in the order reported by
    :func:`ct_closed_classes`) unless only one closed class exists.
    """
    classes = ct_closed_classes(gen, tol)
    if class_index is not None:
        if not 1 <= class_index <= len(classes):
            raise StructuralError(f"class index {class_index} out of range 1..{len(classes)}")
        return classes[class_index - 1].stationary
    if len(classes) == 1:
        # With a single closed class all mass funnels there eventually, even
        # when transient states exist.
        return classes[0].stationary
    supports = ", ".join(str(c.support) for c in classes)
    raise StructuralError(
        f"generator is reducible with {len(classes)} closed classes "
        f"(supports: {supports}); select one with class_index"
    )


def check_detailed_balance(
    rates: RateTensor, xstar: Sequence[float], tol: float = 1e-12
) -> tuple[bool, float]:
    """Certify the flux symmetry ``r[i1,i2,I] x*[i2] == r[i2,i1,I] x*[i1]``.

    Enumerates every index pair and context with no early exit and returns
    ``(balanced, max_violation)``.
    """
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    x = np.asarray(xstar, dtype=float)
    if x.ndim != 1 or x.shape[0] != rates.n:
        raise DimensionError(f"xstar must be a vector of length {rates.n}")
    if x.min() <= 0:
        raise ValueError("xstar must be strictly positive")
    shape = (1, rates.n) + (1,) * (rates.m - 2)
    weighted = rates.R * x.reshape(shape)
    viol = weighted - np.swapaxes(weighted, 0, 1)
    max_violation = float(np.abs(viol).max())
    return max_violation <= tol, max_violation


@dataclass(frozen=True)
class InteractionGraph:
    """Directed node graph with an edge i2 -> i1 whenever some context
    carries positive rate from i2 into i1."""

    n: int
    edges: frozenset[tuple[int, int]]
    strongly_connected: bool


def interaction_graph(rates: RateTensor) -> InteractionGraph:
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    n = rates.n
    mask = rates.R.reshape(n, n, -1).max(axis=2) > 0
    edges = frozenset(
        (int(i2) + 1, int(i1) + 1) for i1, i2 in zip(*np.nonzero(mask))
    )
    S = sp.csr_matrix(mask.T)
    return InteractionGraph(n, edges, graphs.is_strongly_connected(S))


def lyapunov_value(x: Sequence[float], xstar: Sequence[float]) -> float:
    """Relative-entropy distance ``sum_i x_i ln(x_i/x*_i) - x_i + x*_i``.

    Nonnegative, zero exactly at ``x == xstar``; zero entries of ``x`` use
    the limit ``0 ln 0 = 0``.
    """
    xv = np.asarray(x, dtype=float)
    xs = np.asarray(xstar, dtype=float)
    if xv.shape != xs.shape:
        raise DimensionError("x and xstar must have the same length")
    if xv.min() < 0:
        raise ValueError("x must be nonnegative")
    if xs.min() <= 0:
        raise ValueError("xstar must be strictly positive")
    safe = np.where(xv > 0, xv, 1.0)
    terms = np.where(xv > 0, xv * np.log(safe / xs), 0.0) - xv + xs
    return float(terms.sum())


def predict_limit(
    rates: RateTensor, xstar: Sequence[float], x0: Sequence[float]
) -> np.ndarray:
    """Certified limit of the mean-field flow: ``alpha * xstar``.

    Requires detailed balance at ``xstar`` and a strongly connected
    interaction graph; then every nonnegative initial condition converges to
    the equilibrium scaled to its mass, ``alpha = sum(x0) / sum(xstar)``.
    """
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    balanced, violation = check_detailed_balance(rates, xstar)
    if not balanced:
        raise CertificationError(
            f"detailed balance fails at xstar (max violation {violation:.3g})"
        )
    graph = interaction_graph(rates)
    if not graph.strongly_connected:
        raise CertificationError("interaction graph is not strongly connected")
    x0v = np.asarray(x0, dtype=float)
    if x0v.shape != (rates.n,):
        raise DimensionError(f"x0 must be a vector of length {rates.n}")
    if x0v.min() < 0:
        raise ValueError("x0 must be nonnegative")
    xs = np.asarray(xstar, dtype=float)
    alpha = float(x0v.sum() / xs.sum())
    return alpha * xs


def flux(rates: RateTensor, x: Sequence[float]) -> np.ndarray:
    """Directed flux tensor ``Phi[i1, i2, I] = r[i1, i2, I] x[i2] prod x[I]``."""
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1 or xv.shape[0] != rates.n:
        raise DimensionError(f"x must be a vector of length {rates.n}")
    if xv.min() < 0:
        raise ValueError("x must be nonnegative")
    out = rates.R.copy()
    for axis in range(1, rates.m):
        shape = [1] * rates.m
        shape[axis] = rates.n
        out = out * xv.reshape(shape)
    return out


def flux_divergence(rates: RateTensor, x: Sequence[float]) -> np.ndarray:
    """Net flux into each node; identical to the mean-field vector field."""
    if not isinstance(rates, RateTensor):
        rates = RateTensor(rates)
    phi = flux(rates, x)
    m = rates.m
    inflow = phi.sum(axis=tuple(range(1, m)))
    outgoing = phi.sum(axis=(0,) + tuple(range(2, m)))
    return inflow - outgoing
