"""Monte Carlo simulation of memory-aware walkers.

Walkers carry their last m-1 visited nodes as state.  Discrete-time runs
count node visits after a burn-in; continuous-time runs are event driven
with exponential waiting times and report sojourn-weighted occupation.
Walker w draws its random stream from ``SeedSequence(seed).spawn``, so
results are reproducible bit for bit regardless of scheduling, and
aggregation always runs in walker order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ctmc import RateTensor
from .errors import DimensionError, StructuralError, ValidationError
from .markov import TransitionTensor, unfolded_chain

__all__ = [
    "EnsembleResult",
    "run_continuous_ensemble",
    "run_discrete_ensemble",
    "total_variation",
]


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    """Total-variation distance between two distributions."""
    a = np.asarray(p, dtype=float)
    b = np.asarray(q, dtype=float)
    if a.shape != b.shape:
        raise DimensionError("distributions must have the same length")
    return 0.5 * float(np.abs(a - b).sum())


@dataclass(frozen=True)
class EnsembleResult:
    """Aggregated empirical occupation of an ensemble run."""

    occupation: np.ndarray
    joint_occupation: np.ndarray | None
    walkers: int
    total_steps: int
    total_time: float
    seed: int


def _normalize_inits(inits, order: int, n: int) -> list[tuple[int, ...]] | None:
    if inits is None:
        return None
    if isinstance(inits, tuple) and all(isinstance(v, (int, np.integer)) for v in inits):
        inits = [inits]
    out = []
    for h in inits:
        h = tuple(int(v) for v in h)
        if len(h) != order:
            raise ValidationError(f"history {h} must have length {order}")
        if any(not 1 <= v <= n for v in h):
            raise ValidationError(f"history {h} has nodes outside 1..{n}")
        out.append(h)
    if not out:
        raise ValidationError("inits must contain at least one history")
    return out


def run_discrete_ensemble(
    T: TransitionTensor,
    inits,
    steps: int,
    walkers: int = 1,
    burnin: int | None = None,
    seed: int = 0,
    collect_joint: bool = False,
) -> EnsembleResult:
    """Run independent discrete-time walkers and count post-burn-in visits.

    ``inits`` is a history tuple or a list of them, assigned round robin;
    ``None`` draws each walker's start uniformly from the realizable
    histories.  ``burnin`` defaults to 10% of ``steps``.
    """
    steps = int(steps)
    walkers = int(walkers)
    if walkers < 1:
        raise ValidationError("walkers must be positive")
    if burnin is None:
        burnin = steps // 10
    burnin = int(burnin)
    if not steps > burnin >= 0:
        raise ValidationError("need steps > burnin >= 0")
    chain = unfolded_chain(T)
    n = T.n
    starts = _normalize_inits(inits, T.m - 1, n)
    streams = np.random.SeedSequence(seed).spawn(walkers)
    counts = np.zeros(n)
    joint_counts = np.zeros(chain.full_size) if collect_joint else None
    M = chain.matrix
    indptr, indices, data = M.indptr, M.indices, M.data
    for w in range(walkers):
        rng = np.random.default_rng(streams[w])
        if starts is None:
            pos = int(rng.integers(chain.size))
        else:
            pos = chain.position(starts[w % len(starts)])
        for t in range(steps):
            lo, hi = indptr[pos], indptr[pos + 1]
            if lo == hi:
                raise StructuralError(
                    f"history {chain.history(pos)} has no outgoing transitions"
                )
            cdf = np.cumsum(data[lo:hi])
            u = rng.random() * cdf[-1]
            k = min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)
            pos = int(indices[lo + k])
            if t >= burnin:
                counts[chain.active[pos] % n] += 1.0
                if joint_counts is not None:
                    joint_counts[chain.active[pos]] += 1.0
    total = counts.sum()
    occupation = counts / total
    joint = None
    if joint_counts is not None:
        joint = (joint_counts / joint_counts.sum()).reshape(chain.tail_shape, order="F")
    return EnsembleResult(
        occupation, joint, walkers, walkers * (steps - burnin), 0.0, int(seed)
    )


def run_continuous_ensemble(
    R: RateTensor,
    inits,
    t_end: float,
    walkers: int = 1,
    seed: int = 0,
    collect_joint: bool = False,
) -> EnsembleResult:
    """Event-driven continuous-time walkers with sojourn-weighted occupation.

    From history h the walker waits an exponential time with the total
    outflow rate of h, then jumps to head j with probability proportional to
    the inflow rate ``R[j, h]``.  A history with zero outflow absorbs until
    ``t_end``.  Occupation weights the current node by time spent there.
    """
    t_end = float(t_end)
    walkers = int(walkers)
    if t_end <= 0:
        raise ValidationError("t_end must be positive")
    if walkers < 1:
        raise ValidationError("walkers must be positive")
    if not isinstance(R, RateTensor):
        R = RateTensor(R)
    n = R.n
    order = R.m - 1
    starts = _normalize_inits(inits, order, n)
    rho = R.outflow
    streams = np.random.SeedSequence(seed).spawn(walkers)
    occupation = np.zeros(n)
    joint_occ = np.zeros((n,) * order) if collect_joint else None
    for w in range(walkers):
        rng = np.random.default_rng(streams[w])
        if starts is None:
            history = tuple(int(v) + 1 for v in rng.integers(n, size=order))
        else:
            history = starts[w % len(starts)]
        t = 0.0
        while t < t_end:
            tail_idx = tuple(v - 1 for v in history)
            rate = float(rho[tail_idx])
            if rate <= 0.0:
                dwell = t_end - t
                t = t_end
            else:
                wait = rng.exponential(1.0 / rate)
                dwell = min(wait, t_end - t)
                t += wait
            occupation[history[0] - 1] += dwell
            if joint_occ is not None:
                joint_occ[tail_idx] += dwell
            if rate <= 0.0 or t >= t_end:
                break
            column = R.R[(slice(None),) + tail_idx]
            cdf = np.cumsum(column)
            u = rng.random() * cdf[-1]
            j = min(int(np.searchsorted(cdf, u, side="right")), n - 1)
            history = (j + 1,) + history[:-1]
    occupation /= occupation.sum()
    if joint_occ is not None:
        joint_occ = joint_occ / joint_occ.sum()
    return EnsembleResult(
        occupation, joint_occ, walkers, 0, walkers * t_end, int(seed)
    )
