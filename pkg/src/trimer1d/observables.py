"""Structure analysis of trimer eigenstates.

The size of a configuration is M = n1 + n2, the distance between the two
outer particles.  P(M) sums |psi|^2 over fixed-M diagonals; P(Delta) is
the conditional distribution of the central particle's offset Delta = n1
inside one fixed-M slice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import BoundState


@dataclass(frozen=True)
class SizeDistribution:
    """P(M) for M = 2..L with its mean and standard deviation (sites)."""
    M: np.ndarray
    probs: np.ndarray
    mean: float
    sigma: float


@dataclass(frozen=True)
class InternalDistribution:
    """P(Delta), Delta = 1..M-1, inside the fixed-M slice."""
    M: int
    deltas: np.ndarray
    probs: np.ndarray


def size_distribution(state: BoundState) -> SizeDistribution:
    basis = state.basis
    p = np.abs(state.amplitudes) ** 2
    counts = np.bincount(basis.M, weights=p, minlength=basis.L + 1)
    probs = counts[2:basis.L + 1]
    Ms = np.arange(2, basis.L + 1)
    mean = float(np.dot(Ms, probs))
    var = float(np.dot(Ms.astype(float) ** 2, probs) - mean * mean)
    return SizeDistribution(M=Ms, probs=probs, mean=mean,
                            sigma=float(np.sqrt(max(var, 0.0))))


def internal_distribution(state: BoundState, M: int) -> InternalDistribution:
    basis = state.basis
    if not 2 <= M <= basis.L:
        raise ValueError(f"slice M={M} outside the basis (2..{basis.L})")
    sel = np.nonzero(basis.M == M)[0]
    order = np.argsort(basis.n1[sel])
    sel = sel[order]
    w = np.abs(state.amplitudes[sel]) ** 2
    pm = float(w.sum())
    if pm == 0.0:
        raise ValueError(f"undefined slice: P(M={M}) = 0 for this state")
    return InternalDistribution(M=int(M), deltas=basis.n1[sel].copy(),
                                probs=w / pm)


def truncate_distribution(dist: SizeDistribution,
                          cum_tol: float = 1e-12) -> SizeDistribution:
    """Drop the trailing-M tail once cumulative probability reaches 1 - cum_tol."""
    c = np.cumsum(dist.probs)
    keep = int(np.searchsorted(c, 1.0 - cum_tol)) + 1
    keep = min(keep, dist.probs.size)
    return SizeDistribution(M=dist.M[:keep], probs=dist.probs[:keep],
                            mean=dist.mean, sigma=dist.sigma)
