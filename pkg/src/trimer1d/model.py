"""Couplings, relative-coordinate basis, and sparse Hamiltonian assembly.

Three hard-core particles hop on an infinite 1D chain with amplitude t and
interact through a nearest-neighbor pair coupling U and a three-site
coupling V.  Total quasimomentum K is conserved, so after separating the
center-of-mass motion a configuration is labeled by the separations
(n1, n2) of the left and right particles from the central one.  The
Hamiltonian acts on amplitudes psi(n1, n2) with n1, n2 >= 1 (hard core)
and is truncated to n1 + n2 <= L.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

TWO_PI = 2.0 * math.pi


def fold_momentum(K: float) -> float:
    """Reduce a quasimomentum to the first Brillouin zone (-pi, pi]."""
    r = math.remainder(float(K), TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


@dataclass(frozen=True)
class ModelParams:
    """Couplings in a common energy unit; the lattice spacing is 1."""
    t: float = 1.0
    U: float = 0.0
    V: float = 0.0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"hopping amplitude must be positive, got t={self.t}")


@dataclass(frozen=True)
class TruncatedBasis:
    """Ordered set of relative configurations (n1, n2) with n1 + n2 <= L.

    Enumeration is ascending in M = n1 + n2, then ascending in n1, which
    makes the dense index of (n1, n2) the closed form
    (M-1)(M-2)/2 + n1 - 1.
    """
    L: int
    n1: np.ndarray
    n2: np.ndarray

    @property
    def size(self) -> int:
        return self.n1.size

    @property
    def M(self) -> np.ndarray:
        return self.n1 + self.n2

    def index_of(self, n1, n2):
        """Dense index of configuration(s); raises if outside the basis."""
        n1 = np.asarray(n1)
        n2 = np.asarray(n2)
        if np.any(n1 < 1) or np.any(n2 < 1) or np.any(n1 + n2 > self.L):
            raise ValueError("configuration outside the truncated basis")
        M = n1 + n2
        idx = (M - 1) * (M - 2) // 2 + n1 - 1
        if idx.ndim == 0:
            return int(idx)
        return idx

    def config(self, i: int) -> tuple[int, int]:
        return int(self.n1[i]), int(self.n2[i])


def build_basis(L: int) -> TruncatedBasis:
    """All (n1, n2) with n1, n2 >= 1 and n1 + n2 <= L; size L(L-1)/2."""
    if L < 2:
        raise ValueError(f"invalid cutoff: L must be >= 2, got {L}")
    n1 = np.concatenate([np.arange(1, M, dtype=np.int64) for M in range(2, L + 1)])
    M = np.concatenate([np.full(M_ - 1, M_, dtype=np.int64) for M_ in range(2, L + 1)])
    basis = TruncatedBasis(L=int(L), n1=n1, n2=M - n1)
    basis.n1.setflags(write=False)
    basis.n2.setflags(write=False)
    return basis


@dataclass(frozen=True)
class HamiltonianOperator:
    """Sparse Hermitian operator at fixed total quasimomentum K."""
    matrix: sp.csr_matrix
    K: float
    params: ModelParams
    basis: TruncatedBasis

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


# hop table: (dn1, dn2, carries_phase); the central particle moving right
# increases n1 and decreases n2 and carries e^{-iK}, its mirror e^{+iK}.
_HOPS = [
    (-1, 0, 0),
    (+1, 0, 0),
    (0, -1, 0),
    (0, +1, 0),
    (+1, -1, -1),
    (-1, +1, +1),
]


def build_hamiltonian(params: ModelParams, K: float,
                      basis: TruncatedBasis) -> HamiltonianOperator:
    """Assemble the sparse operator on the truncated relative basis.

    Diagonal: U (delta_{n1,1} + delta_{n2,1}) + V delta_{n1,1} delta_{n2,1}.
    Off-diagonal: six single-particle hops of amplitude -t; the two
    central-particle hops carry the phases e^{-iK} / e^{+iK}.  Moves that
    would produce n = 0 or M > L are omitted.  At K = 0 and K = pi the
    operator is real symmetric and a float64 matrix is returned.
    """
    K = fold_momentum(K)
    t, U, V = params.t, params.U, params.V
    n1, n2 = basis.n1, basis.n2
    S = basis.size
    L = basis.L

    if abs(K) < 1e-14:
        phase = 1.0
    elif abs(abs(K) - math.pi) < 1e-14:
        phase = -1.0
    else:
        # built from one cos/sin pair so that conj(phase) is exact
        phase = complex(math.cos(K), -math.sin(K))
    dtype = np.float64 if isinstance(phase, float) else np.complex128

    diag = U * ((n1 == 1).astype(np.float64) + (n2 == 1).astype(np.float64)) \
        + V * ((n1 == 1) & (n2 == 1)).astype(np.float64)
    rows = [np.arange(S)]
    cols = [np.arange(S)]
    vals = [diag.astype(dtype)]
    for dn1, dn2, ph in _HOPS:
        m1 = n1 + dn1
        m2 = n2 + dn2
        ok = (m1 >= 1) & (m2 >= 1) & (m1 + m2 <= L)
        src = np.nonzero(ok)[0]
        M = m1[ok] + m2[ok]
        tgt = (M - 1) * (M - 2) // 2 + m1[ok] - 1
        amp = -t
        if ph == -1:
            amp = -t * phase
        elif ph == +1:
            amp = -t * (phase.conjugate() if dtype == np.complex128 else phase)
        rows.append(tgt)
        cols.append(src)
        vals.append(np.full(src.size, amp, dtype=dtype))
    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(S, S)).tocsr()
    return HamiltonianOperator(matrix=H, K=K, params=params, basis=basis)


def apply_hamiltonian(H: HamiltonianOperator, x: np.ndarray) -> np.ndarray:
    """H @ x with a dimension check; <x, Hx> is real for any x."""
    x = np.asarray(x)
    if x.shape[0] != H.dimension:
        raise ValueError(
            f"dimension mismatch: operator is {H.dimension}, vector is {x.shape[0]}")
    return H.matrix @ x
