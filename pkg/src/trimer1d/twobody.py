"""Closed-form pair dispersion and the edges of the three-particle continuum.

A nearest-neighbor pair with coupling U at pair momentum Q binds when
|U| > 2t|cos(Q/2)|, with energy E2(Q) = U + 4 t^2 cos^2(Q/2) / U.  The
scattering continuum of three particles at total momentum K is the union
of the free band (1+1+1) and the pair-plus-free-particle band (2+1); its
lower edge bounds every attractively bound trimer from above.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .model import ModelParams, fold_momentum


@dataclass(frozen=True)
class ContinuumEdges:
    """Lower band edges at fixed total quasimomentum (energies)."""
    e111_min: float
    e21_min: float | None
    bottom: float


def dimer_energy(params: ModelParams, Q: float) -> float | None:
    """Bound-pair energy at pair momentum Q, or None when no pair binds.

    The marginal case |U| = 2t|cos(Q/2)| counts as unbound (zero binding).
    """
    Q = fold_momentum(Q)
    t, U = params.t, params.U
    c = math.cos(0.5 * Q)
    if abs(U) <= 2.0 * t * abs(c):
        return None
    return U + 4.0 * t * t * c * c / U


def _e111_min(t: float, K: float, n_grid: int) -> float:
    """Minimum of -2t(cos k1 + cos k2 + cos(K - k1 - k2)) by grid + refinement."""
    m = max(72, int(math.isqrt(n_grid)))
    ks = np.linspace(-np.pi, np.pi, m, endpoint=False)
    k1, k2 = np.meshgrid(ks, ks, indexing="ij")

    def f(v):
        a, b = v
        return -2.0 * t * (np.cos(a) + np.cos(b) + np.cos(K - a - b))

    vals = -2.0 * t * (np.cos(k1) + np.cos(k2) + np.cos(K - k1 - k2))
    i, j = np.unravel_index(np.argmin(vals), vals.shape)
    res = minimize(f, x0=[ks[i], ks[j]], method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    return float(min(res.fun, vals[i, j]))


def _e21_min(params: ModelParams, K: float, n_grid: int) -> float | None:
    """Minimum over k of E2(K - k) - 2t cos k, restricted to bound pairs."""
    t, U = params.t, params.U
    if U == 0.0:
        return None
    ks = np.linspace(-np.pi, np.pi, n_grid, endpoint=False)
    c = np.cos(0.5 * (K - ks))
    bound = np.abs(U) > 2.0 * t * np.abs(c)
    if not bound.any():
        return None
    e2 = U + 4.0 * t * t * c * c / U
    g = np.where(bound, e2 - 2.0 * t * np.cos(ks), np.inf)
    i = int(np.argmin(g))
    dk = ks[1] - ks[0]

    def f(k):
        cc = math.cos(0.5 * (K - k))
        if abs(U) <= 2.0 * t * abs(cc):
            return 1e30
        return U + 4.0 * t * t * cc * cc / U - 2.0 * t * math.cos(k)

    res = minimize_scalar(f, bounds=(ks[i] - 2 * dk, ks[i] + 2 * dk),
                          method="bounded", options={"xatol": 1e-12})
    return float(min(res.fun, g[i]))


def continuum_edges(params: ModelParams, K: float, n_grid: int = 8192) -> ContinuumEdges:
    """Lower edges of the 1+1+1 and 2+1 bands and their minimum.

    Grid search (>= 4096 points) with local refinement; exactly even in K.
    """
    Ka = abs(fold_momentum(K))
    e111 = _e111_min(params.t, Ka, n_grid)
    e21 = _e21_min(params, Ka, n_grid)
    bottom = e111 if e21 is None else min(e111, e21)
    return ContinuumEdges(e111_min=e111, e21_min=e21, bottom=bottom)
