"""Neumann Laplacian, backward-Euler diffusion solve and the saturated
incidence reaction terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import DimensionError, Grid

__all__ = [
    "TridiagonalOperator", "neumann_laplacian", "diffuse_implicit",
    "reaction_terms", "thomas_solve", "factor_implicit", "solve_factored",
    "diffuse_increment",
]


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Bands of a tridiagonal matrix; ``sub[0]`` and ``sup[-1]`` are unused
    and stored as zero."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def n(self):
        return len(self.diag)

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n,):
            raise DimensionError(f"operator of size {self.n} got {u.shape}")
        out = self.diag * u
        out[1:] += self.sub[1:] * u[:-1]
        out[:-1] += self.sup[:-1] * u[1:]
        return out

    def dense(self):
        return (np.diag(self.diag) + np.diag(self.sub[1:], -1)
                + np.diag(self.sup[:-1], 1))


def neumann_laplacian(grid: Grid, d: float) -> TridiagonalOperator:
    """``d * Delta_h`` with reflecting ghost cells (u[-1] = u[0])."""
    if d < 0:
        raise ValueError("diffusivity must be nonnegative")
    n = grid.n_cells
    c = d / grid.h ** 2
    sub = np.full(n, c)
    sup = np.full(n, c)
    diag = np.full(n, -2.0 * c)
    sub[0] = 0.0
    sup[-1] = 0.0
    diag[0] = -c
    diag[-1] = -c
    return TridiagonalOperator(sub, diag, sup)


@njit(cache=True)
def thomas_solve(sub, diag, sup, rhs):
    """Solve a tridiagonal system without pivoting (diagonally dominant)."""
    n = diag.shape[0]
    cp = np.empty(n)
    x = np.empty(n)
    denom = diag[0]
    cp[0] = sup[0] / denom
    x[0] = rhs[0] / denom
    for i in range(1, n):
        denom = diag[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / denom
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / denom
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def factor_implicit(op: TridiagonalOperator, dt: float):
    """Forward-elimination coefficients of ``Id - dt*L`` for repeated solves.

    Returns ``(sub, inv_denom, cp)`` consumed by :func:`solve_factored`.
    """
    sub = -dt * op.sub
    diag = 1.0 - dt * op.diag
    sup = -dt * op.sup
    n = op.n
    cp = np.empty(n)
    inv = np.empty(n)
    inv[0] = 1.0 / diag[0]
    cp[0] = sup[0] * inv[0]
    for i in range(1, n):
        inv[i] = 1.0 / (diag[i] - sub[i] * cp[i - 1])
        cp[i] = sup[i] * inv[i]
    return sub, inv, cp


@njit(cache=True)
def solve_factored(sub, inv, cp, u, out):
    n = u.shape[0]
    out[0] = u[0] * inv[0]
    for i in range(1, n):
        out[i] = (u[i] - sub[i] * out[i - 1]) * inv[i]
    for i in range(n - 2, -1, -1):
        out[i] -= cp[i] * out[i + 1]


@njit(cache=True)
def diffuse_increment(u, sup_dt, sub, inv, cp, rhs, delta, nonneg):
    """In-place backward-Euler step in increment form.

    Solves ``(Id - dt*L) delta = dt*L u`` and sets ``u += delta``.  ``dt*L u``
    is assembled from face fluxes so that it telescopes, and a constant ``u``
    gives ``delta == 0`` exactly.  With ``nonneg`` set, rounding-level
    negatives are set to zero and False is returned if a cell goes negative
    beyond that.
    """
    n = u.shape[0]
    prev = 0.0
    for i in range(n - 1):
        flux = sup_dt[i] * (u[i + 1] - u[i])
        rhs[i] = flux - prev
        prev = flux
    rhs[n - 1] = -prev
    solve_factored(sub, inv, cp, rhs, delta)
    top = 0.0
    for i in range(n):
        u[i] += delta[i]
        if u[i] > top:
            top = u[i]
    if not nonneg:
        return True
    for i in range(n):
        if u[i] < 0.0:
            if u[i] < -1e-14 * top:
                return False
            u[i] = 0.0
    return True


def diffuse_implicit(u, op: TridiagonalOperator, dt: float):
    """One backward-Euler diffusion step: ``v`` with ``(Id - dt*L) v = u``.

    Nonnegative input gives nonnegative output; signed input is allowed.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    v = np.array(u, dtype=float)
    if v.shape != (op.n,):
        raise DimensionError(f"operator of size {op.n} got {v.shape}")
    sub, inv, cp = factor_implicit(op, dt)
    if not diffuse_increment(v, dt * op.sup, sub, inv, cp, np.empty(op.n),
                             np.empty(op.n), bool(np.all(v >= 0))):
        raise ValueError("diffusion produced a negative value")
    return v


@njit(cache=True)
def _reaction_kernel(S, I, beta, gamma, m, dS, dI):
    for i in range(S.shape[0]):
        total = m[i] + S[i] + I[i]
        incidence = 0.0
        if total > 0.0:
            incidence = beta[i] * S[i] * I[i] / total
        r = gamma[i] * I[i] - incidence
        dS[i] = r
        dI[i] = -r


def reaction_terms(S, I, beta, gamma, m):
    """Pointwise ``gamma I - beta S I/(m+S+I)`` for S and its exact negation
    for I; the incidence is taken as 0 where ``m+S+I = 0``."""
    arrays = [np.ascontiguousarray(v, dtype=float)
              for v in (S, I, beta, gamma, m)]
    n = arrays[0].shape
    if any(a.shape != n for a in arrays):
        raise DimensionError("reaction inputs have mismatched shapes")
    if np.any(arrays[0] < 0) or np.any(arrays[1] < 0):
        raise ValueError("reaction_terms requires S, I >= 0")
    dS = np.empty(n)
    dI = np.empty(n)
    _reaction_kernel(*arrays, dS, dI)
    return dS, dI
