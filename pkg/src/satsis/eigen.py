"""Principal Dirichlet eigenvalue of ``d * Delta + V`` on an interval and the
critical diffusivity at which it changes sign.

The largest eigenvalue of the symmetric tridiagonal discretisation is
bracketed by Sturm-sequence bisection and the eigenvector is recovered by
inverse iteration shifted just above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ConfigurationError, NumericalFailure
from .discretization import thomas_solve

__all__ = [
    "EigenResult", "dirichlet_operator", "sturm_count", "principal_eigenvalue",
    "critical_diffusion", "default_subinterval",
]


@dataclass(frozen=True, eq=False)
class EigenResult:
    lambda0: float
    eigenfunction: np.ndarray
    iterations: int
    residual: float


def dirichlet_operator(sub, d, potential):
    """Diagonal and off-diagonal of ``d*Delta_h + diag(potential)``.

    The ghost value beyond each end is the negated boundary cell value, which
    puts the zero of the eigenfunction on the interval end itself.
    """
    V = np.asarray(potential, dtype=float)
    if V.shape != (sub.n_cells,):
        raise ConfigurationError("potential does not match the subgrid")
    c = d / sub.h ** 2
    diag = V - 2.0 * c
    diag[0] -= c
    diag[-1] -= c
    off = np.full(sub.n_cells - 1, c)
    return diag, off


@njit(cache=True)
def sturm_count(diag, off, x):
    """Number of eigenvalues strictly below ``x``."""
    count = 0
    q = diag[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, diag.shape[0]):
        if q == 0.0:
            q = 1e-300
        q = (diag[i] - x) - off[i - 1] * off[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@njit(cache=True)
def _bisect_largest(diag, off, lo, hi, max_iter):
    n = diag.shape[0]
    it = 0
    while it < max_iter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(diag, off, mid) == n:
            hi = mid
        else:
            lo = mid
        it += 1
    return lo, hi, it


def _largest_eigenvalue(diag, off, max_iter=200):
    radius = np.zeros_like(diag)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lo = float(np.min(diag - radius))
    hi = float(np.max(diag + radius))
    scale = max(abs(lo), abs(hi), 1.0)
    lo -= 1e-12 * scale
    hi += 1e-12 * scale
    lo, hi, it = _bisect_largest(diag, off, lo, hi, max_iter)
    if hi - lo > 8 * np.spacing(scale):
        raise NumericalFailure("Sturm bisection did not converge")
    return lo, hi, it


def principal_eigenvalue(sub, d_I, potential, max_inverse=50):
    """Largest eigenvalue and positive eigenfunction (max-normalised)."""
    if sub.n_cells < 3:
        raise ConfigurationError("subgrid needs at least 3 cells")
    if not d_I > 0:
        raise ConfigurationError("d_I must be positive")
    diag, off = dirichlet_operator(sub, d_I, potential)
    lo, hi, iterations = _largest_eigenvalue(diag, off)

    # shifted just above the top of the spectrum: A - sigma is negative
    # definite, so elimination without pivoting is stable
    scale = max(abs(hi), float(np.max(np.abs(diag))), 1.0)
    sigma = hi + 16 * np.spacing(scale)
    sub_band = np.concatenate(([0.0], off))
    sup_band = np.concatenate((off, [0.0]))
    shifted = diag - sigma
    phi = np.ones(sub.n_cells)
    lam = hi
    for k in range(1, max_inverse + 1):
        nxt = thomas_solve(sub_band, shifted, sup_band, phi)
        nxt /= nxt[np.argmax(np.abs(nxt))]
        change = np.max(np.abs(nxt - phi))
        phi = nxt
        if change < 1e-14:
            break
    else:
        raise NumericalFailure("inverse iteration did not converge")
    iterations += k

    Aphi = diag * phi
    Aphi[:-1] += off * phi[1:]
    Aphi[1:] += off * phi[:-1]
    lam = float(phi @ Aphi / (phi @ phi))
    residual = float(np.max(np.abs(Aphi - lam * phi)))
    if np.any(phi <= 0):
        raise NumericalFailure("principal eigenfunction is not positive")
    return EigenResult(lam, phi, iterations, residual)


def critical_diffusion(sub, potential, tol=1e-12, max_iter=400):
    """Diffusivity ``d0`` at which the principal eigenvalue crosses zero.

    The eigenvalue decreases in ``d`` from ``max(potential)`` towards
    ``-inf``, so a sign change exists iff the potential is positive somewhere.
    Without one the sentinel ``0.0`` is returned.
    """
    V = np.asarray(potential, dtype=float)
    if V.max() <= 0:
        return 0.0

    def lam(d):
        diag, off = dirichlet_operator(sub, d, V)
        return 0.5 * sum(_largest_eigenvalue(diag, off)[:2])

    # first guess from the constant-potential formula
    d_hi = V.max() * (sub.length / math.pi) ** 2
    d_lo = d_hi
    for _ in range(200):
        if lam(d_hi) < 0:
            break
        d_hi *= 2.0
    else:
        raise NumericalFailure("could not bracket the critical diffusivity")
    for _ in range(200):
        if lam(d_lo) > 0:
            break
        d_lo *= 0.5
    else:
        raise NumericalFailure("could not bracket the critical diffusivity")

    for _ in range(max_iter):
        mid = math.sqrt(d_lo * d_hi)
        value = lam(mid)
        if abs(value) <= tol or d_hi - d_lo <= 4 * np.spacing(d_hi):
            return mid
        if value > 0:
            d_lo = mid
        else:
            d_hi = mid
    raise NumericalFailure("critical diffusivity bisection did not converge")


def default_subinterval(masks):
    """Longest run of cells in the saturation-free high-risk set, as
    ``(start, stop)`` cell indices, or ``None`` if the set is empty."""
    runs = masks.runs(masks.m_zero & masks.high)
    if not runs:
        return None
    return max(runs, key=lambda r: r[1] - r[0])
