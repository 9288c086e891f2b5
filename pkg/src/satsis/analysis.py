"""Closed-form long-time predictions and trajectory diagnostics.

Every function works on cell values of a :class:`~satsis.core.Grid` and uses
midpoint quadrature for integrals.  Predictions that rely on ``beta > gamma``
raise :class:`~satsis.core.DomainAssumptionError` when a cell violates it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_TOL_RISK, DimensionError, DomainAssumptionError

__all__ = [
    "EndemicPredictionDS", "EndemicPredictionDI", "SStarSolution",
    "PersistenceCondition", "high_risk_threshold", "endemic_limit_ds",
    "persistence_conditions_ds", "endemic_limit_di", "sstar_objective",
    "solve_Sstar", "local_r0", "ode_pointwise_limit", "harnack_ratio",
    "lyapunov_ds", "lyapunov_di", "support_from_initial",
]


def _arrays(grid, *fields):
    out = []
    for f in fields:
        a = np.asarray(f, dtype=float)
        if a.shape != (grid.n_cells,):
            raise DimensionError(
                f"expected {grid.n_cells} cell values, got shape {a.shape}")
        out.append(a)
    return out


def _require_high_risk(beta, gamma):
    if np.any(beta <= gamma):
        bad = int(np.count_nonzero(beta <= gamma))
        raise DomainAssumptionError(
            f"beta > gamma required on every cell ({bad} cells violate it)")


def _support(grid, support):
    if support is None:
        return np.ones(grid.n_cells, dtype=bool)
    support = np.asarray(support, dtype=bool)
    if support.shape != (grid.n_cells,):
        raise DimensionError("support mask does not match the grid")
    return support


def support_from_initial(I0, tol):
    """Cells counted as ``{I0 > 0}``: initial infection above ``tol``."""
    return np.asarray(I0, dtype=float) > tol


# ---------------------------------------------------------------------------
# d_S = 0 model

def high_risk_threshold(beta, gamma, m, grid):
    """Integral of ``m*gamma/(beta-gamma)``; the disease dies out when the
    total population does not exceed it."""
    beta, gamma, m = _arrays(grid, beta, gamma, m)
    _require_high_risk(beta, gamma)
    return grid.integrate(m * gamma / (beta - gamma))


@dataclass(frozen=True, eq=False)
class EndemicPredictionDS:
    S_tilde: np.ndarray | None
    I_tilde: float
    threshold: float
    feasible: bool

    def mass(self, grid):
        if not self.feasible:
            return float("nan")
        return grid.integrate(self.S_tilde) + grid.length * self.I_tilde


def endemic_limit_ds(beta, gamma, m, grid, N):
    beta, gamma, m = _arrays(grid, beta, gamma, m)
    _require_high_risk(beta, gamma)
    if not N > 0:
        raise ValueError("total population N must be positive")
    ratio = gamma / (beta - gamma)
    threshold = grid.integrate(m * ratio)
    feasible = N > threshold
    if not feasible:
        return EndemicPredictionDS(None, 0.0, threshold, False)
    I_tilde = (N - threshold) / grid.integrate(beta / (beta - gamma))
    S_tilde = ratio * (I_tilde + m)
    return EndemicPredictionDS(S_tilde, I_tilde, threshold, True)


class PersistenceCondition(enum.Enum):
    COND_I = "cond_i"
    COND_II = "cond_ii"
    NONE = "none"


def persistence_conditions_ds(S0, I0, beta, gamma, m, grid, N):
    """Which of the two sufficient conditions for endemic convergence holds.

    COND_I: ``S0 >= m*gamma/(beta-gamma)`` everywhere.  COND_II: the reverse
    inequality everywhere together with a small enough ``max I0``.  NONE means
    no conclusion can be drawn, not that the disease dies out.
    """
    S0, I0, beta, gamma, m = _arrays(grid, S0, I0, beta, gamma, m)
    _require_high_risk(beta, gamma)
    profile = m * gamma / (beta - gamma)
    threshold = grid.integrate(profile)
    if not N > threshold:
        raise DomainAssumptionError(
            f"N = {N} does not exceed the threshold {threshold}")
    if np.all(S0 >= profile):
        return PersistenceCondition.COND_I
    bound = (N - threshold) / grid.integrate(gamma / (beta - gamma))
    if np.all(S0 <= profile) and I0.max() < bound:
        return PersistenceCondition.COND_II
    return PersistenceCondition.NONE


# ---------------------------------------------------------------------------
# d_I = 0 model

@dataclass(frozen=True, eq=False)
class EndemicPredictionDI:
    S_hat: float
    I_hat: np.ndarray
    conditions: dict = field(default_factory=dict)

    def mass(self, grid):
        return grid.length * self.S_hat + grid.integrate(self.I_hat)


def endemic_limit_di(beta, gamma, m, grid, N, support=None):
    """Homogenised susceptible level and infected profile for an all
    high-risk habitat.

    ``conditions`` reports separately the two alternative sufficient
    hypotheses for convergence (``hyp_min`` and ``hyp_sum``), the global
    extinction hypothesis ``extinction`` and the per-cell extinction mask
    ``extinct_cells`` (cells where ``|Omega| m gamma/(beta-gamma) >= N``).
    """
    beta, gamma, m = _arrays(grid, beta, gamma, m)
    _require_high_risk(beta, gamma)
    support = _support(grid, support)
    area = grid.length
    excess = (beta - gamma) / gamma
    int_m = grid.integrate(m, where=support)
    int_excess = grid.integrate(excess, where=support)
    S_hat = (N + int_m) / (area + int_excess)
    I_hat = np.where(support, excess * S_hat - m, 0.0)

    level = area * m * gamma / (beta - gamma)
    bound = min(N, N + int_m - N / area * int_excess)
    conditions = {
        "hyp_min": bool(np.all(level < bound)),
        "hyp_sum": bool(np.all(m * gamma / (beta - gamma)
                               * (area + int_excess) < N)),
        "extinction": bool(np.all(level >= N)),
        "extinct_cells": (level >= N) & support,
    }
    return EndemicPredictionDI(S_hat, I_hat, conditions)


@dataclass(frozen=True, eq=False)
class SStarSolution:
    S_star: float
    I_limit: np.ndarray
    residual: float
    iterations: int = 0


def _sstar_parts(beta, gamma, m, grid, support):
    beta, gamma, m = _arrays(grid, beta, gamma, m)
    support = _support(grid, support)
    R1 = beta / gamma - 1.0
    return R1, m, support


def sstar_objective(tau, beta, gamma, m, grid, N, support=None):
    """``|Omega| tau + int ((R-1) tau - m)_+ chi - N`` with ``R = beta/gamma``."""
    R1, m, support = _sstar_parts(beta, gamma, m, grid, support)
    return _objective(tau, R1, m, support, grid, N)


def _objective(tau, R1, m, support, grid, N):
    pos = np.maximum(R1 * tau - m, 0.0)
    return grid.length * tau + grid.integrate(pos, where=support) - N


def solve_Sstar(beta, gamma, m, grid, N, support=None, tol=1e-12,
                max_iter=400):
    """Root of :func:`sstar_objective` on ``[0, N/|Omega|]`` by bisection.

    The objective is piecewise linear and strictly increasing when
    ``|Omega| > int (R-1)_+ chi``; otherwise uniqueness is not guaranteed and
    a :class:`DomainAssumptionError` is raised.
    """
    R1, m, support = _sstar_parts(beta, gamma, m, grid, support)
    if not N > 0:
        raise ValueError("total population N must be positive")
    area = grid.length
    slope_floor = area - grid.integrate(np.maximum(R1, 0.0), where=support)
    if not slope_floor > 0:
        raise DomainAssumptionError(
            "monotonicity hypothesis fails: "
            f"|Omega| - int (R-1)_+ chi = {slope_floor:g} <= 0")

    lo, hi = 0.0, N / area
    f_hi = _objective(hi, R1, m, support, grid, N)
    if f_hi <= tol:
        tau, resid, it = hi, f_hi, 0
    else:
        tau, resid = hi, f_hi
        for it in range(1, max_iter + 1):
            tau = 0.5 * (lo + hi)
            resid = _objective(tau, R1, m, support, grid, N)
            if abs(resid) <= tol or hi - lo <= 2 * np.spacing(hi):
                break
            if resid > 0:
                hi = tau
            else:
                lo = tau
    I_limit = np.where(support, np.maximum(R1 * tau - m, 0.0), 0.0)
    return SStarSolution(tau, I_limit, abs(resid), it)


# ---------------------------------------------------------------------------
# movement-free ODE system

def local_r0(beta, gamma, m, n_profile):
    beta, gamma, m, n = (np.asarray(v, dtype=float)
                         for v in (beta, gamma, m, n_profile))
    denom = gamma * (m + n)
    with np.errstate(divide="ignore", invalid="ignore"):
        r0 = np.where(denom > 0, beta * n / np.where(denom > 0, denom, 1.0),
                      0.0)
    return r0


def ode_pointwise_limit(beta, gamma, m, n_profile, grid):
    beta, gamma, m, n = _arrays(grid, beta, gamma, m, n_profile)
    if np.any(n < 0):
        raise ValueError("n_profile must be nonnegative")
    r0 = local_r0(beta, gamma, m, n)
    endemic = r0 > 1
    safe = np.where(endemic, r0, 1.0)
    S_inf = np.where(endemic, n / safe, n)
    I_inf = np.where(endemic, (1.0 - 1.0 / safe) * n, 0.0)
    return S_inf, I_inf


# ---------------------------------------------------------------------------
# monitors

def harnack_ratio(I):
    I = np.asarray(I, dtype=float)
    lo = I.min()
    if lo <= 0:
        return float("inf")
    return float(I.max() / lo)


def lyapunov_ds(state, beta, gamma, m, grid):
    """Energy ``int gamma U^2/(2(beta-gamma)) + int I^2/2`` with
    ``U = (beta-gamma)/gamma S - m``; non-increasing for the d_S = 0 model."""
    S, I, beta, gamma, m = _arrays(grid, state.S, state.I, beta, gamma, m)
    _require_high_risk(beta, gamma)
    U = (beta - gamma) / gamma * S - m
    return (grid.integrate(gamma * U ** 2 / (2.0 * (beta - gamma)))
            + 0.5 * grid.integrate(I ** 2))


def lyapunov_di(state, beta, gamma, m, grid, support=None,
                tol_risk=DEFAULT_TOL_RISK):
    """``int S^2/2`` plus ``gamma (I+m)^2/(2(beta-gamma))`` integrated over
    high-risk cells of ``support``."""
    S, I, beta, gamma, m = _arrays(grid, state.S, state.I, beta, gamma, m)
    support = _support(grid, support)
    region = support & (beta - gamma > tol_risk)
    gap = np.where(region, beta - gamma, 1.0)
    weighted = np.where(region, gamma * (I + m) ** 2 / (2.0 * gap), 0.0)
    return 0.5 * grid.integrate(S ** 2) + grid.integrate(weighted)
