"""Time integration of the four model regimes.

Each step is a Lie split: explicit Euler on the reaction terms followed by a
backward-Euler diffusion solve for every compartment that moves.  Reaction
increments of S and I are exact negations of each other and the Neumann
Laplacian has zero column sums, so total mass is conserved to rounding.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .analysis import harnack_ratio, lyapunov_di, lyapunov_ds
from .core import (ConfigurationError, ConservationError, DEFAULT_TOL_RISK,
                   EpidemicState, Model, ModelKind, NumericalFailure,
                   StepSizeError, total_mass)
from .discretization import (diffuse_increment, factor_implicit,
                             neumann_laplacian)

__all__ = [
    "RunConfig", "Trajectory", "Classification", "SteadyStateReport",
    "positivity_bound", "step", "integrate", "detect_steady_state",
    "write_profiles", "write_diagnostics", "DIAGNOSTIC_COLUMNS",
]

DIAGNOSTIC_COLUMNS = ("t", "mass", "maxI", "minS", "minI", "harnack",
                      "lyapunov")

_OK, _NEGATIVE, _NONFINITE = 0, 1, 2


def positivity_bound(beta, gamma):
    """Largest admissible step: half the inverse of the fastest rate."""
    rate = max(float(np.max(beta)), float(np.max(gamma)))
    return 0.5 / rate


@dataclass(frozen=True)
class RunConfig:
    model: Model
    dt: float = 1e-3
    t_end: float = 600.0
    output_every: int = 10_000
    steady_tol: float = 1e-6
    extinct_tol: float = 1e-3
    mass_tol: float = 1e-8
    tol_risk: float = DEFAULT_TOL_RISK

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt:
            raise ConfigurationError("t_end must be at least dt")
        if int(self.output_every) != self.output_every or self.output_every < 1:
            raise ConfigurationError("output_every must be a positive integer")
        for name in ("steady_tol", "extinct_tol", "mass_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def n_steps(self):
        return max(1, int(round(self.t_end / self.dt)))

    def check_step(self, beta, gamma):
        bound = positivity_bound(beta, gamma)
        if self.dt > bound:
            raise ConfigurationError(
                f"dt = {self.dt:g} exceeds the positivity bound "
                f"0.5/max(beta, gamma) = {bound:g}")


@njit(cache=True)
def _advance(S, I, beta, gamma, m, dt, n_steps, move_S, s_flux, s_sub,
             s_inv, s_cp, move_I, i_flux, i_sub, i_inv, i_cp):
    n = S.shape[0]
    rhs = np.empty(n)
    delta = np.empty(n)
    for _ in range(n_steps):
        for i in range(n):
            total = m[i] + S[i] + I[i]
            incidence = 0.0
            if total > 0.0:
                incidence = beta[i] * S[i] * I[i] / total
            r = dt * (gamma[i] * I[i] - incidence)
            S[i] = S[i] + r
            I[i] = I[i] - r
        if move_S and not diffuse_increment(S, s_flux, s_sub, s_inv, s_cp,
                                            rhs, delta, True):
            return _NEGATIVE
        if move_I and not diffuse_increment(I, i_flux, i_sub, i_inv, i_cp,
                                            rhs, delta, True):
            return _NEGATIVE
        for i in range(n):
            if not (math.isfinite(S[i]) and math.isfinite(I[i])):
                return _NONFINITE
            if S[i] < 0.0 or I[i] < 0.0:
                return _NEGATIVE
    return _OK


class _Stepper:
    """Prefactored diffusion solves for one (model, grid, dt) combination."""

    def __init__(self, model, fields, grid, dt):
        self.beta, self.gamma, self.m = (
            np.ascontiguousarray(f, dtype=float) for f in fields)
        if any(len(f) != grid.n_cells for f in (self.beta, self.gamma, self.m)):
            raise ConfigurationError("fields do not match the grid")
        self.dt = dt
        self.move_S = model.d_S > 0
        self.move_I = model.d_I > 0
        self.s_fac = self._factor(grid, model.d_S, dt)
        self.i_fac = self._factor(grid, model.d_I, dt)

    @staticmethod
    def _factor(grid, d, dt):
        if d == 0:
            return (np.zeros(1),) * 4
        op = neumann_laplacian(grid, d)
        return (dt * op.sup, *factor_implicit(op, dt))

    def advance(self, S, I, n_steps):
        status = _advance(S, I, self.beta, self.gamma, self.m, self.dt,
                          n_steps, self.move_S, *self.s_fac,
                          self.move_I, *self.i_fac)
        if status == _NEGATIVE:
            raise StepSizeError(
                "positivity lost; reduce dt below "
                f"{positivity_bound(self.beta, self.gamma):g}")
        if status == _NONFINITE:
            raise NumericalFailure("non-finite value in the solution")


def step(state, model, fields, grid, dt):
    """Advance ``state`` by one IMEX step of length ``dt``."""
    beta, gamma, _ = fields
    bound = positivity_bound(beta, gamma)
    if not 0 < dt <= bound:
        raise StepSizeError(f"dt = {dt:g} outside (0, {bound:g}]")
    stepper = _Stepper(model, fields, grid, dt)
    S = np.array(state.S, dtype=float)
    I = np.array(state.I, dtype=float)
    stepper.advance(S, I, 1)
    return EpidemicState(state.t + dt, S, I)


@dataclass(eq=False)
class Trajectory:
    frames: list
    diagnostics: dict
    support: np.ndarray | None = None
    steps_taken: int = 0

    @property
    def times(self):
        return np.array([f.t for f in self.frames])

    @property
    def final(self):
        return self.frames[-1]


def _lyapunov(state, model, fields, grid, support, tol_risk):
    beta, gamma, m = (np.asarray(f) for f in fields)
    if model.kind is ModelKind.DS_ZERO and np.all(beta > gamma):
        return lyapunov_ds(state, beta, gamma, m, grid)
    if model.kind is ModelKind.DI_ZERO:
        return lyapunov_di(state, beta, gamma, m, grid, support, tol_risk)
    return float("nan")


def integrate(init, config, fields, grid):
    """Run from ``init`` to ``config.t_end`` recording a frame every
    ``config.output_every`` steps and at the final time."""
    beta, gamma, m = fields
    config.check_step(beta, gamma)
    mass0 = total_mass(init, grid)
    if not mass0 > 0:
        raise ConfigurationError("initial mass must be positive")
    support = np.asarray(init.I) > config.extinct_tol
    stepper = _Stepper(config.model, fields, grid, config.dt)

    diagnostics = {k: [] for k in DIAGNOSTIC_COLUMNS}
    frames = []

    def record(state):
        mass = total_mass(state, grid)
        drift = abs(mass - mass0) / mass0
        if drift > config.mass_tol:
            raise ConservationError(
                f"relative mass drift {drift:.3e} at t = {state.t:g}")
        frames.append(state)
        row = (state.t, mass, float(state.I.max()), float(state.S.min()),
               float(state.I.min()), harnack_ratio(state.I),
               _lyapunov(state, config.model, fields, grid, support,
                         config.tol_risk))
        for key, value in zip(DIAGNOSTIC_COLUMNS, row):
            diagnostics[key].append(value)

    record(init)
    S = np.array(init.S, dtype=float)
    I = np.array(init.I, dtype=float)
    done = 0
    total = config.n_steps
    while done < total:
        chunk = min(config.output_every, total - done)
        stepper.advance(S, I, chunk)
        done += chunk
        record(EpidemicState(init.t + done * config.dt, S.copy(), I.copy()))

    return Trajectory(frames, {k: np.array(v) for k, v in diagnostics.items()},
                      support, done)


# ---------------------------------------------------------------------------
# steady-state classification

class Classification(enum.Enum):
    EXTINCT = "EXTINCT"
    ENDEMIC = "ENDEMIC"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True, eq=False)
class SteadyStateReport:
    """Long-time verdict on a trajectory.

    ``persistent`` marks the persistent core: cells whose final infection is
    at least ``extinct_tol`` and whose own relative change over the last frame
    interval is below ``steady_tol`` per unit time.  ``rate`` is the global
    sup-norm relative change rate of (S, I) over that interval and
    ``steady_time`` the first frame time from which that rate stayed below
    ``steady_tol`` (None if it never settled).
    """

    classification: Classification
    S_limit: np.ndarray
    I_limit: np.ndarray
    rate: float
    steady_time: float | None
    persistent: np.ndarray

    @property
    def fully_steady(self):
        return self.steady_time is not None


def _change_rate(a, b):
    scale = max(float(np.max(np.abs(b.S))), float(np.max(np.abs(b.I))), 1e-300)
    change = max(float(np.max(np.abs(b.S - a.S))),
                 float(np.max(np.abs(b.I - a.I))))
    return change / (scale * (b.t - a.t))


def detect_steady_state(traj, config):
    """Classify as EXTINCT when ``max I < extinct_tol`` at the end, ENDEMIC
    when the persistent core is nonempty, and UNDECIDED otherwise."""
    frames = traj.frames
    if len(frames) < 2:
        raise ValueError("need at least two frames")
    prev, final = frames[-2], frames[-1]
    rates = [_change_rate(a, b) for a, b in zip(frames[:-1], frames[1:])]
    steady_time = None
    for k in range(len(rates) - 1, -1, -1):
        if rates[k] >= config.steady_tol:
            break
        steady_time = frames[k + 1].t

    with np.errstate(divide="ignore", invalid="ignore"):
        cell_rate = np.abs(final.I - prev.I) / (final.I * (final.t - prev.t))
    persistent = (final.I >= config.extinct_tol) & (cell_rate < config.steady_tol)

    if final.I.max() < config.extinct_tol:
        cls = Classification.EXTINCT
    elif persistent.any():
        cls = Classification.ENDEMIC
    else:
        cls = Classification.UNDECIDED
    return SteadyStateReport(cls, final.S.copy(), final.I.copy(), rates[-1],
                             steady_time, persistent)


# ---------------------------------------------------------------------------
# CSV output

def _g(x):
    return f"{x:.17g}"


def write_profiles(traj, grid, directory, prefix="profile"):
    """One ``x,S,I`` CSV per frame; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    width = len(str(len(traj.frames) - 1))
    paths = []
    for k, frame in enumerate(traj.frames):
        path = directory / f"{prefix}_{k:0{width}d}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "S", "I"])
            for x, s, i in zip(grid.centers, frame.S, frame.I):
                writer.writerow([_g(x), _g(s), _g(i)])
        paths.append(path)
    return paths


def write_diagnostics(traj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        columns = [traj.diagnostics[k] for k in DIAGNOSTIC_COLUMNS]
        for row in zip(*columns):
            writer.writerow([_g(float(v)) for v in row])
    return path
