"""Domain types shared by every other module: grid, coefficient fields,
epidemic state, risk/saturation region masks and model variants."""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConfigurationError", "InvalidCoefficientError", "DimensionError",
    "DomainAssumptionError", "NumericalFailure", "StepSizeError",
    "ConservationError",
    "Grid", "build_grid", "FieldSpec", "parse_spec", "CoefficientField",
    "sample_field", "EpidemicState", "total_mass", "RegionMasks",
    "classify_regions", "ModelKind", "Model", "DEFAULT_TOL_RISK",
]

DEFAULT_TOL_RISK = 1e-12


class ConfigurationError(ValueError):
    pass


class InvalidCoefficientError(ValueError):
    pass


class DimensionError(ValueError):
    pass


class DomainAssumptionError(ValueError):
    """A closed-form prediction was requested outside its hypotheses."""


class NumericalFailure(RuntimeError):
    pass


class StepSizeError(NumericalFailure):
    pass


class ConservationError(NumericalFailure):
    """Total mass drifted beyond tolerance; always indicates a bug."""


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centred partition of ``[a, b]`` with midpoint quadrature."""

    n_cells: int
    a: float
    b: float

    def __post_init__(self):
        h = (self.b - self.a) / self.n_cells
        centers = self.a + (np.arange(self.n_cells) + 0.5) * h
        centers.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "centers", centers)

    @property
    def length(self):
        return self.b - self.a

    def integrate(self, values, where=None):
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_cells,):
            raise DimensionError(
                f"expected {self.n_cells} cell values, got shape {values.shape}")
        if where is not None:
            values = np.where(where, values, 0.0)
        return self.h * float(np.sum(values))

    def measure(self, mask):
        return self.h * int(np.count_nonzero(mask))

    def subgrid(self, start, stop):
        """Grid on the cells ``start:stop``; cell centres coincide with ours."""
        if not 0 <= start < stop <= self.n_cells:
            raise ConfigurationError(f"bad cell range [{start}, {stop})")
        return build_grid(stop - start, self.a + start * self.h,
                          self.a + stop * self.h)

    def __repr__(self):
        return f"Grid(n_cells={self.n_cells}, a={self.a}, b={self.b})"


def build_grid(n_cells, a=0.0, b=1.0):
    if isinstance(n_cells, bool) or int(n_cells) != n_cells or n_cells < 2:
        raise ConfigurationError(f"need at least 2 cells, got {n_cells!r}")
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b) and b > a):
        raise ConfigurationError(f"empty or invalid interval [{a}, {b}]")
    return Grid(int(n_cells), a, b)


# ---------------------------------------------------------------------------
# coefficient expressions

_ARITY = {
    "constant": 1,
    "affine": 2,
    "sqrt_affine": 2,
    "affine_max": 4,
    "half_ramp": 0,
    "scaled_cosine": 2,
}

_SPEC_RE = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class FieldSpec:
    """One entry of the closed expression catalogue.

    ============== =========================== =====================
    kind           value at x                  params
    ============== =========================== =====================
    constant       c                           (c,)
    affine         k + c x                     (k, c)
    sqrt_affine    k + c sqrt(x)               (k, c)
    affine_max     max(k1 + c1 x, k2 + c2 x)   (k1, c1, k2, c2)
    half_ramp      1 - 2x on x < 1/2, else 0   ()
    scaled_cosine  a (c + cos(pi x))           (a, c)
    ============== =========================== =====================
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ConfigurationError(f"unknown expression kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _ARITY[self.kind]:
            raise ConfigurationError(
                f"{self.kind} takes {_ARITY[self.kind]} parameters, "
                f"got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ConfigurationError(f"non-finite parameter in {self.kind}")
        object.__setattr__(self, "params", params)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "constant":
            return np.full_like(x, p[0])
        if self.kind == "affine":
            return p[0] + p[1] * x
        if self.kind == "sqrt_affine":
            return p[0] + p[1] * np.sqrt(x)
        if self.kind == "affine_max":
            return np.maximum(p[0] + p[1] * x, p[2] + p[3] * x)
        if self.kind == "half_ramp":
            return np.where(x < 0.5, 1.0 - 2.0 * x, 0.0)
        return p[0] * (p[1] + np.cos(np.pi * x))

    def with_param(self, index, value):
        params = list(self.params)
        params[index] = value
        return FieldSpec(self.kind, tuple(params))

    def __str__(self):
        if not self.params:
            return self.kind
        return f"{self.kind}({','.join(_fmt(p) for p in self.params)})"


def _fmt(p):
    return str(int(p)) if p.is_integer() else repr(p)


def parse_spec(text):
    """Parse the canonical text form, e.g. ``affine_max(5,1,4,3)``."""
    if isinstance(text, FieldSpec):
        return text
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return FieldSpec("constant", (text,))
    if not isinstance(text, str):
        raise ConfigurationError(f"expression must be a string, got {text!r}")
    match = _SPEC_RE.match(text)
    if match is None:
        raise ConfigurationError(f"cannot parse expression {text!r}")
    kind, args = match.groups()
    params = ()
    if args is not None and args.strip():
        try:
            params = tuple(float(a) for a in args.split(","))
        except ValueError:
            raise ConfigurationError(
                f"non-numeric argument in {text!r}") from None
    return FieldSpec(kind, params)


_ROLES = ("beta", "gamma", "m", "initial", "free")


@dataclass(frozen=True, eq=False)
class CoefficientField:
    values: np.ndarray
    spec: FieldSpec
    grid: Grid
    role: str = "free"

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __len__(self):
        return len(self.values)


def sample_field(spec, grid, role="free"):
    """Evaluate ``spec`` at the cell centres and check the sign contract of
    ``role``: beta/gamma fields must be positive, m and initial data
    nonnegative."""
    spec = parse_spec(spec)
    if role not in _ROLES:
        raise ConfigurationError(f"unknown field role {role!r}")
    values = np.ascontiguousarray(spec(grid.centers), dtype=float)
    if not np.all(np.isfinite(values)):
        raise InvalidCoefficientError(f"{spec} is not finite on the grid")
    if role in ("beta", "gamma") and np.any(values <= 0):
        raise InvalidCoefficientError(
            f"{role} = {spec} must be positive, min is {values.min():g}")
    if role in ("m", "initial") and np.any(values < 0):
        raise InvalidCoefficientError(
            f"{role} = {spec} must be nonnegative, min is {values.min():g}")
    values.setflags(write=False)
    return CoefficientField(values, spec, grid, role)


# ---------------------------------------------------------------------------
# state

@dataclass(frozen=True, eq=False)
class EpidemicState:
    t: float
    S: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=float)
        I = np.array(self.I, dtype=float)
        if S.ndim != 1 or S.shape != I.shape:
            raise DimensionError(
                f"S and I must be 1-d of equal length: {S.shape}, {I.shape}")
        if np.any(S < 0) or np.any(I < 0):
            raise ValueError("S and I must be nonnegative")
        S.setflags(write=False)
        I.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "I", I)


def total_mass(state, grid):
    if len(state.S) != grid.n_cells:
        raise DimensionError(
            f"state has {len(state.S)} cells, grid has {grid.n_cells}")
    return grid.h * float(np.sum(state.S + state.I))


# ---------------------------------------------------------------------------
# regions

@dataclass(frozen=True, eq=False)
class RegionMasks:
    high: np.ndarray
    moderate: np.ndarray
    low: np.ndarray
    m_zero: np.ndarray
    m_pos: np.ndarray
    tol_risk: float = DEFAULT_TOL_RISK

    def runs(self, mask):
        """Maximal runs of consecutive true cells as ``(start, stop)`` pairs."""
        mask = np.asarray(mask, dtype=bool)
        padded = np.concatenate(([False], mask, [False])).astype(np.int8)
        edges = np.flatnonzero(np.diff(padded))
        return list(zip(edges[::2].tolist(), edges[1::2].tolist()))


def _same_grid(*fields):
    sizes = {len(np.asarray(f)) for f in fields}
    if len(sizes) != 1:
        raise DimensionError(f"fields have mismatched sizes {sorted(sizes)}")


def classify_regions(beta, gamma, m, tol_risk=DEFAULT_TOL_RISK):
    if tol_risk < 0:
        raise ConfigurationError("tol_risk must be nonnegative")
    _same_grid(beta, gamma, m)
    diff = np.asarray(beta) - np.asarray(gamma)
    high = diff > tol_risk
    low = diff < -tol_risk
    moderate = ~(high | low)
    m_zero = np.asarray(m) <= tol_risk
    return RegionMasks(high, moderate, low, m_zero, ~m_zero, tol_risk)


# ---------------------------------------------------------------------------
# model variants

class ModelKind(enum.Enum):
    FULL = "full"
    DS_ZERO = "ds_zero"
    DI_ZERO = "di_zero"
    ODE = "ode"


@dataclass(frozen=True)
class Model:
    kind: ModelKind
    d_S: float = 0.0
    d_I: float = 0.0

    def __post_init__(self):
        kind = ModelKind(self.kind)
        object.__setattr__(self, "kind", kind)
        d_S, d_I = float(self.d_S), float(self.d_I)
        need_S = kind in (ModelKind.FULL, ModelKind.DI_ZERO)
        need_I = kind in (ModelKind.FULL, ModelKind.DS_ZERO)
        for name, d, needed in (("d_S", d_S, need_S), ("d_I", d_I, need_I)):
            if not math.isfinite(d):
                raise ConfigurationError(f"{name} must be finite")
            if needed and d <= 0:
                raise ConfigurationError(
                    f"{kind.name} requires {name} > 0, got {d}")
            if not needed and d != 0:
                raise ConfigurationError(
                    f"{kind.name} requires {name} = 0, got {d}")

    @classmethod
    def full(cls, d_S, d_I):
        return cls(ModelKind.FULL, d_S, d_I)

    @classmethod
    def ds_zero(cls, d_I):
        return cls(ModelKind.DS_ZERO, 0.0, d_I)

    @classmethod
    def di_zero(cls, d_S):
        return cls(ModelKind.DI_ZERO, d_S, 0.0)

    @classmethod
    def ode(cls):
        return cls(ModelKind.ODE)
