"""Scenario documents, the built-in experiment catalogue and the prediction
report that accompanies every run."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .core import (ConfigurationError, DEFAULT_TOL_RISK,
                   DomainAssumptionError, EpidemicState, Model, ModelKind,
                   build_grid, classify_regions, parse_spec, sample_field)
from .eigen import critical_diffusion, default_subinterval, principal_eigenvalue
from .models import RunConfig

__all__ = ["Scenario", "BUILTINS", "builtin", "load_scenario",
           "ANALYSES", "Setup", "prepare", "predict", "eigen_report"]

ANALYSES = ("threshold", "endemic_ds", "persistence_ds", "endemic_di",
            "sstar", "ode_limit", "eigen")

_APPLICABLE = {
    ModelKind.DS_ZERO: ("threshold", "endemic_ds", "persistence_ds", "eigen"),
    ModelKind.DI_ZERO: ("endemic_di", "sstar"),
    ModelKind.ODE: ("ode_limit",),
    ModelKind.FULL: (),
}


@dataclass(frozen=True)
class Scenario:
    name: str
    model: str
    beta: str
    gamma: str
    m: str
    d_S: float = 0.0
    d_I: float = 0.0
    S0: str = "scaled_cosine(1,2)"
    I0: str = "scaled_cosine(1,1.5)"
    init_scale: float = 1.0
    n_cells: int = 400
    a: float = 0.0
    b: float = 1.0
    dt: float = 1e-3
    t_end: float = 600.0
    output_every: int | None = None
    steady_tol: float = 1e-6
    extinct_tol: float = 1e-3
    mass_tol: float = 1e-8
    tol_risk: float = DEFAULT_TOL_RISK
    analyses: tuple = ("auto",)
    output_dir: str | None = None
    write_profiles: bool = True

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name:
            raise ConfigurationError("scenario needs a non-empty name")
        for key in ("beta", "gamma", "m", "S0", "I0"):
            spec = parse_spec(getattr(self, key))
            object.__setattr__(self, key, str(spec))
        analyses = self.analyses
        if isinstance(analyses, str):
            analyses = (analyses,)
        analyses = tuple(analyses)
        for name in analyses:
            if name != "auto" and name not in ANALYSES:
                raise ConfigurationError(f"unknown analysis {name!r}")
        object.__setattr__(self, "analyses", analyses)
        if not (self.init_scale > 0 and math.isfinite(self.init_scale)):
            raise ConfigurationError("init_scale must be positive")
        # constructing these validates the remaining fields
        self.model_obj()
        self.run_config()

    def model_obj(self):
        try:
            kind = ModelKind(self.model)
        except ValueError:
            raise ConfigurationError(
                f"unknown model {self.model!r}; expected one of "
                f"{[k.value for k in ModelKind]}") from None
        return Model(kind, self.d_S, self.d_I)

    def run_config(self):
        every = self.output_every
        if every is None:
            every = max(1, int(round(10.0 / self.dt)))
        return RunConfig(self.model_obj(), self.dt, self.t_end, every,
                         self.steady_tol, self.extinct_tol, self.mass_tol,
                         self.tol_risk)

    def requested_analyses(self):
        if "auto" in self.analyses:
            return _APPLICABLE[self.model_obj().kind]
        return self.analyses

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["analyses"] = list(self.analyses)
        return out

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigurationError("scenario document must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown scenario keys {sorted(unknown)}")
        missing = {"name", "model", "beta", "gamma", "m"} - set(data)
        if missing:
            raise ConfigurationError(f"missing scenario keys {sorted(missing)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None


def load_scenario(source):
    """Scenario from a JSON file path or a built-in name."""
    path = Path(source)
    if path.exists():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        return Scenario.from_dict(data)
    if str(source) in BUILTINS:
        return builtin(str(source))
    raise ConfigurationError(f"no scenario file or built-in named {source!r}")


# ---------------------------------------------------------------------------
# built-in experiments

def _ds(name, beta, m="half_ramp", d_I=1.0, gamma="affine(5,1)"):
    return Scenario(name, "ds_zero", beta, gamma, m, d_I=d_I)


def _di(name, beta, gamma, m, a, d_S=1.0):
    return Scenario(name, "di_zero", beta, gamma, m, d_S=d_S, init_scale=a)


def _catalogue():
    items = [
        # sim1: beta > gamma everywhere, threshold dichotomy
        _ds("sim1a", "affine(6,1)"),
        _ds("sim1b", "affine(5.1,1)"),
        _ds("sim1c", "affine(5.2,1)", d_I=0.1),
        _ds("sim1d", "affine(5.2,1)", d_I=0.21),
        _ds("sim1e", "affine(5.2,1)", d_I=0.5),
        # sim2: nonempty moderate-risk region
        _ds("sim2a", "affine_max(5,1,4,3)"),
        _ds("sim2b", "affine_max(5,1,7,-3)"),
        _ds("sim2c", "affine_max(5,1,4,3)", m="constant(1)"),
        # sim3: nonempty low-risk region
        _ds("sim3a", "affine(5.5,-1)"),
        _ds("sim3b", "affine(6,-1)"),
        _ds("sim3c", "affine(6.5,-1)"),
        _ds("sim3d", "affine(4.25,2)"),
        _ds("sim3e", "affine(4.5,2)"),
        _ds("sim3f", "affine(4.75,2)"),
        _ds("sim3g", "affine(5.5,-1)", m="constant(1)"),
        _ds("sim3h", "affine(6,-1)", m="constant(1)"),
        _ds("sim3i", "affine(6.5,-1)", m="constant(1)"),
        # sim4: d_I = 0, beta = 1 + x, m = 1
        _di("sim4a", "affine(1,1)", "constant(0.8)", "constant(1)", 0.1),
        _di("sim4b", "affine(1,1)", "constant(0.8)", "constant(1)", 0.5),
        _di("sim4c", "affine(1,1)", "constant(2.5)", "constant(1)", 1.0),
        # sim5: d_I = 0, beta - gamma changes sign
        _di("sim5a", "sqrt_affine(0.5,1)", "constant(1)", "half_ramp", 1.0),
        _di("sim5b", "sqrt_affine(1.5,-1)", "constant(1)", "half_ramp", 1.0),
        _di("sim5c", "sqrt_affine(1.5,-1)", "constant(1)", "half_ramp", 0.5),
    ]
    return {s.name: s for s in items}


BUILTINS = _catalogue()


def builtin(name):
    try:
        return BUILTINS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown built-in {name!r}; see `scenario list`") from None


# ---------------------------------------------------------------------------
# sampling and predictions

@dataclass(frozen=True, eq=False)
class Setup:
    grid: object
    beta: object
    gamma: object
    m: object
    init: EpidemicState
    config: RunConfig
    masks: object

    @property
    def fields(self):
        return self.beta, self.gamma, self.m

    @property
    def N(self):
        return self.grid.integrate(self.init.S + self.init.I)


def prepare(scenario):
    grid = build_grid(scenario.n_cells, scenario.a, scenario.b)
    beta = sample_field(scenario.beta, grid, "beta")
    gamma = sample_field(scenario.gamma, grid, "gamma")
    m = sample_field(scenario.m, grid, "m")
    S0 = scenario.init_scale * sample_field(scenario.S0, grid, "initial").values
    I0 = scenario.init_scale * sample_field(scenario.I0, grid, "initial").values
    config = scenario.run_config()
    config.check_step(beta, gamma)
    masks = classify_regions(beta, gamma, m, scenario.tol_risk)
    return Setup(grid, beta, gamma, m, EpidemicState(0.0, S0, I0), config,
                 masks)


def _floats(a):
    return None if a is None else [float(v) for v in np.asarray(a)]


def eigen_report(setup, d_I):
    run = default_subinterval(setup.masks)
    if run is None or run[1] - run[0] < 3 or not d_I > 0:
        return None
    start, stop = run
    sub = setup.grid.subgrid(start, stop)
    potential = (np.asarray(setup.beta) - np.asarray(setup.gamma))[start:stop]
    result = principal_eigenvalue(sub, d_I, potential)
    d_crit = critical_diffusion(sub, potential)
    return {
        "lambda0": result.lambda0,
        "d_critical": d_crit,
        "has_critical": d_crit > 0,
        "interval": [sub.a, sub.b],
        "residual": result.residual,
    }


def predict(scenario, setup):
    """JSON-ready dictionary of every requested closed-form prediction, plus
    ``reference``: the profiles (or None) the run's long-time state is
    compared against."""
    grid = setup.grid
    beta, gamma, m = (np.asarray(f) for f in setup.fields)
    N = setup.N
    masks = setup.masks
    support = analysis.support_from_initial(setup.init.I, scenario.extinct_tol)
    report = {
        "N": N,
        "threshold": None, "feasible": None, "S_tilde": None, "I_tilde": None,
        "persistence": None, "S_hat": None, "I_hat": None, "S_star": None,
        "I_star": None, "conditions": {}, "ode_limit": None, "eigen": None,
        "regions": {
            "high": int(masks.high.sum()), "moderate": int(masks.moderate.sum()),
            "low": int(masks.low.sum()), "m_zero": int(masks.m_zero.sum()),
        },
    }
    reference = {"S": None, "I": None, "source": None}
    wanted = scenario.requested_analyses()
    all_high = bool(masks.high.all())

    def note(key, exc):
        report["conditions"][key] = f"not applicable: {exc}"

    if "threshold" in wanted or "endemic_ds" in wanted:
        try:
            pred = analysis.endemic_limit_ds(beta, gamma, m, grid, N)
            report["threshold"] = pred.threshold
            report["feasible"] = pred.feasible
            if "endemic_ds" in wanted:
                report["S_tilde"] = _floats(pred.S_tilde)
                report["I_tilde"] = pred.I_tilde
        except DomainAssumptionError as exc:
            note("endemic_ds", exc)
    if "persistence_ds" in wanted:
        try:
            cond = analysis.persistence_conditions_ds(
                setup.init.S, setup.init.I, beta, gamma, m, grid, N)
            report["persistence"] = cond.value
        except DomainAssumptionError as exc:
            note("persistence_ds", exc)
    if "endemic_di" in wanted:
        try:
            pred = analysis.endemic_limit_di(beta, gamma, m, grid, N, support)
            report["S_hat"] = pred.S_hat
            report["I_hat"] = _floats(pred.I_hat)
            cond = dict(pred.conditions)
            cond["extinct_cells"] = int(cond["extinct_cells"].sum())
            report["conditions"]["endemic_di"] = cond
        except DomainAssumptionError as exc:
            note("endemic_di", exc)
    if "sstar" in wanted:
        try:
            sol = analysis.solve_Sstar(beta, gamma, m, grid, N, support)
            report["S_star"] = sol.S_star
            report["I_star"] = _floats(sol.I_limit)
        except DomainAssumptionError as exc:
            note("sstar", exc)
    if "ode_limit" in wanted:
        n = setup.init.S + setup.init.I
        S_inf, I_inf = analysis.ode_pointwise_limit(beta, gamma, m, n, grid)
        report["ode_limit"] = {"S": _floats(S_inf), "I": _floats(I_inf)}
    if "eigen" in wanted:
        report["eigen"] = eigen_report(setup, scenario.d_I)

    kind = setup.config.model.kind
    zeros = np.zeros(grid.n_cells)
    if kind is ModelKind.DS_ZERO:
        if all_high and report["feasible"]:
            S_t = report["S_tilde"]
            reference = {"S": S_t, "I": [report["I_tilde"]] * grid.n_cells,
                         "source": "endemic_ds"}
        elif all_high and report["feasible"] is False:
            reference = {"S": None, "I": _floats(zeros), "source": "threshold"}
        elif masks.low.any() or (masks.moderate & masks.m_pos).any():
            reference = {"S": None, "I": _floats(zeros),
                         "source": "risk_extinction"}
    elif kind is ModelKind.DI_ZERO:
        if report["S_star"] is not None:
            reference = {"S": [report["S_star"]] * grid.n_cells,
                         "I": report["I_star"], "source": "sstar"}
        elif not masks.high.any():
            reference = {"S": [N / grid.length] * grid.n_cells,
                         "I": _floats(zeros), "source": "risk_extinction"}
    elif kind is ModelKind.ODE and report["ode_limit"] is not None:
        reference = dict(report["ode_limit"], source="ode_limit")
    report["reference"] = reference
    return report
