"""Command line entry point and the scenario runner.

Exit statuses: 0 success, 2 configuration error, 3 numerical failure,
4 invariant breach (mass conservation).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import (ConfigurationError, ConservationError, InvalidCoefficientError,
                   NumericalFailure, parse_spec)
from .models import (detect_steady_state, integrate, write_diagnostics,
                     write_profiles)
from .scenarios import BUILTINS, eigen_report, load_scenario, predict, prepare

log = logging.getLogger("satsis")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 2, 3, 4

SWEEP_PARAMS = ("init_scale", "d_S", "d_I", "beta_offset")
SWEEP_COLUMNS = ("value", "classification", "int_I", "max_I", "S_mean",
                 "status", "error")


def _dump(obj, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                               default=_json_default) + "\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _max_abs(observed, reference):
    if reference is None:
        return None
    return float(np.max(np.abs(observed - np.asarray(reference))))


def simulate(scenario):
    """Integrate a scenario and classify it.  Returns ``(setup, trajectory,
    steady report, predictions, summary)`` without touching the disk."""
    setup = prepare(scenario)
    predictions = predict(scenario, setup)
    traj = integrate(setup.init, setup.config, setup.fields, setup.grid)
    report = detect_steady_state(traj, setup.config)
    ref = predictions["reference"]
    mass = traj.diagnostics["mass"]
    final = traj.final
    summary = {
        "name": scenario.name,
        "classification": report.classification.value,
        "predicted_vs_observed": {
            "reference": ref["source"],
            "maxAbsErr_S": _max_abs(final.S, ref["S"]),
            "maxAbsErr_I": _max_abs(final.I, ref["I"]),
        },
        "t_end": final.t,
        "steady_time": report.steady_time,
        "change_rate": report.rate,
        "persistent_cells": int(report.persistent.sum()),
        "mass_drift": float(np.max(np.abs(mass - mass[0])) / mass[0]),
        "int_I": setup.grid.integrate(final.I),
        "max_I": float(final.I.max()),
        "S_mean": setup.grid.integrate(final.S) / setup.grid.length,
        "S_spread": float(final.S.max() - final.S.min()),
    }
    depleted = setup.masks.m_zero & setup.masks.high
    summary["min_S_on_mzero_high"] = (float(final.S[depleted].min())
                                      if depleted.any() else None)
    return setup, traj, report, predictions, summary


def run_scenario(scenario, output_dir=None):
    """Run and write profiles, diagnostics, predictions and summary.

    Returns ``(exit status, summary or None)``; errors are logged, not raised.
    """
    out = Path(output_dir or scenario.output_dir or f"out/{scenario.name}")
    try:
        setup, traj, report, predictions, summary = simulate(scenario)
    except (ConfigurationError, InvalidCoefficientError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG, None
    except ConservationError as exc:
        log.error("invariant breach: %s", exc)
        return EXIT_INVARIANT, None
    except NumericalFailure as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL, None
    if scenario.write_profiles:
        write_profiles(traj, setup.grid, out / "profiles")
    write_diagnostics(traj, out / "diagnostics.csv")
    _dump(predictions, out / "predictions.json")
    _dump(summary, out / "summary.json")
    _dump(scenario.to_dict(), out / "scenario.json")
    return EXIT_OK, summary


def _with_param(scenario, param, value):
    if param == "init_scale":
        return scenario.replace(init_scale=value)
    if param == "d_S":
        return scenario.replace(d_S=value)
    if param == "d_I":
        return scenario.replace(d_I=value)
    if param == "beta_offset":
        spec = parse_spec(scenario.beta)
        if spec.kind not in ("constant", "affine", "sqrt_affine"):
            raise ConfigurationError(
                f"beta_offset needs a constant, affine or sqrt_affine beta, "
                f"got {spec}")
        return scenario.replace(beta=str(spec.with_param(0, value)))
    raise ConfigurationError(
        f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")


def _sweep_one(args):
    base, param, value, out = args
    row = dict.fromkeys(SWEEP_COLUMNS)
    row["value"] = value
    try:
        scenario = _with_param(base, param, value)
        status, summary = run_scenario(scenario, out)
    except ConfigurationError as exc:
        status, summary = EXIT_CONFIG, None
        row["error"] = str(exc)
    row["status"] = status
    if summary is not None:
        for key in ("classification", "int_I", "max_I", "S_mean"):
            row[key] = summary[key]
    elif row["error"] is None:
        row["error"] = f"run failed with status {status}"
    return row


def sweep(base, param, values, output_dir=None, jobs=1):
    """Run ``base`` once per value of ``param`` and write the summary CSV.

    Rows follow the input order; a failing run is recorded and the sweep
    continues.  Returns ``(rows, csv path)``.
    """
    if param not in SWEEP_PARAMS:
        raise ConfigurationError(
            f"unknown sweep parameter {param!r}; expected one of {SWEEP_PARAMS}")
    root = Path(output_dir or base.output_dir or f"out/{base.name}_sweep")
    tasks = [(base, param, float(v), root / f"{param}={float(v):g}")
             for v in values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]
    path = root / f"sweep_{param}.csv"
    root.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in SWEEP_COLUMNS])
    return rows, path


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


# ---------------------------------------------------------------------------
# argument parsing

def _parser():
    p = argparse.ArgumentParser(
        prog="satsis",
        description="Degenerate SIS models with saturated incidence.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a scenario file")
    s.add_argument("scenario", help="scenario JSON path or built-in name")
    s.add_argument("-o", "--output-dir")

    s = sub.add_parser("analyze", help="closed-form predictions only")
    s.add_argument("scenario")
    s.add_argument("-o", "--output-dir")

    s = sub.add_parser("eigen", help="principal eigenvalue report")
    s.add_argument("scenario")

    s = sub.add_parser("scenario", help="built-in experiments")
    s.add_argument("action", choices=("list", "run", "show"))
    s.add_argument("name", nargs="?")
    s.add_argument("-o", "--output-dir")

    s = sub.add_parser("sweep", help="one run per parameter value")
    s.add_argument("scenario")
    s.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    s.add_argument("--values", required=True,
                   help="comma separated values, may be empty")
    s.add_argument("-o", "--output-dir")
    s.add_argument("-j", "--jobs", type=int, default=1)
    return p


def _parse_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"cannot parse values {text!r}") from None


def _print_json(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=_json_default))


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return _dispatch(args)
    except (ConfigurationError, InvalidCoefficientError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG


def _dispatch(args):
    if args.command == "scenario":
        if args.action == "list":
            for name, sc in BUILTINS.items():
                print(f"{name:7s} {sc.model:8s} beta={sc.beta} gamma={sc.gamma} "
                      f"m={sc.m} d_S={sc.d_S:g} d_I={sc.d_I:g} "
                      f"a={sc.init_scale:g}")
            return EXIT_OK
        if args.name is None:
            raise ConfigurationError("scenario run/show needs a name")
        scenario = load_scenario(args.name)
        if args.action == "show":
            _print_json(scenario.to_dict())
            return EXIT_OK
        status, summary = run_scenario(scenario, args.output_dir)
        if summary is not None:
            _print_json(summary)
        return status

    scenario = load_scenario(args.scenario)
    if args.command == "simulate":
        status, summary = run_scenario(scenario, args.output_dir)
        if summary is not None:
            _print_json(summary)
        return status
    if args.command == "analyze":
        setup = prepare(scenario)
        report = predict(scenario, setup)
        out = Path(args.output_dir or scenario.output_dir
                   or f"out/{scenario.name}")
        _dump(report, out / "predictions.json")
        _print_json({k: v for k, v in report.items()
                     if k not in ("S_tilde", "I_hat", "I_star", "ode_limit",
                                  "reference")})
        return EXIT_OK
    if args.command == "eigen":
        setup = prepare(scenario)
        try:
            report = eigen_report(setup, scenario.d_I)
        except NumericalFailure as exc:
            log.error("numerical failure: %s", exc)
            return EXIT_NUMERICAL
        _print_json({"eigen": report})
        return EXIT_OK
    rows, path = sweep(scenario, args.param, _parse_values(args.values),
                       args.output_dir, args.jobs)
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
