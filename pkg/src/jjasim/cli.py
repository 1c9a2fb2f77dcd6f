"""Command-line front end: one subcommand per experiment.

Every run validates its parameters against a strict schema (unknown keys
and bad values are all reported together, exit status 2), writes a CSV of
results plus a JSON metadata file, and exits 1 if any grid point failed
numerically unless ``--keep-going`` is given.

Parameters come from ``--config FILE`` (JSON) and are overridden by flags::

    {"experiment": "dd-verify", "params": {"n": 6, "lambda": 0.5, "b": 0.2},
     "output_path": "out", "seed": 0, "threads": 1}
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .errors import JJASimError, ParameterError
from .io import csv_text, json_text, write_outputs

THREADS_ENV = "JJASIM_THREADS"
EXIT_OK, EXIT_NUMERIC, EXIT_CONFIG = 0, 1, 2


# --- schemas ----------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    kind: str            # int, float, str, bool, ints, floats, strs
    default: Any = None
    choices: tuple = ()
    help: str = ""


def _coerce(name: str, spec: Param, value, errors: list):
    def one(v, base):
        if base == "int":
            if isinstance(v, bool) or not isinstance(v, (int, float, str)):
                raise ValueError
            f = float(v)
            if f != int(f):
                raise ValueError
            return int(f)
        if base == "float":
            if isinstance(v, bool):
                raise ValueError
            f = float(v)
            if not math.isfinite(f):
                raise ValueError
            return f
        if base == "bool":
            if isinstance(v, bool):
                return v
            if str(v).lower() in ("true", "1", "yes"):
                return True
            if str(v).lower() in ("false", "0", "no"):
                return False
            raise ValueError
        return str(v)

    base = {"ints": "int", "floats": "float", "strs": "str"}.get(spec.kind, spec.kind)
    try:
        if spec.kind in ("ints", "floats", "strs"):
            items = value if isinstance(value, (list, tuple)) else [value]
            if isinstance(value, str) and "," in value:
                items = value.split(",")
            out = [one(v, base) for v in items]
            if not out:
                raise ValueError
        else:
            out = one(value, base)
    except (TypeError, ValueError):
        errors.append(f"{name}: expected {spec.kind}, got {value!r}")
        return None
    if spec.choices:
        bad = [v for v in (out if isinstance(out, list) else [out]) if v not in spec.choices]
        if bad:
            errors.append(f"{name}: {bad} not in {list(spec.choices)}")
            return None
    return out


def _p(kind, default=None, choices=(), help=""):
    return Param(kind, default, tuple(choices), help)


BOUNDARY = _p("str", "periodic", ("periodic", "open"))
DTAU = _p("floats", [0.1, 0.05, 0.01, 0.005, 0.001], help="decreasing imaginary time steps")

SCHEMAS: dict = {
    "invert-check": {
        "beta": _p("floats", [0.05, 0.2, 0.4, 0.49]), "n": _p("ints", [6, 12, 32, 64]),
        "tol": _p("float", 1e-10)},
    "reduce": {
        "n_sites": _p("int", 6), "c_junction": _p("float", 1e-15), "c_gate": _p("floats", [1e-15]),
        "c_coupling": _p("float", 1e-15), "josephson_energy": _p("float", 0.0),
        "gate_charge": _p("floats", [0.5]), "beta_max": _p("float", 0.49)},
    "spectrum": {
        "n": _p("int", 6), "lambda": _p("float", 0.4), "b": _p("float", 0.2), "max_range": _p("int", 2),
        "n_eigs": _p("int", 6), "boundary": BOUNDARY},
    "phase-probabilities": {
        "n": _p("int", 6), "lambda_min": _p("float", 0.0), "lambda_max": _p("float", 1.0),
        "lambda_points": _p("int", 21), "b_min": _p("float", 0.0), "b_max": _p("float", 1.0),
        "b_points": _p("int", 21), "boundary": BOUNDARY},
    "leakage": {
        "n": _p("ints", [4]), "lambda": _p("float", 1.0), "b": _p("floats", [0.01, 0.02, 0.05, 0.1]),
        "local_dim": _p("int", 3), "boundary": BOUNDARY,
        "reference": _p("str", "ferromagnet", ("ferromagnet", "ground")),
        "exact_max_dim": _p("int", 6561, help="skip exact diagonalization above this dimension")},
    "dd-verify": {
        "n": _p("int", 6), "lambda": _p("float", 0.4), "b": _p("float", 0.2),
        "coupling_range": _p("int", 3), "boundary": BOUNDARY, "tol": _p("float", 1e-15)},
    "dd-fidelity": {
        "n": _p("int", 6), "lambda": _p("float", 0.4), "b": _p("float", 0.2),
        "coupling_range": _p("int", 3), "total_time": _p("float", math.pi),
        "m": _p("ints", [1, 2, 4, 8]), "boundary": BOUNDARY},
    "sweep": {
        "n": _p("int", 6), "lambda": _p("float", 0.4), "velocity": _p("float", 0.002),
        "b_max": _p("float", 1.0), "b_step": _p("float", 0.01), "dt": _p("float", 0.05),
        "modes": _p("strs", ["strict", "pulsed:1", "pulsed:4", "uncontrolled"],
                    help="strict, uncontrolled or pulsed:<sequences per unit time>"),
        "coupling_range": _p("int", 3), "boundary": BOUNDARY},
    "itebd-energy": {
        "lambda": _p("floats", [0.0]), "b": _p("floats", [0.5, 1.0, 2.0]), "chi": _p("int", 32),
        "dtau_schedule": DTAU, "energy_tol": _p("float", 1e-9)},
    "d2e-scan": {
        "n": _p("int", 40), "lambda": _p("float", 0.0), "b_min": _p("float", 0.5),
        "b_max": _p("float", 1.5), "coarse_step": _p("float", 0.05), "fine_step": _p("float", 0.01),
        "two_pass": _p("bool", True), "chi": _p("int", 32), "dtau_schedule": DTAU,
        "energy_tol": _p("float", 1e-8), "threshold": _p("float", 3.0)},
    "phase-diagram": {
        "n": _p("int", 40), "lambda": _p("floats", [0.0, 0.1, 0.2, 0.3, 0.4]),
        "b_min": _p("float", 0.0), "b_max": _p("float", 1.5), "b_step": _p("float", 0.05),
        "chi": _p("int", 32), "dtau_schedule": DTAU, "energy_tol": _p("float", 1e-8),
        "threshold": _p("float", 3.0), "max_points": _p("int", 2000)},
    "correlation": {
        "n": _p("int", 60), "lambda": _p("float", 0.7), "b": _p("floats", [0.2, 0.3, 0.6]),
        "chi": _p("int", 32), "max_d": _p("int", 0, help="0 means N/2 - 2"),
        "dtau_schedule": DTAU, "energy_tol": _p("float", 1e-9)},
}

EXPERIMENTS = tuple(SCHEMAS)
TOP_KEYS = {"experiment", "params", "output_path", "seed", "threads"}


@dataclass
class RunConfig:
    experiment: str
    params: dict
    output_path: str | None = None
    seed: int = 0
    threads: int = 1

    def echo(self) -> dict:
        return {"experiment": self.experiment, "params": self.params, "seed": self.seed}


class ConfigError(ParameterError):
    def __init__(self, errors):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


def validate(experiment: str, params: dict) -> dict:
    """Fill defaults and coerce types; collect every problem before raising."""
    if experiment not in SCHEMAS:
        raise ConfigError([f"unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}"])
    schema = SCHEMAS[experiment]
    errors = [f"unknown parameter {k!r} for {experiment}" for k in sorted(set(params) - set(schema))]
    out = {}
    for name, spec in schema.items():
        value = params.get(name, spec.default)
        if value is None:
            errors.append(f"{name}: required")
            continue
        coerced = _coerce(name, spec, value, errors)
        if coerced is not None:
            out[name] = coerced
    if errors:
        raise ConfigError(errors)
    return out


def load_config(path, experiment: str | None = None) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ConfigError(["config must be a JSON object"])
    errors = [f"unknown config key {k!r}" for k in sorted(set(data) - TOP_KEYS)]
    exp = data.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        errors.append(f"config is for {exp!r}, not {experiment!r}")
    params = data.get("params", {})
    if not isinstance(params, dict):
        errors.append("params must be an object")
        params = {}
    if errors:
        raise ConfigError(errors)
    return RunConfig(exp, params, data.get("output_path"), data.get("seed", 0), data.get("threads", 1))


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn: Callable, tasks: list, workers: int) -> list:
    """Ordered map, in worker processes when ``workers > 1``."""
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def _guard(fn, task):
    """Run one grid point; numerical failures become an error record."""
    try:
        return fn(task), None
    except (JJASimError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


# --- results ----------------------------------------------------------------

@dataclass
class Result:
    header: list
    rows: list
    metadata: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    summary: list = field(default_factory=list)
    comment: dict | None = None


# --- experiments ------------------------------------------------------------

def run_invert_check(p, cfg) -> Result:
    from .circuit import inverse_residual
    rows, fails = [], []
    worst = 0.0
    for beta in p["beta"]:
        for n in p["n"]:
            res = inverse_residual(beta, n)
            worst = max(worst, res)
            ok = res < p["tol"]
            rows.append((beta, n, res, ok))
            if not ok:
                fails.append({"beta": beta, "n": n, "error": f"residual {res:.3e} >= {p['tol']:g}"})
    return Result(["beta", "N", "residual", "pass"], rows, {"max_residual": worst}, fails,
                  [f"max residual {worst:.3e} (tolerance {p['tol']:g})"])


def run_reduce(p, cfg) -> Result:
    from .circuit import CircuitParams, reduce
    def scalar(v):
        return v[0] if len(v) == 1 else v
    params = CircuitParams(p["n_sites"], p["c_junction"], scalar(p["c_gate"]), p["c_coupling"],
                           p["josephson_energy"], scalar(p["gate_charge"]))
    red = reduce(params, p["beta_max"])
    data = json.loads(red.to_json())
    header = sorted(data)
    return Result(header, [tuple(data[k] for k in header)], {"reduced": data}, [], [red.to_json()])


def run_spectrum(p, cfg) -> Result:
    from .exact import ground_state
    from .spinops import build_annni_hamiltonian, build_jja_hamiltonian
    if p["max_range"] == 2:
        op = build_annni_hamiltonian(p["n"], p["lambda"], p["b"], p["boundary"])
    else:
        op = build_jja_hamiltonian(p["n"], p["lambda"], p["b"], p["max_range"], p["boundary"])
    res = ground_state(op, n_eigs=p["n_eigs"])
    rows = [(i, float(e)) for i, e in enumerate(res.eigenvalues[:p["n_eigs"]])]
    meta = {"ground_energy": res.energy, "gap": res.gap, "degenerate": res.degeneracy_flag,
            "degeneracy": res.degeneracy}
    return Result(["index", "energy"], rows, meta, [], [f"E_g = {res.energy!r}, gap = {res.gap!r}"])


def run_phase_probabilities(p, cfg) -> Result:
    from .exact import phase_probability_grid
    lams = np.linspace(p["lambda_min"], p["lambda_max"], p["lambda_points"])
    bs = np.linspace(p["b_min"], p["b_max"], p["b_points"])
    tasks = [(p["n"], float(lam), bs, p["boundary"]) for lam in lams]
    out = pmap(_phase_prob_row, tasks, cfg.threads)
    rows, fails = [], []
    for (lam_rows, err), task in zip(out, tasks):
        if err:
            fails.append({"lambda": task[1], "error": err})
        else:
            rows.extend(lam_rows)
    return Result(["N", "lambda", "B", "E_g", "gap", "P_FM", "P_PM", "P_AP"], rows, {}, fails,
                  [f"{len(rows)} grid points"])


def _phase_prob_row(task):
    from .exact import phase_probability_grid
    n, lam, bs, boundary = task
    return _guard(lambda t: phase_probability_grid(n, [lam], bs, boundary), task)


def run_leakage(p, cfg) -> Result:
    from .exact import escape_probability_exact, escape_probability_perturbative, leakage_gap
    import warnings
    rows, fails = [], []
    for n in p["n"]:
        for b in p["b"]:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                pert = escape_probability_perturbative(p["lambda"], b, n)
            exact = math.nan
            if p["local_dim"] ** n <= p["exact_max_dim"]:
                val, err = _guard(lambda _: escape_probability_exact(
                    n, p["lambda"], b, p["local_dim"], p["boundary"], p["reference"]), None)
                if err:
                    fails.append({"n": n, "b": b, "error": err})
                else:
                    exact = val
            ratio = exact / pert if pert > 0 and not math.isnan(exact) else math.nan
            rows.append((n, p["lambda"], b, leakage_gap(p["lambda"]), pert, exact, ratio))
    return Result(["N", "lambda", "B", "delta_E", "P_esc_perturbative", "P_esc_exact", "ratio"], rows,
                  {}, fails, [f"{len(rows)} points"])


def _factor_label(factors) -> str:
    return " ".join(f"{a}{s}" for s, a in factors)


def run_dd_verify(p, cfg) -> Result:
    from .dd import effective_hamiltonian, rescaled_annni_hamiltonian, schedule_range3
    from .spinops import build_jja_hamiltonian
    n = p["n"]
    full = build_jja_hamiltonian(n, p["lambda"], p["b"], p["coupling_range"], p["boundary"]).simplify()
    sched = schedule_range3(n, p["boundary"])
    eff = effective_hamiltonian(full, sched)
    target = rescaled_annni_hamiltonian(n, p["lambda"], p["b"], p["boundary"]).simplify()
    keys = list(dict.fromkeys([t.factors for t in full.terms] + [t.factors for t in target.terms]))
    rows, fails = [], []
    for f in keys:
        c_full, c_eff, c_tgt = full.coefficient(f), eff.coefficient(f), target.coefficient(f)
        ok = abs(c_eff - c_tgt) <= p["tol"]
        rows.append((_factor_label(f), c_full, c_eff, c_tgt, ok))
        if not ok:
            fails.append({"term": _factor_label(f), "error": f"effective {c_eff!r} != target {c_tgt!r}"})
    summary = [f"{'term':<12}{'H_full':>12}{'H_eff':>12}{'target':>12}"]
    summary += [f"{r[0]:<12}{r[1]:>12.6g}{r[2]:>12.6g}{r[3]:>12.6g}{'' if r[4] else '  MISMATCH'}" for r in rows]
    summary.append("effective Hamiltonian equals the rescaled ANNNI chain" if not fails
                   else f"{len(fails)} mismatching terms")
    return Result(["term", "coeff_full", "coeff_effective", "coeff_target", "match"], rows,
                  {"schedule": json.loads(sched.to_json())}, fails, summary)


def run_dd_fidelity(p, cfg) -> Result:
    from .dd import convergence_order, dd_fidelity_curve
    series = dd_fidelity_curve(p["n"], p["lambda"], p["b"], p["coupling_range"], p["total_time"],
                               p["m"], p["boundary"])
    meta = {"params": series.params}
    if len(series.m_values) >= 2:
        meta["convergence_order"] = convergence_order(series.m_values, series.fidelities)
    summary = [f"m={m}: F={f:.6f}" for m, f in zip(series.m_values, series.fidelities)]
    return Result(["N", "lambda", "B", "R", "T", "m", "fidelity"], series.rows(), meta, [], summary)


def _parse_mode(text: str):
    if text in ("strict", "uncontrolled"):
        return text, 4.0
    if text.startswith("pulsed:"):
        try:
            return "pulsed", float(text.split(":", 1)[1])
        except ValueError:
            pass
    raise ParameterError(f"bad sweep mode {text!r}; use strict, uncontrolled or pulsed:<k>")


def _sweep_task(task):
    from .dd import adiabatic_sweep
    p, mode_text = task
    mode, spu = _parse_mode(mode_text)
    return _guard(lambda _: adiabatic_sweep(p["n"], p["lambda"], p["velocity"], p["b_max"], mode, spu,
                                            p["coupling_range"], p["b_step"], p["dt"], p["boundary"]), None)


def run_sweep(p, cfg) -> Result:
    for m in p["modes"]:
        _parse_mode(m)
    out = pmap(_sweep_task, [(p, m) for m in p["modes"]], cfg.threads)
    rows, fails = [], []
    for mode_text, (curve, err) in zip(p["modes"], out):
        if err:
            fails.append({"mode": mode_text, "error": err})
            continue
        rows.extend((mode_text, b, pf) for b, pf in curve)
    return Result(["mode", "B", "P_FM"], rows, {}, fails, [f"{len(p['modes'])} sweeps"])


def _itebd_task(task):
    from .tebd import ground_state_itebd
    lam, b, p = task
    def go(_):
        r = ground_state_itebd(lam, b, p["chi"], p["dtau_schedule"], p["energy_tol"])
        return (lam, b, p["chi"], r.energy, r.trotter_energy, r.steps, r.discarded)
    return _guard(go, None)


def _tebd_comment(p, extra=None) -> dict:
    c = {"chi": p["chi"], "dtau_schedule": p["dtau_schedule"], "energy_tol": p["energy_tol"],
         "trotter_order": 2, "artifact_version": __version__}
    c.update(extra or {})
    return c


def run_itebd_energy(p, cfg) -> Result:
    tasks = [(lam, b, p) for lam in p["lambda"] for b in p["b"]]
    out = pmap(_itebd_task, tasks, cfg.threads)
    rows, fails = [], []
    for (lam, b, _), (row, err) in zip(tasks, out):
        if err:
            fails.append({"lambda": lam, "b": b, "error": err})
        else:
            rows.append(row)
    header = ["lambda", "B", "chi", "energy_per_site", "trotter_energy_per_site", "steps", "discarded_weight"]
    disc = float(sum(r[-1] for r in rows))
    return Result(header, rows, {}, fails, [f"{len(rows)} points"],
                  _tebd_comment(p, {"engine": "itebd", "unit_cell": 4, "discarded_weight": disc}))


SCAN_HEADER = ["lambda", "B", "N", "chi", "E_g", "d2E_dB2", "n_dips", "B_c_main", "pass"]


def run_d2e_scan(p, cfg) -> Result:
    from .tebd import second_derivative_scan, two_pass_scan
    kw = dict(dtau_schedule=p["dtau_schedule"], energy_tol=p["energy_tol"], threshold=p["threshold"])
    if p["two_pass"]:
        scan = two_pass_scan(p["n"], p["lambda"], p["b_min"], p["b_max"], p["chi"], p["coarse_step"],
                             p["fine_step"], **kw)
        curves = [("coarse", scan.coarse)] + [(f"fine{i}", c) for i, c in enumerate(scan.fine)]
        b_c = scan.b_c_main
    else:
        count = int(round((p["b_max"] - p["b_min"]) / p["coarse_step"]))
        grid = p["b_min"] + p["coarse_step"] * np.arange(count + 1)
        curve = second_derivative_scan(p["n"], p["lambda"], grid, p["chi"], **kw)
        curves = [("coarse", curve)]
        b_c = curve.main_dip.b_c if curve.main_dip else math.nan
    rows = [r + (tag,) for tag, c in curves for r in c.rows()]
    dips = {tag: [vars(d) for d in c.dips] for tag, c in curves}
    disc = float(sum(c.metadata["discarded_weight"] for _, c in curves))
    return Result(SCAN_HEADER, rows, {"b_c_main": b_c, "dips": dips}, [], [f"main dip at B = {b_c:.4f}"],
                  _tebd_comment(p, {"engine": "finite-tebd", "boundary": "open", "discarded_weight": disc}))


def run_phase_diagram(p, cfg) -> Result:
    from .tebd import phase_diagram
    count = int(round((p["b_max"] - p["b_min"]) / p["b_step"]))
    grid = p["b_min"] + p["b_step"] * np.arange(count + 1)
    rows_pd = phase_diagram(p["lambda"], grid, p["n"], p["chi"], workers=cfg.threads,
                            max_points=p["max_points"], dtau_schedule=p["dtau_schedule"],
                            energy_tol=p["energy_tol"], threshold=p["threshold"])
    rows, fails = [], []
    for r in rows_pd:
        if r.error:
            fails.append({"lambda": r.lam, "error": r.error})
        dip_text = ";".join(f"{d.b_c:.4f}" for d in r.dips)
        rows.append((r.lam, p["n"], p["chi"], r.b_c_main, r.n_dips, r.multi_dip, dip_text, r.error))
    return Result(["lambda", "N", "chi", "B_c_main", "n_dips", "multi_dip", "dip_positions", "error"], rows,
                  {}, fails, [f"{len(rows)} lambda values"], _tebd_comment(p, {"engine": "finite-tebd"}))


def _corr_task(task):
    from .tebd import classify_decay, correlation_mps, fit_exponential, ground_state_finite
    b, p = task
    def go(_):
        res = ground_state_finite(p["n"], p["lambda"], b, p["chi"], p["dtau_schedule"], p["energy_tol"])
        max_d = p["max_d"] or p["n"] // 2 - 2
        curve = correlation_mps(res.mps, max_d)
        slope, _, r2 = fit_exponential(curve.d, curve.c)
        info = {"B": b, "energy": res.energy, "variance": res.variance, "classification": classify_decay(curve),
                "fit_slope": slope, "fit_r2": r2, "discarded_weight": res.discarded}
        rows = [(p["lambda"], b, p["n"], int(d), float(c), float(c * c)) for d, c in zip(curve.d, curve.c)]
        return rows, info
    return _guard(go, None)


def run_correlation(p, cfg) -> Result:
    out = pmap(_corr_task, [(b, p) for b in p["b"]], cfg.threads)
    rows, fails, info = [], [], []
    for b, (val, err) in zip(p["b"], out):
        if err:
            fails.append({"b": b, "error": err})
            continue
        rows.extend(val[0])
        info.append(val[1])
    summary = [f"B={i['B']}: {i['classification']} (R^2={i['fit_r2']:.4f})" for i in info]
    return Result(["lambda", "B", "N", "d", "c_s", "c_s_sq"], rows, {"points": info}, fails, summary,
                  _tebd_comment(p, {"engine": "finite-tebd", "boundary": "open"}))


RUNNERS = {
    "invert-check": run_invert_check, "reduce": run_reduce, "spectrum": run_spectrum,
    "phase-probabilities": run_phase_probabilities, "leakage": run_leakage, "dd-verify": run_dd_verify,
    "dd-fidelity": run_dd_fidelity, "sweep": run_sweep, "itebd-energy": run_itebd_energy,
    "d2e-scan": run_d2e_scan, "phase-diagram": run_phase_diagram, "correlation": run_correlation,
}


def run(cfg: RunConfig, keep_going: bool = False, stdout=None) -> int:
    """Execute one configured experiment; return the process exit status."""
    stdout = stdout or sys.stdout
    try:
        params = validate(cfg.experiment, cfg.params)
        errors = []
        if not isinstance(cfg.threads, int) or cfg.threads < 1:
            errors.append(f"threads must be a positive integer, got {cfg.threads!r}")
        if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
            errors.append(f"seed must be an integer, got {cfg.seed!r}")
        if errors:
            raise ConfigError(errors)
        np.random.seed(cfg.seed % 2**32)
        result = RUNNERS[cfg.experiment](params, cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ParameterError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JJASimError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    cfg_echo = dict(cfg.echo(), params=params)
    meta = dict(result.metadata, config=cfg_echo, failures=result.failures, artifact_version=__version__)
    comment = None
    if result.comment is not None:
        comment = dict(result.comment, config=cfg_echo)
    for line in result.summary:
        print(line, file=stdout)
    if cfg.output_path:
        csv_path, json_path = write_outputs(cfg.output_path, cfg.experiment, result.header, result.rows,
                                            meta, comment)
        print(f"wrote {csv_path} and {json_path}", file=stdout)
    else:
        stdout.write(csv_text(result.header, result.rows, comment))
    for f in result.failures:
        print(f"point failed: {f}", file=sys.stderr)
    if result.failures and not keep_going:
        return EXIT_NUMERIC
    return EXIT_OK


# --- reproduction bundles ---------------------------------------------------

FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8")

_BUNDLE_NOTES = {
    "fig4": ("Second derivative of the ground energy for lambda = 0 and 0.2 at several chain lengths.",
             ["chi, dtau schedule, grid spacing and boundary conditions are not given; defaults are "
              "chi = 32, dtau 0.1 to 0.001, coarse 0.05 / fine 0.01 field steps, open chains.",
              "lambda 'approximately 0' is run as exactly 0."]),
    "fig5": ("Dips of d2E/dB2 at lambda = 0.7, N = 60, the phase diagram, and spin correlations at "
             "B = 0.2, 0.3, 0.6.",
             ["chi, dtau schedule and grid spacing are not given; defaults as for fig4.",
              "The phase-diagram lambda grid is a desk-scale choice."]),
    "fig6": ("Ferromagnetic and paramagnetic probabilities of the six-site ground state.",
             ["The (lambda, B) grid resolution is not given; 21 x 21 points on [0,1]^2 are used."]),
    "fig7": ("Fidelity of pulsed junction-array evolution against the ANNNI target for T = pi.",
             ["lambda and B are not given; lambda = 0.4, B = 0.2 are used.",
              "The initial state is the maximal superposition of all spins."]),
    "fig8": ("Adiabatic field ramp at lambda = 0.4, v = 0.002: strict ANNNI, pulsed with 1 and 4 "
             "sequences per unit time, and without pulses.",
             ["The time step of the piecewise-constant ramp is not given; dt = 0.05 is used."]),
}


def bundle_configs(figure: str) -> dict:
    """``{file name: config}`` for a figure's reproduction bundle."""
    if figure not in FIGURES:
        raise ConfigError([f"unknown figure {figure!r}; choose from {list(FIGURES)}"])
    def cfg(exp, out, **params):
        return {"experiment": exp, "params": params, "output_path": out, "seed": 0, "threads": 1}
    if figure == "fig4":
        return {f"d2e_lam{lam}_n{n}.json": cfg("d2e-scan", f"out/fig4/lam{lam}_n{n}", n=n, **{"lambda": lam},
                                              b_min=b0, b_max=b1)
                for lam, b0, b1 in ((0.0, 0.5, 1.5), (0.2, 0.4, 1.2)) for n in (20, 40, 60)}
    if figure == "fig5":
        return {
            "d2e_lam0.7_n60.json": cfg("d2e-scan", "out/fig5/scan", n=60, **{"lambda": 0.7}, b_min=0.0,
                                       b_max=1.0, two_pass=False, coarse_step=0.01),
            "phase_diagram.json": cfg("phase-diagram", "out/fig5/diagram", n=40,
                                      **{"lambda": [round(0.1 * i, 1) for i in range(11)]},
                                      b_min=0.0, b_max=1.5, b_step=0.05),
            "correlation.json": cfg("correlation", "out/fig5/correlation", n=60, **{"lambda": 0.7},
                                    b=[0.2, 0.3, 0.6]),
        }
    if figure == "fig6":
        return {"phase_probabilities.json": cfg("phase-probabilities", "out/fig6", n=6, lambda_points=21,
                                                         b_points=21)}
    if figure == "fig7":
        return {"dd_fidelity.json": cfg("dd-fidelity", "out/fig7", n=6, **{"lambda": 0.4}, b=0.2,
                                        coupling_range=3, total_time=math.pi, m=[1, 2, 4, 8])}
    return {"sweep.json": cfg("sweep", "out/fig8", n=6, **{"lambda": 0.4}, velocity=0.002,
                              modes=["strict", "pulsed:1", "pulsed:4", "uncontrolled"])}


def emit_reproduction_bundle(figure: str, out_dir) -> Path:
    """Write the configs regenerating ``figure`` plus a README listing substituted defaults."""
    configs = bundle_configs(figure)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, data in configs.items():
        validate(data["experiment"], data["params"])
        (out / name).write_text(json_text(data))
    what, notes = _BUNDLE_NOTES[figure]
    lines = [f"# Reproduction bundle: {figure}", "", what, "", "Run each config with:", "",
             "    python -m jjasim run <config.json>", "", "Configs:", ""]
    lines += [f"- `{name}` ({data['experiment']})" for name, data in configs.items()]
    lines += ["", "Unstated parameters and the defaults substituted:", ""]
    lines += [f"- {n}" for n in notes]
    (out / "README.md").write_text("\n".join(lines) + "\n")
    return out


# --- argument parsing -------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="JSON config file; flags override its params")
    sp.add_argument("--output", help="directory for <experiment>.csv and <experiment>.json")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None,
                    help=f"worker processes for grid scans (default ${THREADS_ENV} or 1)")
    sp.add_argument("--keep-going", action="store_true", help="exit 0 even if some points failed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jjasim", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"jjasim {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for exp, schema in SCHEMAS.items():
        sp = subs.add_parser(exp, help=f"run the {exp} experiment")
        _add_common(sp)
        for name, spec in schema.items():
            nargs = "+" if spec.kind in ("ints", "floats", "strs") else None
            sp.add_argument(f"--{name.replace('_', '-')}", dest=f"param_{name}", nargs=nargs, default=None,
                            help=f"{spec.kind}, default {spec.default!r}. {spec.help}".strip())
    rp = subs.add_parser("run", help="run a config file")
    rp.add_argument("config")
    rp.add_argument("--output")
    rp.add_argument("--threads", type=int, default=None)
    rp.add_argument("--keep-going", action="store_true")
    bp = subs.add_parser("bundle", help="write the configs that regenerate a figure")
    bp.add_argument("figure", choices=FIGURES)
    bp.add_argument("--output", required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "bundle":
            path = emit_reproduction_bundle(args.figure, args.output)
            print(f"wrote bundle to {path}")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            if args.output:
                cfg.output_path = args.output
        else:
            cfg = load_config(args.config, args.command) if args.config else RunConfig(args.command, {})
            for key, value in vars(args).items():
                if key.startswith("param_") and value is not None:
                    cfg.params[key[len("param_"):]] = value
            if args.output:
                cfg.output_path = args.output
            if args.seed is not None:
                cfg.seed = args.seed
        if args.threads is not None:
            cfg.threads = args.threads
        elif cfg.threads == 1:
            cfg.threads = default_threads()
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, keep_going=args.keep_going)


if __name__ == "__main__":
    sys.exit(main())
