"""
Command line driver.

    momex run CONFIG.json [--out DIR] [--threads N] [--seedless-check]

A config is a JSON object with the keys ``kind``, ``model``, ``numerics`` and
``output``.  ``kind`` picks one of the experiment suites below; every suite
writes CSV files named after ``output`` into the output directory and prints
a short summary.  Exit codes: 0 success, 2 bad config, 3 numerical
divergence, 4 I/O failure, 1 when ``--seedless-check`` finds two runs that
differ.
"""
import argparse
import filecmp
from contextlib import nullcontext
import json
import os
import sys
import tempfile
import time

import jsonschema
import numpy as np

from . import _accel
from .correlation import (
    RHO, SteadyStateCache, auto_truncation, correlate_p_osc, correlate_target, power_spectrum,
    steady_state_chi, steady_state_rho,
)
from .errors import ConfigError, DivergenceError
from .experiments import accuracy_fock, accuracy_position, bench_optomech, condition_curve, initial_state
from .moments import dof_chi, dof_rho
from .optomech import OptomechParams, build_model, thermal_state, x_mec
from .oracle import OracleSpec, eig_condition_liouvillian, eig_condition_mbar
from .position import PositionGrid

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}
_PAIR = {"type": "array", "items": _INT, "minItems": 2, "maxItems": 2}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


OPTOMECH_MODEL = _obj({
    "type": {"const": "optomech"},
    "kappa": _POS, "gamma": _NUM, "omega_m": _NUM, "n_th": _NUM, "g_lin": _NUM, "g_quad": _NUM,
}, ["type"])

TWO_LEVEL_MODEL = _obj({
    "type": {"const": "two_level"},
    "u": _NUM, "g": _NUM, "kappa": _POS,
    "initial": {"oneOf": [{"enum": ["A", "B"]},
                          {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}]},
}, ["type", "u", "g"])

OMEGAS = _obj({"start": _NUM, "stop": _NUM, "step": _POS}, ["start", "stop", "step"])
OBSERVABLE_LIST = {"type": "array", "items": {"enum": ["X_mec", "P_osc"]}, "minItems": 1, "uniqueItems": True}
METHOD_RC = {"enum": ["rho", "chi"]}

NUMERICS = {
    "correlate": _obj({"method": METHOD_RC, "n_osc": _INT, "n_mec": _INT, "dt": _POS, "t_max": _POS,
                       "t_ss": _POS, "observables": OBSERVABLE_LIST},
                      ["method", "n_osc", "n_mec"]),
    "spectrum": _obj({"method": METHOD_RC, "n_osc": _INT, "n_mec": _INT, "dt": _POS, "t_max": _POS,
                      "t_ss": _POS, "observables": OBSERVABLE_LIST, "omegas": OMEGAS},
                     ["method", "n_osc", "n_mec"]),
    "accuracy": _obj({
        "method": {"enum": ["chi", "position"]},
        "n_tr": {"type": "array", "items": _INT, "minItems": 1},
        "grid": _obj({"x_min": _NUM, "x_max": _NUM, "dx": _POS, "closed": {"type": "boolean"}},
                     ["x_min", "x_max", "dx"]),
        "integrator": {"enum": ["expm", "rk4"]},
        "mode": {"enum": ["step", "direct"]},
        "t_max": _POS, "sample_dt": _POS, "dt": _POS,
    }, ["method"]),
    "truncation": _obj({"method": METHOD_RC, "tol": _POS, "start": _INT, "step": _INT, "cap": _INT,
                        "t_ss": _POS, "dt": _POS, "observables": OBSERVABLE_LIST}, ["method"]),
    "condition": _obj({"u_values": {"type": "array", "items": _NUM, "minItems": 1},
                       "kappa": _POS, "n_tr": {"type": "integer", "minimum": 1, "maximum": 120},
                       "t_values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                       "liouvillian_n_tr": _INT}, ["u_values", "t_values"]),
    "bench": _obj({"n_rho": _PAIR, "n_chi": _PAIR, "steps": _INT, "repeats": _INT, "dt": _POS},
                  ["n_rho", "n_chi"]),
}

MODEL_FOR_KIND = {
    "correlate": OPTOMECH_MODEL, "spectrum": OPTOMECH_MODEL, "truncation": OPTOMECH_MODEL,
    "bench": OPTOMECH_MODEL, "accuracy": TWO_LEVEL_MODEL,
    "condition": _obj({"type": {"const": "two_level"}}, ["type"]),
}

TOP = _obj({
    "kind": {"enum": sorted(NUMERICS)},
    "model": {"type": "object"},
    "numerics": {"type": "object"},
    "output": {"type": "string", "minLength": 1, "pattern": "^[A-Za-z0-9_.-]+$"},
}, ["kind", "model", "numerics", "output"])


def _where(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return f"at '{path}'" if path else "at top level"


def _validate(instance, schema):
    try:
        jsonschema.validate(instance, schema)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"{err.message} {_where(err)}") from None


def load_config(path):
    """Parse and validate a config file; raises :class:`ConfigError` on any problem."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    _validate(cfg, TOP)
    kind = cfg["kind"]
    try:
        _validate(cfg["model"], MODEL_FOR_KIND[kind])
        _validate(cfg["numerics"], NUMERICS[kind])
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None
    if kind == "accuracy":
        num = cfg["numerics"]
        need = "n_tr" if num["method"] == "chi" else "grid"
        if need not in num:
            raise ConfigError(f"{path}: accuracy with method '{num['method']}' needs numerics/{need}")
        if num.get("integrator") == "rk4" and num["method"] == "chi" and "dt" not in num:
            raise ConfigError(f"{path}: rk4 in the Fock basis needs numerics/dt")
    return cfg


def emit_csv(path, header, rows):
    """Write ``rows`` under ``header`` with 17 significant digits for floats."""
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def series_rows(series):
    return [(t, c.real, c.imag) for t, c in zip(series.times, series.values)]


def _optomech_params(model, n_mec=30):
    kw = {k: v for k, v in model.items() if k != "type"}
    return OptomechParams(n_mec=n_mec, **kw)


def _correlations(cfg):
    num = cfg["numerics"]
    method = num["method"]
    p = _optomech_params(cfg["model"], num["n_mec"])
    spec = build_model(p)
    r0 = thermal_state(p.omega_m, p.n_th, p.n_mec)
    dt, t_max, t_ss = num.get("dt", 0.02), num.get("t_max", 150.0), num.get("t_ss", 50.0)
    obs = num.get("observables", ["X_mec", "P_osc"])
    n_osc = num["n_osc"]
    if method == RHO:
        ss = steady_state_rho(spec, r0, n_osc, t_ss, dt)
        dof = dof_rho(n_osc, p.n_mec)
    else:
        ss = steady_state_chi(spec, r0, n_osc, 3 if "P_osc" in obs else 1, t_ss, dt)
        dof = dof_chi(n_osc, p.n_mec, ss.state.shape[1])
    out = {}
    for name in obs:
        if name == "X_mec":
            out[name] = correlate_target(spec, x_mec(p.n_mec), t_max, dt, method, steady=ss)
        else:
            out[name] = correlate_p_osc(spec, t_max, dt, method, steady=ss)
    return out, {"dof": dof, "steady_residual": ss.residual}


def run_correlate(cfg, out_dir):
    series, info = _correlations(cfg)
    files = []
    for name, s in series.items():
        path = os.path.join(out_dir, f"{cfg['output']}_{name}.csv")
        emit_csv(path, ("t", "re", "im"), series_rows(s))
        files.append(path)
    return files, info


def run_spectrum(cfg, out_dir):
    series, info = _correlations(cfg)
    om = cfg["numerics"].get("omegas")
    omegas = None if om is None else np.round(np.arange(om["start"], om["stop"] + om["step"] / 2, om["step"]), 12)
    files = []
    for name, s in series.items():
        spec = power_spectrum(s, omegas)
        path = os.path.join(out_dir, f"{cfg['output']}_{name}.csv")
        emit_csv(path, ("omega", "S"), zip(spec.omegas, spec.values))
        files.append(path)
    return files, info


def run_accuracy(cfg, out_dir):
    model, num = cfg["model"], cfg["numerics"]
    rho0 = initial_state(model.get("initial", "A"))
    t_max, sample = num.get("t_max", 10.0), num.get("sample_dt", 0.1)
    times = np.round(np.arange(0.0, t_max + sample / 2, sample), 12)
    integ, mode = num.get("integrator", "expm"), num.get("mode", "step")
    kw = dict(kappa=model.get("kappa", 1.0), integrator=integ, mode=mode, dt=num.get("dt"))
    runs = {}
    if num["method"] == "chi":
        for n in num["n_tr"]:
            runs[f"err_N{n}"] = accuracy_fock(model["u"], model["g"], n, rho0, times, **kw)
    else:
        g = num["grid"]
        grid = (PositionGrid.symmetric(max(-g["x_min"], g["x_max"]), g["dx"]) if g.get("closed", True)
                else PositionGrid.half_open(g["x_min"], g["x_max"], g["dx"]))
        runs[f"err_Nx{grid.n_x}"] = accuracy_position(model["u"], model["g"], grid, rho0, times, **kw)
    path = os.path.join(out_dir, f"{cfg['output']}.csv")
    cols = list(runs)
    emit_csv(path, ["t"] + cols, zip(times, *(runs[c].errors for c in cols)))
    info = {c: {"floor": r.floor(), "diverged_at": None if r.diverged_at is None else float(r.diverged_at),
                "dof": r.dof} for c, r in runs.items()}
    return [path], info


def run_truncation(cfg, out_dir):
    num = cfg["numerics"]
    p = _optomech_params(cfg["model"])
    res = auto_truncation(p, num["method"], tuple(num.get("observables", ("X_mec", "P_osc"))),
                          num.get("tol", 1e-4), num.get("start", 3), num.get("step", 3), num.get("cap", 60),
                          SteadyStateCache(), num.get("t_ss", 50.0), num.get("dt", 0.02))
    path = os.path.join(out_dir, f"{cfg['output']}.csv")
    emit_csv(path, ("n_osc", "n_mec", "delta_osc", "delta_mec"), res.history)
    return [path], {"method": num["method"], "n_osc": res.n_osc, "n_mec": res.n_mec}


def run_condition(cfg, out_dir):
    num = cfg["numerics"]
    kappa = num.get("kappa", 1.0)
    ts = np.asarray(num["t_values"], dtype=float)
    cols = {f"cond_u{u:g}": condition_curve(u, ts, num.get("n_tr", 40), kappa) for u in num["u_values"]}
    path = os.path.join(out_dir, f"{cfg['output']}.csv")
    emit_csv(path, ["t"] + list(cols), zip(ts, *cols.values()))
    info = {f"eig_cond_mbar_u{u:g}": eig_condition_mbar(OracleSpec(kappa, u, None, 2)) for u in num["u_values"]}
    n = num.get("liouvillian_n_tr", 100)
    info[f"eig_cond_liouvillian_N{n}"] = eig_condition_liouvillian(n)
    return [path], info


def run_bench(cfg, out_dir):
    num = cfg["numerics"]
    p = _optomech_params(cfg["model"])
    with _accel.set_num_threads(1) or nullcontext():
        rows = bench_optomech(p, tuple(num["n_rho"]), tuple(num["n_chi"]), num.get("steps", 100),
                              num.get("dt", 0.02), num.get("repeats", 5))
    path = os.path.join(out_dir, f"{cfg['output']}.csv")
    emit_csv(path, ("method", "n_osc", "n_mec", "dof", "seconds"),
             [(r.method, r.n_osc, r.n_mec, r.dof, r.seconds) for r in rows])
    return [path], {r.method: r.seconds for r in rows}


RUNNERS = {
    "correlate": run_correlate, "spectrum": run_spectrum, "accuracy": run_accuracy,
    "truncation": run_truncation, "condition": run_condition, "bench": run_bench,
}


def run(config_path, out_dir=".", quiet=False):
    """Run one experiment; returns the list of files written."""
    cfg = load_config(config_path)
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    files, info = RUNNERS[cfg["kind"]](cfg, out_dir)
    if not quiet:
        print(f"kind: {cfg['kind']}")
        for k, v in info.items():
            print(f"  {k}: {v}")
        print(f"  wall time: {time.perf_counter() - t0:.2f} s")
        for f in files:
            print(f"  wrote {f}")
    return files


def _seedless_check(config_path):
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        fa = run(config_path, a, quiet=True)
        fb = run(config_path, b, quiet=True)
        names = [os.path.basename(f) for f in fa]
        if names != [os.path.basename(f) for f in fb]:
            return False
        return all(filecmp.cmp(os.path.join(a, n), os.path.join(b, n), shallow=False) for n in names)


def main(argv=None):
    parser = argparse.ArgumentParser(prog="momex", description=__doc__.split("\n\n")[0].strip())
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the experiment described by a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=".", help="output directory (default: current directory)")
    p_run.add_argument("--threads", type=int, default=None, help="thread count for compiled kernels and BLAS")
    p_run.add_argument("--seedless-check", action="store_true",
                       help="run twice and verify the CSV outputs are byte-identical")
    args = parser.parse_args(argv)
    if args.threads is not None:
        _accel.set_num_threads(args.threads)
    try:
        if args.seedless_check and not _seedless_check(args.config):
            print("determinism check failed: outputs of two runs differ", file=sys.stderr)
            return EXIT_MISMATCH
        run(args.config, args.out)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as err:
        print(f"numerical divergence at step {err.step}: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
