"""Command-line front end.

Every command writes machine-readable output: CSV with a header row and
17 significant digits, or JSON carrying ``schema_version``. Failures print a
JSON error record on stderr and exit with 2 (validation), 3 (numerical) or
4 (I/O).
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import kernels as K
from . import sampling, shotnoise, subord, verify
from .errors import FracouError, ValidationError, require
from .fracops import TimeGrid

MODULE = "cli"
SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "FRACOU_OUTPUT_DIR"
EXIT_IO = 4

G_MODELS = {"xg": "X_g", "ybarg": "Ybar_g", "yg": "Y_g", "X_g": "X_g", "Ybar_g": "Ybar_g", "Y_g": "Y_g"}
CUSTOM_NAMES = ("stable-custom", "cpe-custom", "gamma")

# hard defaults, applied after the config file and the flags
DEFAULTS = {
    "kernel": {
        "model": "stationary", "alpha": 0.5, "gamma": 1.0, "theta": 1.0, "family": "stable", "a": 1.0,
        "custom": "gamma", "t0": 0.0, "tmax": 10.0, "steps": 100, "s": None, "time_scale": 2.0,
    },
    "spectrum": {
        "alpha": 0.5, "gamma": 1.0, "theta": 1.0, "omega": None, "omega_min": 1e-3, "omega_max": 1e2,
        "points": 41, "quad": "oscillatory",
    },
    "sample": {
        "model": "stationary", "alpha": 0.5, "gamma": 1.0, "theta": 1.0, "family": "stable", "a": 1.0,
        "custom": "gamma", "t0": 0.0, "tmax": 10.0, "steps": 16, "n_paths": 100, "seed": 0,
        "sampler": "cholesky", "threads": 1, "time_scale": 2.0,
    },
    "shotnoise": {
        "lambda0": 1.0, "alpha": 0.5, "gamma": 1.0, "xi0": 0.1, "n": "1,10,100", "t0": 0.0, "tmax": 1.0,
        "steps": 8, "n_paths": 5000, "seed": 0, "threads": 1,
    },
    "verify": {
        "suite": "fp-residual", "alpha": 0.5, "xi": 1.0, "eta": 1.0, "steps": 256, "gamma": 1.0,
        "theta": 1.0, "a": 1.0, "family": "cpe", "tmax": 1.0, "scheme": "l1-2",
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message, MODULE, parameter="argv")


def _add(p: argparse.ArgumentParser, *names, **kw):
    kw.setdefault("default", None)
    p.add_argument(*names, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fracou", description="Fractional Ornstein-Uhlenbeck kernels, samplers and checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        _add(p, "--config", help="JSON file whose keys mirror the flag names; flags win")
        _add(p, "--output", choices=("csv", "json"), help="output format")
        _add(p, "--out", help=f"output path (default: stdout, or ${OUTPUT_DIR_ENV}/<command>.<ext>)")

    def params(p):
        _add(p, "--alpha", type=float)
        _add(p, "--gamma", type=float)
        _add(p, "--theta", type=float)

    def grid(p):
        _add(p, "--t0", type=float)
        _add(p, "--tmax", type=float)
        _add(p, "--steps", type=int)

    def family(p):
        _add(p, "--family", choices=("stable", "cpe", "custom"))
        _add(p, "--a", type=float, help="CPE rate")
        _add(p, "--custom", choices=CUSTOM_NAMES, help="named built-in for --family custom")
        _add(p, "--time-scale", type=float, dest="time_scale")

    p = sub.add_parser("kernel", help="tabulate a covariance kernel to CSV")
    common(p), params(p), grid(p), family(p)
    _add(p, "--model", help="stationary, fractional_ou, time_changed_ou, time_changed_stationary_ou, xg, ybarg, yg")
    _add(p, "--s", type=float, help="fix the first time argument of a two-time kernel")

    p = sub.add_parser("spectrum", help="spectral density of the stationary kernel")
    common(p), params(p)
    _add(p, "--omega", type=float, help="single frequency")
    _add(p, "--omega-min", type=float, dest="omega_min")
    _add(p, "--omega-max", type=float, dest="omega_max")
    _add(p, "--points", type=int)
    _add(p, "--quad", choices=("oscillatory", "laplace"))

    p = sub.add_parser("sample", help="sample Gaussian paths on a grid")
    common(p), params(p), grid(p), family(p)
    _add(p, "--model")
    _add(p, "--n-paths", type=int, dest="n_paths")
    _add(p, "--seed", type=int)
    _add(p, "--sampler", choices=("cholesky", "brownian"))
    _add(p, "--threads", type=int)

    p = sub.add_parser("shotnoise", help="Poisson shot-noise convergence experiment")
    common(p), grid(p)
    _add(p, "--lambda0", type=float)
    _add(p, "--alpha", type=float)
    _add(p, "--gamma", type=float)
    _add(p, "--xi0", type=float)
    _add(p, "--n", help="comma-separated rescaling levels, e.g. 1,10,100")
    _add(p, "--n-paths", type=int, dest="n_paths")
    _add(p, "--seed", type=int)
    _add(p, "--threads", type=int, help="accepted for symmetry; the simulation is sequential per path")

    p = sub.add_parser("verify", help="run a residual or identity suite")
    common(p), params(p)
    _add(p, "--suite", choices=sorted(verify.SUITES))
    _add(p, "--xi", type=float)
    _add(p, "--eta", type=float)
    _add(p, "--steps", type=int)
    _add(p, "--a", type=float)
    _add(p, "--family", choices=("cpe", "stable"))
    _add(p, "--tmax", type=float)
    _add(p, "--scheme", choices=("l1", "l1-2"), help="memory-integral rule for the residual suites")
    return parser


def resolve(argv=None) -> dict:
    """Merge hard defaults, the JSON config file and explicit flags."""
    ns = vars(build_parser().parse_args(argv))
    cmd = ns.pop("command")
    cfg = {}
    if ns.get("config"):
        try:
            with open(ns["config"], encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise _IOError(f"cannot read config {ns['config']!r}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config is not valid JSON: {exc.msg}", MODULE, parameter="config") from exc
        require(isinstance(raw, dict), MODULE, "config", "a JSON object", type(raw).__name__)
        allowed = set(DEFAULTS[cmd]) | {"output", "out"}
        for k, v in raw.items():
            key = k.replace("-", "_")
            require(key in allowed, MODULE, "config", f"keys in {sorted(allowed)}", k)
            cfg[key] = v
    merged = dict(DEFAULTS[cmd])
    merged.update({"output": None, "out": None})
    merged.update(cfg)
    merged.update({k: v for k, v in ns.items() if v is not None and k != "config"})
    merged["command"] = cmd
    return merged


class _IOError(FracouError):
    kind = "io"
    exit_code = EXIT_IO

    def __init__(self, message):
        super().__init__(message, MODULE)


# ---------------------------------------------------------------------------
# formatting


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % (float(v) + 0.0)  # no negative zeros


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(v) for v in r) + "\n")
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj: dict) -> str:
    d = {"schema_version": SCHEMA_VERSION}
    d.update(obj)
    return json.dumps(_clean(d), indent=2, sort_keys=True) + "\n"


def _table_json(header, rows, meta) -> str:
    return to_json({**meta, "columns": list(header), "rows": [[_clean(v) for v in r] for r in rows]})


def _target(cfg, ext: str) -> Path | None:
    if cfg.get("out"):
        return Path(cfg["out"])
    d = os.environ.get(OUTPUT_DIR_ENV)
    if d:
        return Path(d) / f"{cfg['command']}.{ext}"
    return None


def _write(path: Path | None, text: str, stdout) -> None:
    if path is None:
        stdout.write(text)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise _IOError(f"cannot write {str(path)!r}: {exc.strerror}") from exc


# ---------------------------------------------------------------------------
# commands


def _grid(cfg) -> TimeGrid:
    return TimeGrid(float(cfg["t0"]), float(cfg["tmax"]), int(cfg["steps"]))


def _bernstein(cfg) -> subord.BernsteinSpec:
    fam = cfg["family"]
    if fam == "stable":
        return subord.BernsteinSpec.stable(float(cfg["alpha"]))
    if fam == "cpe":
        return subord.BernsteinSpec.cpe(float(cfg["a"]))
    require(cfg["custom"] in CUSTOM_NAMES, MODULE, "custom", f"one of {CUSTOM_NAMES}", cfg["custom"])
    return subord.builtin_custom(cfg["custom"], alpha=float(cfg["alpha"]), a=float(cfg["a"]))


def _kernel(cfg):
    model = str(cfg["model"])
    if model in G_MODELS:
        return subord.GeneralizedKernelSpec(
            G_MODELS[model], _bernstein(cfg), float(cfg["gamma"]), float(cfg["theta"]), float(cfg["time_scale"])
        )
    return K.KernelSpec(model, K.ProcessParams(float(cfg["alpha"]), float(cfg["gamma"]), float(cfg["theta"])))


def cmd_kernel(cfg):
    kern = _kernel(cfg)
    x = _grid(cfg).nodes
    meta = {"command": "kernel", "kernel": kern.describe()}
    if kern.stationary:
        lag = x - x[0]
        vals = kern(0.0, lag)
        return ("s", "value"), list(zip(lag, np.atleast_1d(vals))), meta
    if cfg["s"] is not None:
        s = float(cfg["s"])
        vals = kern(s, x)
        return ("s", "t", "value"), [(s, t, v) for t, v in zip(x, np.atleast_1d(vals))], meta
    G = kern.gram(x)
    rows = [(x[i], x[j], G[i, j]) for i in range(x.size) for j in range(x.size)]
    return ("s", "t", "value"), rows, meta


def cmd_spectrum(cfg):
    p = K.ProcessParams(float(cfg["alpha"]), float(cfg["gamma"]), float(cfg["theta"]))
    if cfg["omega"] is not None:
        om = np.array([float(cfg["omega"])])
    else:
        lo, hi, n = float(cfg["omega_min"]), float(cfg["omega_max"]), int(cfg["points"])
        require(0 < lo < hi, MODULE, "omega_min", "0 < omega_min < omega_max", lo)
        require(n >= 2, MODULE, "points", "points >= 2", n)
        om = np.logspace(math.log10(lo), math.log10(hi), n)
    vals = [K.spectral_density(float(w), p, quad=cfg["quad"]) for w in om]
    meta = {"command": "spectrum", "params": {"alpha": p.alpha, "gamma": p.gamma, "theta": p.theta}, "quad": cfg["quad"]}
    return ("omega", "value"), list(zip(om, vals)), meta


def cmd_sample(cfg):
    kern = _kernel(cfg)
    grid = _grid(cfg)
    n_paths, seed, threads = int(cfg["n_paths"]), int(cfg["seed"]), int(cfg["threads"])
    require(threads >= 1, MODULE, "threads", "threads >= 1", threads)
    if cfg["sampler"] == "brownian":
        sp = sampling.sample_brownian_rep(kern, grid, n_paths, seed, workers=threads)
    else:
        sp = sampling.sample_gaussian(kern, grid, n_paths, seed, workers=threads)
    header = ("t",) + tuple(f"path_{i}" for i in range(sp.n_paths))
    rows = [(t,) + tuple(sp.paths[:, k]) for k, t in enumerate(sp.times)]
    meta = {"command": "sample", "seed": seed, "n_paths": n_paths, "kernel": kern.describe(), **sp.meta}
    return header, rows, meta


def _levels(v) -> list[int]:
    if isinstance(v, (list, tuple)):
        items = list(v)
    else:
        items = [s for s in str(v).split(",") if s.strip()]
    try:
        out = [int(s) for s in items]
    except ValueError as exc:
        raise ValidationError(f"n must be a comma-separated list of integers (got {v!r})", MODULE, parameter="n") from exc
    require(len(out) >= 1, MODULE, "n", "at least one level", v)
    return out


def cmd_shotnoise(cfg):
    base = shotnoise.ShotNoiseSpec(float(cfg["lambda0"]), float(cfg["alpha"]), float(cfg["gamma"]), float(cfg["xi0"]))
    specs = [base.with_n(n) for n in _levels(cfg["n"])]
    grid = _grid(cfg)
    rep = shotnoise.convergence_report(specs, grid, int(cfg["n_paths"]), int(cfg["seed"]))
    rows = []
    for r in rep["rows"]:
        for k, t in enumerate(grid.nodes):
            rows.append((r["n"], k, t, r["mean"][k], r["var"][k], r["var_theory"][k]))
    header = ("n", "node", "t", "mean", "var", "var_theory")
    rep = {"command": "shotnoise", "spec": base.describe(), **rep}
    return header, rows, rep


def run(cfg: dict, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    cmd = cfg["command"]
    if cmd == "verify":
        kw = _verify_kwargs(cfg)
        report = verify.run_suite(cfg["suite"], **kw)
        # timing would break byte-identical reruns
        report.pop("elapsed_s", None)
        _write(_target(cfg, "json"), to_json({"command": "verify", **report}), stdout)
        return 0
    handler = {"kernel": cmd_kernel, "spectrum": cmd_spectrum, "sample": cmd_sample, "shotnoise": cmd_shotnoise}[cmd]
    header, rows, meta = handler(cfg)
    fmt = cfg.get("output") or "csv"
    if fmt == "json":
        _write(_target(cfg, "json"), _table_json(header, rows, meta), stdout)
        return 0
    target = _target(cfg, "csv")
    _write(target, to_csv(header, rows), stdout)
    if target is not None and cmd in ("sample", "shotnoise"):
        _write(target.with_suffix(".json"), to_json(meta), stdout)
    return 0


def _verify_kwargs(cfg) -> dict:
    s = cfg["suite"]
    if s == "fp-residual":
        return dict(
            alpha=float(cfg["alpha"]), xi=float(cfg["xi"]), steps=int(cfg["steps"]), gamma=float(cfg["gamma"]),
            theta=float(cfg["theta"]), t_max=float(cfg["tmax"]), scheme=cfg["scheme"],
        )
    if s == "cgf-residual":
        return dict(
            alpha=float(cfg["alpha"]), eta=float(cfg["eta"]), steps=int(cfg["steps"]), gamma=float(cfg["gamma"]),
            theta=float(cfg["theta"]), t_max=float(cfg["tmax"]), scheme=cfg["scheme"],
        )
    if s == "gfp-residual":
        return dict(
            family=cfg["family"], xi=float(cfg["xi"]), steps=int(cfg["steps"]), gamma=float(cfg["gamma"]),
            theta=float(cfg["theta"]), a=float(cfg["a"]), alpha=float(cfg["alpha"]), t_max=float(cfg["tmax"]),
            scheme=cfg["scheme"],
        )
    if s == "ivp-residual":
        return dict(a=float(cfg["a"]), gamma=float(cfg["gamma"]), steps=int(cfg["steps"]), t_max=float(cfg["tmax"]), scheme=cfg["scheme"])
    if s == "markov":
        return dict(alpha=float(cfg["alpha"]), gamma=float(cfg["gamma"]), theta=float(cfg["theta"]))
    return {}


def main(argv=None) -> int:
    try:
        cfg = resolve(argv)
        return run(cfg)
    except FracouError as exc:
        sys.stderr.write(json.dumps({"error": exc.to_record()}) + "\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": {"code": "cli.io", "module": MODULE, "message": str(exc)}}) + "\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
