"""Command-line front end: ``airy-ldp {rate,vstar,spectrum,validate,estimate,scan}``.

Option values come from, in decreasing precedence: command-line flags, a JSON
file given with ``--config``, then built-in defaults. Tables go to ``--out``
(or stdout); the one-line summary goes to stderr. Exit codes: 0 success,
2 reliability flags or failed checks, 1 usage or runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .brownian import PathGrid, sample_path, write_path_csv
from .estimator import (EstimatorConfig, Mode, Quadrature, convergence_scan, default_threads, estimate)
from .rate import ModelParams, phi, scaled_rate, v_star
from .riccati import RiccatiConfig, required_length, solve_riccati, write_traces_csv
from .validate import SUITES, run_suite

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2

ESTIMATE_COLUMNS = ["t", "alpha", "beta", "L", "zeta", "mode", "n", "log_G", "t2_log_G", "stderr", "ess", "target"]

DEFAULTS = {
    "beta": 2.0, "L": 1.0, "zeta": 1.0, "t": 1.0, "t_list": "1,2,4", "alpha": 1.0 / 6.0, "n": 1000,
    "mode": "tilted", "seed": None, "threads": None, "out": None, "format": "csv", "suite": "all",
    "zeta_grid": "0:2:0.1", "z_grid": None, "x_grid": None, "lambda_lo": None, "lambda_hi": None,
    "n_lambda": 11, "h": None, "dump_paths": None,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` inclusive of ``hi`` (up to rounding)."""
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise UsageError(f"grid must look like lo:hi:step, got {text!r}") from None
    if not step > 0 or hi < lo:
        raise UsageError(f"grid needs step > 0 and hi >= lo, got {text!r}")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _parse_t_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--t-list must be comma-separated numbers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    # default=None everywhere so the config file can fill unspecified flags
    options = {
        "beta": dict(type=float, help="inverse temperature beta > 0 (default 2)"),
        "L": dict(type=float, help="moment parameter L > 0 (default 1)"),
        "zeta": dict(type=float, help="threshold zeta > 0 (default 1)"),
        "t": dict(type=float, help="time parameter t > 0 (default 1)"),
        "t-list": dict(help="comma-separated increasing t values (default 1,2,4)"),
        "alpha": dict(type=float, help="partition exponent in (-1/3, 2/3) (default 1/6)"),
        "n": dict(type=int, help="Monte Carlo samples, integer >= 1 (default 1000)"),
        "mode": dict(help="plain | tilted (default tilted)"),
        "seed": dict(type=int, help="integer seed (default $AIRY_LDP_SEED or 0)"),
        "threads": dict(type=int, help="worker threads >= 1 (default: available CPUs)"),
        "h": dict(type=float, help="grid step > 0 (default 0.01 for SAO paths)"),
        "lambda-lo": dict(type=float, help="lower end of the lambda window, real"),
        "lambda-hi": dict(type=float, help="upper end of the lambda window, real"),
    }
    for name in names:
        p.add_argument(f"--{name}", default=None, **options[name])


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="airy-ldp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--config", default=None, help="JSON file of option values; flags override it")
        p.add_argument("--out", default=None, help="output file path (default stdout)")
        p.add_argument("--format", default=None, help="csv | json (default csv; validate always writes json)")
        return p

    p = add("rate", "scaled rate over a zeta grid, or Phi over a z grid")
    _common(p, "beta", "L")
    p.add_argument("--zeta-grid", default=None, help="lo:hi:step with zeta > 0 entries used (default 0:2:0.1)")
    p.add_argument("--z-grid", default=None, help="lo:hi:step of z <= 0, written --z-grid=-2:0:0.1; emits (z, Phi(z)) instead")

    p = add("vstar", "optimal control profile v_star(x)")
    _common(p, "beta", "L", "zeta")
    p.add_argument("--x-grid", default=None, help="lo:hi:step of x >= 0 (default 0:zeta:zeta/100)")

    p = add("spectrum", "Riccati explosion traces of one SAO sample on a lambda grid")
    _common(p, "beta", "seed", "h", "lambda-lo", "lambda-hi")
    p.add_argument("--n-lambda", type=int, default=None, help="number of lambda values >= 1 (default 11)")
    p.add_argument("--dump-paths", default=None, help="also write the sampled path as CSV to this file")

    p = add("validate", "run invariant suites and report margins as JSON")
    _common(p, "seed")
    p.add_argument("--suite", default=None, help=f"one of {', '.join(SUITES)}, all (default all)")

    p = add("estimate", "Monte Carlo estimate of the exponential moment at one t")
    _common(p, "beta", "L", "zeta", "t", "alpha", "n", "mode", "seed", "threads", "h", "lambda-lo", "lambda-hi")

    p = add("scan", "tilted estimates over an increasing list of t")
    _common(p, "beta", "L", "zeta", "t-list", "alpha", "n", "seed", "threads", "h", "lambda-lo", "lambda-hi")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge built-in defaults, the JSON config file and explicit flags."""
    opts = dict(DEFAULTS)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        opts.update(loaded)
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            opts[k] = v
    if opts["seed"] is None:
        env = os.environ.get("AIRY_LDP_SEED")
        try:
            opts["seed"] = int(env) if env not in (None, "") else 0
        except ValueError:
            raise UsageError(f"AIRY_LDP_SEED must be an integer, got {env!r}") from None
    if opts["threads"] is None:
        opts["threads"] = default_threads()
    if opts["format"] not in ("csv", "json"):
        raise UsageError(f"--format must be csv or json, got {opts['format']!r}")
    return opts


def _params(o: dict) -> ModelParams:
    return ModelParams(float(o["beta"]), float(o["L"]), float(o["zeta"]))


def _emit(o: dict, header: list[str], rows: list[list], extra: dict | None = None) -> None:
    if o["format"] == "json":
        payload = {"columns": header, "rows": [[_json_num(v) for v in r] for r in rows], **(extra or {})}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        text = buf.getvalue()
    _write(o, text)


def _json_num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write(o: dict, text: str) -> None:
    if o["out"]:
        try:
            Path(o["out"]).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write {o['out']}: {exc}") from None
    else:
        sys.stdout.write(text)


def cmd_rate(o: dict) -> int:
    if o["z_grid"]:
        z = parse_grid(o["z_grid"])
        if np.any(z > 0):
            raise UsageError("--z-grid must not contain positive z")
        _emit(o, ["z", "phi"], [[zi, phi(zi)] for zi in z])
        print(f"rate: {z.size} values of Phi", file=sys.stderr)
        return EXIT_OK
    zetas = parse_grid(o["zeta_grid"])
    zetas = zetas[zetas > 0]  # the rate is defined for zeta > 0
    rows = [[zeta, scaled_rate(ModelParams(float(o["beta"]), float(o["L"]), float(zeta)))] for zeta in zetas]
    _emit(o, ["zeta", "scaled_rate"], rows)
    print(f"rate: {len(rows)} rows, beta={o['beta']} L={o['L']}", file=sys.stderr)
    return EXIT_OK


def cmd_vstar(o: dict) -> int:
    p = _params(o)
    x = parse_grid(o["x_grid"]) if o["x_grid"] else np.linspace(0.0, p.zeta, 101)
    if np.any(x < 0):
        raise UsageError("--x-grid must be non-negative")
    _emit(o, ["x", "v_star"], [[xi, v_star(xi, p)] for xi in x])
    print(f"vstar: {x.size} rows", file=sys.stderr)
    return EXIT_OK


def cmd_spectrum(o: dict) -> int:
    beta = float(o["beta"])
    h = float(o["h"] or 0.01)
    lo = -2.0 if o["lambda_lo"] is None else float(o["lambda_lo"])
    hi = 10.0 if o["lambda_hi"] is None else float(o["lambda_hi"])
    n = int(o["n_lambda"])
    if n < 1 or hi < lo:
        raise UsageError("spectrum needs --n-lambda >= 1 and --lambda-hi >= --lambda-lo")
    lams = np.linspace(lo, hi, n)
    length = h * math.ceil(required_length(hi) / h)
    path = sample_path(PathGrid(h, length), int(o["seed"]))
    x_stop = lambda lam: h * math.ceil((max(lam, 0.0) + 10.0) / h - 1e-9)
    traces = [solve_riccati(path, RiccatiConfig(beta, float(lam), "airy", (0.0, x_stop(lam)))) for lam in lams]
    if o["dump_paths"]:
        write_path_csv(path, o["dump_paths"])
    if o["format"] == "json":
        payload = {"seed": int(o["seed"]), "h": h, "beta": beta,
                   "traces": [{"lambda": tr.lam, "count": tr.count, "explosion_times": tr.explosion_times.tolist()}
                              for tr in traces]}
        _write(o, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        write_traces_csv(traces, buf)
        _write(o, buf.getvalue())
    print(f"spectrum: counts {[tr.count for tr in traces]} on lambda in [{lo}, {hi}]", file=sys.stderr)
    return EXIT_OK


def cmd_validate(o: dict) -> int:
    suite = o["suite"]
    if suite not in SUITES + ("all",):
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(SUITES + ('all',))}")
    report = run_suite(suite, int(o["seed"]))
    _write(o, json.dumps(report, indent=2, sort_keys=True, default=_json_num) + "\n")
    n_fail = sum(not c["passed"] for c in report["checks"].values())
    print(f"validate {suite}: {len(report['checks']) - n_fail}/{len(report['checks'])} checks passed", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_FLAGGED


def _estimator_config(o: dict, t: float, mode: str) -> EstimatorConfig:
    s = float(t) ** (2 / 3) * float(o["zeta"])
    # the lambda window flags are absolute; the estimator works in lambda - t^{2/3} zeta
    quad = Quadrature(lo=None if o["lambda_lo"] is None else float(o["lambda_lo"]) - s,
                      hi=None if o["lambda_hi"] is None else float(o["lambda_hi"]) - s)
    return EstimatorConfig(params=_params(o), t=float(t), alpha=float(o["alpha"]), n_samples=int(o["n"]),
                           mode=Mode(mode), lambda_quadrature=quad, riccati_step=float(o["h"] or 0.01),
                           seed=int(o["seed"]), threads=int(o["threads"]))


def cmd_estimate(o: dict) -> int:
    if o["mode"] not in ("plain", "tilted"):
        raise UsageError(f"--mode must be plain or tilted, got {o['mode']!r}")
    cfg = _estimator_config(o, o["t"], o["mode"])
    rep = estimate(cfg)
    p = cfg.params
    row = [cfg.t, cfg.alpha, p.beta, p.L, p.zeta, rep.mode.value, rep.n_samples, rep.log_estimate,
           rep.normalized, rep.std_error_log, rep.ess, -scaled_rate(p)]
    _emit(o, ESTIMATE_COLUMNS, [row], {"flags": rep.flags})
    print(f"estimate: log_G={rep.log_estimate:.6g} +- {rep.std_error_log:.3g} ess={rep.ess:.1f}"
          + (f" flags={rep.flags}" if rep.flags else ""), file=sys.stderr)
    return EXIT_FLAGGED if rep.flags else EXIT_OK


def cmd_scan(o: dict) -> int:
    ts = _parse_t_list(o["t_list"])
    if not ts:
        raise UsageError("--t-list is empty")
    rows = convergence_scan([_estimator_config(o, t, "tilted") for t in ts])
    _emit(o, ESTIMATE_COLUMNS, [[r[c] for c in ESTIMATE_COLUMNS] for r in rows],
          {"flags": [r["flags"] for r in rows]})
    flagged = [r["t"] for r in rows if r["flags"]]
    print(f"scan: {len(rows)} rows" + (f", flagged at t={flagged}" if flagged else ""), file=sys.stderr)
    return EXIT_FLAGGED if flagged else EXIT_OK


COMMANDS = {"rate": cmd_rate, "vstar": cmd_vstar, "spectrum": cmd_spectrum, "validate": cmd_validate,
            "estimate": cmd_estimate, "scan": cmd_scan}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = resolve(args)
        return COMMANDS[args.command](opts)
    except (UsageError, ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"airy-ldp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
