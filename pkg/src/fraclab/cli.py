"""Command-line frontend.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 I/O error.  A ``--config`` JSON document supplies values for any option of
the chosen subcommand (keys are the option names with dashes replaced by
underscores); flags given on the command line take precedence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import _backend
from .experiments import (CASES, GROUPS, INEQUALITIES, SweepPlan, divergence_study, dumps,
                          lemma_suite, lower_bound_fit, persist, sharpness_case, theta_sweep)
from .functions import (IndicatorBall, IndicatorBox, RadialPowerLog, SmoothBump, SpecError,
                        from_dict, make_h, zero)
from .norms import NormKind, SampledField
from .operators import (OperatorParams, eval_B, eval_bilinear, eval_dyadic, eval_riesz)
from .quadrature import METHODS, ConfigError, QuadratureConfig, QuadratureError
from .regions import ExponentPoint, InvalidExponent, classify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

SPEC_HELP = ("function spec: ball:C...,R | box:CORNER...,SIDES... | h:ALPHA[,D] | "
             "powerlog:ALPHA,KAPPA[,CUTOFF[,D]] | bump:T,P[,D] | zero:D | a JSON object | "
             "@file.json")


class UsageError(Exception):
    """Raised by the argument parser instead of exiting."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text, what="value"):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None


def parse_spec(text):
    """Function spec from the compact CLI syntax or JSON."""
    if isinstance(text, dict):
        return from_dict(text)
    text = str(text).strip()
    if text.startswith("@"):
        try:
            with open(text[1:]) as fh:
                return from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise SpecError(f"{text[1:]}: invalid JSON ({exc})") from None
    if text.startswith("{"):
        try:
            return from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON spec ({exc})") from None
    kind, _, rest = text.partition(":")
    vals = _floats(rest, "spec parameters")
    if kind == "ball" and len(vals) >= 2:
        return IndicatorBall(vals[:-1], vals[-1])
    if kind == "box" and len(vals) >= 2 and len(vals) % 2 == 0:
        k = len(vals) // 2
        return IndicatorBox(vals[:k], vals[k:])
    if kind == "h" and len(vals) in (1, 2):
        return make_h(int(vals[1]) if len(vals) == 2 else 1, vals[0])
    if kind == "powerlog" and 2 <= len(vals) <= 4:
        d = int(vals[3]) if len(vals) == 4 else 1
        return RadialPowerLog(d, vals[0], vals[1], *vals[2:3])
    if kind == "bump" and len(vals) in (2, 3):
        return SmoothBump(int(vals[2]) if len(vals) == 3 else 1, vals[0], vals[1])
    if kind == "zero" and len(vals) == 1:
        return zero(int(vals[0]))
    raise SpecError(f"malformed function spec {text!r}; expected {SPEC_HELP}")


def _exponent(text):
    s = str(text).strip().lower()
    if s in ("inf", "infinity"):
        return math.inf
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse exponent {text!r}") from None


# -- parser ----------------------------------------------------------------

DEFAULTS = {
    "seed": 42, "format": "csv", "plot": None, "threads": None, "out": None, "timings": False,
    "method": "Deterministic1D", "rel_tol": 1e-3, "abs_tol": 1e-12, "samples": 100_000,
    "truncation_radius": None, "order": 4,
    "d": 1, "theta": 0.5, "j": 0, "op": "bilinear",
    "kind": "weak", "cells": None, "box": None,
    "thetas": None, "theta_count": None, "p": None, "q": None, "alpha": None,
    "case": None, "k_range": "4:16", "t": None,
    "lemma": None, "suite": "default",
}


def _common(sp):
    g = sp.add_argument_group("global")
    g.add_argument("--config", metavar="PATH", help="JSON file with option values")
    g.add_argument("--seed", type=int, help="random seed (default 42)")
    g.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), help="record format (default csv)")
    g.add_argument("--plot", metavar="SVG", nargs="?", const="",
                   help="also write an SVG chart (default name: OUT with .svg suffix)")
    g.add_argument("--threads", type=int,
                   help="kernel worker threads; FRACLAB_THREADS takes precedence")
    g.add_argument("--timings", action="store_const", const=True,
                   help="keep wall times in records (breaks byte-identical reruns)")


def _quad(sp):
    g = sp.add_argument_group("quadrature")
    g.add_argument("--method", choices=METHODS, help="integration method")
    g.add_argument("--rel-tol", type=float, help="relative tolerance (default 1e-3)")
    g.add_argument("--abs-tol", type=float, help="absolute tolerance (default 1e-12)")
    g.add_argument("--samples", type=int,
                   help="Monte Carlo samples or per-point evaluation budget (default 100000)")
    g.add_argument("--truncation-radius", type=float,
                   help="outer radius of the y-integral (default: from the supports)")
    g.add_argument("--order", type=int, help="Gauss order per cell (default 4)")


def build_parser():
    ap = _Parser(prog="fraclab", description="Bilinear fractional integral laboratory.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("eval", help="evaluate an operator at one point")
    sp.add_argument("--f", required=False, help=SPEC_HELP)
    sp.add_argument("--g", help=SPEC_HELP + " (ignored for riesz)")
    sp.add_argument("--alpha", type=float, help="order, 0 < alpha < d")
    sp.add_argument("--d", type=int, help="dimension (default 1)")
    sp.add_argument("--theta", type=float, help="interpolation parameter (default 0.5)")
    sp.add_argument("--j", type=int, help="dyadic scale for --op dyadic (default 0)")
    sp.add_argument("--x", help="evaluation point, comma separated")
    sp.add_argument("--op", choices=("bilinear", "B", "riesz", "dyadic"),
                    help="operator (default bilinear)")
    _common(sp)
    _quad(sp)

    sp = sub.add_parser("norm", help="quasi-norm of a spec or a sampled field CSV")
    sp.add_argument("--f", help=SPEC_HELP)
    sp.add_argument("--field", metavar="CSV", help="sampled field written by SampledField.to_csv")
    sp.add_argument("--kind", choices=("lebesgue", "weak", "lorentz"), help="default weak")
    sp.add_argument("--p", help="exponent (inf allowed for lebesgue)")
    _common(sp)

    sp = sub.add_parser("region", help="classify an exponent point")
    sp.add_argument("--p", help="exponent of f in [1, inf]")
    sp.add_argument("--q", help="exponent of g in [1, inf]")
    sp.add_argument("--alpha", help="order")
    sp.add_argument("--d", type=int, help="dimension (default 1)")
    _common(sp)

    sp = sub.add_parser("sweep", help="weak-norm ratios over a theta grid")
    sp.add_argument("--f", help=SPEC_HELP)
    sp.add_argument("--g", help=SPEC_HELP)
    sp.add_argument("--p", help="exponent of f")
    sp.add_argument("--q", help="exponent of g")
    sp.add_argument("--alpha", type=float, help="order")
    sp.add_argument("--d", type=int, help="dimension (default 1)")
    sp.add_argument("--thetas", help="comma separated theta values")
    sp.add_argument("--theta-count", type=int, help="uniform grid on [0, 1] with this many points")
    sp.add_argument("--cells", type=int, help="sampling cells per axis (default 16384)")
    _common(sp)
    _quad(sp)

    sp = sub.add_parser("sharpness", help="run a sharpness case")
    sp.add_argument("--case", choices=CASES, help="sharpness case: " + ", ".join(CASES))
    sp.add_argument("--alpha", type=float, help="order (default 0.5)")
    sp.add_argument("--p", type=float, help="exponent for cases III and IV")
    sp.add_argument("--k-range", help="t = 2^-k for k in A:B inclusive (default 4:16)")
    sp.add_argument("--t", help="explicit comma separated t values (overrides --k-range)")
    sp.add_argument("--thetas", help="comma separated theta values (default: the endpoint)")
    sp.add_argument("--cells", type=int, help="sampling cells (default 4096)")
    _common(sp)
    _quad(sp)

    sp = sub.add_parser("verify", help="run a verification suite")
    sp.add_argument("--lemma", help="inequality label, group name, 'all', 'divergence' or "
                    "'lower-bound'; labels: " + ", ".join(INEQUALITIES) + "; groups: "
                    + ", ".join(GROUPS))
    sp.add_argument("--suite", choices=("default",), help="instance suite (default)")
    _common(sp)
    return ap


def _resolve(args, parser_dests):
    """Merge config file values and defaults into ``args``."""
    values = vars(args)
    if args.config:
        try:
            with open(args.config) as fh:
                conf = json.load(fh)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot read {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(conf, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(conf) - parser_dests
        if unknown:
            raise ConfigError(f"unknown config keys for {args.command}: {sorted(unknown)}")
        for k, v in conf.items():
            if values.get(k) is None:
                values[k] = v
    for k, v in DEFAULTS.items():
        if values.get(k) is None:
            values[k] = v
    return args


def _dests(parser, command):
    sp = parser._subparsers._group_actions[0].choices[command]
    return {a.dest for a in sp._actions if a.dest not in ("help", "config")}


def _qconfig(a):
    kw = dict(method=a.method, rel_tol=float(a.rel_tol), abs_tol=float(a.abs_tol),
              samples=int(a.samples), seed=int(a.seed), order=int(a.order))
    if a.truncation_radius is not None:
        kw["truncation_radius"] = float(a.truncation_radius)
    return QuadratureConfig(**kw)


def _require(a, *names):
    missing = [n for n in names if getattr(a, n) is None]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join("--" + n.replace("_", "-") for n in missing))


def _emit(text, a):
    if a.out:
        try:
            with open(a.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {a.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)


def _plot_path(a):
    if a.plot is None:
        return None
    if a.plot:
        return a.plot
    return (os.path.splitext(a.out)[0] if a.out else "fraclab") + ".svg"


def _write_records(records, a, xkey, title):
    if a.out:
        persist(records, a.out, a.format, timings=bool(a.timings))
    else:
        if not a.timings:
            records = [replace(r, walltime_ms=0.0) for r in records]
        sys.stdout.write(dumps(records, a.format))
    path = _plot_path(a)
    if path:
        from .svgplot import write_svg
        groups = {}
        for rec in records:
            x = getattr(rec, xkey)
            if x is not None:
                groups.setdefault(rec.experiment, ([], []))
                groups[rec.experiment][0].append(x)
                groups[rec.experiment][1].append(rec.value)
        series = [(k, xs, ys) for k, (xs, ys) in groups.items()]
        try:
            write_svg(path, series, title=title, xlabel=xkey, ylabel="value",
                      xlog=(xkey == "t"), ylog=False)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


# -- subcommands -----------------------------------------------------------


def cmd_eval(a):
    _require(a, "f", "alpha", "x")
    if a.op != "riesz" and a.g is None:
        raise ConfigError("--g is required for this operator")
    d = int(a.d)
    f = parse_spec(a.f)
    x = _floats(a.x, "point")
    if len(x) != d:
        raise ConfigError(f"--x needs {d} coordinate(s)")
    cfg = _qconfig(a)
    alpha = float(a.alpha)
    if a.op == "riesz":
        est = eval_riesz(f, alpha, d, x, cfg)
    else:
        g = parse_spec(a.g)
        if a.op == "B":
            est = eval_B(f, g, alpha, d, x, cfg)
        elif a.op == "dyadic":
            est = eval_dyadic(f, g, OperatorParams(alpha, d, float(a.theta), int(a.j)), x, cfg)
        else:
            est = eval_bilinear(f, g, OperatorParams(alpha, d, float(a.theta)), x, cfg)
    out = est.to_dict()
    out["error"] = est.error
    _emit(json.dumps(out) + "\n", a)


def _read_field(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed field CSV ({exc})") from None
    d = data.shape[1] - 2
    if d < 1:
        raise ConfigError(f"{path}: expected coordinate, measure and value columns")
    c, m, v = data[:, :d], data[:, d], data[:, d + 1]
    # bounding box of the cells; measures are trusted as written
    lo, hi = c.min(axis=0), c.max(axis=0)
    vol = float(m.sum())
    if d == 1:
        half = 0.5 * (vol - float(hi[0] - lo[0]))
        lo, hi = lo - half, hi + half
    else:
        side = vol ** (1.0 / d)
        mid = 0.5 * (lo + hi)
        lo, hi = mid - side / 2, mid + side / 2
    return SampledField(c, m, v, (lo, hi))


def cmd_norm(a):
    _require(a, "p")
    if (a.f is None) == (a.field is None):
        raise ConfigError("give exactly one of --f and --field")
    obj = parse_spec(a.f) if a.f is not None else _read_field(a.field)
    p = _exponent(a.p)
    val = NormKind(a.kind, p)(obj)
    out = {"kind": a.kind, "exponent": "inf" if math.isinf(p) else p, "value": val}
    if isinstance(obj, SampledField):
        out["cells"] = obj.n_cells
        out["box"] = [obj.box[0].tolist(), obj.box[1].tolist()]
    _emit(json.dumps(out) + "\n", a)


def cmd_region(a):
    _require(a, "p", "q", "alpha")
    pt = ExponentPoint(str(a.p), str(a.q), str(a.alpha), int(a.d))
    out = classify(pt).to_dict(pt)
    _emit(json.dumps(out) + "\n", a)


def cmd_sweep(a):
    _require(a, "f", "g", "p", "q", "alpha")
    if a.thetas is not None:
        thetas = _floats(a.thetas, "theta grid") if isinstance(a.thetas, str) else list(a.thetas)
    elif a.theta_count is not None:
        if int(a.theta_count) < 1:
            raise ConfigError("--theta-count must be >= 1")
        thetas = list(np.linspace(0.0, 1.0, int(a.theta_count))) if a.theta_count > 1 else [0.5]
    else:
        thetas = list(np.linspace(0.0, 1.0, 21))
    pt = ExponentPoint(str(a.p), str(a.q), float(a.alpha), int(a.d))
    plan = SweepPlan(parse_spec(a.f), parse_spec(a.g), pt, tuple(thetas), _qconfig(a),
                     cells=int(a.cells or 2 ** 14))
    _write_records(theta_sweep(plan), a, "theta", "theta sweep")


def cmd_sharpness(a):
    _require(a, "case")
    if a.t is not None:
        ts = _floats(a.t, "t grid") if isinstance(a.t, str) else [float(v) for v in a.t]
    else:
        try:
            k0, k1 = (int(v) for v in str(a.k_range).split(":"))
        except ValueError:
            raise ConfigError(f"--k-range must look like A:B, got {a.k_range!r}") from None
        ts = [2.0 ** -k for k in range(k0, k1 + 1)]
    thetas = None
    if a.thetas is not None:
        thetas = _floats(a.thetas, "theta grid") if isinstance(a.thetas, str) else a.thetas
    records, report = sharpness_case(a.case, ts, thetas, _qconfig(a),
                                     alpha=float(a.alpha or 0.5), p=a.p,
                                     cells=int(a.cells or 4096))
    _write_records(records, a, "t", f"case {a.case}")
    print(json.dumps({"fitted_exponent": report.fitted_exponent,
                      "predicted_exponent": report.predicted_exponent,
                      "increasing": report.increasing, "diverges": report.diverges}),
          file=sys.stderr)


def cmd_verify(a):
    _require(a, "lemma")
    name = a.lemma
    if name == "divergence":
        records = divergence_study()
        ok = all(r.value <= 5e-2 for r in records)
        report = {"suite": name, "passed": ok,
                  "rel_l2_residual": {str(round(2.0 / r.t)): r.value for r in records}}
    elif name == "lower-bound":
        records, c = lower_bound_fit()
        ok = c > 0
        report = {"suite": name, "passed": ok, "constant": c}
    else:
        names = list(GROUPS) if name == "all" else [name]
        report = {"suite": a.suite, "lemmas": {}}
        records, ok = [], True
        for n in names:
            rep = lemma_suite(n)
            ok = ok and rep.passed
            records += list(rep.records)
            report["lemmas"][n] = {k: {str(t): c for t, c in v.items()}
                                   for k, v in rep.constants.items()}
        report["passed"] = ok
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    if a.out:
        _emit(text, a)
    else:
        sys.stdout.write(text)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"eval": cmd_eval, "norm": cmd_norm, "region": cmd_region, "sweep": cmd_sweep,
            "sharpness": cmd_sharpness, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        args = _resolve(args, _dests(parser, args.command))
        if args.threads is not None:
            _backend.set_threads(int(args.threads))
        code = COMMANDS[args.command](args)
        return EXIT_OK if code is None else code
    except (QuadratureError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, SpecError, InvalidExponent, ValueError, TypeError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
