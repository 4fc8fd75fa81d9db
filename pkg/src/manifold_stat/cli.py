"""Command-line front end.

Subcommands ``estimate``, ``region``, ``test``, ``simulate`` and ``table``
read CSV/JSON inputs and print JSON reports tagged ``"schema": "manifold-stat/1"``.

Exit codes: 0 success, 1 input/config error, 2 estimate on the cutlocus,
3 estimate close to the cutlocus (result still printed), 4 test undefined.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import simulate as sim
from .errors import ConfigError, FullCircle, ManifoldStatError, OnCutlocus
from .estimators import LabeledSample
from .geometry import Sphere, Stiefel, cut_tolerance, parse_manifold, sym_sqrt
from .inference import (
    circle_interval,
    confidence_region,
    location_estimate,
    multisample_mean_inference,
    one_sample_test,
    two_sample_test,
)
from .limitdist import reference_law, stable_rate_and_scale, write_table_csv

SCHEMA = "manifold-stat/1"

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CUTLOCUS = 2
EXIT_NEAR_CUTLOCUS = 3
EXIT_UNDEFINED = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """Make ``obj`` JSON-safe: arrays to lists, NaN/inf to null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(payload, out=None):
    payload = {"schema": SCHEMA, **payload}
    text = json.dumps(_clean(payload), indent=2, allow_nan=False)
    (out or sys.stdout).write(text + "\n")


# ---------------------------------------------------------------------------
# input
# ---------------------------------------------------------------------------

def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_table(path, delimiter=",", header=None, group_column=None) -> LabeledSample:
    """Read observations from CSV.

    ``header=None`` auto-detects a header row (any non-numeric cell).  The
    group column is given by name (with a header) or zero-based index.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    names = None
    if header is None:
        header = not all(_is_number(c) for c in rows[0])
    if header:
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    gidx = None
    if group_column is not None:
        if names is not None and group_column in names:
            gidx = names.index(group_column)
        elif str(group_column).isdigit():
            gidx = int(group_column)
        else:
            raise ConfigError(f"{path}: group column {group_column!r} not found")
    data, groups = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        try:
            if gidx is not None:
                groups.append(int(float(row[gidx])))
                row = row[:gidx] + row[gidx + 1:]
            vals = [float(c) for c in row]
        except (ValueError, IndexError):
            raise ConfigError(f"{path}:{lineno}: cannot parse row {row!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"{path}:{lineno}: non-finite value")
        data.append(vals)
    if len({len(r) for r in data}) != 1:
        raise ConfigError(f"{path}: rows have differing lengths")
    return LabeledSample(np.array(data), np.array(groups) if gidx is not None else None)


def _load(args, path=None, manifold=None):
    sample = read_table(path or args.data, args.delimiter, args.header, getattr(args, "group_column", None))
    if manifold is not None and sample.s != manifold.ambient_dim:
        raise ConfigError(
            f"data has {sample.s} columns, {manifold.label()} needs {manifold.ambient_dim}"
        )
    return sample


def _point_report(manifold, x):
    out = {"point": x}
    if isinstance(manifold, Sphere) and manifold.s == 2:
        out["angle_deg"] = manifold.angle_deg(x)
    if isinstance(manifold, Stiefel):
        out["matrix"] = manifold.as_matrix(x)
    out["membership_residual"] = manifold.membership_residual(x)
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_estimate(args):
    manifold = parse_manifold(args.manifold)
    sample = _load(args, manifold=manifold)
    t, _ = location_estimate(sample, args.functional) if sample.n >= 2 else (sample.data[0], None)
    d = manifold.cutlocus_distance(t)
    payload = {
        "command": "estimate",
        "manifold": manifold.label(),
        "functional": args.functional,
        "n": sample.n,
        "t": t,
        "cutlocus_distance": d,
    }
    if isinstance(manifold, Sphere):
        payload["t_norm"] = float(np.linalg.norm(t))
    else:
        payload["sigma_min"] = d
    if d <= cut_tolerance(t):
        payload["error"] = "estimate lies on the cutlocus; location undefined"
        _emit(payload)
        return EXIT_CUTLOCUS
    payload["mu"] = _point_report(manifold, manifold.project(t))
    code = EXIT_OK
    if d < 10 * cut_tolerance(t):
        payload["warning"] = "estimate is within 10 tolerance bands of the cutlocus"
        code = EXIT_NEAR_CUTLOCUS
    _emit(payload)
    return code


def _scale_for_law(args, manifold, sample, t, B):
    law = reference_law(manifold.dim, args.law)
    if law.name == "stable" and args.tail_c is not None:
        rate, V = stable_rate_and_scale(manifold.ambient_dim, law.alpha, args.tail_c)
        a_n = rate(sample.n)
        return sym_sqrt(V) / a_n, a_n
    return B, math.sqrt(sample.n)


def cmd_region(args):
    manifold = parse_manifold(args.manifold)
    sample = _load(args, manifold=manifold)
    t, B = location_estimate(sample, args.functional)
    if manifold.cutlocus_distance(t) <= cut_tolerance(t):
        _emit({"command": "region", "error": "estimate lies on the cutlocus"})
        return EXIT_CUTLOCUS
    B, a_n = _scale_for_law(args, manifold, sample, t, B)
    region = confidence_region(manifold, t, B, a_n, args.level, args.law, args.mode, args.gamma)
    fr = region.frame
    payload = {
        "command": "region",
        "manifold": manifold.label(),
        "functional": args.functional,
        "n": sample.n,
        "level": args.level,
        "mode": fr.mode.value,
        "gamma": fr.gamma_kind,
        "a_n": fr.a_n,
        "t": t,
        "center": _point_report(manifold, fr.mu),
        "G": fr.G,
        "Gamma": fr.Gamma,
        "Q": region.Q,
        "threshold": region.threshold,
        "reference": region.law.describe(),
    }
    if manifold.dim == 1:
        payload["beta1"] = fr.beta1()
    if isinstance(manifold, Sphere) and manifold.s == 2:
        try:
            lo, hi = circle_interval(region)
            payload["arc_deg"] = [lo, hi]
        except FullCircle:
            payload["arc_deg"] = None
            payload["warning"] = "region covers the whole circle"
    _emit(payload)
    return EXIT_OK


def _parse_point(text, manifold):
    try:
        vals = np.array([float(v) for v in text.replace(";", ",").split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse point {text!r}") from None
    if isinstance(manifold, Sphere) and manifold.s == 2 and vals.size == 1:
        return manifold.from_angle_deg(vals[0])
    return manifold.check_point(vals)


def cmd_test(args):
    manifold = parse_manifold(args.manifold)
    if args.kind == "one-sample":
        if args.mu0 is None:
            raise ConfigError("one-sample test needs --mu0")
        sample = _load(args, manifold=manifold)
        mu0 = _parse_point(args.mu0, manifold)
        out = one_sample_test(manifold, sample, mu0, args.functional, args.mode, args.gamma)
    elif args.kind == "two-sample":
        if args.other is None:
            raise ConfigError("two-sample test needs a second data file")
        x = _load(args, manifold=manifold)
        y = _load(args, path=args.other, manifold=manifold)
        out = two_sample_test(manifold, x, y, args.mode, args.gamma)
    else:
        sample = _load(args, manifold=manifold)
        if sample.groups is None:
            raise ConfigError("multisample test needs --group-column")
        region, diag = multisample_mean_inference(manifold, sample, args.level, args.mode, args.gamma)
        payload = {
            "command": "test",
            "kind": "multisample",
            "manifold": manifold.label(),
            "n": sample.n,
            "level": args.level,
            "center": _point_report(manifold, region.center),
            "threshold": region.threshold,
            "Q": region.Q,
            "diagnostics": diag,
        }
        if args.mu0 is not None:
            mu0 = _parse_point(args.mu0, manifold)
            stat = region.statistic(mu0)
            payload.update(statistic=stat, df=manifold.dim, p_value=float(region.law.sf(stat)))
        if isinstance(manifold, Sphere) and manifold.s == 2:
            try:
                payload["arc_deg"] = list(circle_interval(region))
            except FullCircle:
                payload["arc_deg"] = None
        _emit(payload)
        return EXIT_OK
    payload = {"command": "test", "kind": args.kind, "manifold": manifold.label(), **out.to_dict()}
    _emit(payload)
    return EXIT_OK if out.defined else EXIT_UNDEFINED


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing {', '.join(missing)}")


def run_simulation_config(cfg: dict) -> dict:
    """Run one simulation described by a JSON-style mapping."""
    kind = cfg.get("experiment", "coverage")
    if kind == "necessity":
        _require(cfg, "a", "u")
        rows = sim.necessity_demo(cfg["a"], cfg["u"])
        return {"experiment": "necessity", "rows": rows}
    if kind == "multisample_rate":
        _require(cfg, "gamma1", "gamma2", "a1", "schedule")
        out = sim.multisample_rate_demo(cfg["gamma1"], cfg["gamma2"], cfg["a1"],
                                        [tuple(x) for x in cfg["schedule"]])
        return {"experiment": "multisample_rate", **out}
    _require(cfg, "seed")
    if kind == "coverage":
        fields = {k: v for k, v in cfg.items() if k != "experiment"}
        try:
            ec = sim.ExperimentConfig(**fields)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return {"experiment": "coverage", **sim.coverage_experiment(ec)}
    if kind == "two_sample":
        _require(cfg, "manifold", "kappa", "n", "l", "replications")
        manifold = parse_manifold(cfg["manifold"])
        if not isinstance(manifold, Sphere):
            raise ConfigError("two_sample experiments are defined on spheres")
        mu_x = np.zeros(manifold.s)
        mu_x[0] = 1.0
        ang = math.radians(float(cfg.get("separation_deg", 0.0)))
        mu_y = np.zeros(manifold.s)
        mu_y[0], mu_y[1] = math.cos(ang), math.sin(ang)
        kappa = float(cfg["kappa"])
        out = sim.rejection_experiment(
            manifold,
            lambda rng: sim.sample_rotsym_sphere(mu_x, kappa, int(cfg["n"]), rng),
            lambda rng: sim.sample_rotsym_sphere(mu_y, kappa, int(cfg["l"]), rng),
            int(cfg["replications"]), int(cfg["seed"]), float(cfg.get("level", 0.05)),
            cfg.get("mode"),
        )
        return {"experiment": "two_sample", "config": cfg, **out}
    raise ConfigError(f"unknown experiment {kind!r}")


def _dump_statistics(path, report):
    """Per-replication values (statistic or p-value) as CSV."""
    key = "statistics" if "statistics" in report else "p_values"
    values = report.get(key)
    if values is None:
        raise ConfigError("this experiment has no per-replication values to dump")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replication", key[:-1] if key == "p_values" else "statistic"])
        for i, v in enumerate(values):
            w.writerow([i, "" if v is None else repr(float(v))])


def cmd_simulate(args):
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    report = run_simulation_config(cfg)
    if args.statistics_csv:
        _dump_statistics(args.statistics_csv, report)
    payload = {"command": "simulate", **report}
    if args.output:
        with open(args.output, "w") as fh:
            _emit(payload, fh)
    else:
        _emit(payload)
    return EXIT_OK


def cmd_table(args):
    law = reference_law(args.m, args.law)
    grid = [float(v) for v in args.grid.split(",")]
    write_table_csv(args.output or sys.stdout, law, grid)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_input(p, data=True):
    if data:
        p.add_argument("data", help="CSV file, one observation per row")
    p.add_argument("--manifold", required=True, help="sphere:<s> or stiefel:<p>x<r>")
    p.add_argument("--delimiter", default=",")
    hdr = p.add_mutually_exclusive_group()
    hdr.add_argument("--header", dest="header", action="store_true", default=None)
    hdr.add_argument("--no-header", dest="header", action="store_false")
    p.add_argument("--group-column", default=None)


def _add_inference(p):
    p.add_argument("--functional", choices=["mean", "median"], default="mean")
    p.add_argument("--mode", choices=["standard", "sphere-tuned"], default=None,
                   help="default: sphere-tuned on spheres, standard elsewhere")
    p.add_argument("--gamma", choices=["corollary", "isotropic"], default="corollary")
    p.add_argument("--level", type=float, default=0.95)


def build_parser():
    parser = _Parser(prog="manifold-stat", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="location estimate on the manifold")
    _add_input(p)
    p.add_argument("--functional", choices=["mean", "median"], default="mean")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("region", help="confidence region for the location")
    _add_input(p)
    _add_inference(p)
    p.add_argument("--law", default="chisq", help="chisq or stable:<alpha>")
    p.add_argument("--tail-c", type=float, default=None,
                   help="radial tail constant C; with a stable law, use rate n^(1-1/alpha)")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("test", help="one-sample, two-sample or multisample test")
    p.add_argument("kind", choices=["one-sample", "two-sample", "multisample"])
    p.add_argument("data")
    p.add_argument("other", nargs="?", default=None, help="second file (two-sample)")
    _add_input(p, data=False)
    _add_inference(p)
    p.add_argument("--mu0", default=None,
                   help="hypothesized location, comma separated (angle in degrees on the circle)")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="run a simulation config (JSON)")
    p.add_argument("config")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--statistics-csv", default=None,
                   help="also write per-replication values to this CSV file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("table", help="tabulate a reference law as CSV")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--law", default="chisq")
    p.add_argument("--grid", required=True, help="comma separated s^2 values")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OnCutlocus as exc:
        print(f"manifold-stat: {exc}", file=sys.stderr)
        return EXIT_CUTLOCUS
    except (ManifoldStatError, ValueError, OSError) as exc:
        print(f"manifold-stat: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
