"""Command-line entry point: experiment commands, oracle check, and the
frozen CSV/JSON result schema.

Flag precedence is flags > --config file > environment (LPP_WORKERS for
workers) > built-in defaults.  Every run writes a CSV and a JSON mirror
with identical row fields; the JSON additionally carries the effective
configuration, fit results, experiment statistics, and the measured wall
time.  CSV rows leave wall_time_s blank unless --timings is passed, so
default output files are byte-identical for any worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

from . import __version__
from .core import Region, brute_force_passage, geodesic, passage_grid_to_sink
from .errors import DomainError, LppError
from .experiments import (
    DEFAULT_Z,
    ExperimentConfig,
    estimate_coalescence_tail,
    estimate_corollary_tail,
    estimate_family_crossings,
    fit_power_law,
    fluctuation_profile,
    onepoint_stats,
    reduction_ratio,
    segment_sup_stats,
)
from .harness import trial_seed
from .weights import LatticePoint, WeightField

CSV_COLUMNS = ["experiment", "k", "n", "R", "m", "r", "s", "x",
               "trials", "successes", "p_hat", "ci_lo", "ci_hi",
               "seed", "wall_time_s"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row(**kw) -> dict:
    row = {c: None for c in CSV_COLUMNS}
    for key, val in kw.items():
        if key not in row:
            raise KeyError(f"unknown result column {key!r}")
        row[key] = val
    return row


def write_results(out_path: str, rows: list[dict], *, config: dict,
                  experiment: str, z: float, workers: int, wall_time_s: float,
                  timings: bool, fit: dict | None = None,
                  stats: dict | None = None) -> str:
    """Write the CSV and its JSON mirror; returns the JSON path."""
    if timings:
        rows = [dict(r, wall_time_s=wall_time_s) for r in rows]
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row[c]) for c in CSV_COLUMNS))
    with open(out_path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    json_path = _json_path(out_path)
    doc = {
        "version": __version__,
        "experiment": experiment,
        "z": z,
        "workers": workers,
        "config": config,
        "wall_time_s": wall_time_s,
        "rows": rows,
    }
    if fit is not None:
        doc["fit"] = fit
    if stats is not None:
        doc["stats"] = stats
    with open(json_path, "w", newline="\n") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")
    return json_path


def _json_path(out_path: str) -> str:
    root, ext = os.path.splitext(out_path)
    return (root if ext.lower() == ".csv" else out_path) + ".json"


def read_result_rows(path: str) -> list[dict]:
    """Parse a result CSV back into typed row dicts."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines or lines[0].split(",") != CSV_COLUMNS:
        raise LppError(f"{path} does not match the result schema")
    rows = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for col, val in zip(CSV_COLUMNS, vals):
            if val == "":
                row[col] = None
            elif col in ("experiment",):
                row[col] = val
            elif col in ("trials", "successes", "seed", "k", "n", "m", "r", "s"):
                row[col] = int(val)
            else:
                row[col] = float(val)
        rows.append(row)
    return rows


# --- configuration plumbing -------------------------------------------------

def _parse_config_file(path: str) -> dict:
    out = {}
    with open(path) as f:
        for ln in f:
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise LppError(f"bad config line (want key=value): {ln!r}")
            key, val = ln.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


_FLOAT_LIST = "float_list"


def _convert(val, kind):
    if kind is int:
        return int(val)
    if kind is float:
        return float(val)
    if kind == _FLOAT_LIST:
        if isinstance(val, (list, tuple)):
            return tuple(float(v) for v in val)
        return tuple(float(v) for v in str(val).split(","))
    return val


class _Resolver:
    """flags > config file > defaults, with LPP_WORKERS under 'defaults'."""

    def __init__(self, args: argparse.Namespace, defaults: dict, kinds: dict):
        self.args = vars(args)
        self.defaults = defaults
        self.kinds = kinds
        self.file = {}
        if self.args.get("config"):
            self.file = _parse_config_file(self.args["config"])

    def __getitem__(self, key: str):
        kind = self.kinds.get(key, str)
        if self.args.get(key) is not None:
            return _convert(self.args[key], kind)
        if key in self.file:
            return _convert(self.file[key], kind)
        if key == "workers" and os.environ.get("LPP_WORKERS"):
            return int(os.environ["LPP_WORKERS"])
        return self.defaults[key]

    def effective(self) -> dict:
        out = {}
        for key in self.defaults:
            val = self[key]
            out[key] = list(val) if isinstance(val, tuple) else val
        return out


def _add_common(parser: argparse.ArgumentParser, with_R: str | None = None):
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--z", type=float)
    parser.add_argument("--out", required=True, help="output CSV path")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--checkpoint", help="checkpoint file for resume")
    parser.add_argument("--timings", action="store_true",
                        help="record wall time in CSV rows (breaks byte-for-byte determinism)")
    parser.add_argument("--progress", action="store_true")
    if with_R == "list":
        parser.add_argument("--R", help="comma-separated list, e.g. 4,8,16,32")
    elif with_R == "one":
        parser.add_argument("--R", type=float)


_COMMON_KINDS = {"k": int, "n": int, "m": int, "r": int, "s": int,
                 "a": int, "b": int, "d_spacing": int,
                 "trials": int, "seed": int, "workers": int, "z": float,
                 "R": _FLOAT_LIST, "x": _FLOAT_LIST}

_WORKER_DEFAULT = max(1, os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lppsim",
                                description="Directed LPP geodesic experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    oc = sub.add_parser("oracle-check",
                        help="DP vs exhaustive enumeration on small rectangles")
    oc.add_argument("--max-size", type=int, default=6)
    oc.add_argument("--cases", type=int, default=100)
    oc.add_argument("--seed", type=int, default=1)

    tail = sub.add_parser("tail", help="coalescence-depth tail over a sweep of R")
    tail.add_argument("--k", type=int)
    tail.add_argument("--n", type=int)
    _add_common(tail, with_R="list")

    cor = sub.add_parser("corollary-tail",
                         help="first-coordinate tail for starts 0 and ktilde")
    cor.add_argument("--k", type=int)
    cor.add_argument("--n", type=int)
    _add_common(cor, with_R="list")

    red = sub.add_parser("reduction-ratio",
                         help="P[E1]/P[E3] for the rotation-invariance reduction")
    red.add_argument("--k", type=int)
    red.add_argument("--n", type=int)
    _add_common(red, with_R="one")

    fam = sub.add_parser("family", help="mean crossings of L_r by a parallel family")
    fam.add_argument("--a", type=int)
    fam.add_argument("--b", type=int)
    fam.add_argument("--d-spacing", dest="d_spacing", type=int)
    fam.add_argument("--m", type=int)
    fam.add_argument("--s", type=int)
    fam.add_argument("--r", type=int)
    _add_common(fam)

    flu = sub.add_parser("fluctuation", help="transversal fluctuation exceedances")
    flu.add_argument("--m", type=int, help="start offset: start is (m, -m)")
    flu.add_argument("--r", type=int)
    flu.add_argument("--n", type=int)
    flu.add_argument("--x", help="comma-separated thresholds in r^(2/3) units")
    _add_common(flu)

    onep = sub.add_parser("onepoint", help="one-point passage time statistics")
    onep.add_argument("--m", type=int)
    onep.add_argument("--n", type=int)
    _add_common(onep)

    seg = sub.add_parser("segment-sup", help="segment-to-segment sup statistics")
    seg.add_argument("--n", type=int)
    seg.add_argument("--x", help="comma-separated thresholds in n^(1/3) units")
    _add_common(seg)

    fit = sub.add_parser("fit", help="power-law fit of (R, p_hat) rows from a CSV")
    fit.add_argument("--in", dest="in_path", required=True)
    fit.add_argument("--out", help="optional JSON output path")

    return p


# --- commands ----------------------------------------------------------------

def _cmd_oracle_check(args) -> int:
    if args.max_size > 8:
        return _usage(f"--max-size must be <= 8, got {args.max_size}")
    if args.max_size < 1:
        return _usage(f"--max-size must be >= 1, got {args.max_size}")
    if args.cases == 0:
        print("warning: --cases 0, vacuous pass", file=sys.stderr)
        return 0
    idx = 0
    checked = 0
    for nx in range(1, args.max_size + 1):
        for ny in range(1, args.max_size + 1):
            for _ in range(args.cases):
                seed = trial_seed(args.seed, idx)
                idx += 1
                fld = WeightField(seed)
                sink = LatticePoint(nx - 1, ny - 1)
                grid = passage_grid_to_sink(fld, sink, Region((0, 0), sink))
                starts = [LatticePoint(0, 0)]
                if nx * ny > 1:
                    mix = trial_seed(seed, 0)
                    starts.append(LatticePoint(mix % nx, (mix >> 32) % ny))
                for u in starts:
                    t_bf, g_bf = brute_force_passage(fld, u, sink)
                    t_dp = grid.value_at(u)
                    if abs(t_dp - t_bf) > 1e-12 * max(1.0, abs(t_bf)):
                        print(f"MISMATCH value shape={nx}x{ny} seed={seed} start={tuple(u)}: "
                              f"dp={t_dp!r} brute={t_bf!r}")
                        return 1
                    g_dp = geodesic(grid, u)
                    if g_dp.points != g_bf.points:
                        print(f"MISMATCH path shape={nx}x{ny} seed={seed} start={tuple(u)}")
                        return 1
                    checked += 1
    print(f"oracle-check: {checked} comparisons over "
          f"{args.max_size * args.max_size} shapes x {args.cases} cases: all matched")
    return 0


def _run_and_write(args, name, defaults, run) -> int:
    res = _Resolver(args, defaults, _COMMON_KINDS)
    t0 = time.perf_counter()
    try:
        rows, fit, stats, cfg = run(res)
    except LppError as e:
        if isinstance(e, ValueError):
            return _usage(str(e))  # precondition named in the message
        raise
    wall = time.perf_counter() - t0
    try:
        json_path = write_results(
            res["out"], rows, config=cfg, experiment=name, z=res["z"],
            workers=res["workers"], wall_time_s=wall, timings=args.timings,
            fit=fit, stats=stats)
    except OSError as e:
        print(f"I/O error writing results: {e}", file=sys.stderr)
        return 1
    print(f"{name}: wrote {res['out']} and {json_path} ({wall:.1f}s)")
    return 0


def _tail_like(args, name, estimator) -> int:
    defaults = {"k": 8, "n": 1024, "R": (4.0, 8.0, 16.0, 32.0),
                "trials": 50000, "seed": 1, "workers": _WORKER_DEFAULT,
                "z": DEFAULT_Z, "out": None}

    def run(res):
        cfg = ExperimentConfig(res["k"], res["n"], res["R"], res["trials"],
                               res["seed"], res["workers"])
        if name == "corollary-tail":
            for r in cfg.R_values:
                if not cfg.n > 4 * r * cfg.k:
                    raise DomainError(
                        f"requires n > 4Rk ({cfg.n} <= {4 * r * cfg.k:g} at R={r:g})")
        table = estimator(cfg, z=res["z"], checkpoint_path=args.checkpoint,
                          progress=args.progress)
        rows = [
            _row(experiment=name, k=cfg.k, n=cfg.n, R=row.R, trials=row.trials,
                 successes=row.successes, p_hat=row.p_hat, ci_lo=row.ci_lo,
                 ci_hi=row.ci_hi, seed=cfg.seed)
            for row in table.rows
        ]
        fit = None
        if table.fitted_slope is not None:
            fit = {"slope": table.fitted_slope, "stderr": table.slope_stderr,
                   "intercept": table.intercept}
        conf = dict(res.effective(), experiment=name)
        return rows, fit, None, conf

    return _run_and_write(args, name, defaults, run)


def _cmd_reduction(args) -> int:
    defaults = {"k": 8, "n": 512, "R": 16.0, "trials": 20000, "seed": 1,
                "workers": _WORKER_DEFAULT, "z": DEFAULT_Z, "out": None}

    def run(res):
        R = float(res["R"][0]) if isinstance(res["R"], tuple) else float(res["R"])
        out = reduction_ratio(res["k"], res["n"], R, res["trials"], res["seed"],
                              workers=res["workers"], z=res["z"],
                              checkpoint_path=args.checkpoint,
                              progress=args.progress)
        common = dict(k=res["k"], n=res["n"], R=R, seed=res["seed"])
        rows = [
            _row(experiment="reduction-ratio-e1", trials=out.e1.trials,
                 successes=out.e1.successes, p_hat=out.e1.p_hat,
                 ci_lo=out.e1.ci_lo, ci_hi=out.e1.ci_hi, **common),
            _row(experiment="reduction-ratio-e3", trials=out.e3.trials,
                 successes=out.e3.successes, p_hat=out.e3.p_hat,
                 ci_lo=out.e3.ci_lo, ci_hi=out.e3.ci_hi, **common),
            _row(experiment="reduction-ratio", trials=out.trials, p_hat=out.ratio,
                 ci_lo=out.ci_lo, ci_hi=out.ci_hi, **common),
        ]
        stats = {"ratio": out.ratio, "ratio_ci": [out.ci_lo, out.ci_hi],
                 "p1": out.e1.p_hat, "p3": out.e3.p_hat}
        return rows, None, stats, dict(res.effective(), experiment="reduction-ratio", R=R)

    return _run_and_write(args, "reduction-ratio", defaults, run)


def _cmd_family(args) -> int:
    defaults = {"a": 0, "b": 0, "d_spacing": 10, "m": 16, "s": 768, "r": 256,
                "trials": 5000, "seed": 1, "workers": _WORKER_DEFAULT,
                "z": DEFAULT_Z, "out": None}

    def run(res):
        out = estimate_family_crossings(
            res["a"], res["b"], res["d_spacing"], res["m"], res["s"], res["r"],
            res["trials"], res["seed"], workers=res["workers"], z=res["z"],
            checkpoint_path=args.checkpoint, progress=args.progress)
        rows = [_row(experiment="family", m=res["m"], r=res["r"], s=res["s"],
                     trials=out.trials, p_hat=out.mean, ci_lo=out.ci_lo,
                     ci_hi=out.ci_hi, seed=res["seed"])]
        stats = {"mean_crossings": out.mean, "ci": [out.ci_lo, out.ci_hi],
                 "count_freq": list(out.count_freq),
                 "a": res["a"], "b": res["b"], "d_spacing": res["d_spacing"]}
        return rows, None, stats, dict(res.effective(), experiment="family")

    return _run_and_write(args, "family", defaults, run)


def _cmd_fluctuation(args) -> int:
    defaults = {"m": 0, "r": 128, "n": 512, "x": (0.5, 1.0, 2.0, 3.0),
                "trials": 20000, "seed": 1, "workers": _WORKER_DEFAULT,
                "z": DEFAULT_Z, "out": None}

    def run(res):
        rows_out = fluctuation_profile(res["m"], res["r"], res["n"], res["x"],
                                       res["trials"], res["seed"],
                                       workers=res["workers"], z=res["z"],
                                       checkpoint_path=args.checkpoint,
                                       progress=args.progress)
        rows = [
            _row(experiment="fluctuation", m=res["m"], r=res["r"], n=res["n"],
                 x=row.x, trials=row.estimate.trials, successes=row.estimate.successes,
                 p_hat=row.estimate.p_hat, ci_lo=row.estimate.ci_lo,
                 ci_hi=row.estimate.ci_hi, seed=res["seed"])
            for row in rows_out
        ]
        return rows, None, None, dict(res.effective(), experiment="fluctuation")

    return _run_and_write(args, "fluctuation", defaults, run)


def _cmd_onepoint(args) -> int:
    defaults = {"m": 512, "n": 512, "trials": 5000, "seed": 1,
                "workers": _WORKER_DEFAULT, "z": DEFAULT_Z, "out": None}

    def run(res):
        out = onepoint_stats(res["m"], res["n"], res["trials"], res["seed"],
                             workers=res["workers"],
                             checkpoint_path=args.checkpoint,
                             progress=args.progress)
        rows = [_row(experiment="onepoint", m=res["m"], n=res["n"],
                     trials=out.trials, seed=res["seed"])]
        stats = {"mean_shift": out.mean_shift, "std": out.std,
                 "skew_sign": out.skew_sign,
                 "center": (math.sqrt(res["m"]) + math.sqrt(res["n"])) ** 2,
                 "histogram": {"edges": list(out.hist_edges),
                               "counts": list(out.hist_counts),
                               "unit": "n^(1/3)"}}
        return rows, None, stats, dict(res.effective(), experiment="onepoint")

    return _run_and_write(args, "onepoint", defaults, run)


def _cmd_segment_sup(args) -> int:
    defaults = {"n": 256, "x": (0.0, 1.0, 2.0, 3.0), "trials": 5000, "seed": 1,
                "workers": _WORKER_DEFAULT, "z": DEFAULT_Z, "out": None}

    def run(res):
        out = segment_sup_stats(res["n"], res["trials"], res["seed"],
                                x_values=res["x"], workers=res["workers"],
                                z=res["z"], checkpoint_path=args.checkpoint,
                                progress=args.progress)
        rows = [
            _row(experiment="segment-sup", n=res["n"], x=row.x,
                 trials=row.estimate.trials, successes=row.estimate.successes,
                 p_hat=row.estimate.p_hat, ci_lo=row.estimate.ci_lo,
                 ci_hi=row.estimate.ci_hi, seed=res["seed"])
            for row in out.tail_freqs
        ]
        stats = {"mean_sup_shift": out.mean_sup_shift,
                 "segment_halfwidth": out.segment_halfwidth}
        return rows, None, stats, dict(res.effective(), experiment="segment-sup")

    return _run_and_write(args, "segment-sup", defaults, run)


def _cmd_fit(args) -> int:
    try:
        rows = read_result_rows(args.in_path)
    except OSError as e:
        print(f"I/O error reading {args.in_path}: {e}", file=sys.stderr)
        return 1
    points = [(row["R"], row["p_hat"]) for row in rows
              if row["R"] is not None and row["p_hat"] is not None]
    try:
        fit = fit_power_law(points)
    except LppError as e:
        return _usage(str(e))
    print(f"slope={fit.slope!r} intercept={fit.intercept!r} "
          f"stderr={fit.stderr!r} points={fit.n_points}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump({"slope": fit.slope, "intercept": fit.intercept,
                       "stderr": fit.stderr, "n_points": fit.n_points}, f, indent=1)
            f.write("\n")
    return 0


def _usage(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    dispatch = {
        "oracle-check": _cmd_oracle_check,
        "tail": lambda a: _tail_like(a, "tail", estimate_coalescence_tail),
        "corollary-tail": lambda a: _tail_like(a, "corollary-tail",
                                               estimate_corollary_tail),
        "reduction-ratio": _cmd_reduction,
        "family": _cmd_family,
        "fluctuation": _cmd_fluctuation,
        "onepoint": _cmd_onepoint,
        "segment-sup": _cmd_segment_sup,
        "fit": _cmd_fit,
    }
    try:
        return dispatch[args.command](args)
    except LppError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
