"""Render figures from simulation result files.

This package reads only the frozen CSV schema (and its JSON mirror) written
by the simulation CLI; it never imports the simulation library.  The
log-log tail figure re-fits the power law with the same least-squares
arithmetic the CLI uses, so the annotated slope matches the recorded one.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SCHEMA_COLUMNS = ["experiment", "k", "n", "R", "m", "r", "s", "x",
                  "trials", "successes", "p_hat", "ci_lo", "ci_hi",
                  "seed", "wall_time_s"]

_INT_COLUMNS = {"trials", "successes", "seed", "k", "n", "m", "r", "s"}

KINDS = ("tail-loglog", "fluct-decay", "onepoint-hist")

DEFAULT_REFERENCE_SLOPE = -2.0 / 3.0


class PlotError(Exception):
    pass


class SchemaError(PlotError, ValueError):
    pass


class EmptyInputError(PlotError, ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    input_csv: str
    kind: str
    output: str
    reference_slope: float = DEFAULT_REFERENCE_SLOPE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown plot kind {self.kind!r}; use one of {KINDS}")


@dataclass
class RenderResult:
    output: str
    fitted_slope: float | None = None
    fitted_stderr: float | None = None
    fitted_intercept: float | None = None
    annotation: str = ""
    notice: str | None = None
    data: dict = field(default_factory=dict)


def read_rows(path: str) -> list[dict]:
    """Parse a result CSV, enforcing the frozen column schema."""
    with open(path) as f:
        lines = [ln.rstrip("\n") for ln in f if ln.strip()]
    if not lines:
        raise SchemaError(f"{path} is empty, no header")
    header = lines[0].split(",")
    missing = [c for c in SCHEMA_COLUMNS if c not in header]
    if missing:
        raise SchemaError(f"{path} missing column(s): {', '.join(missing)}")
    if header != SCHEMA_COLUMNS:
        raise SchemaError(f"{path} columns differ from the frozen schema")
    rows = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = {}
        for col, val in zip(SCHEMA_COLUMNS, vals):
            if val == "":
                row[col] = None
            elif col == "experiment":
                row[col] = val
            elif col in _INT_COLUMNS:
                row[col] = int(val)
            else:
                row[col] = float(val)
        rows.append(row)
    if not rows:
        raise EmptyInputError(f"{path} holds no data rows")
    return rows


def fit_loglog(R, p) -> tuple[float, float, float]:
    """Unweighted least squares on (ln R, ln p); same arithmetic as the CLI."""
    x = np.log(np.asarray(R, dtype=np.float64))
    y = np.log(np.asarray(p, dtype=np.float64))
    xbar = float(x.sum() / len(x))
    ybar = float(y.sum() / len(y))
    sxx = float(((x - xbar) ** 2).sum())
    slope = float(((x - xbar) * (y - ybar)).sum() / sxx)
    intercept = ybar - slope * xbar
    resid = y - (intercept + slope * x)
    dof = len(x) - 2
    s2 = float((resid ** 2).sum() / dof) if dof > 0 else 0.0
    stderr = math.sqrt(max(s2, 0.0) / sxx)
    return slope, intercept, stderr


def _json_mirror_path(csv_path: str) -> str:
    root, ext = os.path.splitext(csv_path)
    if ext.lower() == ".json":
        return csv_path
    return (root if ext.lower() == ".csv" else csv_path) + ".json"


def _save(fig, spec: PlotSpec) -> None:
    # strip volatile metadata so regeneration is byte-stable
    if spec.output.lower().endswith(".svg"):
        plt.rcParams["svg.hashsalt"] = "lppplots"
        fig.savefig(spec.output, metadata={"Date": None})
    else:
        fig.savefig(spec.output)
    plt.close(fig)


def _render_tail_loglog(spec: PlotSpec) -> RenderResult:
    rows = [r for r in read_rows(spec.input_csv)
            if r["R"] is not None and r["p_hat"] is not None]
    if not rows:
        raise EmptyInputError(f"{spec.input_csv} has no (R, p_hat) rows")
    R = np.array([r["R"] for r in rows])
    p = np.array([r["p_hat"] for r in rows])
    lo = np.array([r["ci_lo"] if r["ci_lo"] is not None else r["p_hat"] for r in rows])
    hi = np.array([r["ci_hi"] if r["ci_hi"] is not None else r["p_hat"] for r in rows])

    res = RenderResult(spec.output)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    pos = p > 0
    yerr = np.vstack([np.maximum(p - lo, 0.0), np.maximum(hi - p, 0.0)])
    ax.errorbar(R[pos], p[pos], yerr=yerr[:, pos], fmt="o", ms=4, capsize=3,
                label="estimate (Wilson 95%)")
    res.data["R"] = R[pos].tolist()
    res.data["p_hat"] = p[pos].tolist()

    grid_R = np.geomspace(R[pos].min(), R[pos].max(), 64) if pos.any() else None
    if pos.sum() >= 3:
        slope, intercept, stderr = fit_loglog(R[pos], p[pos])
        res.fitted_slope, res.fitted_intercept, res.fitted_stderr = slope, intercept, stderr
        fit_p = np.exp(intercept + slope * np.log(grid_R))
        ax.plot(grid_R, fit_p, "-", lw=1.2, label="least-squares fit")
        res.annotation = f"fit: slope = {slope:.3f} ± {stderr:.3f}"
        res.data["fit_line"] = fit_p.tolist()
    else:
        res.notice = "fit omitted: need at least 3 rows with p_hat > 0"
        res.annotation = "fit omitted (insufficient data)"
    if grid_R is not None:
        anchor_R, anchor_p = R[pos][0], p[pos][0]
        ref = anchor_p * (grid_R / anchor_R) ** spec.reference_slope
        ax.plot(grid_R, ref, "--", lw=1.0,
                label=f"reference slope {spec.reference_slope:.3f}")
        res.data["ref_line"] = ref.tolist()
        res.data["grid_R"] = grid_R.tolist()

    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("R")
    ax.set_ylabel("exceedance rate")
    ax.set_title("coalescence tail")
    ax.text(0.03, 0.05, res.annotation, transform=ax.transAxes, fontsize=9)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, spec)
    return res


def _render_fluct_decay(spec: PlotSpec) -> RenderResult:
    rows = [r for r in read_rows(spec.input_csv)
            if r["x"] is not None and r["p_hat"] is not None]
    if not rows:
        raise EmptyInputError(f"{spec.input_csv} has no (x, p_hat) rows")
    x = np.array([r["x"] for r in rows])
    p = np.array([r["p_hat"] for r in rows])
    lo = np.array([r["ci_lo"] if r["ci_lo"] is not None else r["p_hat"] for r in rows])
    hi = np.array([r["ci_hi"] if r["ci_hi"] is not None else r["p_hat"] for r in rows])

    res = RenderResult(spec.output, data={"x": x.tolist(), "p_hat": p.tolist()})
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    yerr = np.vstack([np.maximum(p - lo, 0.0), np.maximum(hi - p, 0.0)])
    ax.errorbar(x, p, yerr=yerr, fmt="o-", ms=4, capsize=3)
    if (p > 0).all():
        ax.set_yscale("log")
    ax.set_xlabel("threshold x (transversal units)")
    ax.set_ylabel("exceedance rate")
    ax.set_title("transversal fluctuation decay")
    res.annotation = f"{len(rows)} thresholds"
    fig.tight_layout()
    _save(fig, spec)
    return res


def _render_onepoint_hist(spec: PlotSpec) -> RenderResult:
    mirror = _json_mirror_path(spec.input_csv)
    if not os.path.exists(mirror):
        raise EmptyInputError(f"no JSON mirror at {mirror} (histogram lives there)")
    with open(mirror) as f:
        doc = json.load(f)
    hist = doc.get("stats", {}).get("histogram")
    if not hist or not any(hist.get("counts", [])):
        raise EmptyInputError(f"{mirror} carries no histogram counts")
    edges = np.asarray(hist["edges"], dtype=float)
    counts = np.asarray(hist["counts"], dtype=float)
    inner = counts[1:-1]  # first/last slots are under/overflow
    stats = doc.get("stats", {})

    res = RenderResult(spec.output,
                       data={"edges": edges.tolist(), "counts": inner.tolist(),
                             "underflow": float(counts[0]), "overflow": float(counts[-1])})
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    widths = np.diff(edges)
    ax.bar(edges[:-1], inner, width=widths, align="edge", edgecolor="none")
    ann = []
    if "mean_shift" in stats:
        ann.append(f"mean shift = {stats['mean_shift']:.2f}")
    if "std" in stats:
        ann.append(f"std = {stats['std']:.2f}")
    res.annotation = ", ".join(ann)
    ax.text(0.03, 0.93, res.annotation, transform=ax.transAxes, fontsize=9)
    ax.set_xlabel("(T - (sqrt(m) + sqrt(n))^2) / n^(1/3)")
    ax.set_ylabel("trials")
    ax.set_title("one-point passage time fluctuation")
    fig.tight_layout()
    _save(fig, spec)
    return res


def render(spec: PlotSpec) -> RenderResult:
    """Render the figure described by spec; returns what was drawn."""
    if spec.kind == "tail-loglog":
        return _render_tail_loglog(spec)
    if spec.kind == "fluct-decay":
        return _render_fluct_decay(spec)
    return _render_onepoint_hist(spec)
