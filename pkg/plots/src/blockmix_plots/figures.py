"""The five standard figures, one function each.

Every function takes CSV path(s) plus an output image path, validates the
columns it needs, and fails fast with FigureError on missing columns or
empty data.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


class FigureError(ValueError):
    pass


@dataclass
class FigureSpec:
    kind: str
    inputs: list[str]
    output: str
    options: Optional[dict] = None


def read_csv(path: str, required: list[str]) -> dict[str, list[str]]:
    if not os.path.exists(path):
        raise FigureError(f"missing input CSV: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise FigureError(f"{path}: empty file")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise FigureError(f"{path}: missing columns {missing}")
        cols: dict[str, list[str]] = {c: [] for c in reader.fieldnames}
        for row in reader:
            for c, v in row.items():
                cols[c].append(v)
    if not cols[required[0]]:
        raise FigureError(f"{path}: no data rows")
    return cols


def fit_log_survival(values: list[int]):
    """Identical arithmetic to the primary CLI's fit, so the slopes agree
    to float precision (checked to 1e-9 by the figure-regeneration test)."""
    n = len(values)
    top = max(values)
    pts = []
    for ell in range(1, top + 1):
        surv = sum(1 for v in values if v >= ell) / n
        if surv > 0.0:
            pts.append((float(ell), math.log(surv)))
    if len(pts) < 2:
        return 0.0, (pts[0][1] if pts else 0.0), pts
    xs = [a for a, _ in pts]
    ys = [b for _, b in pts]
    xbar = sum(xs) / len(xs)
    ybar = sum(ys) / len(ys)
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = ybar - slope * xbar
    return slope, intercept, pts


def render_dist_vs_time(csv_path: str, out_path: str) -> str:
    cols = read_csv(csv_path, ["t", "dist", "diff_size"])
    t = np.array([int(x) for x in cols["t"]])
    dist = np.array([float(x) for x in cols["dist"]])
    diff = np.array([int(x) for x in cols["diff_size"]])
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    pos = dist > 0
    ax1.semilogy(t[pos], dist[pos], lw=1.2, color="tab:blue", label="weighted distance")
    ax1.set_xlabel("step")
    ax1.set_ylabel("dist (log scale)", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(t, diff, lw=0.9, color="tab:orange", alpha=0.7, label="|disagreements|")
    ax2.set_ylabel("|X xor Y|", color="tab:orange")
    ax1.set_title("coupled chains: distance decay")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_coupling_time_scaling(csv_path: str, out_path: str) -> str:
    """Input rows (replica, vertex, steps, coalesced) possibly concatenated
    across sizes via an extra n column; falls back to one group."""
    cols = read_csv(csv_path, ["replica", "steps"])
    if "n" in cols:
        ns = np.array([int(x) for x in cols["n"]])
    else:
        ns = np.zeros(len(cols["steps"]), dtype=int)
    steps = np.array([int(x) for x in cols["steps"]])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    groups = sorted(set(ns))
    medians = []
    for n in groups:
        vals = steps[ns == n]
        ax.scatter([n] * len(vals) if n else range(len(vals)), vals, s=8, alpha=0.35)
        medians.append(np.median(vals))
    if groups and groups[0] > 0:
        ax.plot(groups, medians, "o-", color="black", label="median")
        ref = [n * math.log(n) for n in groups]
        scale = medians[0] / ref[0] if ref[0] else 1.0
        ax.plot(groups, [scale * r for r in ref], "--", color="gray", label="~ N log N")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.legend(loc="best")
    else:
        ax.set_xlabel("replica")
    ax.set_ylabel("coalescence steps")
    ax.set_title("coupling time scaling")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_tail_survival(csv_path: str, out_path: str, report_path: Optional[str] = None) -> str:
    cols = read_csv(csv_path, ["trial", "boundary_hits"])
    hits = [int(x) for x in cols["boundary_hits"]]
    slope, intercept, pts = fit_log_survival(hits)
    if report_path and os.path.exists(report_path):
        with open(report_path, "r", encoding="utf-8") as fh:
            rep = json.load(fh)
        reported = rep.get("tail", {}).get("slope")
        if reported is not None and abs(reported - slope) > 1e-9:
            raise FigureError(
                f"recomputed slope {slope!r} disagrees with reported {reported!r}"
            )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    n = len(hits)
    top = max(hits)
    levels = list(range(0, top + 1))
    surv = [sum(1 for v in hits if v >= ell) / n for ell in levels]
    ax.semilogy(levels, surv, "o", ms=4, label="empirical survival")
    if pts:
        xs = np.array([a for a, _ in pts])
        ax.semilogy(xs, np.exp(intercept + slope * xs), "--", label=f"fit slope {slope:.3f}")
    ax.set_xlabel("boundary hits threshold")
    ax.set_ylabel("P[|P| >= level]")
    ax.set_title("disagreement percolation tail")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_uniformity_hist(csv_path: str, out_path: str) -> str:
    cols = read_csv(csv_path, ["vertex", "avail", "threshold", "violated"])
    avail = np.array([int(x) for x in cols["avail"]])
    thr = np.array([float(x) for x in cols["threshold"]])
    violated = np.array([int(x) for x in cols["violated"]])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.2))
    ax1.hist(avail, bins=range(int(avail.min()), int(avail.max()) + 2), alpha=0.8)
    ax1.set_xlabel("|A(v)| at check events")
    ax1.set_ylabel("count")
    pos = thr > 0
    if pos.any():
        ax1.axvline(float(np.median(thr[pos])), color="red", ls="--", label="median threshold")
        ax1.legend(loc="best")
    per_vertex: dict[str, int] = {}
    for v, bad in zip(cols["vertex"], violated):
        per_vertex[v] = max(per_vertex.get(v, 0), int(bad))
    frac = sum(per_vertex.values()) / max(len(per_vertex), 1)
    ax2.bar(["ok", "violated"], [1 - frac, frac], color=["tab:green", "tab:red"])
    ax2.set_ylabel("fraction of probe vertices")
    ax2.set_title(f"ever-violating fraction = {frac:.3f}")
    ax1.set_title("local uniformity: available colors")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def render_beta_hist(csv_path: str, out_path: str) -> str:
    cols = read_csv(csv_path, ["vertex", "beta", "on_boundary"])
    beta = np.array([float(x) for x in cols["beta"]])
    on_b = np.array([int(x) for x in cols["on_boundary"]]) == 1
    fig, ax = plt.subplots(figsize=(7, 4.5))
    bins = np.linspace(0, 1.0001, 42)
    ax.hist(beta, bins=bins, alpha=0.6, label="all block vertices")
    if on_b.any():
        ax.hist(beta[on_b], bins=bins, alpha=0.7, label="boundary vertices")
    ax.axvline(0.5, color="red", ls="--", label="beta = 1/2 bound")
    ax.set_xlabel("beta weight")
    ax.set_ylabel("count")
    ax.set_title("beta-weight distribution")
    ax.legend(loc="best")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


RENDERERS = {
    "dist-vs-time": (render_dist_vs_time, "couple.csv"),
    "coupling-time": (render_coupling_time_scaling, "coupling-time.csv"),
    "tail-survival": (render_tail_survival, "tail.csv"),
    "uniformity": (render_uniformity_hist, "uniformity.csv"),
    "betas": (render_beta_hist, "betas.csv"),
}


def render(spec: FigureSpec) -> str:
    if spec.kind not in RENDERERS:
        raise FigureError(f"unknown figure kind {spec.kind!r}")
    fn, _ = RENDERERS[spec.kind]
    if spec.kind == "tail-survival":
        report = spec.options.get("report") if spec.options else None
        return fn(spec.inputs[0], spec.output, report_path=report)
    return fn(spec.inputs[0], spec.output)


def make_all(run_dir: str, out_dir: Optional[str] = None) -> list[str]:
    """Render every figure whose input CSV exists in the run directory."""
    out_dir = out_dir or run_dir
    os.makedirs(out_dir, exist_ok=True)
    made = []
    for kind, (fn, csv_name) in RENDERERS.items():
        src = os.path.join(run_dir, csv_name)
        if not os.path.exists(src):
            continue
        dst = os.path.join(out_dir, f"{kind}.png")
        if kind == "tail-survival":
            fn(src, dst, report_path=os.path.join(run_dir, "percolate-report.json"))
        else:
            fn(src, dst)
        made.append(dst)
    if not made:
        raise FigureError(f"no renderable CSVs found in {run_dir}")
    return made
