"""Figure rendering for the experiment runners.

Each function draws one PNG next to the delimited artifact it illustrates.
Figures are decoration on top of the CSV/JSON data, never a data source;
everything here is safe to skip with --no-plot.
"""
from __future__ import annotations

import os
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    fig.savefig(tmp, format="png", dpi=120)
    plt.close(fig)
    os.replace(tmp, path)


def plot_sample(path, sizes) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(sizes, bins=min(40, max(5, len(set(sizes)))), color="tab:green",
            edgecolor="black", linewidth=0.4)
    ax.set_xlabel("origin tree size")
    ax.set_ylabel("replicas")
    ax.set_title("tree of the origin across forest samples")
    fig.tight_layout()
    _save(fig, Path(path))


def plot_radius_series(path, radii, values, title) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(radii, values, marker="o", color="tab:blue")
    ax.set_xlabel("box radius")
    ax.set_ylabel("effective resistance")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, Path(path))


def plot_resample(path, report) -> None:
    edges = [r.edge for r in report.edge_marginals]
    x = np.arange(len(edges))
    fig, ax = plt.subplots(figsize=(7, 4))
    w = 0.4
    ax.bar(x - w / 2, [r.freq_direct for r in report.edge_marginals], w,
           label="direct", color="tab:blue")
    ax.bar(x + w / 2, [r.freq_resampled for r in report.edge_marginals], w,
           label="resampled", color="tab:orange")
    ax.set_xticks(x)
    ax.set_xticklabels([str(e) for e in edges], rotation=90, fontsize=7)
    ax.set_xlabel("ball edge id")
    ax.set_ylabel("inclusion frequency")
    ax.set_title(f"pipeline marginals, TV={report.tv.observed:.2e} "
                 f"(null 99.9%: {report.tv.threshold:.2e})")
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(path))


def plot_cuttime(path, rows) -> None:
    rows = list(rows)
    ns = [r[0] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    for ax, off, label in ((axes[0], 1, "cut time T_n"), (axes[1], 5, "visit count L_n")):
        means = [r[off] for r in rows]
        cis = [r[off + 1] for r in rows]
        bounds = [r[off + 3] for r in rows]
        ax.errorbar(ns, means, yerr=cis, fmt="o", capsize=3, label="empirical mean")
        ax.plot(ns, bounds, "--", color="tab:red", label="linear bound")
        ax.set_xlabel("n")
        ax.set_title(label)
        ax.grid(alpha=0.3)
        ax.legend()
    fig.tight_layout()
    _save(fig, Path(path))


def plot_njl(path, ms, means, cis, envelope) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(ms, means, yerr=cis, fmt="o", capsize=3, label="mean tail sum")
    ax.plot(ms, envelope, "--", color="tab:red", label="fitted n/m envelope")
    ax.set_xlabel("m")
    ax.set_ylabel("mean of the joined-edge tail sum")
    ax.set_yscale("log")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(path))


def plot_growth(path, rows) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    by_rep: dict = {}
    for rep, n, r, lower, upper in rows:
        by_rep.setdefault(rep, []).append((n, r))
    for rep, pts in by_rep.items():
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], color="tab:blue",
                alpha=0.35, linewidth=0.8)
    if rows:
        n_max = max(r[1] for r in rows)
        ax.plot([1, n_max], [1, n_max], "--", color="tab:red", label="upper bound n")
        ax.legend()
    ax.set_xlabel("ray index n")
    ax.set_ylabel("resistance to the ray")
    ax.set_title("closed-tree resistance growth, one curve per replica")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, Path(path))


def plot_counterexample(path, rows) -> None:
    radii = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(radii, [r[1] for r in rows], marker="s", color="tab:red",
            label="effective resistance")
    ax.plot(radii, [r[2] for r in rows], marker="o", linestyle="none",
            color="tab:blue", label="empirical bridge frequency")
    ax.set_xlabel("box radius")
    ax.set_ylabel("bridge inclusion probability")
    ax.set_title("bridge edge between two wired boxes")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(path))


def plot_kac(path, rows) -> None:
    names = [r[0] for r in rows]
    x = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(6, 4))
    w = 0.4
    ax.bar(x - w / 2, [r[1] for r in rows], w, label="1 / P[event]", color="tab:red")
    ax.bar(x + w / 2, [r[2] for r in rows], w, yerr=[r[3] for r in rows],
           capsize=3, label="mean return time", color="tab:blue")
    ax.set_xticks(x)
    ax.set_xticklabels(names)
    ax.set_ylabel("steps")
    ax.set_title("return-time identity")
    ax.legend()
    fig.tight_layout()
    _save(fig, Path(path))
