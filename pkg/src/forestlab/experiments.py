"""Experiment runners behind the CLI.

Every runner draws replica i from its own substream, and aggregates are
merged in replica order, so results never depend on the thread count. Data
artifacts (CSV sequences, JSON reports, forest dumps) are written atomically
via temp + rename and are byte-identical across reruns of the same config;
the manifest additionally records wall time and library versions, which are
the only non-reproducible fields anywhere.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from . import lattice
from .errors import BudgetError, ConfigError, StatisticalError
from .forest_analysis import (join_counts, ray_decompose, recurrence_diagnostic,
                              resistance_growth_profile)
from .graphs import counterexample_graph
from .lattice import LatticeBoxSpec
from .resample import statistical_resample_test
from .resistance import effective_resistance, wired_effective_resistance
from .rng import RngStream
from .stats import mean_ci
from .walks import kac_check, l_n_count, lerw_visit_profile, sample_cut_times, z_values
from .wilson import wilson_ust, write_forest, wsf_wired_box

EXPERIMENTS = ("sample", "resistance", "resample-test", "cuttime", "njl",
               "growth", "recurrence", "counterexample", "kac")

# random-walk chains for the return-time identity runner
_CYCLE3 = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
_TWO_STATE = [[0.7, 0.3], [0.2, 0.8]]


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat, JSON-friendly description of one experiment run.

    Fields left at None are filled with per-experiment defaults by run();
    fields an experiment does not use are ignored by its runner.
    """

    experiment: str
    out_dir: str = "out"
    seed: int = 0
    threads: int = 1
    budget_vertices: int | None = None
    plot: bool = True
    d: int | None = None
    radius: int | None = None
    radii: tuple | None = None
    horizon: int | None = None
    replicas: int | None = None
    ball_radius: int = 1
    n_values: tuple = (1, 2, 4, 8)
    anchor: int = 2
    m_max: int = 10
    truncation: float = 0.1
    z_truncation: int = 10_000
    significance: float = 1e-3
    dump_forests: bool = True


_DEFAULTS = {
    "sample": dict(d=5, radius=3, replicas=100),
    "resistance": dict(d=1, radius=8),
    "resample-test": dict(d=5, radius=4, replicas=100_000),
    "cuttime": dict(d=7, horizon=100_000, replicas=10_000),
    "njl": dict(d=8, radius=3, replicas=1_000),
    "growth": dict(d=5, radius=3, replicas=20),
    "recurrence": dict(d=8, radii=(1, 2)),
    "counterexample": dict(radii=(1, 2), replicas=4_000),
    "kac": dict(replicas=1_000_000),
}


def _resolved(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"unknown experiment '{cfg.experiment}'; "
                                        f"choose one of {', '.join(EXPERIMENTS)}")
    fills = {k: v for k, v in _DEFAULTS[cfg.experiment].items()
             if getattr(cfg, k) is None}
    cfg = replace(cfg, **fills)
    if cfg.radii is None and cfg.radius is not None and \
            cfg.experiment in ("resistance", "recurrence", "counterexample"):
        cfg = replace(cfg, radii=tuple(range(1, cfg.radius + 1)))

    def req(name, ok, msg):
        if not ok:
            raise ConfigError(name, msg)

    req("seed", isinstance(cfg.seed, int) and cfg.seed >= 0, "must be a nonnegative integer")
    req("threads", isinstance(cfg.threads, int) and cfg.threads >= 1, "must be >= 1")
    req("budget_vertices", cfg.budget_vertices is None or cfg.budget_vertices >= 1,
        "must be >= 1 when given")
    if cfg.replicas is not None:
        req("replicas", cfg.replicas >= 1, "must be >= 1")
    if cfg.d is not None:
        req("d", cfg.d >= 1, "must be >= 1")
    if cfg.radius is not None:
        req("radius", cfg.radius >= 1, "must be >= 1")
    if cfg.radii is not None:
        req("radii", len(cfg.radii) > 0 and all(r >= 1 for r in cfg.radii)
            and list(cfg.radii) == sorted(cfg.radii), "must be ascending integers >= 1")
    if cfg.horizon is not None:
        req("horizon", cfg.horizon >= 10, "must be >= 10")
    req("truncation", 0.0 <= cfg.truncation < 1.0, "must lie in [0, 1)")
    req("ball_radius", cfg.ball_radius >= 1, "must be >= 1")
    req("anchor", cfg.anchor >= 1, "must be >= 1")
    req("m_max", cfg.m_max >= 2, "must be >= 2")
    req("n_values", len(cfg.n_values) > 0 and all(n >= 1 for n in cfg.n_values),
        "must be positive integers")
    req("z_truncation", cfg.z_truncation >= 10, "must be >= 10")
    if cfg.experiment == "cuttime":
        req("d", cfg.d >= 7, "cut-time bounds need d >= 7 for the Z_2 tail")
    if cfg.experiment == "resample-test":
        req("ball_radius", cfg.ball_radius * 4 <= cfg.radius,
            "must be at most a quarter of the box radius")
    return cfg


# ---------------------------------------------------------------------------
# artifact plumbing

def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_json(path: Path, obj) -> None:
    _write_atomic(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else repr(x) if isinstance(x, float) else x
                    for x in row])
    _write_atomic(path, buf.getvalue())


def _replica_map(fn, count: int, threads: int, batch: int | None = None):
    """Yield fn(0..count-1) in index order; batching bounds in-flight memory."""
    if threads <= 1:
        for i in range(count):
            yield fn(i)
        return
    batch = batch if batch is not None else 4 * threads
    with ThreadPoolExecutor(max_workers=threads) as ex:
        for lo in range(0, count, batch):
            yield from ex.map(fn, range(lo, min(lo + batch, count)))


def _versions() -> dict:
    import numba
    import scipy
    try:
        from importlib.metadata import version
        own = version("forestlab")
    except Exception:
        own = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__,
            "forestlab": own}


def run(config: ExperimentConfig) -> int:
    """Validate, run, and write artifacts plus a manifest. Returns exit code."""
    try:
        cfg = _resolved(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    try:
        summary, artifacts = _RUNNERS[cfg.experiment](cfg, out)
    except BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    cfg_dict = asdict(cfg)
    for k, v in cfg_dict.items():
        if isinstance(v, tuple):
            cfg_dict[k] = list(v)
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg_dict,
        "config_sha256": hashlib.sha256(
            json.dumps(cfg_dict, sort_keys=True).encode()).hexdigest(),
        "seed": cfg.seed,
        "versions": _versions(),
        "wall_time_s": round(time.monotonic() - start, 3),
        "censoring": summary.pop("censoring", {}),
        "artifacts": sorted(artifacts),
        "summary": summary,
    }
    _write_json(out / "manifest.json", manifest)
    return 0


def _maybe_plot(cfg: ExperimentConfig, artifacts: list, name: str, fn, *args) -> None:
    if not cfg.plot:
        return
    from . import plotting
    getattr(plotting, fn)(*args)
    artifacts.append(name)


# ---------------------------------------------------------------------------
# runners

def _run_sample(cfg: ExperimentConfig, out: Path):
    spec = LatticeBoxSpec(cfg.d, cfg.radius, boundary="wired")
    rng = RngStream(cfg.seed)
    origin = lattice.origin_id(spec)
    dump_dir = out / "forests"
    if cfg.dump_forests:
        dump_dir.mkdir(exist_ok=True)

    def one(i):
        forest = wsf_wired_box(spec, rng.substream(i), cfg.budget_vertices)
        comps = forest.components()
        tree = int((comps.labels == comps.labels[origin]).sum())
        return forest, comps.count, tree

    rows = []
    artifacts = []
    for i, (forest, ncomp, tree) in enumerate(
            _replica_map(one, cfg.replicas, cfg.threads)):
        if cfg.dump_forests:
            name = f"forest_{i:05d}.txt"
            tmp = dump_dir / (name + ".tmp")
            write_forest(forest, str(tmp))
            os.replace(tmp, dump_dir / name)
            artifacts.append(f"forests/{name}")
        rows.append((i, ncomp, tree))
    _write_csv(out / "samples.csv", ["replica", "components", "origin_tree_size"], rows)
    artifacts.append("samples.csv")
    sizes = [r[2] for r in rows]
    _maybe_plot(cfg, artifacts, "sample.png", "plot_sample", out / "sample.png", sizes)
    mean_comp = float(np.mean([r[1] for r in rows]))
    return {"replicas": cfg.replicas, "mean_components": mean_comp,
            "mean_origin_tree_size": float(np.mean(sizes))}, artifacts


def _run_resistance(cfg: ExperimentConfig, out: Path):
    specs = [LatticeBoxSpec(cfg.d, r, boundary="wired") for r in cfg.radii]
    x = (0,) * cfg.d
    y = (1,) + (0,) * (cfg.d - 1)
    values = wired_effective_resistance(specs, x, y)
    rows = [(r, float(v)) for r, v in zip(cfg.radii, values)]
    _write_csv(out / "resistance.csv", ["radius", "resistance"], rows)
    artifacts = ["resistance.csv"]
    _maybe_plot(cfg, artifacts, "resistance.png", "plot_radius_series",
                out / "resistance.png", list(cfg.radii), [v for _, v in rows],
                "wired effective resistance across the first bond")
    return {"d": cfg.d, "radii": list(cfg.radii), "values": [v for _, v in rows]}, artifacts


def _run_resample_test(cfg: ExperimentConfig, out: Path):
    spec = LatticeBoxSpec(cfg.d, cfg.radius, boundary="wired")
    report = statistical_resample_test(spec, cfg.ball_radius, cfg.replicas,
                                       RngStream(cfg.seed),
                                       budget_vertices=cfg.budget_vertices)
    _write_json(out / "resample_test.json", report.as_dict())
    rows = [(r.edge, r.freq_direct, r.freq_resampled, r.z)
            for r in report.edge_marginals]
    _write_csv(out / "edge_marginals.csv",
               ["edge", "freq_direct", "freq_resampled", "z"], rows)
    artifacts = ["resample_test.json", "edge_marginals.csv"]
    _maybe_plot(cfg, artifacts, "resample_test.png", "plot_resample",
                out / "resample_test.png", report)
    return {"tv": report.tv.observed, "tv_threshold": report.tv.threshold,
            "coarsened": report.coarsened, "passed": report.passed}, artifacts


def _run_cuttime(cfg: ExperimentConfig, out: Path):
    zv = z_values(cfg.d, cfg.z_truncation)
    rng = RngStream(cfg.seed)
    n_values = list(cfg.n_values)

    def one(i):
        sub = rng.substream(i)
        cts = sample_cut_times(cfg.d, cfg.horizon, sub.substream(0))
        profile = lerw_visit_profile(cfg.d, cfg.horizon, sub.substream(1))
        t_vals, t_cens, l_vals, l_cens = [], [], [], []
        for n in n_values:
            t, cen = cts.t_n(n)
            t_vals.append(t)
            t_cens.append(cen)
            l, cen = l_n_count(profile, n)
            l_vals.append(l)
            l_cens.append(cen)
        return t_vals, t_cens, l_vals, l_cens

    per_n_t = [[] for _ in n_values]
    per_n_l = [[] for _ in n_values]
    cens_t = np.zeros(len(n_values), dtype=np.int64)
    cens_l = np.zeros(len(n_values), dtype=np.int64)
    for t_vals, t_cens, l_vals, l_cens in _replica_map(one, cfg.replicas, cfg.threads):
        for j in range(len(n_values)):
            if t_cens[j]:
                cens_t[j] += 1
            else:
                per_n_t[j].append(t_vals[j])
            if l_cens[j]:
                cens_l[j] += 1
            else:
                per_n_l[j].append(l_vals[j])

    def _agg(values):
        if not values:
            return float("nan"), float("inf")
        return mean_ci(np.array(values, dtype=np.float64))

    rows = []
    checks = []
    for j, n in enumerate(n_values):
        t_mean, t_ci = _agg(per_n_t[j])
        l_mean, l_ci = _agg(per_n_l[j])
        t_bound = zv.z1_upper * n + zv.z2_upper
        l_bound = zv.z1_upper * n + zv.z2_upper + 1.0
        rows.append((n, t_mean, t_ci, float(cens_t[j]) / cfg.replicas, t_bound,
                     l_mean, l_ci, float(cens_l[j]) / cfg.replicas, l_bound))
        checks.append({"n": n, "t_ok": bool(t_mean <= t_bound + t_ci),
                       "l_ok": bool(l_mean <= l_bound + l_ci)})
    _write_csv(out / "cuttime.csv",
               ["n", "t_mean", "t_ci", "t_censored_rate", "t_bound",
                "l_mean", "l_ci", "l_censored_rate", "l_bound"], rows)
    _write_json(out / "cuttime_bounds.json",
                {"z1_upper": zv.z1_upper, "z2_upper": zv.z2_upper,
                 "z_truncation": cfg.z_truncation, "checks": checks})
    artifacts = ["cuttime.csv", "cuttime_bounds.json"]
    _maybe_plot(cfg, artifacts, "cuttime.png", "plot_cuttime",
                out / "cuttime.png", rows)
    worst = max(max(float(cens_t[j]), float(cens_l[j])) for j in range(len(n_values)))
    return {"checks": checks,
            "censoring": {"t_rates": (cens_t / cfg.replicas).tolist(),
                          "l_rates": (cens_l / cfg.replicas).tolist(),
                          "max_rate": worst / cfg.replicas}}, artifacts


def _run_njl(cfg: ExperimentConfig, out: Path):
    spec = LatticeBoxSpec(cfg.d, cfg.radius, boundary="wired")
    rng = RngStream(cfg.seed)
    origin = lattice.origin_id(spec)
    ms = list(range(1, cfg.m_max + 1))

    def one(i):
        forest = wsf_wired_box(spec, rng.substream(i), cfg.budget_vertices)
        decomp = ray_decompose(forest, origin, cfg.truncation)
        if decomp.trunc_index <= cfg.anchor:
            return None
        stats = join_counts(spec, decomp, cfg.anchor)
        return [stats.tail_sum(m) for m in ms]

    totals = np.zeros(len(ms), dtype=np.int64)
    squares = np.zeros(len(ms), dtype=np.float64)
    kept = 0
    clipped = 0
    for tails in _replica_map(one, cfg.replicas, cfg.threads):
        if tails is None:
            clipped += 1
            continue
        kept += 1
        arr = np.array(tails, dtype=np.int64)
        totals += arr
        squares += arr.astype(np.float64) ** 2
    if kept == 0:
        raise StatisticalError("no replica produced a ray past the anchor; "
                               "lower the anchor or enlarge the box")
    means = totals / kept
    var = np.maximum(squares / kept - means ** 2, 0.0)
    cis = 3.29 * np.sqrt(var / kept)
    # envelope C*n/m fitted by the max ratio, so it dominates every point
    c_hat = float((means * np.array(ms)).max() / cfg.anchor)
    envelope = c_hat * cfg.anchor / np.array(ms, dtype=np.float64)
    eps = 0.5 / kept
    log_resid = np.log(envelope + eps) - np.log(means + eps)
    slope = float(np.polyfit(ms, log_resid, 1)[0])
    monotone = bool(np.all(np.diff(totals) <= 0))
    rows = [(m, float(means[j]), float(cis[j]), float(envelope[j]), float(log_resid[j]))
            for j, m in enumerate(ms)]
    _write_csv(out / "njl_tails.csv",
               ["m", "mean_tail", "ci", "envelope", "log_residual"], rows)
    _write_json(out / "njl_shape.json",
                {"anchor": cfg.anchor, "c_hat": c_hat, "log_residual_slope": slope,
                 "nonincreasing": monotone, "kept": kept, "clipped": clipped})
    artifacts = ["njl_tails.csv", "njl_shape.json"]
    _maybe_plot(cfg, artifacts, "njl.png", "plot_njl", out / "njl.png",
                ms, means.tolist(), cis.tolist(), envelope.tolist())
    return {"c_hat": c_hat, "log_residual_slope": slope, "nonincreasing": monotone,
            "censoring": {"clipped_rate": clipped / cfg.replicas}}, artifacts


def _run_growth(cfg: ExperimentConfig, out: Path):
    spec = LatticeBoxSpec(cfg.d, cfg.radius, boundary="wired")
    rng = RngStream(cfg.seed)
    origin = lattice.origin_id(spec)

    def one(i):
        forest = wsf_wired_box(spec, rng.substream(i), cfg.budget_vertices)
        decomp = ray_decompose(forest, origin, cfg.truncation)
        if decomp.trunc_index < 1:
            return None
        return resistance_growth_profile(spec, forest, origin,
                                         truncation=cfg.truncation)

    rows = []
    clipped = 0
    min_lower_margin = np.inf
    min_upper_margin = np.inf
    for i, profile in enumerate(_replica_map(one, cfg.replicas, cfg.threads)):
        if profile is None:
            clipped += 1
            continue
        for n, r, lower in profile:
            rows.append((i, int(n), float(r), float(lower), float(n)))
            min_lower_margin = min(min_lower_margin, float(r - lower))
            min_upper_margin = min(min_upper_margin, float(n - r))
    _write_csv(out / "growth.csv",
               ["replica", "n", "resistance", "lower_bound", "upper_bound"], rows)
    artifacts = ["growth.csv"]
    _maybe_plot(cfg, artifacts, "growth.png", "plot_growth", out / "growth.png", rows)
    return {"min_lower_margin": float(min_lower_margin) if rows else None,
            "min_upper_margin": float(min_upper_margin) if rows else None,
            "rows": len(rows),
            "censoring": {"clipped_rate": clipped / cfg.replicas}}, artifacts


def _run_recurrence(cfg: ExperimentConfig, out: Path):
    specs = [LatticeBoxSpec(cfg.d, r, boundary="wired") for r in cfg.radii]
    diag = recurrence_diagnostic(specs, (0,) * cfg.d, RngStream(cfg.seed),
                                 truncation=cfg.truncation)
    rows = [(int(r), float(v)) for r, v in zip(diag.radii, diag.resistance)]
    _write_csv(out / "recurrence.csv", ["radius", "escape_resistance"], rows)
    sum_rows = []
    for r, sums in zip(diag.radii.tolist(), diag.cut_partial_sums):
        for k, s in enumerate(sums.tolist()):
            sum_rows.append((int(r), k, float(s)))
    _write_csv(out / "cut_partial_sums.csv", ["radius", "k", "partial_sum"], sum_rows)
    artifacts = ["recurrence.csv", "cut_partial_sums.csv"]
    _maybe_plot(cfg, artifacts, "recurrence.png", "plot_radius_series",
                out / "recurrence.png", [r for r, _ in rows], [v for _, v in rows],
                "escape resistance of the origin tree")
    return {"radii": [r for r, _ in rows],
            "escape_resistance": [v for _, v in rows]}, artifacts


def _run_counterexample(cfg: ExperimentConfig, out: Path):
    rng = RngStream(cfg.seed)
    rows = []
    for idx, r in enumerate(cfg.radii):
        pair = counterexample_graph(r, budget_vertices=cfg.budget_vertices)
        merged = counterexample_graph(r, merge_wired=True,
                                      budget_vertices=cfg.budget_vertices)
        exact = effective_resistance(merged.graph, [pair.origin_a], [pair.origin_b])
        roots = [pair.wired_a, pair.wired_b]
        stream = rng.substream(idx)

        def one(i):
            forest = wilson_ust(pair.graph, roots, stream.substream(i))
            used = forest.parent_edge[forest.parent >= 0]
            return bool((used == pair.bridge_edge).any())

        hits = sum(1 for h in _replica_map(one, cfg.replicas, cfg.threads) if h)
        freq = hits / cfg.replicas
        se = (exact * (1.0 - exact) / cfg.replicas) ** 0.5
        z = (freq - exact) / se if se > 0 else 0.0
        rows.append((r, float(exact), float(freq), float(z), cfg.replicas))
    _write_csv(out / "counterexample.csv",
               ["radius", "bridge_resistance", "bridge_frequency", "z", "replicas"],
               rows)
    artifacts = ["counterexample.csv"]
    _maybe_plot(cfg, artifacts, "counterexample.png", "plot_counterexample",
                out / "counterexample.png", rows)
    return {"max_abs_z": max(abs(row[3]) for row in rows),
            "rows": [list(row) for row in rows]}, artifacts


def _run_kac(cfg: ExperimentConfig, out: Path):
    rng = RngStream(cfg.seed)
    cases = [("cycle3", _CYCLE3, [0]),
             ("two_state", _TWO_STATE, [0]),
             ("two_state_alt", _TWO_STATE, [1])]
    rows = []
    for i, (name, P, event) in enumerate(cases):
        rep = kac_check(P, event, cfg.replicas, rng.substream(i))
        rows.append((name, rep.inverse_probability, rep.mean_return,
                     rep.half_width, rep.samples, rep.within_ci))
    _write_csv(out / "kac.csv",
               ["chain", "inverse_probability", "mean_return", "ci", "samples",
                "within_ci"], rows)
    artifacts = ["kac.csv"]
    _maybe_plot(cfg, artifacts, "kac.png", "plot_kac", out / "kac.png", rows)
    return {"all_within_ci": all(bool(r[5]) for r in rows),
            "cases": [list(r) for r in rows]}, artifacts


_RUNNERS = {
    "sample": _run_sample,
    "resistance": _run_resistance,
    "resample-test": _run_resample_test,
    "cuttime": _run_cuttime,
    "njl": _run_njl,
    "growth": _run_growth,
    "recurrence": _run_recurrence,
    "counterexample": _run_counterexample,
    "kac": _run_kac,
}
