"""Experiment orchestration: dispatch, resource refusal, manifests and outputs.

Every experiment produces one or more CSV tables plus a JSON summary::

    {"schema_version": 1, "experiment": ..., "manifest": {...},
     "estimates": {...}, "flags": {...}}

Only ``manifest.wall_time_s`` and ``manifest.stage_seconds`` vary between
reruns of the same config.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from lerw import __version__
from lerw.config import ExperimentConfig
from lerw.erasure import erase_windowed, window_length
from lerw.estimators import (
    curve_covering_sigma,
    default_beta_grid,
    estimate_q,
    estimate_survival,
    estimate_z_decay,
    estimate_zeta,
    margin_steps,
    rho_ratio_experiment,
    sigma_scaling_experiment,
    window_for,
    _grid_of,
)
from lerw.stats import (
    clt_experiment,
    compare_lew_experiment,
    compare_path_steps,
    tau_clt_experiment,
)
from lerw.walk import PATH_CAP, derive_stream, generate_walk

SCHEMA_VERSION = 1
DEFAULT_ZETA_GRID = tuple(2**k for k in range(6, 13))


class ResourceError(RuntimeError):
    """The requested work exceeds the configured budget; raised before any sampling."""


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]


@dataclass
class RunManifest:
    config: dict
    artifact_version: str
    wall_time_s: float = 0.0
    stage_seconds: dict = field(default_factory=dict)
    stages: list = field(default_factory=list)
    censoring: dict = field(default_factory=dict)
    derived: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "artifact_version": self.artifact_version,
            "wall_time_s": self.wall_time_s,
            "stage_seconds": self.stage_seconds,
            "stages": self.stages,
            "censoring": self.censoring,
            "derived": self.derived,
            "warnings": self.warnings,
        }


@dataclass
class ExperimentResult:
    manifest: RunManifest
    tables: dict[str, Table]
    estimates: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.manifest.config["experiment"],
            "manifest": self.manifest.to_dict(),
            "estimates": self.estimates,
            "flags": self.flags,
        }


def coord_names(dim: int) -> list[str]:
    return ["x", "y", "z"][:dim] if dim <= 3 else [f"x{k + 1}" for k in range(dim)]


class _Budget:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.planned = 0

    def claim(self, replicas: int, n_steps: int, what: str) -> None:
        if n_steps + 1 > PATH_CAP:
            raise ResourceError(f"{what}: path of {n_steps + 1} points exceeds cap {PATH_CAP}")
        self.planned += replicas * n_steps
        if self.planned > self.cfg.max_total_steps:
            raise ResourceError(
                f"{what}: {self.planned} planned walk steps exceed max_total_steps={self.cfg.max_total_steps}"
            )


def _regime_warnings(cfg: ExperimentConfig, zeta: float | None, manifest: RunManifest) -> None:
    if zeta is None or math.isnan(zeta):
        return
    bound = 1.0 / (1.0 + 2.0 * zeta)
    manifest.derived["gaussian_regime_alpha_bound"] = bound
    manifest.derived["zeta_for_bound"] = zeta
    if cfg.alpha >= bound:
        manifest.warnings.append(
            f"alpha={cfg.alpha} is at or above 1/(1+2 zeta)={bound:.4f}; outside the proven Gaussian regime"
        )


def _censor_entry(censored: np.ndarray, total: int) -> dict:
    return {
        "count": int(censored.size),
        "fraction": censored.size / total if total else 0.0,
        "replicas": [int(i) for i in censored],
    }


def _stage(manifest: RunManifest, name: str, lo: int, hi: int, n_steps: int | None = None, **extra) -> None:
    entry = {"name": name, "streams": [lo, hi - 1]}
    if n_steps is not None:
        entry["path_steps"] = int(n_steps)
    entry.update(extra)
    manifest.stages.append(entry)


def _survival_table(curve) -> Table:
    return Table(["n", "a_hat", "stderr", "replicas"], list(curve.rows()))


# -- per-experiment runners ----------------------------------------------------


def _run_survival(cfg, manifest, budget, clock):
    W = window_for(cfg)
    grid = _grid_of(cfg)
    n_steps = int(grid[-1]) + margin_steps(cfg, W)
    budget.claim(cfg.replicas, n_steps, "survival")
    curve = estimate_survival(cfg)
    clock("survival")
    _stage(manifest, "survival", 0, cfg.replicas, n_steps)
    at_N = curve.at(cfg.N) if grid[0] <= cfg.N <= grid[-1] else math.nan
    return {"survival": _survival_table(curve)}, {"W": W, "a_hat_N": at_N}, {}


def _run_rho(cfg, manifest, budget, clock):
    W = window_for(cfg)
    n_steps = cfg.N + margin_steps(cfg, W)
    grid = np.union1d(_grid_of(cfg), [cfg.N])
    curve_steps = int(grid[-1]) + margin_steps(cfg, W)
    budget.claim(cfg.replicas, curve_steps, "survival")
    budget.claim(cfg.replicas, n_steps, "rho-ratio")
    curve = estimate_survival(cfg, n_grid=grid)
    clock("survival")
    _stage(manifest, "survival", 0, cfg.replicas, curve_steps)
    res = rho_ratio_experiment(cfg, curve)
    clock("rho-ratio")
    _stage(manifest, "rho-ratio", cfg.replicas, 2 * cfg.replicas, n_steps)
    table = Table(
        ["replica", "rho_N", "ratio"],
        [(int(i), int(r), float(s)) for i, r, s in zip(res.replica, res.columns["rho_N"], res.samples)],
    )
    est = {"W": W, "a_hat_N": curve.at(cfg.N), "mean": res.mean, "std": res.std, "n_samples": int(res.samples.size)}
    return {"survival": _survival_table(curve), "rho-ratio": table}, est, {"degenerate": res.degenerate}


def _stopping_curve(cfg, manifest, budget, clock):
    W = window_for(cfg)
    pilot = min(cfg.replicas, 256)
    budget.claim(pilot, cfg.N + margin_steps(cfg, W), "pilot")
    sc = curve_covering_sigma(cfg, pilot_replicas=pilot, budget_check=lambda n: budget.claim(2 * cfg.replicas, n, "survival"))
    clock("survival")
    _stage(manifest, "pilot", 0, pilot, cfg.N + margin_steps(cfg, W))
    _stage(manifest, "survival", 0, cfg.replicas, sc.n_steps, extensions=sc.extensions)
    manifest.censoring["survival"] = {"count": sc.curve_censored, "fraction": sc.curve_censored / cfg.replicas}
    manifest.derived.update({"pilot_a_hat_N": sc.pilot_a, "curve_n_max": sc.curve.n_max})
    return sc


def _run_sigma(cfg, manifest, budget, clock):
    sc = _stopping_curve(cfg, manifest, budget, clock)
    res = sigma_scaling_experiment(cfg, sc.curve, sc.n_steps)
    clock("sigma-scaling")
    _stage(manifest, "sigma-scaling", cfg.replicas, 2 * cfg.replicas, sc.n_steps)
    manifest.censoring["sigma-scaling"] = _censor_entry(res.censored, cfg.replicas)
    table = Table(
        ["replica", "sigma_N", "a_hat_sigma", "ratio"],
        [
            (int(i), int(s), float(a), float(r))
            for i, s, a, r in zip(res.replica, res.columns["sigma_N"], res.columns["a_hat_sigma"], res.samples)
        ],
    )
    est = {"W": sc.curve.W, "mean": res.mean, "std": res.std, "n_samples": int(res.samples.size)}
    return {"survival": _survival_table(sc.curve), "sigma-scaling": table}, est, {"valid": res.valid}


def _gauss_table(diag, cfg, extra_cols):
    cols = ["replica", *extra_cols, *coord_names(cfg.dim)]
    rows = [
        (int(i), *[int(diag.columns[c][k]) for c in extra_cols], *map(int, diag.columns["point"][k]))
        for k, i in enumerate(diag.replica)
    ]
    return Table(cols, rows)


def _run_clt(cfg, manifest, budget, clock):
    sc = _stopping_curve(cfg, manifest, budget, clock)
    diag = clt_experiment(cfg, sc.curve, sc.n_steps)
    clock("clt")
    _stage(manifest, "clt", cfg.replicas, 2 * cfg.replicas, sc.n_steps)
    manifest.censoring["clt"] = _censor_entry(diag.censored, cfg.replicas)
    tables = {"survival": _survival_table(sc.curve), "clt": _gauss_table(diag, cfg, ["sigma_N", "F_N"])}
    return tables, {"W": sc.curve.W, **diag.summary()}, dict(diag.flags)


def _run_tau(cfg, manifest, budget, clock):
    levels = [cfg.N >> k for k in range(7) if (cfg.N >> k) >= 16][::-1] or [cfg.N]
    for lv in levels:
        budget.claim(cfg.replicas, lv + margin_steps(cfg, window_length(lv, cfg.alpha, PATH_CAP)), "q-fit")
    if len(levels) < 3:
        raise ValueError("tau-clt needs N >= 64 so that q is fitted on at least 3 levels")
    fit, rows = estimate_q(cfg, levels)
    clock("q-fit")
    _stage(manifest, "q-fit", 0, cfg.replicas, None, levels=levels)
    W = window_for(cfg)
    a_est = min(1.0, float(fit.predict(cfg.N)))
    n_steps = min(math.ceil(1.5 * (cfg.N + 1) / max(a_est, 1e-6)) + margin_steps(cfg, W), PATH_CAP - 1)
    budget.claim(cfg.replicas, n_steps, "tau-clt")
    diag = tau_clt_experiment(cfg, fit, n_steps)
    clock("tau-clt")
    _stage(manifest, "tau-clt", cfg.replicas, 2 * cfg.replicas, n_steps)
    manifest.censoring["tau-clt"] = _censor_entry(diag.censored, cfg.replicas)
    q_table = Table(["N", "W", "a_hat", "stderr", "replicas"], [tuple(r) for r in rows])
    est = {
        "W": W,
        "q": fit.exponent,
        "q_stderr": fit.stderr,
        "q_r_squared": fit.r_squared,
        "q_amplitude": fit.amplitude,
        "tau_N": float(cfg.N) ** (-fit.exponent / (1 - fit.exponent)),
        **diag.summary(),
    }
    return {"q-fit": q_table, "tau-clt": _gauss_table(diag, cfg, ["sigma_N"])}, est, dict(diag.flags)


def _run_compare(cfg, manifest, budget, clock):
    n_steps, W = compare_path_steps(cfg)
    budget.claim(cfg.replicas, n_steps, "compare-lew")
    if not math.isinf(cfg.alpha) and cfg.alpha <= 2:
        manifest.warnings.append(f"alpha={cfg.alpha} <= 2: windowed and full erasure are not expected to agree")
    rep = compare_lew_experiment(cfg)
    clock("compare-lew")
    _stage(manifest, "compare-lew", 0, cfg.replicas, n_steps)
    manifest.censoring["compare-lew"] = _censor_entry(rep.censored, cfg.replicas)
    names = coord_names(cfg.dim)
    cols = ["replica", "sigma_window_N", "sigma_full_N", "mismatch",
            *[c + "_window" for c in names], *[c + "_full" for c in names]]
    rows = [
        (int(i), int(sw), int(sf), int(m), *[int(v) for v in ew], *[int(v) for v in ef])
        for i, sw, sf, m, ew, ef in zip(
            rep.replica, rep.columns["sigma_window_N"], rep.columns["sigma_full_N"],
            rep.mismatch, rep.endpoints_windowed, rep.endpoints_full,
        )
    ]
    est = {
        "W": W,
        "c_N": rep.windowed.rms if rep.windowed else math.nan,
        "d_N": rep.full.rms if rep.full else math.nan,
        "ratio": rep.ratio,
        "mismatch_frequency": rep.mismatch_frequency,
        "n_samples": int(rep.replica.size),
    }
    return {"compare-lew": Table(cols, rows)}, est, {}


def _run_zeta(cfg, manifest, budget, clock):
    grid = np.asarray(cfg.n_grid if cfg.n_grid is not None else DEFAULT_ZETA_GRID, dtype=np.int64)
    budget.claim(cfg.replicas, 2 * (int(grid[-1]) + 1), "zeta")
    z = estimate_zeta(cfg, grid)
    clock("zeta")
    _stage(manifest, "zeta", 0, cfg.replicas, 2 * (int(grid[-1]) + 1))
    _stage(manifest, "bootstrap", cfg.replicas, cfg.replicas + 1, None, B=cfg.bootstrap)
    _regime_warnings(cfg, z.zeta_hat, manifest)
    curve = Table(
        ["n", "p_hat", "stderr", "replicas"],
        [(int(n), float(p), float(s), cfg.replicas) for n, p, s in zip(z.n, z.p_hat, z.p_stderr)],
    )
    hits = Table(["replica", "first_hit"], [(i, int(h)) for i, h in enumerate(z.first_hit)])
    est = {
        "zeta_hat": z.zeta_hat,
        "stderr": z.stderr,
        "ci95": list(z.ci),
        "r_squared": z.r_squared,
        "n_range": list(z.n_range),
        "event": "S[1,n] and S'[0,n] disjoint, independent SRWs from the origin",
    }
    return {"zeta": curve, "zeta-hits": hits}, est, {"degenerate": z.degenerate}


def _run_z_decay(cfg, manifest, budget, clock):
    beta = np.asarray(cfg.beta_grid if cfg.beta_grid is not None else default_beta_grid(cfg.N, cfg.alpha))
    W = window_for(cfg)
    k = 2 * max(math.floor(cfg.N**b + 1e-9) for b in beta)
    budget.claim(cfg.replicas, k + margin_steps(cfg, W), "z-decay")
    zd = estimate_z_decay(cfg, beta, k=k)
    clock("z-decay")
    _stage(manifest, "z-decay", 0, cfg.replicas, k + margin_steps(cfg, W))
    table = Table(["beta", "x", "length", "p_hat", "stderr", "replicas"], list(zd.rows()))
    return {"z-decay": table}, {"W": W, "k": k}, {"monotone": bool(np.all(np.diff(zd.p_hat) <= 0))}


def _run_walk(cfg, manifest, budget, clock):
    budget.claim(cfg.replicas, cfg.N, "walk")
    rows = []
    for r in range(cfg.replicas):
        pts = generate_walk(derive_stream(cfg.master_seed, r), cfg.N, cfg.dim).points
        rows.extend((r, k, *map(int, p)) for k, p in enumerate(pts))
    clock("walk")
    _stage(manifest, "walk", 0, cfg.replicas, cfg.N)
    return {"walk": Table(["replica", "step", *coord_names(cfg.dim)], rows)}, {}, {}


def _run_erase(cfg, manifest, budget, clock):
    budget.claim(cfg.replicas, cfg.N, "erase")
    W = window_length(cfg.N, cfg.alpha, cfg.N + 1)
    rows = []
    lengths = []
    for r in range(cfg.replicas):
        path = generate_walk(derive_stream(cfg.master_seed, r), cfg.N, cfg.dim)
        tr = erase_windowed(path, W)
        lengths.append(int(tr.sigma.size))
        rows.extend((r, i, int(s), *map(int, p)) for i, (s, p) in enumerate(zip(tr.sigma, tr.erased_path)))
    clock("erase")
    _stage(manifest, "erase", 0, cfg.replicas, cfg.N)
    return {"erase": Table(["replica", "i", "sigma", *coord_names(cfg.dim)], rows)}, {"W": W, "erased_lengths": lengths}, {}


_RUNNERS = {
    "survival": _run_survival,
    "rho-ratio": _run_rho,
    "sigma-scaling": _run_sigma,
    "clt": _run_clt,
    "tau-clt": _run_tau,
    "compare-lew": _run_compare,
    "zeta": _run_zeta,
    "z-decay": _run_z_decay,
    "walk": _run_walk,
    "erase": _run_erase,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run one configured experiment; replica k always uses stream index k of its namespace."""
    manifest = RunManifest(config=cfg.to_dict(), artifact_version=__version__)
    t0 = time.perf_counter()
    last = [t0]

    def clock(stage: str) -> None:
        now = time.perf_counter()
        manifest.stage_seconds[stage] = now - last[0]
        last[0] = now

    if cfg.experiment != "zeta":
        _regime_warnings(cfg, cfg.zeta, manifest)
    tables, estimates, flags = _RUNNERS[cfg.experiment](cfg, manifest, _Budget(cfg), clock)
    if "W" in estimates:
        manifest.derived["W"] = estimates["W"]
    manifest.wall_time_s = time.perf_counter() - t0
    return ExperimentResult(manifest=manifest, tables=tables, estimates=estimates, flags=flags)


# -- output ------------------------------------------------------------------


def _fmt(v: Any) -> Any:
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def write_outputs(result: ExperimentResult, out_dir) -> list[Path]:
    """Write ``<table>.csv`` per table and ``summary.json``; returns the paths written."""
    out = Path(out_dir)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, table in result.tables.items():
            path = out / f"{name}.csv"
            with path.open("w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(table.columns)
                for row in table.rows:
                    w.writerow([_fmt(v) for v in row])
            written.append(path)
        path = out / "summary.json"
        path.write_text(json.dumps(_jsonable(result.summary()), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    except OSError as exc:
        raise OSError(f"cannot write outputs under {out}: {exc}") from exc
    return written
