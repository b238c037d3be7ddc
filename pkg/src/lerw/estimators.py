"""Monte Carlo estimators: survival curve, rho and sigma ratios, Z decay, zeta, q.

Stream namespaces for multi-stage runs with R replicas: the survival curve
uses stream indices ``0..R-1`` and the experiment stage ``R..2R-1``, so the
plug-in normaliser is independent of the samples it normalises.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from lerw import _kernels
from lerw.bootstrap import bootstrap_distribution
from lerw.config import ExperimentConfig
from lerw.erasure import window_length
from lerw.parallel import map_replicas
from lerw.walk import PATH_CAP, derive_stream, generate_walk

MAX_CENSORED_FRACTION = 0.10


# -- helpers -----------------------------------------------------------------


def window_for(cfg: ExperimentConfig) -> int:
    return window_length(cfg.N, cfg.alpha, PATH_CAP)


def margin_steps(cfg: ExperimentConfig, W: int) -> int:
    return math.ceil(cfg.margin_factor * W)


def default_grid(n_max: int, points: int = 48) -> np.ndarray:
    """0..8 then roughly geometric up to ``n_max`` (inclusive)."""
    small = np.arange(0, min(n_max, 8) + 1)
    geo = np.round(np.geomspace(1, max(n_max, 1), points)).astype(np.int64)
    return np.unique(np.concatenate([small, geo, [n_max]]))


def sigma_at(sigma: np.ndarray, i: int, W: int, last: int) -> int:
    """``sigma[i]`` if the finite path realises it exactly, else -1.

    The i-th jump time is exact when the window of its pivot ``sigma[i-1] + 1``
    fits inside the path (or the window already spans the whole path).
    """
    if sigma.size <= i:
        return -1
    if W >= last:
        return int(sigma[i])
    pivot = 0 if i == 0 else int(sigma[i - 1]) + 1
    if pivot + W > last:
        return -1
    return int(sigma[i])


def _walk(seed: int, index: int, n_steps: int, dim: int) -> np.ndarray:
    return generate_walk(derive_stream(seed, index), n_steps, dim).points


def _binomial_stderr(p: np.ndarray, n: int) -> np.ndarray:
    return np.sqrt(np.clip(p * (1.0 - p), 0.0, None) / n)


# -- survival ----------------------------------------------------------------


def interpolate_survival(grid: np.ndarray, a_hat: np.ndarray, n):
    """Interpolate log a linearly in log n between grid points (linearly if a
    neighbour is 0 or the left node is n = 0); NaN outside the grid."""
    x = np.asarray(n, dtype=float)
    out = np.full(x.shape, np.nan)
    inside = (x >= grid[0]) & (x <= grid[-1])
    xi = x[inside]
    hi = np.searchsorted(grid, xi, side="left")
    exact = grid[np.minimum(hi, grid.size - 1)] == xi
    res = np.empty(xi.shape)
    res[exact] = a_hat[hi[exact]]
    between = ~exact
    if between.any():
        h = hi[between]
        n0, n1 = grid[h - 1].astype(float), grid[h].astype(float)
        a0, a1 = a_hat[h - 1], a_hat[h]
        xb = xi[between]
        lin = a0 + (a1 - a0) * (xb - n0) / (n1 - n0)
        ok = (n0 >= 1) & (a0 > 0) & (a1 > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.log(xb / n0) / np.log(n1 / n0)
            loglin = np.exp(np.log(a0) + (np.log(a1) - np.log(a0)) * frac)
        res[between] = np.where(ok, loglin, lin)
    out[inside] = res
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SurvivalCurve:
    """Estimates of a_{n,alpha}: the chance index n survives erasure with window W."""

    alpha: float
    N: int
    W: int
    n: np.ndarray
    a_hat: np.ndarray
    stderr: np.ndarray
    replicas: int

    @property
    def n_max(self) -> int:
        return int(self.n[-1])

    def at(self, n):
        """a_hat at arbitrary indices; log-linear between grid points, NaN outside."""
        return interpolate_survival(self.n, self.a_hat, n)

    def rows(self):
        for n, a, s in zip(self.n, self.a_hat, self.stderr):
            yield int(n), float(a), float(s), self.replicas


def _survival_task(index, seed, dim, W, n_steps, grid, N):
    path = _walk(seed, index, n_steps, dim)
    sigma = _kernels.windowed_sigma(path, W)
    flags = np.zeros(path.shape[0], dtype=bool)
    flags[sigma] = True
    return flags[grid], sigma_at(sigma, N, W, path.shape[0] - 1)


def _survival_stage(cfg, grid, n_steps, offset=0, replicas=None):
    R = cfg.replicas if replicas is None else replicas
    W = window_for(cfg)
    out = map_replicas(
        _survival_task, offset, offset + R, cfg.workers,
        (cfg.master_seed, cfg.dim, W, n_steps, grid, cfg.N),
    )
    flags = np.array([o[0] for o in out], dtype=bool).reshape(R, grid.size)
    sigma_N = np.array([o[1] for o in out], dtype=np.int64)
    a_hat = flags.mean(axis=0)
    curve = SurvivalCurve(
        alpha=cfg.alpha, N=cfg.N, W=W, n=grid, a_hat=a_hat,
        stderr=_binomial_stderr(a_hat, R), replicas=R,
    )
    return curve, sigma_N


def _grid_of(cfg: ExperimentConfig, n_grid=None) -> np.ndarray:
    grid = n_grid if n_grid is not None else cfg.n_grid
    if grid is None:
        return default_grid(cfg.N)
    grid = np.unique(np.asarray(grid, dtype=np.int64))
    if grid.size == 0 or grid[0] < 0:
        raise ValueError("n_grid must hold non-negative indices")
    return grid


def estimate_survival(cfg: ExperimentConfig, n_grid: Optional[Sequence[int]] = None, n_steps: Optional[int] = None) -> SurvivalCurve:
    """Fraction of replicas in which index n survives, for every n in the grid."""
    if cfg.replicas < 2:
        raise ValueError("estimate_survival needs replicas >= 2")
    W = window_for(cfg)
    grid = _grid_of(cfg, n_grid)
    needed = int(grid[-1]) + W
    if n_steps is None:
        if cfg.margin_factor < 1.0:
            raise ValueError(f"insufficient path margin: margin_factor={cfg.margin_factor} < 1")
        n_steps = int(grid[-1]) + margin_steps(cfg, W)
    if n_steps < needed:
        raise ValueError(f"insufficient path margin: {n_steps} steps < max n + W = {needed}")
    return _survival_stage(cfg, grid, n_steps)[0]


@dataclass(frozen=True)
class StoppingCurve:
    """A survival curve whose grid is long enough to cover sigma(N), plus its audit trail."""

    curve: SurvivalCurve
    n_steps: int
    pilot_a: float
    curve_censored: int
    extensions: int


def curve_covering_sigma(cfg: ExperimentConfig, pilot_replicas: int = 256, safety: float = 1.5,
                         max_extensions: int = 4, budget_check=None) -> StoppingCurve:
    """Survival curve over a grid reaching past the typical sigma(N).

    A pilot on the first curve streams (walk prefixes of the same replicas)
    estimates a_N; the grid then reaches ``safety * (N + 1) / a_N`` and is
    stretched by 1.5x while more than 1% of curve replicas fail to realise
    sigma(N) inside it.
    """
    mW = margin_steps(cfg, window_for(cfg))
    pilot = _survival_stage(cfg, np.array([cfg.N]), cfg.N + mW, replicas=min(cfg.replicas, pilot_replicas))[0]
    a_pilot = float(pilot.a_hat[0])
    n_max = math.ceil(safety * (cfg.N + 1) / max(a_pilot, 1.0 / pilot.replicas))
    for ext in range(max_extensions + 1):
        n_max = min(n_max, PATH_CAP - 1 - mW)
        n_steps = n_max + mW
        if budget_check is not None:
            budget_check(n_steps)
        grid = np.unique(np.concatenate([default_grid(n_max), [cfg.N]]))
        curve, sigma_N = _survival_stage(cfg, grid, n_steps)
        missed = int(np.sum((sigma_N < 0) | (sigma_N > n_max)))
        if missed <= 0.01 * cfg.replicas or n_max >= PATH_CAP - 1 - mW:
            return StoppingCurve(curve, n_steps, a_pilot, missed, ext)
        n_max = math.ceil(1.5 * n_max)
    return StoppingCurve(curve, n_steps, a_pilot, missed, max_extensions)


# -- power law ---------------------------------------------------------------


@dataclass(frozen=True)
class PowerLawFit:
    """y ~ amplitude * x**(-exponent) from least squares on log-log data."""

    exponent: float
    amplitude: float
    stderr: float
    r_squared: float
    fit_range: tuple[float, float]
    n_points: int

    def predict(self, x):
        return self.amplitude * np.asarray(x, dtype=float) ** (-self.exponent)


def fit_power_law(points, fit_range: Optional[tuple[float, float]] = None) -> PowerLawFit:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be a sequence of (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if fit_range is not None:
        keep = (x >= fit_range[0]) & (x <= fit_range[1])
        x, y = x[keep], y[keep]
    if x.size < 3:
        raise ValueError(f"need at least 3 points in range, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit needs strictly positive x and y")
    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx == 0:
        raise ValueError("x values are all equal")
    slope = np.sum((lx - mx) * (ly - my)) / sxx
    intercept = my - slope * mx
    resid = ly - (intercept + slope * lx)
    ssr = float(np.sum(resid**2))
    sst = float(np.sum((ly - my) ** 2))
    r2 = 1.0 if sst <= 1e-30 * max(1.0, ssr) else min(1.0, max(0.0, 1.0 - ssr / sst))
    stderr = math.sqrt(ssr / (x.size - 2) / sxx) if x.size > 2 else math.nan
    return PowerLawFit(
        exponent=float(-slope) + 0.0,
        amplitude=float(math.exp(intercept)),
        stderr=stderr,
        r_squared=r2,
        fit_range=(float(x.min()), float(x.max())),
        n_points=int(x.size),
    )


def estimate_q(cfg: ExperimentConfig, levels: Optional[Sequence[int]] = None):
    """Fit a_{N', alpha} ~ N'^-q, each level N' with its own window floor(N'^alpha).

    All levels share curve streams ``0..R-1``. Returns ``(fit, table)`` where
    table rows are ``(N', W', a_hat, stderr, replicas)``.
    """
    if levels is None:
        levels = [cfg.N >> k for k in range(7) if (cfg.N >> k) >= 16][::-1]
    rows = []
    for level in sorted(set(int(v) for v in levels)):
        sub = replace(cfg, N=level)
        W = window_for(sub)
        curve = _survival_stage(sub, np.array([level]), level + margin_steps(sub, W))[0]
        rows.append((level, W, float(curve.a_hat[0]), float(curve.stderr[0]), curve.replicas))
    fit = fit_power_law([(r[0], r[2]) for r in rows])
    return fit, rows


# -- ratio experiments -------------------------------------------------------


@dataclass(frozen=True)
class RatioSamples:
    """Per-replica ratio observable; ``mean``/``std`` are recomputed from ``samples``."""

    N: int
    alpha: float
    samples: np.ndarray
    mean: float
    std: float
    replica: np.ndarray
    columns: dict = field(default_factory=dict)
    censored: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def degenerate(self) -> bool:
        return self.samples.size < 2

    @property
    def censored_fraction(self) -> float:
        total = self.samples.size + self.censored.size
        return self.censored.size / total if total else 0.0

    @property
    def valid(self) -> bool:
        return self.censored_fraction <= MAX_CENSORED_FRACTION and self.samples.size > 0


def _ratio_samples(cfg, samples, replica, columns, censored) -> RatioSamples:
    samples = np.asarray(samples, dtype=float)
    mean = float(np.mean(samples)) if samples.size else math.nan
    std = float(np.std(samples, ddof=1)) if samples.size >= 2 else math.nan
    return RatioSamples(
        N=cfg.N, alpha=cfg.alpha, samples=samples, mean=mean, std=std,
        replica=np.asarray(replica, dtype=np.int64), columns=columns,
        censored=np.asarray(censored, dtype=np.int64),
    )


def _rho_task(index, seed, dim, W, n_steps, N):
    path = _walk(seed, index, n_steps, dim)
    sigma = _kernels.windowed_sigma(path, W)
    return int(np.searchsorted(sigma, N, side="right"))


def rho_ratio_experiment(cfg: ExperimentConfig, curve: SurvivalCurve) -> RatioSamples:
    """rho(N) / (N * a_hat(N)) on the experiment streams ``R..2R-1``."""
    a_N = curve.at(cfg.N)
    if not a_N > 0:
        raise ValueError(f"degenerate normalisation: a_hat({cfg.N}) = {a_N}")
    W = window_for(cfg)
    R = cfg.replicas
    n_steps = cfg.N + margin_steps(cfg, W)
    rho = np.array(
        map_replicas(_rho_task, R, 2 * R, cfg.workers, (cfg.master_seed, cfg.dim, W, n_steps, cfg.N)),
        dtype=np.int64,
    )
    samples = rho / (cfg.N * a_N)
    return _ratio_samples(cfg, samples, np.arange(R, 2 * R), {"rho_N": rho}, [])


def _sigma_task(index, seed, dim, W, n_steps, N):
    path = _walk(seed, index, n_steps, dim)
    return sigma_at(_kernels.windowed_sigma(path, W), N, W, path.shape[0] - 1)


def sigma_scaling_experiment(cfg: ExperimentConfig, curve: SurvivalCurve, n_steps: Optional[int] = None) -> RatioSamples:
    """sigma(N) * a_hat(sigma(N)) / N per replica; replicas whose sigma(N) is
    not realised inside the path or the curve grid are censored."""
    W = window_for(cfg)
    R = cfg.replicas
    if n_steps is None:
        n_steps = curve.n_max + margin_steps(cfg, W)
    sig = np.array(
        map_replicas(_sigma_task, R, 2 * R, cfg.workers, (cfg.master_seed, cfg.dim, W, n_steps, cfg.N)),
        dtype=np.int64,
    )
    idx = np.arange(R, 2 * R)
    ok = (sig >= 0) & (sig <= curve.n_max)
    a_sig = curve.at(sig[ok])
    samples = sig[ok] * a_sig / cfg.N
    return _ratio_samples(cfg, samples, idx[ok], {"sigma_N": sig[ok], "a_hat_sigma": a_sig}, idx[~ok])


# -- Z decay -----------------------------------------------------------------


@dataclass(frozen=True)
class ZDecay:
    """P(no loop-free index in [k - floor(N^beta), k]) per beta."""

    N: int
    alpha: float
    W: int
    k: int
    beta: np.ndarray
    x: np.ndarray
    length: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    replicas: int

    def rows(self):
        for row in zip(self.beta, self.x, self.length, self.p_hat, self.stderr):
            yield float(row[0]), float(row[1]), int(row[2]), float(row[3]), float(row[4]), self.replicas


def z_gap(mask: np.ndarray, k: int) -> int:
    """Distance from k back to the last loop-free index <= k (k + 1 if none).

    ``z_indicator(mask, k - L, k)`` is True exactly when ``z_gap(mask, k) > L``.
    """
    free = np.flatnonzero(np.asarray(mask[: k + 1], dtype=bool))
    return k + 1 if free.size == 0 else k - int(free[-1])


def z_probabilities(gaps: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    return (np.asarray(gaps)[:, None] > np.asarray(lengths)[None, :]).mean(axis=0)


def default_beta_grid(N: int, alpha: float, points: int = 16, x_lo: float = 1.1, x_hi: float = 11.0) -> np.ndarray:
    """betas with N^(beta - alpha) geometric over one decade starting just above 1."""
    return alpha + np.log(np.geomspace(x_lo, x_hi, points)) / math.log(N)


def _zgap_task(index, seed, dim, W, n_steps, k):
    path = _walk(seed, index, n_steps, dim)
    return z_gap(_kernels.loop_free(path, W), k)


def estimate_z_decay(cfg: ExperimentConfig, beta_grid: Sequence[float], k: Optional[int] = None) -> ZDecay:
    """Monte Carlo E Z(k - N^beta, k) on common walks, so p_hat is monotone in beta."""
    beta = np.asarray(beta_grid, dtype=float)
    if beta.size == 0:
        raise ValueError("beta_grid is empty")
    if cfg.N < 2:
        raise ValueError("z-decay needs N >= 2")
    if np.any(beta <= cfg.alpha):
        raise ValueError(f"every beta must exceed alpha={cfg.alpha}")
    W = window_for(cfg)
    lengths = np.array([math.floor(cfg.N**b + 1e-9) for b in beta], dtype=np.int64)
    if k is None:
        k = 2 * int(lengths.max())
    if k < lengths.max():
        raise ValueError(f"k={k} is shorter than N^beta={lengths.max()}")
    n_steps = k + margin_steps(cfg, W)
    gaps = np.array(
        map_replicas(_zgap_task, 0, cfg.replicas, cfg.workers, (cfg.master_seed, cfg.dim, W, n_steps, k)),
        dtype=np.int64,
    )
    p = z_probabilities(gaps, lengths)
    return ZDecay(
        N=cfg.N, alpha=cfg.alpha, W=W, k=k, beta=beta,
        x=np.asarray(cfg.N, dtype=float) ** (beta - cfg.alpha),
        length=lengths, p_hat=p, stderr=_binomial_stderr(p, cfg.replicas), replicas=cfg.replicas,
    )


# -- zeta --------------------------------------------------------------------


@dataclass(frozen=True)
class ZetaEstimate:
    """Decay exponent of P(S[1, n] and S'[0, n] are disjoint) for independent SRWs."""

    zeta_hat: float
    stderr: float
    ci: tuple[float, float]
    n_range: tuple[int, int]
    replicas: int
    n: np.ndarray
    p_hat: np.ndarray
    p_stderr: np.ndarray
    r_squared: float
    first_hit: np.ndarray
    degenerate: bool

    @property
    def survival_points(self):
        return list(zip(self.n.tolist(), self.p_hat.tolist()))

    def regime_bound(self) -> float:
        """Largest alpha of the Gaussian regime, 1 / (1 + 2 zeta)."""
        return 1.0 / (1.0 + 2.0 * self.zeta_hat)


def _first_hit_task(index, seed, dim, n):
    raw = derive_stream(seed, index).raw(2 * n)
    a = _kernels.steps_to_path(raw[:n], dim)
    b = _kernels.steps_to_path(raw[n:], dim)
    return _kernels.first_intersection(a, b)


def _zeta_from_hits(hits: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, Optional[PowerLawFit]]:
    p = (hits[:, None] > grid[None, :]).mean(axis=0)
    if np.any(p <= 0):
        return p, None
    return p, fit_power_law(np.column_stack([grid, p]))


def estimate_zeta(cfg: ExperimentConfig, n_grid: Sequence[int], bootstrap: Optional[int] = None) -> ZetaEstimate:
    """Two walks per replica from stream i: the first n_max draws drive S, the next S'.

    The bootstrap (over replicas) uses stream index R and gives ``stderr``/``ci``.
    """
    grid = np.asarray(n_grid, dtype=np.int64)
    if grid.size < 3:
        raise ValueError(f"n_grid needs at least 3 points, got {grid.size}")
    if np.any(np.diff(grid) <= 0) or grid[0] < 1:
        raise ValueError("n_grid must be positive and strictly increasing")
    if cfg.dim != 3:
        warnings.warn(f"zeta is defined for Z^3; running with dim={cfg.dim}", stacklevel=2)
    n_max = int(grid[-1])
    hits = np.array(
        map_replicas(_first_hit_task, 0, cfg.replicas, cfg.workers, (cfg.master_seed, cfg.dim, n_max + 1)),
        dtype=np.int64,
    )
    hits_inf = np.where(hits < 0, n_max + 1, hits)
    p, fit = _zeta_from_hits(hits_inf, grid)
    p_err = _binomial_stderr(p, cfg.replicas)
    if fit is None:
        nan = math.nan
        return ZetaEstimate(nan, nan, (nan, nan), (int(grid[0]), n_max), cfg.replicas, grid, p, p_err, nan, hits, True)

    def stat(h):
        pb, fb = _zeta_from_hits(h, grid)
        return fb.exponent if fb is not None else math.nan

    B = bootstrap or cfg.bootstrap
    dist = bootstrap_distribution(hits_inf, stat, B, derive_stream(cfg.master_seed, cfg.replicas))
    dist = dist[np.isfinite(dist)]
    lo, hi = np.quantile(dist, [0.025, 0.975])
    return ZetaEstimate(
        zeta_hat=fit.exponent, stderr=float(np.std(dist, ddof=1)), ci=(float(lo), float(hi)),
        n_range=(int(grid[0]), n_max), replicas=cfg.replicas, n=grid, p_hat=p, p_stderr=p_err,
        r_squared=fit.r_squared, first_hit=hits, degenerate=False,
    )
