"""Moment-based normality diagnostics and the limit-theorem experiments built on them.

Diagnostics never declare a sample Gaussian; they compare moments against
stored tolerances and record one flag per check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from lerw import _kernels
from lerw.bootstrap import bootstrap_ci  # noqa: F401  (re-exported)
from lerw.config import ExperimentConfig
from lerw.estimators import (
    PowerLawFit,
    SurvivalCurve,
    _walk,
    interpolate_survival,
    margin_steps,
    sigma_at,
    window_for,
)
from lerw.parallel import map_replicas
from lerw.walk import PATH_CAP


@dataclass(frozen=True)
class MomentReport:
    n_samples: int
    mean: np.ndarray
    covariance: np.ndarray
    component_kurtosis: np.ndarray
    radial_second_moment: float

    @property
    def degenerate(self) -> bool:
        return bool(np.any(np.diag(self.covariance) == 0))

    @property
    def rms(self) -> float:
        return math.sqrt(self.radial_second_moment)


def moment_report(samples) -> MomentReport:
    """Sample mean, unbiased covariance, per-component kurtosis m4/m2^2, E|x|^2."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {x.shape[0]}")
    mean = x.mean(axis=0)
    dev = x - mean
    cov = dev.T @ dev / (x.shape[0] - 1)
    cov = (cov + cov.T) / 2
    m2 = (dev**2).mean(axis=0)
    m4 = (dev**4).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        kurt = np.where(m2 > 0, m4 / np.where(m2 > 0, m2, 1.0) ** 2, np.nan)
    return MomentReport(
        n_samples=x.shape[0],
        mean=mean,
        covariance=cov,
        component_kurtosis=kurt,
        radial_second_moment=float((x**2).sum(axis=1).mean()),
    )


@dataclass(frozen=True)
class GaussianTolerances:
    # component variance must lie in [variance_low, variance_high] * target
    variance_low: float = 0.90
    variance_high: float = 1.11
    kurtosis: float = 0.3
    correlation: float = 0.05


def max_offdiag_correlation(cov: np.ndarray) -> float:
    d = cov.shape[0]
    if d < 2:
        return 0.0
    sd = np.sqrt(np.diag(cov))
    if np.any(sd == 0):
        return math.nan
    corr = cov / np.outer(sd, sd)
    return float(np.max(np.abs(corr[~np.eye(d, dtype=bool)])))


def diagnostic_flags(report: MomentReport, target_variance: float, tol: GaussianTolerances) -> dict[str, bool]:
    var = np.diag(report.covariance)
    kurt = report.component_kurtosis
    corr = max_offdiag_correlation(report.covariance)
    return {
        "variance": bool(np.all((var >= tol.variance_low * target_variance) & (var <= tol.variance_high * target_variance))),
        "kurtosis": bool(np.all(np.abs(kurt - 3.0) <= tol.kurtosis)),
        "correlation": bool(corr <= tol.correlation),
    }


@dataclass(frozen=True)
class GaussianDiagnostics:
    """Moment checks of a normalised d-vector statistic against N(0, target * I)."""

    report: MomentReport
    target_variance: float
    tolerances: GaussianTolerances
    flags: dict
    replica: np.ndarray
    values: np.ndarray
    columns: dict = field(default_factory=dict)
    censored: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.report.covariance)

    @property
    def kurtosis(self) -> np.ndarray:
        return self.report.component_kurtosis

    @property
    def max_correlation(self) -> float:
        return max_offdiag_correlation(self.report.covariance)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def summary(self) -> dict:
        return {
            "n_samples": self.report.n_samples,
            "target_variance": self.target_variance,
            "variances": self.variances.tolist(),
            "kurtosis": self.kurtosis.tolist(),
            "max_offdiag_correlation": self.max_correlation,
            "mean": self.report.mean.tolist(),
            "tolerances": vars(self.tolerances),
            "flags": dict(self.flags),
            "censored": int(self.censored.size),
        }


def gaussian_diagnostics(values, target_variance: float, tolerances: Optional[GaussianTolerances] = None,
                         replica=None, columns=None, censored=None) -> GaussianDiagnostics:
    values = np.asarray(values, dtype=float)
    tol = tolerances or GaussianTolerances()
    if values.shape[0] >= 2:
        report = moment_report(values)
        flags = diagnostic_flags(report, target_variance, tol)
    else:
        # too few uncensored samples: every moment is undefined and every check fails
        d = values.shape[1] if values.ndim == 2 else 1
        report = MomentReport(values.shape[0], np.full(d, np.nan), np.full((d, d), np.nan), np.full(d, np.nan), math.nan)
        flags = {"variance": False, "kurtosis": False, "correlation": False}
    return GaussianDiagnostics(
        report=report,
        target_variance=target_variance,
        tolerances=tol,
        flags=flags,
        replica=np.arange(values.shape[0]) if replica is None else np.asarray(replica, dtype=np.int64),
        values=values,
        columns=columns or {},
        censored=np.empty(0, dtype=np.int64) if censored is None else np.asarray(censored, dtype=np.int64),
    )


# -- Gaussian limit of the re-indexed walk ------------------------------------


def _clt_task(index, seed, dim, W, n_steps, N, grid, a_hat):
    path = _walk(seed, index, n_steps, dim)
    sig = sigma_at(_kernels.windowed_sigma(path, W), N, W, n_steps)
    if sig < 0 or sig > grid[-1]:
        return sig, -1, None
    a = interpolate_survival(grid, a_hat, sig)
    F = math.floor(sig * a)
    if F > n_steps:
        return sig, -1, None
    return sig, F, path[F].copy()


def clt_experiment(cfg: ExperimentConfig, curve: SurvivalCurve, n_steps: Optional[int] = None,
                   tolerances: Optional[GaussianTolerances] = None) -> GaussianDiagnostics:
    """S_{F_N} / sqrt(N) with F_N = floor(sigma(N) a_hat(sigma(N))), target (1/d) I."""
    W = window_for(cfg)
    R = cfg.replicas
    if n_steps is None:
        n_steps = curve.n_max + margin_steps(cfg, W)
    out = map_replicas(
        _clt_task, R, 2 * R, cfg.workers,
        (cfg.master_seed, cfg.dim, W, n_steps, cfg.N, curve.n, curve.a_hat),
    )
    idx = np.arange(R, 2 * R)
    ok = np.array([o[2] is not None for o in out], dtype=bool)
    points = np.array([o[2] for o in out if o[2] is not None], dtype=np.int64).reshape(-1, cfg.dim)
    sig = np.array([o[0] for o in out], dtype=np.int64)
    F = np.array([o[1] for o in out], dtype=np.int64)
    return gaussian_diagnostics(
        points / math.sqrt(cfg.N), 1.0 / cfg.dim, tolerances,
        replica=idx[ok], columns={"sigma_N": sig[ok], "F_N": F[ok], "point": points}, censored=idx[~ok],
    )


def tau_normaliser(N: int, q: float) -> float:
    """tau_N = N^(-q / (1 - q)); defined for q in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    return float(N) ** (-q / (1.0 - q))


def tau_statistic(endpoints, N: int, q: float) -> np.ndarray:
    """S_{sigma(N)} sqrt(tau_N) / sqrt(N) for an array of endpoints."""
    return np.asarray(endpoints, dtype=float) * math.sqrt(tau_normaliser(N, q) / N)


def _tau_task(index, seed, dim, W, n_steps, N):
    path = _walk(seed, index, n_steps, dim)
    sig = sigma_at(_kernels.windowed_sigma(path, W), N, W, n_steps)
    return sig, (path[sig].copy() if sig >= 0 else None)


def tau_clt_experiment(cfg: ExperimentConfig, fit: PowerLawFit, n_steps: Optional[int] = None,
                       tolerances: Optional[GaussianTolerances] = None) -> GaussianDiagnostics:
    """S_{sigma(N)} sqrt(tau_N / N) with tau_N from the fitted survival exponent q."""
    q = fit.exponent
    tau_normaliser(cfg.N, q)
    W = window_for(cfg)
    R = cfg.replicas
    if n_steps is None:
        a_est = min(1.0, float(fit.predict(cfg.N)))
        n_steps = min(math.ceil(1.5 * (cfg.N + 1) / max(a_est, 1e-6)) + margin_steps(cfg, W), PATH_CAP - 1)
    out = map_replicas(_tau_task, R, 2 * R, cfg.workers, (cfg.master_seed, cfg.dim, W, n_steps, cfg.N))
    idx = np.arange(R, 2 * R)
    ok = np.array([o[1] is not None for o in out], dtype=bool)
    ends = np.array([o[1] for o in out if o[1] is not None], dtype=np.int64).reshape(-1, cfg.dim)
    sig = np.array([o[0] for o in out], dtype=np.int64)
    return gaussian_diagnostics(
        tau_statistic(ends, cfg.N, q), 1.0 / cfg.dim, tolerances,
        replica=idx[ok], columns={"sigma_N": sig[ok], "point": ends}, censored=idx[~ok],
    )


# -- windowed versus full loop erasure -----------------------------------------


@dataclass(frozen=True)
class CompareReport:
    """Windowed and full erasure of the same walks, compared on the first N+1 points."""

    windowed: Optional[MomentReport]
    full: Optional[MomentReport]
    ratio: float
    mismatch_frequency: float
    replica: np.ndarray
    mismatch: np.ndarray
    endpoints_windowed: np.ndarray
    endpoints_full: np.ndarray
    columns: dict = field(default_factory=dict)
    censored: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    @property
    def censored_fraction(self) -> float:
        total = self.replica.size + self.censored.size
        return self.censored.size / total if total else 0.0


def compare_path_steps(cfg: ExperimentConfig) -> tuple[int, int]:
    """``(n_steps, W)`` for compare-lew: ``path_steps`` (default 32 N) plus the margin.

    With ``alpha = inf`` the window spans the whole path and no margin is added.
    """
    base = cfg.path_steps if cfg.path_steps is not None else 32 * cfg.N
    if math.isinf(cfg.alpha):
        return base, base + 1
    W = window_for(cfg)
    return min(base + margin_steps(cfg, W), PATH_CAP - 1), W


def _compare_task(index, seed, dim, W, n_steps, N):
    path = _walk(seed, index, n_steps, dim)
    last = path.shape[0] - 1
    sw = _kernels.windowed_sigma(path, W)
    sf = _kernels.windowed_sigma(path, last + 1)
    iw = sigma_at(sw, N, W, last)
    if iw < 0 or sf.size <= N:
        return None
    same = bool(np.array_equal(path[sw[: N + 1]], path[sf[: N + 1]]))
    return iw, int(sf[N]), not same, path[iw].copy(), path[sf[N]].copy()


def compare_lew_experiment(cfg: ExperimentConfig) -> CompareReport:
    """Common-random-number comparison of the windowed and the full loop erasure."""
    n_steps, W = compare_path_steps(cfg)
    R = cfg.replicas
    out = map_replicas(_compare_task, 0, R, cfg.workers, (cfg.master_seed, cfg.dim, W, n_steps, cfg.N))
    idx = np.arange(R)
    ok = np.array([o is not None for o in out], dtype=bool)
    kept = [o for o in out if o is not None]
    ew = np.array([o[3] for o in kept], dtype=float).reshape(-1, cfg.dim)
    ef = np.array([o[4] for o in kept], dtype=float).reshape(-1, cfg.dim)
    mismatch = np.array([o[2] for o in kept], dtype=bool)
    rw = moment_report(ew) if len(kept) >= 2 else None
    rf = moment_report(ef) if len(kept) >= 2 else None
    if rw is not None and rf.radial_second_moment > 0:
        ratio = math.sqrt(rw.radial_second_moment / rf.radial_second_moment)
    else:
        ratio = math.nan
    return CompareReport(
        windowed=rw, full=rf, ratio=ratio,
        mismatch_frequency=float(mismatch.mean()) if mismatch.size else math.nan,
        replica=idx[ok], mismatch=mismatch, endpoints_windowed=ew, endpoints_full=ef,
        columns={
            "sigma_window_N": np.array([o[0] for o in kept], dtype=np.int64),
            "sigma_full_N": np.array([o[1] for o in kept], dtype=np.int64),
        },
        censored=idx[~ok],
    )
