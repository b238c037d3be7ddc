import math

import numpy as np
import pytest

from lerw.config import parse_config
from lerw.estimators import PowerLawFit, estimate_survival
from lerw.stats import (
    GaussianTolerances,
    clt_experiment,
    compare_lew_experiment,
    compare_path_steps,
    diagnostic_flags,
    gaussian_diagnostics,
    max_offdiag_correlation,
    moment_report,
    tau_clt_experiment,
    tau_normaliser,
    tau_statistic,
)


def cfg(**kw):
    base = dict(experiment="clt", N=64, alpha=0.4, replicas=200, master_seed=3)
    base.update(kw)
    return parse_config(None, base)


def flat_fit(q):
    return PowerLawFit(exponent=q, amplitude=1.0, stderr=0.0, r_squared=1.0, fit_range=(1, 2), n_points=3)


# -- moments ------------------------------------------------------------------------


def test_constant_samples_are_degenerate():
    r = moment_report(np.tile([1.0, 2.0, 3.0], (10, 1)))
    assert r.degenerate
    assert np.all(r.covariance == 0)
    assert np.all(np.isnan(r.component_kurtosis))
    assert math.isnan(max_offdiag_correlation(r.covariance))


def test_alternating_samples():
    v = np.array([1.0, -2.0, 0.5])
    n = 40
    x = np.array([v if k % 2 == 0 else -v for k in range(n)])
    r = moment_report(x)
    assert np.allclose(r.mean, 0)
    # unbiased covariance: n/(n-1) times the population value v v^T
    assert np.allclose(r.covariance, np.outer(v, v) * n / (n - 1))
    assert np.allclose(r.component_kurtosis, 1.0)
    assert math.isclose(r.radial_second_moment, v @ v)


def test_standard_normal_moments():
    x = np.random.default_rng(17).standard_normal((10**5, 3))
    r = moment_report(x)
    assert np.all(np.abs(r.component_kurtosis - 3) <= 0.1)
    assert np.all(np.abs(r.covariance - np.eye(3)) <= 0.02)


def test_moment_report_needs_two_samples():
    with pytest.raises(ValueError):
        moment_report([[1.0, 2.0]])
    assert moment_report([1.0, 3.0]).covariance.shape == (1, 1)


def test_flags_follow_tolerances():
    x = np.random.default_rng(2).standard_normal((20000, 3)) * math.sqrt(1 / 3)
    diag = gaussian_diagnostics(x, 1 / 3)
    assert diag.passed and diag.flags == {"variance": True, "kurtosis": True, "correlation": True}
    wide = gaussian_diagnostics(x * 1.2, 1 / 3)
    assert not wide.flags["variance"] and wide.flags["kurtosis"]
    corr = x.copy()
    corr[:, 1] = 0.5 * corr[:, 0] + math.sqrt(0.75) * corr[:, 1]
    assert not gaussian_diagnostics(corr, 1 / 3).flags["correlation"]
    uniform = np.random.default_rng(3).uniform(-1, 1, (20000, 3))
    assert not gaussian_diagnostics(uniform, 1 / 3).flags["kurtosis"]


def test_custom_tolerances():
    x = np.random.default_rng(2).standard_normal((5000, 2))
    rep = moment_report(x)
    assert diagnostic_flags(rep, 4.0, GaussianTolerances(variance_low=0.2))["variance"]
    assert not diagnostic_flags(rep, 4.0, GaussianTolerances())["variance"]


def test_summary_never_claims_normality():
    diag = gaussian_diagnostics(np.random.default_rng(0).standard_normal((100, 3)), 1.0)
    text = repr(diag.summary()).lower()
    assert "gaussian" not in text and "normal" not in text


# -- CLT experiments ------------------------------------------------------------------


def test_clt_unit_window_is_plain_walk():
    c = cfg(alpha=0.0, N=400, replicas=3000)
    curve = estimate_survival(c, n_grid=[0, 200, 400, 600])
    diag = clt_experiment(c, curve)
    assert np.all(diag.columns["sigma_N"] == 400) and np.all(diag.columns["F_N"] == 400)
    assert np.all(np.abs(diag.variances - 1 / 3) <= 0.1 / 3)
    assert np.all(np.abs(diag.report.mean) < 0.05)


def test_clt_dimension_one_variance():
    c = cfg(alpha=0.0, N=400, replicas=3000, dim=1)
    curve = estimate_survival(c, n_grid=[0, 400, 500])
    diag = clt_experiment(c, curve)
    assert diag.target_variance == 1.0
    assert abs(diag.variances[0] - 1.0) <= 0.1


def test_clt_censors_outside_curve():
    c = cfg(N=64, replicas=50)
    curve = estimate_survival(c, n_grid=[0, 80])
    diag = clt_experiment(c, curve)
    assert 0 < diag.censored.size < 50
    assert diag.replica.size + diag.censored.size == 50
    assert set(diag.replica.tolist()) | set(diag.censored.tolist()) == set(range(50, 100))


def test_clt_all_censored_is_flagged_not_raised():
    c = cfg(N=64, replicas=20)
    diag = clt_experiment(c, estimate_survival(c, n_grid=[0, 64]))
    assert diag.replica.size == 0 and diag.censored.size == 20
    assert not diag.passed and math.isnan(diag.report.rms)


def test_clt_points_are_raw_lattice_points():
    c = cfg(alpha=0.0, N=100, replicas=20)
    curve = estimate_survival(c, n_grid=[0, 100, 150])
    diag = clt_experiment(c, curve)
    pts = diag.columns["point"]
    assert pts.dtype.kind == "i"
    assert np.allclose(diag.values, pts / 10.0)


def test_tau_normaliser():
    assert math.isclose(tau_normaliser(2**10, 0.5), 2.0**-10)
    assert math.isclose(tau_normaliser(100, 0.2), 100**-0.25)
    for q in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            tau_normaliser(10, q)
    assert tau_normaliser(10**6, 1e-12) == pytest.approx(1.0)


def test_tau_statistic_scaling():
    ends = np.array([[4, 0, -2]])
    out = tau_statistic(ends, 16, 0.5)
    assert np.allclose(out, ends * math.sqrt((1 / 16) / 16))


def test_tau_clt_small_q_reduces_to_plain_walk():
    c = cfg(experiment="tau-clt", alpha=0.0, N=400, replicas=3000)
    diag = tau_clt_experiment(c, flat_fit(1e-9))
    assert np.all(diag.columns["sigma_N"] == 400)
    assert np.all(np.abs(diag.variances - 1 / 3) <= 0.1 / 3)


def test_tau_closed_loop_synthetic():
    # sigma(N) = N^(1/(1-q)) and S_sigma ~ N(0, sigma/3 I): the tau statistic is N(0, I/3)
    N, q, R = 4096, 0.3, 20000
    sigma = N ** (1 / (1 - q))
    ends = np.random.default_rng(9).standard_normal((R, 3)) * math.sqrt(sigma / 3)
    diag = gaussian_diagnostics(tau_statistic(ends, N, q), 1 / 3)
    assert diag.passed


# -- windowed versus full erasure ----------------------------------------------------


def test_compare_path_steps():
    assert compare_path_steps(cfg(experiment="compare-lew", N=32, alpha=2.5)) == (32 * 32 + 5792, 5792)
    assert compare_path_steps(cfg(experiment="compare-lew", N=32, alpha="inf", path_steps=500)) == (500, 501)


def test_compare_identical_when_window_spans_path():
    rep = compare_lew_experiment(cfg(experiment="compare-lew", N=16, alpha="inf", replicas=100, path_steps=400))
    assert rep.mismatch_frequency == 0.0
    assert rep.ratio == 1.0
    assert np.array_equal(rep.endpoints_windowed, rep.endpoints_full)


def test_compare_small_window_mismatches():
    rep = compare_lew_experiment(cfg(experiment="compare-lew", N=32, alpha=0.4, replicas=300))
    assert rep.mismatch_frequency > 0.5
    assert rep.replica.size + rep.censored.size == 300


def test_compare_censors_short_paths():
    rep = compare_lew_experiment(cfg(experiment="compare-lew", N=200, alpha="inf", replicas=50, path_steps=200))
    assert rep.censored.size > 0
    assert rep.censored_fraction == rep.censored.size / 50
