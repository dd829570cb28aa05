"""
Tests for decay fits, scans and domination probes
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from hexloop.analysis import DecayFit, domination_probe, fit_decay, point_seed, scan
from hexloop.configurations import EdgeConfig
from hexloop.errors import DomainMismatch, InsufficientData, OutOfRange
from hexloop.mcmc import SamplerConfig, StatisticKind, TailEstimate


def _tail(estimates, n_samples=1_000_000, stderr=None):
    p = np.asarray(estimates, dtype=float)
    se = np.sqrt(p * (1.0 - p) / n_samples) if stderr is None else np.full(len(p), stderr)
    return TailEstimate(statistic="R", k=list(range(len(p))), estimate=p.tolist(),
                        stderr=se.tolist(), n_samples=n_samples)


def _perco_stream(domain, x, count, seed):
    rng = np.random.default_rng(seed)
    powers = 1 << np.arange(domain.num_edges, dtype=np.int64)
    draws = rng.random((count, domain.num_edges)) < x
    return [EdgeConfig(domain, int(row @ powers)) for row in draws.astype(np.int64)]


def test_exponential_tail_recovers_rate():
    fit = fit_decay(_tail(np.exp(-0.3 * np.arange(41))))
    assert fit.c == pytest.approx(0.3, rel=1e-6)
    assert fit.C == pytest.approx(1.0, rel=1e-5)
    assert fit.ci_low <= 0.3 <= fit.ci_high
    assert fit.decays
    assert fit.statistic == StatisticKind.R
    # survivors >= 50 of 10^6 stops the fit at exp(-0.3 k) >= 5e-5
    assert fit.k_max == 33
    assert fit.k_min == 0


def test_flat_tail_does_not_decay():
    fit = fit_decay(_tail([0.5] * 20, n_samples=10_000, stderr=0.01))
    assert fit.c == pytest.approx(0.0, abs=1e-9)
    assert fit.no_decay
    assert fit.ci_low < 0.0 < fit.ci_high


def test_perimeter_margin_and_survivors():
    # k_max = 8 leaves only k = 0, 1, 2 below the margin
    with pytest.raises(InsufficientData):
        fit_decay(_tail(np.exp(-0.1 * np.arange(9))))
    # 100 samples leave at most one survivor count above 50
    with pytest.raises(InsufficientData):
        fit_decay(_tail(np.exp(-1.0 * np.arange(30)), n_samples=100))


def test_noisy_tail_widens_interval():
    rng = np.random.default_rng(12)
    clean = np.exp(-0.2 * np.arange(31))
    noisy = np.minimum.accumulate(np.clip(clean * np.exp(rng.normal(0.0, 0.05, 31)), 0.0, 1.0))
    tight = fit_decay(_tail(clean, n_samples=100_000))
    loose = fit_decay(_tail(noisy, n_samples=100_000))
    assert loose.residual > tight.residual
    assert loose.c == pytest.approx(0.2, abs=0.05)
    assert (loose.ci_high - loose.ci_low) >= (tight.ci_high - tight.ci_low)


def test_decay_fit_validation():
    with pytest.raises(ValidationError):
        DecayFit(c=0.1, C=1.0, ci_low=0.2, ci_high=0.0, k_min=0, k_max=5, n_points=6, residual=1.0)
    with pytest.raises(ValidationError):
        DecayFit(c=0.1, C=1.0, ci_low=-math.inf, ci_high=0.0, k_min=0, k_max=5, n_points=6, residual=1.0)


def test_point_seed():
    assert point_seed(None, 3) is None
    assert point_seed(5, 0) == point_seed(5, 0)
    assert point_seed(5, 0) != point_seed(5, 1)


def test_scan_checks_grid():
    cfg = SamplerConfig(sweeps=10, burn_in_sweeps=0, seed=1)
    assert scan([], 1, cfg).points == []
    for bad in ([(1.0, 0.5)], [(2.0, 0.0)], [(2.0, 1.0)]):
        with pytest.raises(OutOfRange):
            scan(bad, 1, cfg)


@pytest.mark.slow
def test_scan_on_small_ball():
    cfg = SamplerConfig(sweeps=2000, burn_in_sweeps=100, seed=3)
    result = scan([(1.2, 0.95), (2.5, 0.95)], 1, cfg)
    assert [p.n for p in result.points] == [1.2, 2.5]
    first, second = result.points
    assert (first.num_vertices, first.num_edges) == (24, 30)
    assert first.xc is not None and second.xc is None
    assert first.eps_line > first.inv_sqrt3
    assert first.fit.statistic == StatisticKind.R


def test_probe_accepts_expected_order(two_hex):
    low = _perco_stream(two_hex, 0.3, 4000, 1)
    high = _perco_stream(two_hex, 0.7, 4000, 2)
    report = domination_probe(low, high, statistics=("size", "cluster", "edge:0"), significance=3.0)
    assert report.ordered
    assert all(s.significant_difference for s in report.statistics)
    assert report.n_a == report.n_b == 4000


def test_probe_flags_reversed_order(two_hex):
    low = _perco_stream(two_hex, 0.3, 4000, 1)
    high = _perco_stream(two_hex, 0.7, 4000, 2)
    report = domination_probe(high, low, statistics=("size", "cluster"), significance=3.0)
    assert set(report.violations) == {"size", "cluster"}
    assert all(s.p_value < 1e-3 for s in report.statistics)


def test_probe_skips_r_for_non_loop_samples(two_hex):
    samples = _perco_stream(two_hex, 0.5, 50, 3)
    report = domination_probe(samples, samples, statistics=("R",))
    assert report.statistics[0].skipped is not None
    assert report.ordered


def test_probe_identical_streams(single_hex):
    samples = [EdgeConfig.full(single_hex)] * 10
    report = domination_probe(samples, samples, statistics=("size", "R"))
    assert all(s.z == 0.0 for s in report.statistics)


def test_probe_rejects_mixed_domains(single_hex, two_hex):
    with pytest.raises(DomainMismatch):
        domination_probe([EdgeConfig.empty(single_hex)], [EdgeConfig.empty(two_hex)])
    with pytest.raises(ValueError):
        domination_probe([EdgeConfig.empty(single_hex)], [EdgeConfig.empty(single_hex)], statistics=("width",))
