"""
Tests for the face-flip sampler and tail estimation
"""
import numpy as np
import pytest
from pydantic import ValidationError

from hexloop import mcmc
from hexloop.analysis import domination_probe
from hexloop.configurations import is_loop_config, max_surrounding_loop, origin_loop_length
from hexloop.errors import ChainCorruption, OutOfRange
from hexloop.hexlattice import preset_domain
from hexloop.mcmc import (
    ChainState,
    Measure,
    SamplerConfig,
    StatisticKind,
    TailEstimate,
    chain_seeds,
    estimate_tail,
    face_flip_step,
    fk_stream,
    sample_fk,
    sample_loop_config,
)
from hexloop.measures import MeasureKind, WeightVector, cluster_size_tail, exact_distribution


def _cfg(**kwargs):
    base = {"burn_in_sweeps": 50, "sweeps": 200, "seed": 17, "batches": 10}
    return SamplerConfig(**{**base, **kwargs})


def test_sampler_config_validation():
    cfg = SamplerConfig(sweeps=100, thinning=3, burn_in_sweeps=0)
    assert cfg.samples_per_chain == 33
    for bad in ({"sweeps": 0}, {"thinning": 0}, {"chains": 0}, {"burn_in_sweeps": -1}, {"batches": 1}):
        with pytest.raises(ValidationError):
            SamplerConfig(**bad)


def test_sampler_config_reads_environment(monkeypatch):
    monkeypatch.setenv("HEXLOOP_BURN_IN_SWEEPS", "7")
    monkeypatch.setenv("HEXLOOP_BATCHES", "5")
    cfg = SamplerConfig()
    assert (cfg.burn_in_sweeps, cfg.batches) == (7, 5)


def test_tail_estimate_validation():
    with pytest.raises(ValidationError):
        TailEstimate(statistic="R", k=[0, 1], estimate=[0.5, 0.7], stderr=[0.0, 0.0], n_samples=10)
    with pytest.raises(ValidationError):
        TailEstimate(statistic="R", k=[0, 1], estimate=[1.0], stderr=[0.0, 0.0], n_samples=10)
    tail = TailEstimate(statistic="cluster", k=[0, 1], estimate=[1.0, 0.25], stderr=[0.0, 0.1], n_samples=8)
    assert tail.survivors() == [8, 2]
    assert tail.measure == Measure.LOOP


def test_chain_seeds_are_distinct():
    loop0, perco0 = chain_seeds(5, 0)
    loop1, _ = chain_seeds(5, 1)
    first = [np.random.default_rng(s).integers(1 << 30) for s in (loop0, perco0, loop1)]
    assert len(set(first)) == 3
    again, _ = chain_seeds(5, 0)
    assert np.random.default_rng(again).integers(1 << 30) == first[0]


def test_face_flips_keep_caches_consistent(hex_ball1):
    state = ChainState(hex_ball1, np.random.default_rng(2), track_loops=True, check_interval=1)
    for _ in range(3000):
        face_flip_step(state, 1.7, 0.9)
        assert state.size == state.config.size
    assert is_loop_config(state.config)
    assert 0 < state.accepted <= state.steps == 3000


def test_chain_statistics_match_configuration(hex_ball1):
    state = ChainState(hex_ball1, np.random.default_rng(8), track_loops=True, check_interval=97)
    for _ in range(300):
        for _ in range(hex_ball1.num_faces):
            face_flip_step(state, 2.0, 0.95)
        cfg = state.config
        assert state.max_surrounding_loop() == max_surrounding_loop(cfg)
        assert state.origin_loop_size() == origin_loop_length(cfg)


def test_untracked_chain_statistics(hex_ball1):
    state = ChainState(hex_ball1, np.random.default_rng(4), track_loops=False, check_interval=50)
    for _ in range(500):
        face_flip_step(state, 1.0, 0.8)
    cfg = state.config
    assert state.origin_loop_size() == origin_loop_length(cfg)
    assert state.max_surrounding_loop() == max_surrounding_loop(cfg)


def test_corrupted_cache_is_detected(hex_ball1):
    state = ChainState(hex_ball1, np.random.default_rng(3), check_interval=1000)
    for _ in range(200):
        face_flip_step(state, 1.5, 0.9)
    state.size += 2
    with pytest.raises(ChainCorruption):
        state.verify_cache()


def test_zero_weight_keeps_chain_empty(two_hex):
    state = ChainState(two_hex, np.random.default_rng(0), check_interval=10)
    for _ in range(200):
        face_flip_step(state, 3.0, 0.0)
    assert state.bits == 0
    assert state.accepted == 0


def test_same_seed_same_stream(two_hex):
    a = [c.bits for c in sample_loop_config(two_hex, 2.0, 0.7, _cfg())]
    b = [c.bits for c in sample_loop_config(two_hex, 2.0, 0.7, _cfg())]
    c = [c.bits for c in sample_loop_config(two_hex, 2.0, 0.7, _cfg(seed=18))]
    assert a == b
    assert a != c
    assert len(a) == 200


def test_loop_parameters_are_checked(two_hex):
    with pytest.raises(OutOfRange):
        next(sample_loop_config(two_hex, 0.0, 0.5, _cfg()))
    with pytest.raises(OutOfRange):
        next(sample_loop_config(two_hex, 1.0, 1.5, _cfg()))
    with pytest.raises(OutOfRange):
        sample_fk(two_hex, 0.0, np.random.default_rng(0))


def test_loop_sampler_matches_exact_single_hexagon(single_hex):
    cfg = _cfg(burn_in_sweeps=100, sweeps=40000)
    samples = [c.size for c in sample_loop_config(single_hex, 2.0, 0.5, cfg)]
    assert np.mean(np.array(samples) == 6) == pytest.approx(1.0 / 33.0, abs=0.01)


@pytest.mark.slow
def test_loop_sampler_matches_exact_mean_size(two_hex):
    n, x = 1.5, 0.85
    exact = exact_distribution(MeasureKind.LOOP, two_hex, WeightVector.constant(two_hex, x), n).mean_size()
    cfg = _cfg(burn_in_sweeps=200, sweeps=30000)
    sizes = np.array([c.size for c in sample_loop_config(two_hex, n, x, cfg)])
    assert sizes.mean() == pytest.approx(exact, abs=0.15)


@pytest.mark.slow
def test_fk_stream_matches_exact_cluster_tail(single_hex):
    x = 0.6
    exact = cluster_size_tail(exact_distribution(MeasureKind.FK, single_hex, WeightVector.constant(single_hex, x)))
    cfg = _cfg(burn_in_sweeps=100, sweeps=40000)
    sizes = [len(c.edges()) for c in fk_stream(single_hex, x, cfg)]
    # on a hexagon |C_0| = 6 iff at least five edges are open
    assert np.mean(np.array(sizes) >= 5) == pytest.approx(exact[6], abs=0.02)


def test_sample_fk_returns_superposition(two_hex):
    draw = sample_fk(two_hex, 0.5, np.random.default_rng(1), burn_in_sweeps=20)
    assert draw.domain == two_hex
    draws = sample_fk(two_hex, 0.5, np.random.default_rng(1), burn_in_sweeps=20, size=3)
    assert len(draws) == 3
    assert draws[0] == draw
    with pytest.raises(OutOfRange):
        sample_fk(two_hex, 0.5, np.random.default_rng(1), size=0)
    with pytest.raises(OutOfRange):
        sample_fk(two_hex, 0.5, np.random.default_rng(1), size=2, thinning=0)


def test_sample_fk_burns_in_once(two_hex, monkeypatch):
    counts = []
    sweep = mcmc._sweep

    def counting_sweep(state, n, x, count):
        counts.append(count)
        sweep(state, n, x, count)

    monkeypatch.setattr(mcmc, "_sweep", counting_sweep)
    sample_fk(two_hex, 0.5, np.random.default_rng(1), burn_in_sweeps=30, size=4, thinning=2)
    assert counts == [30, 2, 2, 2]


def test_tail_shape(two_hex):
    tail = estimate_tail(two_hex, 2.0, 0.7, "cluster", two_hex.num_edges, _cfg())
    assert tail.k == list(range(two_hex.num_edges + 1))
    assert tail.estimate[0] == tail.estimate[1] == 1.0
    assert tail.n_samples == 200
    assert all(se >= 0.0 for se in tail.stderr)


def test_tail_of_r_on_single_hexagon(single_hex):
    tail = estimate_tail(single_hex, 2.0, 0.5, StatisticKind.R, 6, _cfg(sweeps=20000, batches=20))
    assert tail.estimate[0] == 1.0
    # R is either 0 or 6 on one hexagon
    assert tail.estimate[1] == tail.estimate[6]
    assert tail.estimate[6] == pytest.approx(1.0 / 33.0, abs=0.01)


def test_tail_rejects_bad_requests(two_hex):
    with pytest.raises(OutOfRange):
        estimate_tail(two_hex, 1.0, 0.5, "R", 5, _cfg(), measure="fk")
    with pytest.raises(OutOfRange):
        estimate_tail(two_hex, 2.0, 0.5, "R", two_hex.num_edges + 1, _cfg())
    with pytest.raises(ValueError):
        estimate_tail(two_hex, 2.0, 0.5, "diameter", 5, _cfg())


def test_fk_tail(two_hex):
    tail = estimate_tail(two_hex, 1.0, 0.5, "cluster", 10, _cfg(), measure=Measure.FK)
    assert tail.measure == Measure.FK
    assert tail.estimate[1] == 1.0


@pytest.mark.slow
def test_tail_does_not_depend_on_workers(two_hex):
    cfg = _cfg(chains=3)
    serial = estimate_tail(two_hex, 2.0, 0.7, "R", 10, cfg, workers=1)
    parallel = estimate_tail(two_hex, 2.0, 0.7, "R", 10, cfg, workers=3)
    assert serial == parallel
    assert serial.n_samples == 600


@pytest.mark.parametrize("n,x", [(2.0, 0.7), (1.5, 0.8), (3.0, 0.9)])
def test_first_flip_accepts_with_loop_weight(hex_ball1, n, x):
    # from the empty configuration every face flip adds six edges and one loop
    rng = np.random.default_rng(12)
    trials, accepted = 4000, 0
    for _ in range(trials):
        state = ChainState(hex_ball1, rng, check_interval=1)
        face_flip_step(state, n, x)
        accepted += state.accepted
    assert accepted / trials == pytest.approx(min(1.0, n * x ** 6), abs=0.025)


# ---------- laws against exact tables ----------

def _empirical_tv(exact, samples):
    counts = np.bincount([s.bits for s in samples], minlength=1 << exact.domain.num_edges)
    return 0.5 * np.abs(counts / len(samples) - exact.dense()).sum()


@pytest.mark.slow
@pytest.mark.parametrize("n,x", [(1.5, 0.85), (3.0, 0.7)])
def test_loop_sampler_law_matches_exact_table(two_hex, n, x):
    exact = exact_distribution(MeasureKind.LOOP, two_hex, WeightVector.constant(two_hex, x), n)
    samples = list(sample_loop_config(two_hex, n, x, _cfg(burn_in_sweeps=200, sweeps=40000)))
    assert _empirical_tv(exact, samples) < 0.03


@pytest.mark.slow
def test_sample_fk_law_matches_exact_table(single_hex):
    x = 0.6
    exact = exact_distribution(MeasureKind.FK, single_hex, WeightVector.constant(single_hex, x))
    draws = sample_fk(single_hex, x, np.random.default_rng(23), burn_in_sweeps=100, size=20000, thinning=5)
    assert _empirical_tv(exact, draws) < 0.05
    streamed = list(fk_stream(single_hex, x, _cfg(burn_in_sweeps=100, sweeps=100000, thinning=5)))
    assert _empirical_tv(exact, streamed) < 0.05


@pytest.mark.slow
def test_orderings_hold_on_a_hex_ball():
    ball = preset_domain("hex_ball", 6)
    cfg = _cfg(burn_in_sweeps=200, sweeps=1000, thinning=5, batches=10)
    fk_low = list(fk_stream(ball, 0.4, cfg))
    fk_high = list(fk_stream(ball, 0.6, cfg.model_copy(update={"seed": 18})))
    report = domination_probe(fk_low, fk_high, statistics=("size", "cluster"), batches=10)
    assert report.ordered
    assert report.n_a == report.n_b == 200

    loops = list(sample_loop_config(ball, 1.0, 0.5, cfg.model_copy(update={"seed": 19})))
    fk = list(fk_stream(ball, 0.5, cfg.model_copy(update={"seed": 20})))
    assert domination_probe(loops, fk, statistics=("size", "cluster"), batches=10).ordered
