"""
Monte Carlo sampling for domains beyond exact enumeration

The loop measure is sampled by single-face Metropolis moves: flipping a face
toggles its six edges, which keeps the configuration even and, on a simply
connected domain, connects the whole cycle space. Chains keep a per-edge loop
id so the change in the number of loops is found by re-tracing only the
loops that touch the flipped face.
"""
import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from config.config import config
from hexloop.configurations import EdgeConfig, decompose_loops, is_loop_config, max_surrounding_loop
from hexloop.couplings import superpose
from hexloop.errors import ChainCorruption, OutOfRange
from hexloop.hexlattice import Domain

logger = logging.getLogger(__name__)

_BLOCK = 4096


class StatisticKind(str, Enum):
    """Tail statistics"""
    CLUSTER = "cluster"
    R = "R"


class Measure(str, Enum):
    """Sampled measure"""
    LOOP = "loop"
    FK = "fk"


class SamplerConfig(BaseModel):
    """Chain lengths and seeding"""
    burn_in_sweeps: int = Field(default_factory=lambda: config.burn_in_sweeps)
    sweeps: int = 1000
    thinning: int = 1
    seed: Optional[int] = None
    chains: int = 1
    batches: int = Field(default_factory=lambda: config.batches)
    check_interval: int = Field(default_factory=lambda: config.cache_check_interval)

    @field_validator("sweeps", "thinning", "chains", "check_interval")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("Sweeps, thinning, chains and check interval must be positive")
        return v

    @field_validator("burn_in_sweeps")
    @classmethod
    def validate_burn_in(cls, v: int) -> int:
        if v < 0:
            raise ValueError("Burn-in must be non-negative")
        return v

    @field_validator("batches")
    @classmethod
    def validate_batches(cls, v: int) -> int:
        if v < 2:
            raise ValueError("At least 2 batches are needed for batch means")
        return v

    @property
    def samples_per_chain(self) -> int:
        return self.sweeps // self.thinning


class TailEstimate(BaseModel):
    """Survival estimates P(stat >= k) for k = 0..k_max"""
    statistic: StatisticKind
    measure: Measure = Measure.LOOP
    k: list[int]
    estimate: list[float]
    stderr: list[float]
    n_samples: int

    @field_validator("estimate")
    @classmethod
    def validate_estimates(cls, v: list[float]) -> list[float]:
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError("Tail estimates must lie in [0, 1]")
        if any(b > a for a, b in zip(v, v[1:])):
            raise ValueError("Tail estimates must be non-increasing in k")
        return v

    @model_validator(mode="after")
    def validate_lengths(self) -> "TailEstimate":
        if not len(self.k) == len(self.estimate) == len(self.stderr):
            raise ValueError("k, estimate and stderr must have the same length")
        return self

    def survivors(self) -> list[int]:
        """Number of samples with stat >= k"""
        return [int(round(p * self.n_samples)) for p in self.estimate]


# ==================== Chain ====================

def chain_seeds(seed: Optional[int], chain: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """(loop, percolation) seed sequences of chain i"""
    return (np.random.SeedSequence(seed, spawn_key=(chain,)),
            np.random.SeedSequence(seed, spawn_key=(chain, 1)))


@dataclass(eq=False)
class ChainState:
    """Mutable face-flip chain state"""
    domain: Domain
    rng: np.random.Generator
    track_loops: bool = True
    check_interval: int = field(default_factory=lambda: config.cache_check_interval)
    open: bytearray = field(init=False)
    size: int = field(init=False, default=0)
    loop_id: list[int] = field(init=False)
    loops: dict[int, list[int]] = field(init=False, default_factory=dict)
    steps: int = field(init=False, default=0)
    accepted: int = field(init=False, default=0)
    _next_id: int = field(init=False, default=0)
    _faces: np.ndarray = field(init=False, repr=False)
    _uniforms: np.ndarray = field(init=False, repr=False)
    _cursor: int = field(init=False, default=_BLOCK, repr=False)

    def __post_init__(self):
        self.open = bytearray(self.domain.num_edges)
        self.loop_id = [-1] * self.domain.num_edges
        self._face_edges = [f.edges for f in self.domain.faces]
        self._endpoints = [self.domain.edge_vertices(e) for e in range(self.domain.num_edges)]
        self._vertex_edges = self.domain.vertex_edges
        origin = self.domain.origin_index
        self._origin = origin
        ray = 0 if origin is None else self.domain.vertex_ray_mask(self.domain.origin)
        self._origin_ray = [e for e in range(self.domain.num_edges) if ray >> e & 1]

    @property
    def loop_count(self) -> int:
        return len(self.loops)

    @property
    def bits(self) -> int:
        return sum(1 << e for e, state in enumerate(self.open) if state)

    @property
    def config(self) -> EdgeConfig:
        return EdgeConfig(self.domain, self.bits)

    def _draw(self) -> tuple[int, float]:
        if self._cursor >= _BLOCK:
            self._faces = self.rng.integers(0, self.domain.num_faces, size=_BLOCK)
            self._uniforms = self.rng.random(_BLOCK)
            self._cursor = 0
        i = self._cursor
        self._cursor += 1
        return int(self._faces[i]), float(self._uniforms[i])

    def _trace(self, region: set[int]) -> list[list[int]]:
        """Loops formed by the currently open edges of region"""
        remaining = {e for e in region if self.open[e]}
        found = []
        while remaining:
            first = remaining.pop()
            start, current = self._endpoints[first]
            loop, previous = [first], first
            while current != start:
                nxt = next(e for e in self._vertex_edges[current] if e != previous and self.open[e])
                remaining.discard(nxt)
                loop.append(nxt)
                t, h = self._endpoints[nxt]
                current = h if t == current else t
                previous = nxt
            found.append(loop)
        return found

    def verify_cache(self) -> None:
        """Recompute |omega| and the loop count from scratch"""
        cfg = self.config
        if not is_loop_config(cfg):
            logger.error(f"Chain left the even subgraphs after {self.steps} steps")
            raise ChainCorruption("Configuration is no longer even")
        if cfg.size != self.size:
            logger.error(f"Cached size {self.size} differs from recomputed {cfg.size}")
            raise ChainCorruption("Cached |omega| does not match the configuration")
        if self.track_loops:
            recomputed = decompose_loops(cfg).count
            if recomputed != self.loop_count:
                logger.error(f"Cached loop count {self.loop_count} differs from recomputed {recomputed}")
                raise ChainCorruption("Cached loop count does not match the configuration")

    # ---------- statistics ----------

    def origin_loop_size(self) -> int:
        """|C_0| of the current loop configuration"""
        if self._origin is None:
            return 0
        for e in self._vertex_edges[self._origin]:
            if self.open[e]:
                if self.track_loops:
                    return len(self.loops[self.loop_id[e]])
                return _cluster_size(self.domain, self.open, self._origin)
        return 1

    def max_surrounding_loop(self) -> int:
        """R of the current loop configuration at the marked vertex"""
        if self._origin is None:
            return 0
        if not self.track_loops:
            return max_surrounding_loop(self.config)
        parity: dict[int, int] = {}
        for e in self._origin_ray:
            if self.open[e]:
                lid = self.loop_id[e]
                parity[lid] = parity.get(lid, 0) ^ 1
        candidates = [lid for lid, odd in parity.items() if odd]
        for e in self._vertex_edges[self._origin]:
            if self.open[e]:
                candidates.append(self.loop_id[e])
                break
        return max((len(self.loops[lid]) for lid in candidates), default=0)


def _cluster_size(domain: Domain, open_edges, origin: int) -> int:
    """Breadth-first size of the cluster of origin"""
    seen = {origin}
    queue = deque([origin])
    while queue:
        v = queue.popleft()
        for e in domain.vertex_edges[v]:
            if open_edges[e]:
                t, h = domain.edge_vertices(e)
                w = h if t == v else t
                if w not in seen:
                    seen.add(w)
                    queue.append(w)
    return len(seen)


def _weight_ratio(x: float, n: float, dsize: int, dloops: int) -> float:
    if x > 0.0:
        factor = x ** dsize
    elif dsize > 0:
        return 0.0
    else:
        factor = math.inf if dsize < 0 else 1.0
    return factor * n ** dloops


def face_flip_step(state: ChainState, n: float, x: float) -> ChainState:
    """
    One Metropolis face flip targeting x^|omega| n^loops

    A uniform face is proposed and its six edges toggled; the move is
    accepted with probability min(1, x^d|omega| n^d(loops)).
    """
    face, u = state._draw()
    edges = state._face_edges[face]
    opened = [e for e in edges if state.open[e]]
    dsize = 6 - 2 * len(opened)

    affected = {state.loop_id[e] for e in opened} if state.track_loops else set()
    for e in edges:
        state.open[e] ^= 1
    if state.track_loops:
        region = set(edges)
        for lid in affected:
            region.update(state.loops[lid])
        new_loops = state._trace(region)
        dloops = len(new_loops) - len(affected)
    else:
        dloops = 0

    if u < _weight_ratio(x, n, dsize, dloops):
        state.size += dsize
        state.accepted += 1
        if state.track_loops:
            for lid in affected:
                for e in state.loops.pop(lid):
                    state.loop_id[e] = -1
            for e in edges:
                state.loop_id[e] = -1
            for loop in new_loops:
                lid = state._next_id
                state._next_id += 1
                state.loops[lid] = loop
                for e in loop:
                    state.loop_id[e] = lid
    else:
        for e in edges:
            state.open[e] ^= 1

    state.steps += 1
    if state.steps % state.check_interval == 0:
        state.verify_cache()
    return state


def _sweep(state: ChainState, n: float, x: float, count: int) -> None:
    for _ in range(count * state.domain.num_faces):
        face_flip_step(state, n, x)


def _check_loop_params(n: float, x: float) -> None:
    if not n > 0.0:
        raise OutOfRange(f"n must be positive, got {n}")
    if not 0.0 <= x <= 1.0:
        raise OutOfRange(f"x must lie in [0, 1], got {x}")


def _loop_chain(domain: Domain, n: float, x: float, cfg: SamplerConfig, chain: int,
                track_loops: Optional[bool] = None) -> ChainState:
    loop_seed, _ = chain_seeds(cfg.seed, chain)
    track = (n != 1.0) if track_loops is None else track_loops
    state = ChainState(domain, np.random.default_rng(loop_seed), track_loops=track,
                       check_interval=cfg.check_interval)
    _sweep(state, n, x, cfg.burn_in_sweeps)
    return state


def _states(state: ChainState, n: float, x: float, cfg: SamplerConfig) -> Iterator[ChainState]:
    for _ in range(cfg.samples_per_chain):
        _sweep(state, n, x, cfg.thinning)
        yield state


# ==================== Streams ====================

def sample_loop_config(domain: Domain, n: float, x: float, cfg: SamplerConfig,
                       chain: int = 0) -> Iterator[EdgeConfig]:
    """Thinned loop configurations after burn-in, from chain i of the master seed"""
    _check_loop_params(n, x)
    state = _loop_chain(domain, n, x, cfg, chain)
    for current in _states(state, n, x, cfg):
        yield current.config


def fk_stream(domain: Domain, x: float, cfg: SamplerConfig, chain: int = 0) -> Iterator[EdgeConfig]:
    """FK-Ising draws as loop(n=1) states superposed with independent Perco(x)"""
    _check_loop_params(1.0, x)
    _, perco_seed = chain_seeds(cfg.seed, chain)
    perco_rng = np.random.default_rng(perco_seed)
    state = _loop_chain(domain, 1.0, x, cfg, chain)
    powers = [1 << e for e in range(domain.num_edges)]
    for current in _states(state, 1.0, x, cfg):
        pi = perco_rng.random(domain.num_edges) < x
        yield EdgeConfig(domain, current.bits | sum(p for p, o in zip(powers, pi) if o))


def sample_fk(domain: Domain, x: float, rng: np.random.Generator,
              burn_in_sweeps: Optional[int] = None, size: Optional[int] = None,
              thinning: int = 1) -> Union[EdgeConfig, list[EdgeConfig]]:
    """
    FK draws: loop(n=1) states superposed with Perco(x)

    All draws come from one chain, burnt in once and advanced by `thinning`
    sweeps between draws. Returns a single EdgeConfig when size is None,
    otherwise a list of `size` draws.
    """
    if not 0.0 < x < 1.0:
        raise OutOfRange(f"x must lie in (0, 1), got {x}")
    if (size is not None and size < 1) or thinning < 1:
        raise OutOfRange(f"size and thinning must be positive, got {size} and {thinning}")
    sweeps = config.burn_in_sweeps if burn_in_sweeps is None else burn_in_sweeps
    state = ChainState(domain, rng, track_loops=False)
    _sweep(state, 1.0, x, sweeps)
    draws = []
    for i in range(1 if size is None else size):
        if i:
            _sweep(state, 1.0, x, thinning)
        pi = EdgeConfig.from_edges(domain, np.flatnonzero(rng.random(domain.num_edges) < x).tolist())
        draws.append(superpose(state.config, pi))
    return draws[0] if size is None else draws


# ==================== Tail estimation ====================

def _chain_statistics(domain: Domain, n: float, x: float, statistic: StatisticKind, measure: Measure,
                      cfg: SamplerConfig, chain: int) -> np.ndarray:
    values = np.empty(cfg.samples_per_chain, dtype=np.int64)
    if measure == Measure.FK:
        origin = domain.origin_index
        for i, sample in enumerate(fk_stream(domain, x, cfg, chain)):
            opened = [sample.bits >> e & 1 for e in range(domain.num_edges)]
            values[i] = 0 if origin is None else _cluster_size(domain, opened, origin)
    else:
        state = _loop_chain(domain, n, x, cfg, chain, track_loops=(n != 1.0 or statistic == StatisticKind.R))
        for i, current in enumerate(_states(state, n, x, cfg)):
            values[i] = (current.origin_loop_size() if statistic == StatisticKind.CLUSTER
                         else current.max_surrounding_loop())
    logger.debug(f"Chain {chain} finished: {len(values)} samples")
    return values


def _chain_job(args: tuple) -> np.ndarray:
    return _chain_statistics(*args)


def estimate_tail(domain: Domain, n: float, x: float, statistic, k_max: int, cfg: SamplerConfig,
                  measure=Measure.LOOP, workers: Optional[int] = None) -> TailEstimate:
    """
    Survival estimates of |C_0| or R with batch-means standard errors

    Each chain's sample series is cut into cfg.batches consecutive batches;
    the standard error is the spread of all batch means over sqrt(#batches).
    """
    statistic, measure = StatisticKind(statistic), Measure(measure)
    if measure == Measure.FK and statistic == StatisticKind.R:
        raise OutOfRange("R is defined for loop configurations only")
    if not 0 <= k_max <= domain.num_edges:
        raise OutOfRange(f"k_max must lie in [0, {domain.num_edges}], got {k_max}")
    _check_loop_params(n, x)

    jobs = [(domain, n, x, statistic, measure, cfg, chain) for chain in range(cfg.chains)]
    workers = workers or config.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            series = list(pool.map(_chain_job, jobs))
    else:
        series = [_chain_job(job) for job in jobs]

    ks = np.arange(k_max + 1)
    batch_means = []
    for values in series:
        for batch in np.array_split(values, cfg.batches):
            if len(batch):
                batch_means.append((batch[:, None] >= ks[None, :]).mean(axis=0))
    all_values = np.concatenate(series)
    counts = (all_values[:, None] >= ks[None, :]).sum(axis=0)
    estimate = counts / len(all_values)
    means = np.array(batch_means)
    stderr = means.std(axis=0, ddof=1) / math.sqrt(len(means)) if len(means) > 1 else np.zeros_like(estimate)

    logger.info(f"Tail of {statistic.value} under {measure.value} on {domain.name} (n={n}, x={x}): "
                f"{len(all_values)} samples from {cfg.chains} chain(s)")
    return TailEstimate(
        statistic=statistic,
        measure=measure,
        k=ks.tolist(),
        estimate=estimate.tolist(),
        stderr=stderr.tolist(),
        n_samples=int(len(all_values)),
    )
