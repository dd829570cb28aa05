"""
Exact enumeration oracle for the loop, percolation and FK-Ising measures

Loop tables enumerate the cycle space through subsets of facial hexagons;
percolation and FK tables enumerate only the free edges (0 < x_e < 1), with
x_e = 1 edges forced open and x_e = 0 edges forced closed. Work is split in
fixed chunks of configuration indices whose partial sums are combined in
chunk order, so results do not depend on the worker count.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, field_validator

from config.config import config
from hexloop.configurations import (
    EdgeConfig,
    bits_matrix,
    component_counts,
    component_labels,
    matrix_indices,
    origin_sizes,
)
from hexloop.errors import DomainMismatch, NonPositiveN, TooLarge
from hexloop.hexlattice import Domain

logger = logging.getLogger(__name__)


class MeasureKind(str, Enum):
    """Measures with exact tables"""
    LOOP = "loop"
    PERCO = "perco"
    FK = "fk"


class SiteKind(str, Enum):
    EDGES = "edges"
    FACES = "faces"


# ==================== Types ====================

@dataclass(frozen=True, eq=False)
class WeightVector:
    """Per-edge weights x_e in [0, 1]"""
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.domain.num_edges:
            raise ValueError(f"Expected {self.domain.num_edges} weights, got {values.shape[0]}")
        if np.any(~np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("Edge weights must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, domain: Domain, x: float) -> "WeightVector":
        return cls(domain, np.full(domain.num_edges, float(x)))

    @classmethod
    def masked(cls, domain: Domain, x: float, kept: Union[EdgeConfig, Iterable[int]]) -> "WeightVector":
        """x on the kept edges, 0 elsewhere"""
        keep = kept.edges() if isinstance(kept, EdgeConfig) else list(kept)
        values = np.zeros(domain.num_edges)
        values[keep] = float(x)
        return cls(domain, values)

    def without(self, removed: Union[EdgeConfig, Iterable[int]]) -> "WeightVector":
        drop = removed.edges() if isinstance(removed, EdgeConfig) else list(removed)
        values = self.values.copy()
        values[drop] = 0.0
        return WeightVector(self.domain, values)

    @property
    def free_edges(self) -> np.ndarray:
        return np.flatnonzero((self.values > 0.0) & (self.values < 1.0))

    @property
    def forced_open(self) -> np.ndarray:
        return np.flatnonzero(self.values == 1.0)

    @property
    def p(self) -> np.ndarray:
        """FK edge parameters p_e = 2x_e / (1 + x_e)"""
        return 2.0 * self.values / (1.0 + self.values)


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    """
    Probability table over configurations of edges or faces

    Only configurations with positive probability are stored; support holds
    configuration indices in increasing order.
    """
    domain: Domain
    sites: SiteKind
    support: np.ndarray
    probabilities: np.ndarray
    normalization: float
    label: str = ""

    @property
    def num_sites(self) -> int:
        return self.domain.num_edges if self.sites == SiteKind.EDGES else self.domain.num_faces

    def total(self) -> float:
        return math.fsum(self.probabilities)

    def probability(self, index: int) -> float:
        pos = int(np.searchsorted(self.support, index))
        if pos < len(self.support) and self.support[pos] == index:
            return float(self.probabilities[pos])
        return 0.0

    def dense(self) -> np.ndarray:
        """Full table of length 2^sites"""
        if self.num_sites > config.max_table_edges or self.num_sites > 26:
            raise TooLarge(f"Dense table over {self.num_sites} sites is too large")
        out = np.zeros(1 << self.num_sites)
        out[self.support] = self.probabilities
        return out

    def site_marginals(self) -> np.ndarray:
        """P(site open) per site"""
        return bits_matrix(self.support, self.num_sites).T.astype(np.float64) @ self.probabilities

    def expectation(self, statistic: Callable[[np.ndarray], np.ndarray]) -> float:
        """E[statistic], with statistic applied to the array of support indices"""
        return math.fsum(np.asarray(statistic(self.support), dtype=np.float64) * self.probabilities)

    def mean_size(self) -> float:
        sizes = bits_matrix(self.support, self.num_sites).sum(axis=1)
        return math.fsum(sizes * self.probabilities)


class PartitionReport(BaseModel):
    """Both sides of the loop/FK partition function identity"""
    z_loop: float
    z_fk: float
    factor: float
    discrepancy: float

    @field_validator("z_loop", "z_fk", "factor")
    @classmethod
    def validate_positive(cls, v: float) -> float:
        if not v > 0.0:
            raise ValueError("Partition functions and factors must be strictly positive")
        return v


class IdentityReport(BaseModel):
    """Outcome of an exact identity or inequality check"""
    name: str
    holds: bool
    max_discrepancy: float
    tolerance: float
    checked: int
    details: dict = {}


# ==================== Enumeration engine ====================

def _chunk_bounds(total: int, chunk: Optional[int] = None) -> list[tuple[int, int]]:
    chunk = chunk or (1 << config.chunk_bits)
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def map_chunks(func: Callable[[int, int], object], total: int, workers: Optional[int] = None,
               chunk: Optional[int] = None) -> list:
    """Apply func to consecutive index ranges, results in range order"""
    bounds = _chunk_bounds(total, chunk)
    workers = workers or config.workers
    if workers <= 1 or len(bounds) <= 1:
        return [func(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: func(*ab), bounds))


def _ordered_sum(parts: Sequence[np.ndarray]) -> float:
    return math.fsum(math.fsum(part) for part in parts)


def _check_loop_size(domain: Domain) -> None:
    if domain.num_faces > config.max_loop_faces:
        raise TooLarge(f"Cycle space enumeration over {domain.num_faces} faces exceeds "
                       f"the limit of {config.max_loop_faces}")


def _check_free_size(w: WeightVector) -> None:
    free = len(w.free_edges)
    if free > config.max_free_edges:
        raise TooLarge(f"Enumeration over {free} free edges exceeds the limit of {config.max_free_edges}")


def _check_table_size(domain: Domain) -> None:
    if domain.num_edges > config.max_table_edges:
        raise TooLarge(f"Configuration indices over {domain.num_edges} edges do not fit the table layout")


def _check_weights(domain: Domain, w: WeightVector) -> None:
    if w.domain != domain:
        raise DomainMismatch("Weight vector belongs to a different domain")


def even_subgraph_matrix(domain: Domain, start: int, stop: int) -> np.ndarray:
    """Even subgraphs for face subsets start..stop-1 as a boolean (rows x edges) matrix"""
    subsets = np.arange(start, stop, dtype=np.int64)
    face_bits = bits_matrix(subsets, domain.num_faces).astype(np.int64)
    return ((face_bits @ domain.face_incidence.astype(np.int64)) % 2).astype(bool)


def _loop_terms(domain: Domain, n: float, w: WeightVector, start: int, stop: int
                ) -> tuple[np.ndarray, np.ndarray]:
    open_edges = even_subgraph_matrix(domain, start, stop)
    weights = np.prod(np.where(open_edges, w.values, 1.0), axis=1)
    if n != 1.0:
        labels = component_labels(open_edges, domain)
        loops = component_counts(labels) - domain.num_vertices + open_edges.sum(axis=1)
        weights = weights * np.power(float(n), loops)
    return matrix_indices(open_edges), weights


def _free_matrix(domain: Domain, w: WeightVector, start: int, stop: int) -> np.ndarray:
    free = w.free_edges
    open_edges = np.zeros((stop - start, domain.num_edges), dtype=bool)
    open_edges[:, free] = bits_matrix(np.arange(start, stop, dtype=np.int64), len(free))
    open_edges[:, w.forced_open] = True
    return open_edges


def _edge_terms(domain: Domain, w: WeightVector, kind: MeasureKind, start: int, stop: int
                ) -> tuple[np.ndarray, np.ndarray]:
    open_edges = _free_matrix(domain, w, start, stop)
    free = w.free_edges
    q = w.values[free] if kind == MeasureKind.PERCO else w.p[free]
    sub = open_edges[:, free]
    weights = np.prod(np.where(sub, q, 1.0 - q), axis=1)
    if kind == MeasureKind.FK:
        labels = component_labels(open_edges, domain)
        weights = weights * np.power(2.0, component_counts(labels))
    return matrix_indices(open_edges), weights


# ==================== Partition functions ====================

def z_loop(domain: Domain, n: float, w: WeightVector, workers: Optional[int] = None) -> float:
    """
    Loop partition function: sum over even subgraphs of prod(x_e) * n^loops

    Raises:
        NonPositiveN: n <= 0
        TooLarge: more faces than the cycle space limit
    """
    if not n > 0:
        raise NonPositiveN(f"Loop weight n must be positive, got {n}")
    _check_weights(domain, w)
    _check_loop_size(domain)
    parts = map_chunks(lambda a, b: _loop_terms(domain, n, w, a, b)[1], 1 << domain.num_faces, workers)
    return _ordered_sum(parts)


def z_fk(domain: Domain, w: WeightVector, workers: Optional[int] = None) -> float:
    """FK partition function: sum of prod p_e prod (1 - p_e) 2^k over all subsets"""
    _check_weights(domain, w)
    _check_free_size(w)
    parts = map_chunks(lambda a, b: _edge_terms(domain, w, MeasureKind.FK, a, b)[1],
                       1 << len(w.free_edges), workers)
    return _ordered_sum(parts)


def _assemble(domain: Domain, sites: SiteKind, parts: list[tuple[np.ndarray, np.ndarray]],
              label: str) -> ExactDistribution:
    indices = np.concatenate([idx for idx, _ in parts]) if parts else np.zeros(0, dtype=np.int64)
    weights = np.concatenate([wt for _, wt in parts]) if parts else np.zeros(0)
    normalization = _ordered_sum([wt for _, wt in parts])
    keep = weights > 0.0
    indices, weights = indices[keep], weights[keep]
    order = np.argsort(indices, kind="stable")
    probabilities = weights[order] / normalization
    indices = indices[order]
    indices.setflags(write=False)
    probabilities.setflags(write=False)
    return ExactDistribution(domain, sites, indices, probabilities, normalization, label)


def exact_distribution(kind: Union[MeasureKind, str], domain: Domain, w: WeightVector,
                       n: float = 1.0, workers: Optional[int] = None) -> ExactDistribution:
    """
    Full normalised table of Loop(n, w), Perco(w) or FK(w)

    Loop tables vanish off even configurations.
    """
    kind = MeasureKind(kind)
    _check_weights(domain, w)
    _check_table_size(domain)
    if kind == MeasureKind.LOOP:
        if not n > 0:
            raise NonPositiveN(f"Loop weight n must be positive, got {n}")
        _check_loop_size(domain)
        parts = map_chunks(lambda a, b: _loop_terms(domain, n, w, a, b), 1 << domain.num_faces, workers)
        label = f"loop(n={n:g})"
    else:
        _check_free_size(w)
        parts = map_chunks(lambda a, b: _edge_terms(domain, w, kind, a, b), 1 << len(w.free_edges), workers)
        label = kind.value
    dist = _assemble(domain, SiteKind.EDGES, parts, label)
    logger.info(f"Enumerated {label} on {domain.name}: {len(dist.support)} configurations, "
                f"Z = {dist.normalization:.12g}")
    return dist


def superposition_distribution(domain: Domain, w: WeightVector,
                               workers: Optional[int] = None) -> ExactDistribution:
    """
    Exact law of omega OR pi with omega ~ Loop(1, w) and pi ~ Perco(w) independent

    P(eta) = sum over even omega in eta of Loop(omega) * Perco_{D minus omega}(eta minus omega),
    the pi-sum over the edges of omega having been carried out.
    """
    loop = exact_distribution(MeasureKind.LOOP, domain, w, 1.0, workers)
    perco = exact_distribution(MeasureKind.PERCO, domain, w, 1.0, workers)
    loop_bits = bits_matrix(loop.support, domain.num_edges)
    loop_xprod = np.prod(np.where(loop_bits, w.values, 1.0), axis=1)
    coefficient = loop.probabilities / loop_xprod
    omegas = loop.support

    def convolve(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        etas = perco.support[start:stop]
        contained = (etas[:, None] & omegas[None, :]) == omegas[None, :]
        return etas, perco.probabilities[start:stop] * (contained @ coefficient)

    rows = max(1, min(1 << config.chunk_bits, (1 << 22) // max(len(omegas), 1)))
    parts = map_chunks(convolve, len(perco.support), workers, chunk=rows)
    dist = _assemble(domain, SiteKind.EDGES, parts, "superposition")
    return dist


def product_distribution(a: ExactDistribution, b: ExactDistribution) -> ExactDistribution:
    """Law of the union of independent draws from a and b living on disjoint edge sets"""
    if a.domain != b.domain or a.sites != b.sites:
        raise DomainMismatch("Distributions live on different domains or site sets")
    reach_a = int(np.bitwise_or.reduce(a.support)) if len(a.support) else 0
    reach_b = int(np.bitwise_or.reduce(b.support)) if len(b.support) else 0
    if reach_a & reach_b:
        raise ValueError("Product distribution needs disjoint edge sets")
    indices = (a.support[:, None] | b.support[None, :]).reshape(-1)
    weights = (a.probabilities[:, None] * b.probabilities[None, :]).reshape(-1)
    return _assemble(a.domain, a.sites, [(indices, weights)], f"{a.label} x {b.label}")


def tv_distance(a: ExactDistribution, b: ExactDistribution) -> float:
    """Total variation distance (1/2) sum |a - b|"""
    if a.domain != b.domain or a.sites != b.sites:
        raise DomainMismatch("Distributions live on different domains or site sets")
    union = np.union1d(a.support, b.support)
    pa = np.zeros(len(union))
    pb = np.zeros(len(union))
    pa[np.searchsorted(union, a.support)] = a.probabilities
    pb[np.searchsorted(union, b.support)] = b.probabilities
    return min(1.0, 0.5 * math.fsum(np.abs(pa - pb)))


def verify_partition_identity(domain: Domain, w: WeightVector,
                              workers: Optional[int] = None) -> PartitionReport:
    """Z_loop(D, 1, w) / (2^-|V| prod(1 + x_e)) against Z_FK(D, w)"""
    zl = z_loop(domain, 1.0, w, workers)
    zf = z_fk(domain, w, workers)
    factor = math.ldexp(math.prod(1.0 + float(x) for x in w.values), -domain.num_vertices)
    discrepancy = abs(zl / factor - zf) / zf
    logger.debug(f"Partition identity on {domain.name}: discrepancy {discrepancy:.3e}")
    return PartitionReport(z_loop=zl, z_fk=zf, factor=factor, discrepancy=discrepancy)


def conditional_loop_measure(domain: Domain, n: float, x: float,
                             removed: Union[EdgeConfig, Iterable[int]],
                             workers: Optional[int] = None) -> ExactDistribution:
    """Loop(n, x) with the removed edges forced closed"""
    w = WeightVector.constant(domain, x).without(removed)
    return exact_distribution(MeasureKind.LOOP, domain, w, n, workers)


def cluster_size_tail(dist: ExactDistribution) -> np.ndarray:
    """P(|C_0| >= k) for k = 0..|V| under an edge distribution"""
    domain = dist.domain
    sizes = np.concatenate([
        origin_sizes(component_labels(bits_matrix(dist.support[a:b], domain.num_edges), domain),
                     domain.origin_index)
        for a, b in _chunk_bounds(len(dist.support))
    ]) if len(dist.support) else np.zeros(0, dtype=np.int64)
    mass = np.bincount(sizes, weights=dist.probabilities, minlength=domain.num_vertices + 1)
    return np.cumsum(mass[::-1])[::-1]


def fk_edge_removal_bounds(domain: Domain, x: Union[float, WeightVector], edge: int) -> IdentityReport:
    """
    Effect of closing one edge on the FK measure

    Checks Z_FK(D minus e) >= Z_FK(D), Z_FK(D minus e) <= 2 Z_FK(D) and
    Phi_{D minus e}(eta) / Phi_D(eta) >= (1 + x_e) / (2 (1 - x_e)) for every eta avoiding e.
    """
    w = x if isinstance(x, WeightVector) else WeightVector.constant(domain, x)
    xe = float(w.values[edge])
    if not 0.0 < xe < 1.0:
        raise ValueError(f"Edge {edge} must carry a weight in (0, 1), got {xe}")
    tol = config.identity_tolerance
    removed = w.without([edge])
    z_full, z_removed = z_fk(domain, w), z_fk(domain, removed)

    full = exact_distribution(MeasureKind.FK, domain, w)
    cut = exact_distribution(MeasureKind.FK, domain, removed)
    positions = np.searchsorted(full.support, cut.support)
    ratios = cut.probabilities / full.probabilities[positions]
    bound = (1.0 + xe) / (2.0 * (1.0 - xe))

    lower = z_removed >= z_full * (1.0 - tol)
    upper = z_removed <= 2.0 * z_full * (1.0 + tol)
    ratio_ok = float(ratios.min()) >= bound * (1.0 - tol)
    return IdentityReport(
        name="fk_edge_removal",
        holds=bool(lower and upper and ratio_ok),
        max_discrepancy=max(0.0, (z_full - z_removed) / z_full, (z_removed - 2 * z_full) / z_full,
                            (bound - float(ratios.min())) / bound),
        tolerance=tol,
        checked=len(ratios),
        details={
            "z_full": z_full,
            "z_removed": z_removed,
            "min_ratio": float(ratios.min()),
            "ratio_bound": bound,
        },
    )
