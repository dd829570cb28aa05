"""
Edge configurations, loop and cluster decompositions, spin representations

An EdgeConfig is a bitmask over the dense edge indices of its domain
(edge 0 is the least significant bit). The vectorised helpers at the bottom
work on boolean (rows x edges) matrices and are shared by the enumeration
and domination code.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, NamedTuple, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from hexloop.errors import DomainMismatch, NotEven
from hexloop.hexlattice import Domain, HexVertex, rotation_angle

logger = logging.getLogger(__name__)


# ==================== Types ====================

@dataclass(frozen=True)
class EdgeConfig:
    """Subset of the edges of a domain"""
    domain: Domain
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.domain.num_edges:
            raise ValueError(f"Configuration bits exceed the {self.domain.num_edges} edges of the domain")

    @classmethod
    def empty(cls, domain: Domain) -> "EdgeConfig":
        return cls(domain, 0)

    @classmethod
    def full(cls, domain: Domain) -> "EdgeConfig":
        return cls(domain, domain.full_mask)

    @classmethod
    def from_edges(cls, domain: Domain, edges: Iterable[int]) -> "EdgeConfig":
        bits = 0
        for e in edges:
            if not 0 <= e < domain.num_edges:
                raise ValueError(f"Edge index {e} out of range")
            bits |= 1 << e
        return cls(domain, bits)

    @classmethod
    def face_boundary(cls, domain: Domain, face: int) -> "EdgeConfig":
        return cls(domain, domain.face_masks[face])

    @property
    def size(self) -> int:
        """|omega|, the number of open edges"""
        return self.bits.bit_count()

    def edges(self) -> list[int]:
        return [e for e in range(self.domain.num_edges) if self.bits >> e & 1]

    def __contains__(self, edge: int) -> bool:
        return bool(self.bits >> edge & 1)

    def same_domain(self, other: "EdgeConfig") -> None:
        if self.domain != other.domain:
            raise DomainMismatch("Configurations belong to different domains")

    def __or__(self, other: "EdgeConfig") -> "EdgeConfig":
        self.same_domain(other)
        return EdgeConfig(self.domain, self.bits | other.bits)

    def __and__(self, other: "EdgeConfig") -> "EdgeConfig":
        self.same_domain(other)
        return EdgeConfig(self.domain, self.bits & other.bits)

    def issubset(self, other: "EdgeConfig") -> bool:
        self.same_domain(other)
        return self.bits & ~other.bits == 0

    def to_hex(self) -> str:
        """Hex bitstring, edge 0 first (most significant), zero padded to a multiple of 4"""
        width = self.domain.num_edges
        padded = -(-width // 4) * 4
        text = "".join("1" if self.bits >> e & 1 else "0" for e in range(width)).ljust(padded, "0")
        if not text:
            return ""
        return f"{int(text, 2):0{padded // 4}x}"

    @classmethod
    def from_hex(cls, domain: Domain, text: str) -> "EdgeConfig":
        width = domain.num_edges
        digits = -(-width // 4)
        text = text.strip().lower()
        if len(text) != digits:
            raise ValueError(f"Expected {digits} hex digits for {width} edges, got {len(text)}")
        if digits == 0:
            return cls(domain, 0)
        raw = bin(int(text, 16))[2:].zfill(digits * 4)
        if "1" in raw[width:]:
            raise ValueError("Padding bits must be zero")
        return cls(domain, sum(1 << e for e, ch in enumerate(raw[:width]) if ch == "1"))


@dataclass(frozen=True)
class SpinConfig:
    """Spin +1/-1 per inner face; faces outside the domain count as +1"""
    domain: Domain
    values: tuple[int, ...]

    def __post_init__(self):
        if len(self.values) != self.domain.num_faces:
            raise ValueError(f"Expected {self.domain.num_faces} spins, got {len(self.values)}")
        if any(s not in (-1, 1) for s in self.values):
            raise ValueError("Spins must be +1 or -1")

    @classmethod
    def all_plus(cls, domain: Domain) -> "SpinConfig":
        return cls(domain, (1,) * domain.num_faces)

    @classmethod
    def from_minus_faces(cls, domain: Domain, faces: Iterable[int]) -> "SpinConfig":
        minus = set(faces)
        return cls(domain, tuple(-1 if f in minus else 1 for f in range(domain.num_faces)))

    @classmethod
    def from_bits(cls, domain: Domain, bits: int) -> "SpinConfig":
        """Inverse of to_bits"""
        return cls(domain, tuple(1 if bits >> f & 1 else -1 for f in range(domain.num_faces)))

    def to_bits(self) -> int:
        """Bit f set iff face f has spin +1"""
        return sum(1 << f for f, s in enumerate(self.values) if s == 1)

    def minus_mask(self) -> int:
        return sum(1 << f for f, s in enumerate(self.values) if s == -1)


class Loop(NamedTuple):
    """A single loop as a cyclic edge sequence and its vertex sequence"""
    edges: tuple[int, ...]
    vertices: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def mask(self) -> int:
        return sum(1 << e for e in self.edges)


@dataclass(frozen=True)
class LoopDecomposition:
    loops: tuple[Loop, ...]
    size: int

    @property
    def count(self) -> int:
        """l(omega), the number of loops"""
        return len(self.loops)


@dataclass(frozen=True)
class ClusterStats:
    k: int
    origin_cluster: frozenset[int]

    @property
    def origin_size(self) -> int:
        return len(self.origin_cluster)


# ==================== Loop configurations ====================

def degrees(cfg: EdgeConfig) -> np.ndarray:
    domain = cfg.domain
    deg = np.zeros(domain.num_vertices, dtype=np.int64)
    for e in cfg.edges():
        deg[domain.tails[e]] += 1
        deg[domain.heads[e]] += 1
    return deg


def is_loop_config(cfg: EdgeConfig) -> bool:
    """True iff every vertex has degree 0 or 2"""
    deg = degrees(cfg)
    return bool(np.all((deg == 0) | (deg == 2)))


def _require_even(cfg: EdgeConfig) -> None:
    if not is_loop_config(cfg):
        raise NotEven("Configuration has a vertex of degree other than 0 or 2")


def decompose_loops(cfg: EdgeConfig) -> LoopDecomposition:
    """Split a loop configuration into loops, ordered by their smallest edge index"""
    _require_even(cfg)
    domain = cfg.domain
    remaining = set(cfg.edges())
    loops = []
    while remaining:
        first = min(remaining)
        start = int(domain.tails[first])
        current = int(domain.heads[first])
        edge_seq, vertex_seq = [first], [start]
        remaining.discard(first)
        previous = first
        while current != start:
            vertex_seq.append(current)
            nxt = next(e for e in domain.vertex_edges[current] if e != previous and e in cfg)
            edge_seq.append(nxt)
            remaining.discard(nxt)
            t, h = domain.edge_vertices(nxt)
            current = h if t == current else t
            previous = nxt
        loops.append(Loop(tuple(edge_seq), tuple(vertex_seq)))
    return LoopDecomposition(tuple(loops), cfg.size)


def max_surrounding_loop(cfg: EdgeConfig, v: Optional[HexVertex] = None) -> int:
    """
    R: length of the largest loop whose closed region contains v (0 if none)

    A loop passing through v counts as surrounding it. Otherwise v is inside
    iff the horizontal face path from a face at v crosses the loop an odd
    number of times.
    """
    domain = cfg.domain
    v = domain.origin if v is None else HexVertex(*v)
    if v not in domain.vertex_index:
        raise ValueError(f"Vertex {tuple(v)} is not in the domain")
    decomposition = decompose_loops(cfg)
    vi = domain.vertex_index[v]
    ray = domain.vertex_ray_mask(v)
    best = 0
    for loop in decomposition.loops:
        if vi in loop.vertices or (ray & loop.mask).bit_count() % 2 == 1:
            best = max(best, loop.length)
    return best


def origin_loop_length(cfg: EdgeConfig) -> int:
    """|C_0(omega)| for a loop configuration; 1 when no loop visits the origin"""
    _require_even(cfg)
    return components(cfg).origin_size


# ==================== Spins ====================

def spins_from_loops(cfg: EdgeConfig) -> SpinConfig:
    """Spin -1 on faces surrounded by an odd number of loops"""
    _require_even(cfg)
    domain = cfg.domain
    values = tuple(-1 if (ray & cfg.bits).bit_count() % 2 else 1 for ray in domain.face_ray_masks)
    return SpinConfig(domain, values)


def _side_spins(spins: SpinConfig) -> list[tuple[int, int]]:
    sides = []
    for e in spins.domain.edges:
        left = 1 if e.left is None else spins.values[e.left]
        right = 1 if e.right is None else spins.values[e.right]
        sides.append((left, right))
    return sides


def loops_from_spins(spins: SpinConfig) -> EdgeConfig:
    """Open exactly the edges separating faces of distinct spin"""
    bits = sum(1 << e for e, (a, b) in enumerate(_side_spins(spins)) if a != b)
    return EdgeConfig(spins.domain, bits)


def spin_edge_domains(spins: SpinConfig) -> tuple[EdgeConfig, EdgeConfig]:
    """(D+, D-): edges with +1 on both sides and with -1 on both sides"""
    plus = minus = 0
    for e, (a, b) in enumerate(_side_spins(spins)):
        if a == b == 1:
            plus |= 1 << e
        elif a == b == -1:
            minus |= 1 << e
    return EdgeConfig(spins.domain, plus), EdgeConfig(spins.domain, minus)


# ==================== Clusters ====================

def components(cfg: EdgeConfig) -> ClusterStats:
    """Connected components of the open edges over all vertices of the domain"""
    domain = cfg.domain
    open_edges = cfg.edges()
    rows = domain.tails[open_edges]
    cols = domain.heads[open_edges]
    graph = coo_matrix(
        (np.ones(len(open_edges), dtype=np.int8), (rows, cols)),
        shape=(domain.num_vertices, domain.num_vertices),
    )
    k, labels = connected_components(graph, directed=False)
    origin = domain.origin_index
    if origin is None:
        cluster = frozenset()
    else:
        cluster = frozenset(int(v) for v in np.flatnonzero(labels == labels[origin]))
    return ClusterStats(int(k), cluster)


def count_even_subgraphs(cfg: EdgeConfig) -> int:
    """Number of loop configurations contained in eta: 2^(k + |eta| - |V|)"""
    stats = components(cfg)
    return 2 ** (stats.k + cfg.size - cfg.domain.num_vertices)


def brute_force_even_count(cfg: EdgeConfig) -> int:
    """Count even subsets of eta by enumerating all of them"""
    open_edges = cfg.edges()
    count = 0
    for size in range(len(open_edges) + 1):
        for subset in combinations(open_edges, size):
            if is_loop_config(EdgeConfig.from_edges(cfg.domain, subset)):
                count += 1
    return count


def count_faces(cfg: EdgeConfig) -> int:
    """
    F(eta): number of faces of the planar graph eta, outer face included

    Traces the face orbits of the rotation system given by the embedding,
    then corrects for the outer face counted once per component.
    """
    domain = cfg.domain
    open_edges = cfg.edges()
    if not open_edges:
        return 1
    rotation: dict[int, list[int]] = {}
    for e in open_edges:
        t, h = domain.edge_vertices(e)
        rotation.setdefault(t, []).append(h)
        rotation.setdefault(h, []).append(t)
    for v, nbrs in rotation.items():
        nbrs.sort(key=lambda w: rotation_angle(domain, v, w))

    unvisited = {(t, h) for e in open_edges for t, h in [domain.edge_vertices(e)]}
    unvisited |= {(h, t) for t, h in list(unvisited)}
    orbits = 0
    while unvisited:
        start = min(unvisited)
        dart = start
        while True:
            unvisited.discard(dart)
            u, v = dart
            ring = rotation[v]
            # next dart leaves v clockwise after the reversed dart
            w = ring[(ring.index(u) - 1) % len(ring)]
            dart = (v, w)
            if dart == start:
                break
        orbits += 1

    stats = components(cfg)
    isolated = cfg.domain.num_vertices - len(rotation)
    edge_components = stats.k - isolated
    return orbits - edge_components + 1


# ==================== Vectorised helpers ====================

def bits_matrix(indices: np.ndarray, width: int) -> np.ndarray:
    """(rows x width) boolean matrix of configuration indices"""
    indices = np.asarray(indices, dtype=np.int64)
    return ((indices[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(bool)


def matrix_indices(open_edges: np.ndarray) -> np.ndarray:
    """Configuration index of each row of a boolean matrix"""
    powers = np.left_shift(np.int64(1), np.arange(open_edges.shape[1], dtype=np.int64))
    return open_edges.astype(np.int64) @ powers


def component_labels(open_edges: np.ndarray, domain: Domain) -> np.ndarray:
    """
    Per-row component labels (smallest vertex index of the component)

    Min-label propagation along open edges with pointer jumping, iterated
    until no label changes.

    All rows are labelled at once as (rows x V) array operations, so a full
    2^E enumeration chunk costs a few numpy passes. Single configurations go
    through `components`, which calls scipy's connected_components.
    """
    rows = open_edges.shape[0]
    sentinel = domain.num_vertices
    labels = np.broadcast_to(np.arange(domain.num_vertices, dtype=np.int64), (rows, sentinel)).copy()
    if rows == 0 or domain.num_edges == 0:
        return labels
    tails, heads = domain.tails, domain.heads
    table = domain.vertex_edge_table
    padding = np.full((rows, 1), sentinel, dtype=np.int64)
    while True:
        edge_min = np.where(open_edges, np.minimum(labels[:, tails], labels[:, heads]), sentinel)
        edge_min = np.concatenate([edge_min, padding], axis=1)
        updated = np.minimum(labels, edge_min[:, table].min(axis=2))
        updated = np.take_along_axis(updated, updated, axis=1)
        if np.array_equal(updated, labels):
            return labels
        labels = updated


def component_counts(labels: np.ndarray) -> np.ndarray:
    """k per row, isolated vertices included"""
    return (labels == np.arange(labels.shape[1])).sum(axis=1)


def origin_sizes(labels: np.ndarray, origin: Optional[int]) -> np.ndarray:
    """|C_0| per row; zero when the domain lacks its marked vertex"""
    if origin is None:
        return np.zeros(labels.shape[0], dtype=np.int64)
    return (labels == labels[:, [origin]]).sum(axis=1)
