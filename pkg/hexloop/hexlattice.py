"""
Hexagonal lattice geometry and domain construction

Faces are addressed by axial coordinates (q, r). Every face owns two vertices:
its top corner (parity 0) and its bottom corner (parity 1). Positions are kept
in integer units of (sqrt(3)/2, 1/2): the face (q, r) is centered at
(2q + r, 3r), its top corner sits two units above and its bottom corner two
units below. Face centers have Y divisible by 3 while vertices never do, so a
horizontal ray from a face center never meets a vertex.
"""
import logging
import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence, Union

import numpy as np

from hexloop.errors import NonSimpleCycle, NotAClosedWalk, OriginOutside, ParityViolation

logger = logging.getLogger(__name__)


class HexVertex(NamedTuple):
    """Lattice vertex: top (parity 0) or bottom (parity 1) corner of face (q, r)"""
    q: int
    r: int
    parity: int


class HexEdge(NamedTuple):
    """Domain edge with its stored orientation and side faces (None when outside)"""
    index: int
    tail: HexVertex
    head: HexVertex
    left: Optional[int]
    right: Optional[int]

    @property
    def endpoints(self) -> tuple[HexVertex, HexVertex]:
        return (min(self.tail, self.head), max(self.tail, self.head))

    @property
    def is_boundary(self) -> bool:
        return self.left is None or self.right is None


class HexFace(NamedTuple):
    """Inner face with its six edge indices in counter-clockwise order"""
    index: int
    q: int
    r: int
    edges: tuple[int, ...]


ORIGIN = HexVertex(0, 0, 0)

PRESETS = ("single_hex", "two_hex", "hex_ball")


# ==================== Lattice primitives ====================

def vertex_position(v: HexVertex) -> tuple[int, int]:
    """Integer position of a vertex"""
    x = 2 * v.q + v.r
    y = 3 * v.r + (2 if v.parity == 0 else -2)
    return x, y


def face_center(q: int, r: int) -> tuple[int, int]:
    return 2 * q + r, 3 * r


def face_vertices(q: int, r: int) -> tuple[HexVertex, ...]:
    """Corners of face (q, r), counter-clockwise starting at 30 degrees"""
    return (
        HexVertex(q, r + 1, 1),
        HexVertex(q, r, 0),
        HexVertex(q - 1, r + 1, 1),
        HexVertex(q, r - 1, 0),
        HexVertex(q, r, 1),
        HexVertex(q + 1, r - 1, 0),
    )


def lattice_neighbors(v: HexVertex) -> tuple[HexVertex, ...]:
    """The three neighbors of v in the full lattice"""
    q, r, parity = v
    if parity == 0:
        return (HexVertex(q, r + 1, 1), HexVertex(q - 1, r + 1, 1), HexVertex(q - 1, r + 2, 1))
    return (HexVertex(q, r - 1, 0), HexVertex(q + 1, r - 1, 0), HexVertex(q + 1, r - 2, 0))


def faces_around_vertex(v: HexVertex) -> tuple[tuple[int, int], ...]:
    q, r, parity = v
    if parity == 0:
        return ((q, r), (q, r + 1), (q - 1, r + 1))
    return ((q, r), (q, r - 1), (q + 1, r - 1))


def are_adjacent(a: HexVertex, b: HexVertex) -> bool:
    return b in lattice_neighbors(a)


def hex_distance(q: int, r: int) -> int:
    """Face-graph distance from face (0, 0)"""
    return (abs(q) + abs(r) + abs(q + r)) // 2


def _canonical(a: HexVertex, b: HexVertex) -> tuple[HexVertex, HexVertex]:
    return (a, b) if a < b else (b, a)


def _point_in_polygon(point: tuple[int, int], polygon: Sequence[tuple[int, int]]) -> bool:
    """Exact even-odd test for a point that lies on no horizontal line through a polygon vertex"""
    px, py = point
    inside = False
    count = len(polygon)
    for i in range(count):
        ax, ay = polygon[i]
        bx, by = polygon[(i + 1) % count]
        if (ay > py) == (by > py):
            continue
        # crossing strictly to the right of the point
        lhs = (px - ax) * (by - ay)
        rhs = (py - ay) * (bx - ax)
        if (lhs < rhs) if by > ay else (lhs > rhs):
            inside = not inside
    return inside


# ==================== Domain ====================

@dataclass(frozen=True, eq=False)
class Domain:
    """
    Finite subgraph of the hexagonal lattice enclosed by a simple cycle

    Immutable after construction. Vertices, edges and faces are densely
    indexed in sorted order of their canonical coordinates. Boundary edges
    are oriented with their inner face on the left; interior edges run from
    the smaller to the larger endpoint.
    """
    vertices: tuple[HexVertex, ...]
    edges: tuple[HexEdge, ...]
    faces: tuple[HexFace, ...]
    boundary: tuple[int, ...]
    origin: HexVertex = ORIGIN
    name: str = field(default="custom", compare=False)

    # ---------- identity ----------

    @property
    def key(self) -> tuple:
        return (tuple((f.q, f.r) for f in self.faces), self.origin)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Domain):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __repr__(self) -> str:
        return (f"Domain({self.name}, V={self.num_vertices}, E={self.num_edges}, "
                f"F={self.num_faces}, origin={tuple(self.origin)})")

    # ---------- sizes ----------

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def has_origin(self) -> bool:
        """Whether the marked vertex is a vertex of the domain"""
        return self.origin in self.vertex_index

    def summary(self) -> dict:
        return {
            "vertices": self.num_vertices,
            "edges": self.num_edges,
            "faces": self.num_faces,
            "boundary_length": len(self.boundary),
        }

    # ---------- lookup tables ----------

    @cached_property
    def vertex_index(self) -> dict[HexVertex, int]:
        return {v: i for i, v in enumerate(self.vertices)}

    @cached_property
    def edge_index(self) -> dict[tuple[HexVertex, HexVertex], int]:
        return {e.endpoints: e.index for e in self.edges}

    @cached_property
    def face_index(self) -> dict[tuple[int, int], int]:
        return {(f.q, f.r): f.index for f in self.faces}

    @property
    def origin_index(self) -> Optional[int]:
        return self.vertex_index.get(self.origin)

    @cached_property
    def tails(self) -> np.ndarray:
        out = np.array([self.vertex_index[e.tail] for e in self.edges], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def heads(self) -> np.ndarray:
        out = np.array([self.vertex_index[e.head] for e in self.edges], dtype=np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def vertex_edges(self) -> tuple[tuple[int, ...], ...]:
        incident: list[list[int]] = [[] for _ in self.vertices]
        for e in self.edges:
            incident[self.vertex_index[e.tail]].append(e.index)
            incident[self.vertex_index[e.head]].append(e.index)
        return tuple(tuple(sorted(x)) for x in incident)

    @cached_property
    def vertex_edge_table(self) -> np.ndarray:
        """(vertices x 3) incident edge indices, padded with num_edges"""
        out = np.full((self.num_vertices, 3), self.num_edges, dtype=np.int64)
        for v, incident in enumerate(self.vertex_edges):
            out[v, :len(incident)] = incident
        out.setflags(write=False)
        return out

    @cached_property
    def face_masks(self) -> tuple[int, ...]:
        """Edge bitmask of each face boundary"""
        return tuple(sum(1 << e for e in f.edges) for f in self.faces)

    @cached_property
    def face_incidence(self) -> np.ndarray:
        """(faces x edges) 0/1 incidence matrix"""
        out = np.zeros((self.num_faces, self.num_edges), dtype=np.uint8)
        for f in self.faces:
            out[f.index, list(f.edges)] = 1
        out.setflags(write=False)
        return out

    @cached_property
    def edge_sides(self) -> np.ndarray:
        """(edges x 2) array of (left, right) face indices, -1 for the outside"""
        out = np.array(
            [[-1 if e.left is None else e.left, -1 if e.right is None else e.right] for e in self.edges],
            dtype=np.int64,
        ).reshape(self.num_edges, 2)
        out.setflags(write=False)
        return out

    @cached_property
    def positions(self) -> np.ndarray:
        """Integer (X, Y) position per vertex"""
        out = np.array([vertex_position(v) for v in self.vertices], dtype=np.int64).reshape(-1, 2)
        out.setflags(write=False)
        return out

    @cached_property
    def full_mask(self) -> int:
        return (1 << self.num_edges) - 1

    def ray_mask(self, q: int, r: int) -> int:
        """
        Domain edges crossed by the horizontal face path from (q, r) to infinity

        The path steps (q, r) -> (q + 1, r) -> ...; the edge between faces
        (a, r) and (a + 1, r) joins B(a, r + 1) and T(a + 1, r - 1).
        """
        mask = 0
        q_max = max(v.q for v in self.vertices) + 1
        for a in range(q, q_max + 1):
            key = _canonical(HexVertex(a, r + 1, 1), HexVertex(a + 1, r - 1, 0))
            idx = self.edge_index.get(key)
            if idx is not None:
                mask |= 1 << idx
        return mask

    @cached_property
    def face_ray_masks(self) -> tuple[int, ...]:
        return tuple(self.ray_mask(f.q, f.r) for f in self.faces)

    def vertex_ray_mask(self, v: HexVertex) -> int:
        """Ray mask of a face touching v; valid for parity tests against loops avoiding v"""
        return self.ray_mask(v.q, v.r)

    def edge_vertices(self, index: int) -> tuple[int, int]:
        return int(self.tails[index]), int(self.heads[index])


# ==================== Construction ====================

def _domain_from_faces(face_coords: Iterable[tuple[int, int]], origin: HexVertex = ORIGIN,
                       name: str = "custom") -> Domain:
    coords = sorted(set(face_coords))
    inside = set(coords)

    # edge -> list of (face coords, ccw tail, ccw head)
    incidences: dict[tuple[HexVertex, HexVertex], list[tuple[tuple[int, int], HexVertex, HexVertex]]] = {}
    for q, r in coords:
        corners = face_vertices(q, r)
        for i in range(6):
            a, b = corners[i], corners[(i + 1) % 6]
            incidences.setdefault(_canonical(a, b), []).append(((q, r), a, b))

    canonical_edges = sorted(incidences)
    vertices = tuple(sorted({v for pair in canonical_edges for v in pair}))
    face_index = {c: i for i, c in enumerate(coords)}

    edges = []
    for idx, pair in enumerate(canonical_edges):
        entries = incidences[pair]
        if len(entries) == 1:
            # boundary: follow the ccw traversal of the inner face
            (coord, a, b), = entries
            tail, head = a, b
        else:
            tail, head = pair
        left = right = None
        for coord, a, b in entries:
            if (a, b) == (tail, head):
                left = face_index[coord]
            else:
                right = face_index[coord]
        edges.append(HexEdge(idx, tail, head, left, right))

    edge_lookup = {pair: i for i, pair in enumerate(canonical_edges)}
    faces = []
    for q, r in coords:
        corners = face_vertices(q, r)
        ring = tuple(edge_lookup[_canonical(corners[i], corners[(i + 1) % 6])] for i in range(6))
        faces.append(HexFace(face_index[(q, r)], q, r, ring))

    boundary = _trace_boundary(edges)
    domain = Domain(tuple(vertices), tuple(edges), tuple(faces), boundary, origin, name)
    logger.debug(f"Built {domain!r}")
    return domain


def _trace_boundary(edges: Sequence[HexEdge]) -> tuple[int, ...]:
    """Boundary edge indices in traversal order, starting from the smallest boundary vertex"""
    outgoing: dict[HexVertex, HexEdge] = {}
    for e in edges:
        if e.is_boundary:
            outgoing[e.tail] = e
    if not outgoing:
        return ()
    start = min(outgoing)
    order = []
    v = start
    while True:
        e = outgoing[v]
        order.append(e.index)
        v = e.head
        if v == start or len(order) > len(outgoing):
            break
    return tuple(order)


def build_domain(boundary: Sequence[Union[HexVertex, tuple[int, int, int]]]) -> Domain:
    """
    Build the domain enclosed by a simple cycle of lattice vertices

    Args:
        boundary: Closed walk as a vertex list; repeating the first vertex at the end is optional

    Raises:
        NotAClosedWalk: consecutive vertices are not adjacent
        NonSimpleCycle: the walk repeats a vertex
        OriginOutside: the origin is neither inside nor on the cycle
    """
    walk = [HexVertex(*v) for v in boundary]
    if len(walk) > 1 and walk[0] == walk[-1]:
        walk = walk[:-1]
    if len(walk) < 3:
        raise NotAClosedWalk(f"Boundary walk needs at least 3 distinct vertices, got {len(walk)}")
    if any(v.parity not in (0, 1) for v in walk):
        raise NotAClosedWalk("Vertex parity must be 0 or 1")
    if len(set(walk)) != len(walk):
        raise NonSimpleCycle("Boundary walk repeats a vertex")
    for i, v in enumerate(walk):
        w = walk[(i + 1) % len(walk)]
        if not are_adjacent(v, w):
            raise NotAClosedWalk(f"Vertices {tuple(v)} and {tuple(w)} are not adjacent")

    polygon = [vertex_position(v) for v in walk]
    q_values = [v.q for v in walk]
    r_values = [v.r for v in walk]
    candidates = [
        (q, r)
        for q in range(min(q_values) - 2, max(q_values) + 3)
        for r in range(min(r_values) - 2, max(r_values) + 3)
    ]
    enclosed = [c for c in candidates if _point_in_polygon(face_center(*c), polygon)]
    if not enclosed:
        raise NonSimpleCycle("Boundary walk encloses no face")

    domain = _domain_from_faces(enclosed, ORIGIN, "boundary")
    boundary_pairs = {_canonical(walk[i], walk[(i + 1) % len(walk)]) for i in range(len(walk))}
    traced = {domain.edges[i].endpoints for i in domain.boundary}
    if traced != boundary_pairs:
        raise NonSimpleCycle("Boundary walk does not bound a simply connected region")
    if not domain.has_origin:
        raise OriginOutside("The origin vertex is not inside or on the boundary cycle")
    logger.info(f"Built domain from boundary: {domain.summary()}")
    return domain


def preset_domain(kind: str, radius: int = 0) -> Domain:
    """
    Preset domains around the origin

    single_hex is the face below the origin, two_hex adds its right neighbour,
    hex_ball(radius) takes every face within face-graph distance radius.
    """
    if kind == "single_hex":
        return _domain_from_faces([(0, 0)], ORIGIN, "single_hex")
    if kind == "two_hex":
        return _domain_from_faces([(0, 0), (1, 0)], ORIGIN, "two_hex")
    if kind == "hex_ball":
        if radius < 0:
            raise ValueError("hex_ball radius must be non-negative")
        faces = [
            (q, r)
            for q in range(-radius, radius + 1)
            for r in range(-radius, radius + 1)
            if hex_distance(q, r) <= radius
        ]
        return _domain_from_faces(faces, ORIGIN, f"hex_ball:{radius}")
    raise ValueError(f"Unknown preset '{kind}'. Available: {', '.join(PRESETS)}")


def translate(domain: Domain, offset: Sequence[int]) -> Domain:
    """
    Shift a domain and its marked vertex by a lattice translation

    Args:
        domain: Domain to shift
        offset: (dq, dr) face step, or (dq, dr, parity) with parity 0

    Raises:
        ParityViolation: offset would swap top and bottom corners
    """
    offset = tuple(offset)
    if len(offset) not in (2, 3):
        raise ParityViolation(f"Offset must have 2 or 3 components, got {len(offset)}")
    if len(offset) == 3 and offset[2] != 0:
        raise ParityViolation("Offset with odd parity is not a translation of the lattice")
    dq, dr = int(offset[0]), int(offset[1])
    if (dq, dr) != (offset[0], offset[1]):
        raise ParityViolation("Offset must be integral")
    faces = [(f.q + dq, f.r + dr) for f in domain.faces]
    marked = HexVertex(domain.origin.q + dq, domain.origin.r + dr, domain.origin.parity)
    return _domain_from_faces(faces, marked, domain.name)


# ==================== Domain files ====================

_PRESET_TOKEN = re.compile(r"^(single_hex|two_hex|hex_ball)(?::(\d+))?$")


def parse_preset_token(token: str) -> Domain:
    """Parse 'single_hex', 'two_hex' or 'hex_ball:R'"""
    match = _PRESET_TOKEN.match(token.strip())
    if not match:
        raise ValueError(f"Unknown preset token '{token}'")
    kind, radius = match.group(1), match.group(2)
    if kind == "hex_ball" and radius is None:
        raise ValueError("hex_ball needs a radius, e.g. hex_ball:2")
    return preset_domain(kind, int(radius or 0))


def parse_domain_text(text: str) -> Domain:
    """
    Parse the domain file format

    Either a single line `preset <name> [radius]`, or a line `boundary`
    followed by one `q r parity` vertex per line. Blank lines and lines
    starting with # are ignored.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValueError("Domain file is empty")
    head = lines[0].split()
    if head[0] == "preset":
        if len(head) not in (2, 3) or len(lines) != 1:
            raise ValueError("Preset line must read 'preset <name> [radius]'")
        radius = int(head[2]) if len(head) == 3 else 0
        return preset_domain(head[1], radius)
    if head[0] == "boundary" and len(head) == 1:
        walk = []
        for ln in lines[1:]:
            parts = ln.split()
            if len(parts) != 3:
                raise ValueError(f"Boundary vertex line must read 'q r parity': '{ln}'")
            walk.append(HexVertex(int(parts[0]), int(parts[1]), int(parts[2])))
        return build_domain(walk)
    raise ValueError(f"Unrecognised domain header '{lines[0]}'")


def load_domain_file(path: Union[str, Path]) -> Domain:
    return parse_domain_text(Path(path).read_text())


def boundary_walk(domain: Domain) -> list[HexVertex]:
    """Vertex list of the boundary cycle, usable as build_domain input"""
    return [domain.edges[i].tail for i in domain.boundary]


def rotation_angle(domain: Domain, vertex: int, other: int) -> float:
    """Angle of the edge vertex -> other in true Euclidean geometry"""
    (x0, y0), (x1, y1) = domain.positions[vertex], domain.positions[other]
    return math.atan2((y1 - y0) / 2.0, (x1 - x0) * math.sqrt(3.0) / 2.0)
