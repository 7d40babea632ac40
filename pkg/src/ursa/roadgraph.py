"""Road-network model: parsing, degree partition, shortest paths, interchange clustering."""

from __future__ import annotations

import enum
import hashlib
import heapq
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence


class GraphFormatError(ValueError):
    """A graph document is syntactically or structurally invalid."""


class UnknownVertexError(KeyError):
    """An operation referenced a vertex id that is not in the graph."""


class DegenerateDirectionError(ValueError):
    """Direction estimation needs at least two distinct points."""


@dataclass(frozen=True)
class Vec2:
    """2D position or direction in meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite components ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def normalized(self) -> "Vec2":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return Vec2(self.x / n, self.y / n)


def distance(a: Vec2, b: Vec2) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


class RoadType(enum.Enum):
    MAJOR = "major"
    MINOR = "minor"
    DIRT = "dirt"
    ALLEY = "alley"


@dataclass(frozen=True)
class RoadVertex:
    id: int
    pos: Vec2
    road_type: RoadType


@dataclass(frozen=True)
class RoadEdge:
    """Undirected edge between two vertex ids."""

    a: int
    b: int

    def key(self) -> tuple[int, int]:
        return (self.a, self.b) if self.a <= self.b else (self.b, self.a)


class RoadGraph:
    """Validated undirected road graph with an adjacency index.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, vertices: Iterable[RoadVertex], edges: Iterable[RoadEdge]):
        self.vertices: tuple[RoadVertex, ...] = tuple(vertices)
        self.edges: tuple[RoadEdge, ...] = tuple(edges)
        self._by_id: dict[int, RoadVertex] = {}
        for i, v in enumerate(self.vertices):
            if v.id < 0:
                raise GraphFormatError(f"vertices[{i}]: negative id {v.id}")
            if v.id in self._by_id:
                raise GraphFormatError(f"vertices[{i}]: duplicate vertex id {v.id}")
            self._by_id[v.id] = v
        adj: dict[int, set[int]] = {v.id: set() for v in self.vertices}
        seen: set[tuple[int, int]] = set()
        for i, e in enumerate(self.edges):
            if e.a == e.b:
                raise GraphFormatError(f"edges[{i}]: self-loop on vertex {e.a}")
            for end in (e.a, e.b):
                if end not in self._by_id:
                    raise GraphFormatError(f"edges[{i}]: dangling endpoint {end}")
            if e.key() in seen:
                raise GraphFormatError(f"edges[{i}]: duplicate edge {e.key()}")
            seen.add(e.key())
            adj[e.a].add(e.b)
            adj[e.b].add(e.a)
        self._adj: dict[int, tuple[int, ...]] = {k: tuple(sorted(s)) for k, s in adj.items()}
        self._weighted_adj: dict[int, tuple[tuple[int, float], ...]] = {
            vid: tuple((n, distance(self._by_id[vid].pos, self._by_id[n].pos)) for n in nbrs)
            for vid, nbrs in self._adj.items()
        }
        self._edge_keys = seen
        self._digest: str | None = None

    def vertex(self, vid: int) -> RoadVertex:
        try:
            return self._by_id[vid]
        except KeyError:
            raise UnknownVertexError(vid) from None

    def vertex_ids(self) -> tuple[int, ...]:
        return tuple(v.id for v in self.vertices)

    def neighbors(self, vid: int) -> tuple[int, ...]:
        if vid not in self._adj:
            raise UnknownVertexError(vid)
        return self._adj[vid]

    def degree(self, vid: int) -> int:
        return len(self.neighbors(vid))

    def has_edge(self, a: int, b: int) -> bool:
        return ((a, b) if a <= b else (b, a)) in self._edge_keys

    def edge_length(self, a: int, b: int) -> float:
        return distance(self.vertex(a).pos, self.vertex(b).pos)

    def to_json_obj(self) -> dict:
        return {
            "vertices": [
                {"id": v.id, "x": v.pos.x, "y": v.pos.y, "road_type": v.road_type.value}
                for v in self.vertices
            ],
            "edges": [[e.a, e.b] for e in self.edges],
        }

    def digest(self) -> str:
        """Short content hash identifying this graph in plans and worlds."""
        if self._digest is None:
            canon = json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))
            self._digest = hashlib.sha1(canon.encode("utf-8")).hexdigest()[:16]
        return self._digest


def parse_road_graph(source: bytes | str | IO) -> RoadGraph:
    """Parse the documented graph JSON into a validated RoadGraph.

    The document is a UTF-8 object with "vertices" (id/x/y/road_type) and
    "edges" ([a, b] pairs). Errors carry the offending location.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError("top level must be an object")
    raw_vertices = doc.get("vertices")
    raw_edges = doc.get("edges")
    if not isinstance(raw_vertices, list) or not isinstance(raw_edges, list):
        raise GraphFormatError('expected "vertices" and "edges" lists')
    vertices = []
    for i, rv in enumerate(raw_vertices):
        if not isinstance(rv, dict):
            raise GraphFormatError(f"vertices[{i}]: expected object")
        try:
            vid = int(rv["id"])
            pos = Vec2(float(rv["x"]), float(rv["y"]))
            road_type = RoadType(rv["road_type"])
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphFormatError(f"vertices[{i}]: {exc}") from exc
        vertices.append(RoadVertex(vid, pos, road_type))
    edges = []
    for i, re_ in enumerate(raw_edges):
        if not (isinstance(re_, list) and len(re_) == 2):
            raise GraphFormatError(f"edges[{i}]: expected [a, b] pair")
        try:
            edges.append(RoadEdge(int(re_[0]), int(re_[1])))
        except (TypeError, ValueError) as exc:
            raise GraphFormatError(f"edges[{i}]: {exc}") from exc
    return RoadGraph(vertices, edges)


@dataclass(frozen=True)
class VertexPartition:
    """Degree-based split of the vertex set: deg==2 / deg>2 / deg<2."""

    simple: frozenset[int]
    complex: frozenset[int]
    dead: frozenset[int]


def partition_vertices(g: RoadGraph) -> VertexPartition:
    simple, complex_, dead = set(), set(), set()
    for v in g.vertices:
        deg = g.degree(v.id)
        if deg == 2:
            simple.add(v.id)
        elif deg > 2:
            complex_.add(v.id)
        else:
            dead.add(v.id)
    return VertexPartition(frozenset(simple), frozenset(complex_), frozenset(dead))


def dijkstra_paths(g: RoadGraph, source: int) -> dict[int, tuple[int, ...]]:
    """Single-source shortest paths with Euclidean edge weights.

    Among equal-length paths the lexicographically smallest vertex sequence
    wins, which realizes the smaller-next-vertex-id tie rule deterministically.
    """
    if source not in g._by_id:
        raise UnknownVertexError(source)
    settled: dict[int, tuple[int, ...]] = {}
    weighted = g._weighted_adj
    heap: list[tuple[float, tuple[int, ...]]] = [(0.0, (source,))]
    while heap:
        dist, path = heapq.heappop(heap)
        v = path[-1]
        if v in settled:
            continue
        settled[v] = path
        for w, weight in weighted[v]:
            if w not in settled:
                heapq.heappush(heap, (dist + weight, path + (w,)))
    return settled


def shortest_path(g: RoadGraph, u: int, v: int) -> list[int] | None:
    """Minimal-total-length path from u to v inclusive, or None if disconnected."""
    if v not in g._by_id:
        raise UnknownVertexError(v)
    paths = dijkstra_paths(g, u)
    found = paths.get(v)
    return list(found) if found is not None else None


def path_length(g: RoadGraph, path: Sequence[int]) -> float:
    return sum(g.edge_length(a, b) for a, b in zip(path, path[1:]))


@dataclass(frozen=True)
class InterchangeCluster:
    """A DBSCAN cluster of complex vertices with an estimated road direction."""

    member_ids: frozenset[int]
    direction: Vec2
    centroid: Vec2


def estimate_direction(points: Sequence[Vec2]) -> Vec2:
    """Principal axis of a point set via orthogonal (total least squares) regression.

    Returns a unit vector sign-normalized so its first nonzero component is
    positive. Orthogonal regression is used instead of ordinary least squares
    so north-south roads are as well-posed as east-west ones.
    """
    distinct = {(p.x, p.y) for p in points}
    if len(distinct) < 2:
        raise DegenerateDirectionError("need at least 2 distinct points")
    n = len(points)
    mx = sum(p.x for p in points) / n
    my = sum(p.y for p in points) / n
    sxx = sum((p.x - mx) ** 2 for p in points) / n
    syy = sum((p.y - my) ** 2 for p in points) / n
    sxy = sum((p.x - mx) * (p.y - my) for p in points) / n
    # Leading eigenvector of [[sxx, sxy], [sxy, syy]], closed form.
    half_gap = (sxx - syy) / 2.0
    lam = (sxx + syy) / 2.0 + math.hypot(half_gap, sxy)
    cand_a = Vec2(sxy, lam - sxx)
    cand_b = Vec2(lam - syy, sxy)
    cand = cand_a if cand_a.norm() >= cand_b.norm() else cand_b
    if cand.norm() == 0.0:
        # Isotropic spread: every axis is principal, pick +x.
        cand = Vec2(1.0, 0.0)
    unit = cand.normalized()
    if unit.x < 0.0 or (unit.x == 0.0 and unit.y < 0.0):
        unit = unit.scaled(-1.0)
    return unit


def cluster_interchanges(
    g: RoadGraph,
    part: VertexPartition,
    eps: float = 25.0,
    min_pts: int = 3,
) -> tuple[list[InterchangeCluster], frozenset[int]]:
    """DBSCAN over the complex vertices' positions.

    Core points have >= min_pts neighbors within eps (themselves included);
    clusters are eps-connected components of cores; border points join the
    cluster of their nearest core (ties to the smaller core id) so membership
    is invariant to input ordering. Returns (clusters, noise ids).
    """
    if eps <= 0.0:
        raise ValueError("eps must be > 0")
    if min_pts < 1:
        raise ValueError("min_pts must be >= 1")
    ids = sorted(part.complex)
    pos = {i: g.vertex(i).pos for i in ids}
    within: dict[int, list[int]] = {
        i: [j for j in ids if distance(pos[i], pos[j]) <= eps] for i in ids
    }
    cores = [i for i in ids if len(within[i]) >= min_pts]
    core_set = set(cores)

    cluster_of: dict[int, int] = {}
    next_label = 0
    for seed in cores:
        if seed in cluster_of:
            continue
        stack = [seed]
        cluster_of[seed] = next_label
        while stack:
            c = stack.pop()
            for j in within[c]:
                if j in core_set and j not in cluster_of:
                    cluster_of[j] = next_label
                    stack.append(j)
        next_label += 1

    noise = set()
    for i in ids:
        if i in core_set:
            continue
        reachable = [(distance(pos[i], pos[c]), c) for c in within[i] if c in core_set]
        if reachable:
            cluster_of[i] = cluster_of[min(reachable)[1]]
        else:
            noise.add(i)

    members_by_label: dict[int, set[int]] = {}
    for i, label in cluster_of.items():
        members_by_label.setdefault(label, set()).add(i)
    clusters = []
    for members in sorted(members_by_label.values(), key=min):
        pts = [pos[i] for i in sorted(members)]
        distinct = {(p.x, p.y) for p in pts}
        if len(distinct) < 2:
            # Single-point cluster: fall back to the member's road context.
            for m in sorted(members):
                pts.extend(g.vertex(n).pos for n in g.neighbors(m))
        try:
            direction = estimate_direction(pts)
        except DegenerateDirectionError:
            direction = Vec2(1.0, 0.0)  # no spatial context at all; fixed axis
        cx = sum(p.x for p in pts[: len(members)]) / len(members)
        cy = sum(p.y for p in pts[: len(members)]) / len(members)
        clusters.append(InterchangeCluster(frozenset(members), direction, Vec2(cx, cy)))
    return clusters, frozenset(noise)
