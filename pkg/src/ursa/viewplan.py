"""View-pose selection under the minimum-separation and look-direction constraints."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import IO, Sequence

from .roadgraph import (
    InterchangeCluster,
    RoadGraph,
    RoadType,
    Vec2,
    VertexPartition,
    dijkstra_paths,
    distance,
)


class NoEligibleVerticesError(ValueError):
    """The graph has no vertex of an allowed road type."""


class PlanGraphMismatchError(ValueError):
    """A plan was checked against a graph it was not built from."""


class PlanFormatError(ValueError):
    """A plan document is malformed."""


@dataclass(frozen=True)
class ViewPose:
    """A vertex to stand at plus the incident edge to look down.

    The look edge is stored oriented (at, other); look_dir is the unit vector
    from the anchor toward the other endpoint.
    """

    at: int
    look: tuple[int, int]
    look_dir: Vec2

    def __post_init__(self) -> None:
        if self.at not in self.look:
            raise ValueError(f"look edge {self.look} not incident to vertex {self.at}")
        if self.look[0] != self.at:
            raise ValueError(f"look edge {self.look} must be oriented away from {self.at}")


def make_pose(g: RoadGraph, at: int, other: int) -> ViewPose:
    d = (g.vertex(other).pos - g.vertex(at).pos).normalized()
    return ViewPose(at=at, look=(at, other), look_dir=d)


@dataclass(frozen=True)
class PlanConfig:
    d_min: float = 30.0
    allowed_road_types: frozenset[RoadType] = frozenset({RoadType.MAJOR})

    def __post_init__(self) -> None:
        if self.d_min <= 0.0:
            raise ValueError("d_min must be > 0")


@dataclass(frozen=True)
class ViewPlan:
    poses: tuple[ViewPose, ...]
    d_min: float
    graph_ref: str = ""


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    violating_pair: tuple[int, int] | None = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _require_same_graph(plan: ViewPlan, g: RoadGraph) -> None:
    if plan.graph_ref and plan.graph_ref != g.digest():
        raise PlanGraphMismatchError(
            f"plan graph_ref {plan.graph_ref!r} != graph digest {g.digest()!r}"
        )


def check_min_separation(plan: ViewPlan, g: RoadGraph) -> CheckResult:
    """Every pair of pose vertices must be strictly farther apart than d_min."""
    _require_same_graph(plan, g)
    poses = plan.poses
    for i in range(len(poses)):
        for j in range(i + 1, len(poses)):
            d = distance(g.vertex(poses[i].at).pos, g.vertex(poses[j].at).pos)
            if not d > plan.d_min:
                return CheckResult(
                    False,
                    (poses[i].at, poses[j].at),
                    f"separation {d:.6g} <= d_min {plan.d_min:.6g}",
                )
    return CheckResult(True)


def _look_pair_ok(
    pose_u: ViewPose,
    pose_v: ViewPose,
    paths_from_min: dict[int, tuple[int, ...]],
) -> bool | None:
    """Exclusive-or test on one pose pair; None means no connecting path."""
    lo, hi = (pose_u, pose_v) if pose_u.at < pose_v.at else (pose_v, pose_u)
    path = paths_from_min.get(hi.at)
    if path is None or len(path) < 2:
        return None
    first_hop = (path[0], path[1])
    last_hop = (path[-1], path[-2])
    return (lo.look == first_hop) != (hi.look == last_hop)


def check_look_consistency(plan: ViewPlan, g: RoadGraph) -> CheckResult:
    """No two poses may face each other (or back-to-back) along their shortest path.

    For each connected pose pair, exactly one endpoint's look edge must be the
    edge its end of the path starts with. Disconnected pairs are skipped.
    """
    _require_same_graph(plan, g)
    poses = plan.poses
    paths_cache: dict[int, dict[int, tuple[int, ...]]] = {}
    for i in range(len(poses)):
        for j in range(i + 1, len(poses)):
            source = min(poses[i].at, poses[j].at)
            if source not in paths_cache:
                paths_cache[source] = dijkstra_paths(g, source)
            ok = _look_pair_ok(poses[i], poses[j], paths_cache[source])
            if ok is False:
                return CheckResult(
                    False,
                    (poses[i].at, poses[j].at),
                    "look edges face along the connecting path",
                )
    return CheckResult(True)


class _Planner:
    """Greedy distance-accumulating walk used by select_viewpoints."""

    def __init__(
        self,
        g: RoadGraph,
        part: VertexPartition,
        clusters: Sequence[InterchangeCluster],
        cfg: PlanConfig,
    ):
        self.g = g
        self.cfg = cfg
        self.eligible = {
            v.id for v in g.vertices if v.road_type in cfg.allowed_road_types
        }
        self.anchors = self.eligible - set(part.dead)
        self.cluster_dir: dict[int, Vec2] = {}
        for c in clusters:
            for m in c.member_ids:
                self.cluster_dir[m] = c.direction
        self.poses: list[ViewPose] = []
        self.posed: set[int] = set()
        self._paths: dict[int, dict[int, tuple[int, ...]]] = {}
        self._walk_centroid: Vec2 | None = None
        self._walk_emitted = False
        self._induced: dict[int, tuple[int, ...]] = {}
        self._induced_weighted: dict[int, tuple[tuple[int, float], ...]] = {}
        for v in g.vertices:
            if v.id in self.eligible:
                pairs = tuple(
                    (n, g.edge_length(v.id, n))
                    for n in g.neighbors(v.id)
                    if n in self.eligible
                )
                self._induced[v.id] = tuple(n for n, _ in pairs)
                self._induced_weighted[v.id] = pairs

    def induced_neighbors(self, vid: int) -> tuple[int, ...]:
        return self._induced.get(vid, ())

    def _paths_from(self, source: int) -> dict[int, tuple[int, ...]]:
        if source not in self._paths:
            self._paths[source] = dijkstra_paths(self.g, source)
        return self._paths[source]

    def _feasible(self, cand: ViewPose) -> bool:
        cpos = self.g.vertex(cand.at).pos
        for p in self.poses:
            if distance(cpos, self.g.vertex(p.at).pos) <= self.cfg.d_min:
                return False
        for p in self.poses:
            source = min(cand.at, p.at)
            if _look_pair_ok(cand, p, self._paths_from(source)) is False:
                return False
        return True

    def _look_target(self, vid: int, carried: Vec2 | None) -> Vec2 | None:
        cdir = self.cluster_dir.get(vid)
        if cdir is not None:
            if carried is not None and cdir.dot(carried) < 0.0:
                return cdir.scaled(-1.0)
            return cdir
        if self._walk_centroid is not None and not self._walk_emitted:
            # First pose of a walk: face the bulk of the component's corridor.
            rel = self._walk_centroid - self.g.vertex(vid).pos
            if rel.norm() > 1e-9:
                return rel.normalized()
        return carried

    def _corridor_mass(self, vid: int, other: int) -> float:
        """Induced edge length reachable through `other` without crossing vid."""
        seen = {vid, other}
        counted: set[tuple[int, int]] = set()
        mass = self.g.edge_length(vid, other)
        queue = [other]
        while queue:
            v = queue.pop()
            for n, length in self._induced_weighted.get(v, ()):
                if n == vid:
                    continue
                key = (v, n) if v < n else (n, v)
                if key not in counted:
                    counted.add(key)
                    mass += length
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return mass

    def try_emit(self, vid: int, carried: Vec2 | None) -> Vec2 | None:
        """Emit a pose at vid if feasible; returns the new carried direction."""
        if vid not in self.anchors or vid in self.posed:
            return None
        neighbors = self.induced_neighbors(vid) or self.g.neighbors(vid)
        if not neighbors:
            return None
        target = self._look_target(vid, carried)
        if target is None:
            target = (self.g.vertex(neighbors[0]).pos - self.g.vertex(vid).pos).normalized()
        vpos = self.g.vertex(vid).pos
        if vid in self.cluster_dir:
            # Cluster members realize the estimated interchange axis as closely
            # as an incident edge allows.
            ranked = sorted(
                neighbors,
                key=lambda n: (-(self.g.vertex(n).pos - vpos).normalized().dot(target), n),
            )
        else:
            # Face the dominant corridor first, the carried direction deciding
            # near-ties. A pose staring down a small spur at a cut vertex can
            # make every anchor beyond it fail the pairwise look rule.
            ranked = sorted(
                neighbors,
                key=lambda n: (
                    -self._corridor_mass(vid, n),
                    -(self.g.vertex(n).pos - vpos).normalized().dot(target),
                    n,
                ),
            )
        for other in ranked:
            cand = make_pose(self.g, vid, other)
            if self._feasible(cand):
                self.poses.append(cand)
                self.posed.add(vid)
                self._walk_emitted = True
                return target
        return None

    def _component_centroid(self, start: int) -> Vec2 | None:
        """Length-weighted centroid of the component's induced edges.

        The first pose of each walk aims here so it faces the bulk of the
        component's road corridor instead of an arbitrary neighbor.
        """
        seen = {start}
        queue = [start]
        sx = sy = total = 0.0
        while queue:
            v = queue.pop()
            vpos = self.g.vertex(v).pos
            for n in self.induced_neighbors(v):
                npos = self.g.vertex(n).pos
                if n > v:  # each undirected edge contributes once
                    length = distance(vpos, npos)
                    sx += (vpos.x + npos.x) / 2.0 * length
                    sy += (vpos.y + npos.y) / 2.0 * length
                    total += length
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return Vec2(sx / total, sy / total) if total > 0.0 else None

    def walk_component(self, start: int, visited: set[int]) -> None:
        self._walk_centroid = self._component_centroid(start)
        self._walk_emitted = False
        carried: Vec2 | None = None
        acc = math.inf
        emitted_dir = self.try_emit(start, carried)
        if emitted_dir is not None:
            acc = 0.0
            carried = emitted_dir
        visited.add(start)
        # Iterative DFS; every move (descent and backtrack) accrues walked distance.
        stack: list[tuple[int, list[int]]] = [(start, list(self.induced_neighbors(start)))]
        while stack:
            at, pending = stack[-1]
            advanced = False
            while pending:
                nxt = pending.pop(0)
                if nxt in visited:
                    continue
                visited.add(nxt)
                acc += self.g.edge_length(at, nxt)
                move = (self.g.vertex(nxt).pos - self.g.vertex(at).pos).normalized()
                if carried is None or move.dot(carried) >= 0.0:
                    carried = move
                if acc > self.cfg.d_min:
                    emitted_dir = self.try_emit(nxt, carried)
                    if emitted_dir is not None:
                        acc = 0.0
                        carried = emitted_dir
                stack.append((nxt, list(self.induced_neighbors(nxt))))
                advanced = True
                break
            if not advanced:
                stack.pop()
                if stack:
                    # Backtrack move; direction points against the carried look.
                    acc += self.g.edge_length(at, stack[-1][0])

    def _component_members(self, seed: int) -> list[int]:
        seen = {seed}
        queue = [seed]
        while queue:
            v = queue.pop()
            for n in self.induced_neighbors(v):
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return sorted(seen)

    def _walk_start(self, members: list[int]) -> int:
        """Most peripheral anchor of the component (ties to the smaller id).

        Starting the sweep at the far end of the road keeps the first pose's
        exclusion zone away from the rest of the component; a hub start can
        leave every other anchor inside d_min.
        """
        anchors = [v for v in members if v in self.anchors]
        if not anchors:
            return members[0]
        centroid = self._component_centroid(members[0])
        if centroid is None:
            return anchors[0]
        return max(anchors, key=lambda v: (distance(self.g.vertex(v).pos, centroid), -v))

    def run(self) -> ViewPlan:
        if not self.eligible:
            raise NoEligibleVerticesError(
                f"no vertex has a road type in {sorted(t.value for t in self.cfg.allowed_road_types)}"
            )
        visited: set[int] = set()
        for seed in sorted(self.eligible):  # components in ascending-id order
            if seed not in visited:
                members = self._component_members(seed)
                self.walk_component(self._walk_start(members), visited)
        return ViewPlan(tuple(self.poses), self.cfg.d_min, self.g.digest())


def select_viewpoints(
    g: RoadGraph,
    part: VertexPartition,
    clusters: Sequence[InterchangeCluster],
    cfg: PlanConfig,
) -> ViewPlan:
    """Greedy pose selection guaranteed to pass both constraint checks.

    Walks each connected component of allowed-type vertices (components in
    ascending-id order, each sweep starting at its most peripheral anchor),
    accumulating walked distance; once that exceeds d_min it emits a pose
    carrying the look direction forward, but only if the pose keeps every
    pairwise constraint satisfied (walked distance alone does not bound the
    straight-line separation, and junctions can make some look edges
    unrealizable). The first pose of a sweep aims at the component's
    length-weighted centroid so it faces the bulk of the corridor. Dead ends
    never anchor poses. At interchange clusters the look direction snaps to
    the cluster's estimated axis, signed to match the incoming walk direction.
    """
    return _Planner(g, part, clusters, cfg).run()


@dataclass(frozen=True)
class PlanStats:
    pose_count: int
    mean_nn_spacing: float | None
    by_road_type: dict[str, int] = field(default_factory=dict)


def plan_stats(plan: ViewPlan, g: RoadGraph) -> PlanStats:
    """Deterministic plan summary: count, mean nearest-neighbor spacing, type counts."""
    poses = plan.poses
    by_type: dict[str, int] = {}
    for p in poses:
        t = g.vertex(p.at).road_type.value
        by_type[t] = by_type.get(t, 0) + 1
    mean_nn: float | None = None
    if len(poses) >= 2:
        total = 0.0
        for p in poses:
            total += min(
                distance(g.vertex(p.at).pos, g.vertex(q.at).pos)
                for q in poses
                if q is not p
            )
        mean_nn = total / len(poses)
    return PlanStats(len(poses), mean_nn, dict(sorted(by_type.items())))


def plan_to_json_obj(plan: ViewPlan) -> dict:
    obj: dict = {
        "d_min": plan.d_min,
        "poses": [{"at": p.at, "look": [p.look[0], p.look[1]]} for p in plan.poses],
    }
    if plan.graph_ref:
        obj["graph_ref"] = plan.graph_ref
    return obj


def dump_plan(plan: ViewPlan) -> str:
    return json.dumps(plan_to_json_obj(plan), sort_keys=True, separators=(",", ":")) + "\n"


def load_plan(source: bytes | str | IO, g: RoadGraph) -> ViewPlan:
    """Read a plan document; look edges are re-derived against the graph."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise PlanFormatError(f"malformed JSON: {exc}") from exc
    try:
        d_min = float(doc["d_min"])
        poses = tuple(
            make_pose(g, int(p["at"]), int(p["look"][1])) for p in doc["poses"]
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise PlanFormatError(f"bad plan document: {exc}") from exc
    return ViewPlan(poses, d_min, str(doc.get("graph_ref", "")))
