"""Synthetic asset worlds and the visibility/coverage oracle for view plans."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO

import numpy as np

from .roadgraph import RoadGraph, Vec2, dijkstra_paths, distance, partition_vertices
from .viewplan import PlanConfig, ViewPlan, ViewPose, _look_pair_ok, make_pose


class WorldFormatError(ValueError):
    """A world document is malformed."""


class BruteForceGuardError(ValueError):
    """Too many eligible vertices for exhaustive plan enumeration."""


@dataclass(frozen=True, order=True)
class FmssId:
    """Four-part asset identifier: file path, model, shader index, sampler index.

    Tuple equality is identity; ordering is lexicographic over the fields.
    """

    file: str
    model: str
    shader: int
    sampler: int

    def to_json_obj(self) -> dict:
        return {
            "file": self.file,
            "model": self.model,
            "shader": self.shader,
            "sampler": self.sampler,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FmssId":
        try:
            return cls(
                str(obj["file"]), str(obj["model"]), int(obj["shader"]), int(obj["sampler"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise WorldFormatError(f"bad fmss object: {exc}") from exc


@dataclass(frozen=True)
class Asset:
    fmss: FmssId
    pos: Vec2


@dataclass(frozen=True)
class SyntheticWorld:
    assets: tuple[Asset, ...]
    graph_ref: str = ""

    def distinct_fmss(self) -> frozenset[FmssId]:
        return frozenset(a.fmss for a in self.assets)


@dataclass(frozen=True)
class VisibilityParams:
    d_max: float = 100.0
    fov: float = 90.0

    def __post_init__(self) -> None:
        if self.d_max <= 0.0:
            raise ValueError("d_max must be > 0")
        if not 0.0 < self.fov <= 360.0:
            raise ValueError("fov must be in (0, 360]")


def generate_world(
    g: RoadGraph,
    density: float,
    rng_seed: int,
    corridor_half_width: float = 5.0,
    fmss_pool: int | None = None,
) -> SyntheticWorld:
    """Scatter assets in a corridor around the graph's edges, deterministically.

    density is assets per 100 m of total edge length; the count is exact by
    construction (rounded once, not per edge). A pool smaller than the asset
    count makes some identifiers recur at several positions, mirroring texture
    reuse.
    """
    if density <= 0.0:
        raise ValueError("density must be > 0")
    rng = np.random.default_rng(rng_seed)
    lengths = [g.edge_length(e.a, e.b) for e in g.edges]
    total = float(sum(lengths))
    count = int(round(density * total / 100.0))
    if fmss_pool is None:
        fmss_pool = max(1, (3 * count) // 4)
    cumulative = np.cumsum([0.0] + lengths)
    assets = []
    for _ in range(count):
        s = rng.uniform(0.0, total)
        idx = min(int(np.searchsorted(cumulative, s, side="right")) - 1, len(g.edges) - 1)
        e = g.edges[idx]
        a, b = g.vertex(e.a).pos, g.vertex(e.b).pos
        seg_len = lengths[idx]
        t = 0.0 if seg_len == 0.0 else (s - cumulative[idx]) / seg_len
        along = Vec2(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
        axis = (b - a).normalized()
        lateral = rng.uniform(-corridor_half_width, corridor_half_width)
        pos = Vec2(along.x - axis.y * lateral, along.y + axis.x * lateral)
        k = int(rng.integers(0, fmss_pool))
        fmss = FmssId(f"assets/pack{k // 25:02d}.ydr", f"m{k:04d}", k % 4, k % 3)
        assets.append(Asset(fmss, pos))
    return SyntheticWorld(tuple(assets), g.digest())


def _in_view(pose_pos: Vec2, look_dir: Vec2, asset_pos: Vec2, vp: VisibilityParams) -> bool:
    rel = asset_pos - pose_pos
    r = rel.norm()
    if r > vp.d_max:
        return False
    if r == 0.0:
        return True
    angle = math.degrees(math.atan2(abs(look_dir.cross(rel)), look_dir.dot(rel)))
    return angle <= vp.fov / 2.0 + 1e-9


def visible_fmss(
    pose: ViewPose, world: SyntheticWorld, vp: VisibilityParams, g: RoadGraph
) -> frozenset[FmssId]:
    """Identifiers of assets within d_max (inclusive) and inside the view cone."""
    ppos = g.vertex(pose.at).pos
    return frozenset(
        a.fmss for a in world.assets if _in_view(ppos, pose.look_dir, a.pos, vp)
    )


@dataclass(frozen=True)
class CoverageReport:
    fraction: float
    covered: frozenset[FmssId]
    uncovered: frozenset[FmssId]


def coverage_of_plan(
    plan: ViewPlan, world: SyntheticWorld, vp: VisibilityParams, g: RoadGraph
) -> CoverageReport:
    """Fraction of the world's distinct identifiers seen by at least one pose.

    An empty world is defined as fully covered.
    """
    universe = world.distinct_fmss()
    if not universe:
        return CoverageReport(1.0, frozenset(), frozenset())
    seen: set[FmssId] = set()
    for pose in plan.poses:
        seen |= visible_fmss(pose, world, vp, g)
    covered = frozenset(seen & universe)
    return CoverageReport(len(covered) / len(universe), covered, universe - covered)


def brute_force_best_plan(
    g: RoadGraph,
    world: SyntheticWorld,
    cfg: PlanConfig,
    vp: VisibilityParams,
    max_poses: int,
) -> ViewPlan:
    """Exhaustive maximum-coverage plan over feasible pose subsets (test oracle).

    Enumerates every pose set of size <= max_poses that passes both constraint
    checks; ties go to fewer poses, then the lexicographically smallest pose
    tuple. Guarded to at most 12 eligible vertices.
    """
    dead = partition_vertices(g).dead
    eligible = sorted(
        v.id
        for v in g.vertices
        if v.road_type in cfg.allowed_road_types and v.id not in dead
    )
    if len(eligible) > 12:
        raise BruteForceGuardError(f"{len(eligible)} eligible vertices exceeds the 12-vertex guard")

    candidates: list[ViewPose] = []
    for vid in eligible:
        for other in g.neighbors(vid):
            candidates.append(make_pose(g, vid, other))

    universe = sorted(world.distinct_fmss())
    index = {f: i for i, f in enumerate(universe)}
    masks = []
    for cand in candidates:
        m = 0
        for f in visible_fmss(cand, world, vp, g):
            m |= 1 << index[f]
        masks.append(m)

    paths_cache: dict[int, dict[int, tuple[int, ...]]] = {}

    def paths_from(source: int) -> dict[int, tuple[int, ...]]:
        if source not in paths_cache:
            paths_cache[source] = dijkstra_paths(g, source)
        return paths_cache[source]

    n = len(candidates)
    compatible = [[False] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = candidates[i], candidates[j]
            if a.at == b.at:
                continue
            if distance(g.vertex(a.at).pos, g.vertex(b.at).pos) <= cfg.d_min:
                continue
            if _look_pair_ok(a, b, paths_from(min(a.at, b.at))) is False:
                continue
            compatible[i][j] = compatible[j][i] = True

    best_key: tuple[int, int, tuple[tuple[int, int], ...]] | None = None
    best: tuple[int, ...] = ()

    def consider(chosen: tuple[int, ...], cover: int) -> None:
        nonlocal best_key, best
        key = (-cover.bit_count(), len(chosen), tuple(candidates[i].look for i in chosen))
        if best_key is None or key < best_key:
            best_key, best = key, chosen

    def extend(chosen: tuple[int, ...], cover: int, next_start: int) -> None:
        consider(chosen, cover)
        if len(chosen) >= max_poses:
            return
        for i in range(next_start, n):
            if all(compatible[j][i] for j in chosen):
                extend(chosen + (i,), cover | masks[i], i + 1)

    extend((), 0, 0)
    poses = tuple(candidates[i] for i in best)
    return ViewPlan(poses, cfg.d_min, g.digest())


def world_to_json_obj(world: SyntheticWorld) -> dict:
    obj: dict = {
        "assets": [
            {
                "file": a.fmss.file,
                "model": a.fmss.model,
                "shader": a.fmss.shader,
                "sampler": a.fmss.sampler,
                "x": a.pos.x,
                "y": a.pos.y,
            }
            for a in world.assets
        ]
    }
    if world.graph_ref:
        obj["graph_ref"] = world.graph_ref
    return obj


def dump_world(world: SyntheticWorld) -> str:
    return json.dumps(world_to_json_obj(world), sort_keys=True, separators=(",", ":")) + "\n"


def load_world(source: bytes | str | IO) -> SyntheticWorld:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise WorldFormatError(f"malformed JSON: {exc}") from exc
    raw = doc.get("assets")
    if not isinstance(raw, list):
        raise WorldFormatError('expected an "assets" list')
    assets = []
    for i, ra in enumerate(raw):
        try:
            fmss = FmssId.from_json_obj(ra)
            pos = Vec2(float(ra["x"]), float(ra["y"]))
        except (KeyError, TypeError, ValueError, WorldFormatError) as exc:
            raise WorldFormatError(f"assets[{i}]: {exc}") from exc
        assets.append(Asset(fmss, pos))
    return SyntheticWorld(tuple(assets), str(doc.get("graph_ref", "")))
