"""Vote collection and analysis: task packing, plurality aggregation, cost-benefit curve."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import IO, Iterable, Sequence

import numpy as np

from .compositor import UNLABELED, FmssLabeling
from .world import FmssId

MAX_SCENES_PER_TASK = 6
MAX_SEGMENTS_PER_TASK = 270
DEFAULT_TIME_LIMIT_MINUTES = 20.0
DEFAULT_SCENE_COUNT_THRESHOLD = 11


class NoEligibleBallotsError(ValueError):
    """No ballot satisfies the gold-label and vote-count preconditions."""


class VoteLogFormatError(ValueError):
    """A votes log line is malformed."""


@dataclass(frozen=True)
class Segment:
    """One identifier occurrence in one scene, with its pixel footprint."""

    fmss: FmssId
    scene: str
    pixels: int
    bbox: tuple[int, int, int, int]

    def __post_init__(self) -> None:
        if self.pixels <= 0:
            raise ValueError("pixel count must be > 0")


@dataclass(frozen=True)
class AnnotationTask:
    task_id: int
    scenes: tuple[str, ...]
    segments: tuple[Segment, ...]
    time_limit_minutes: float = DEFAULT_TIME_LIMIT_MINUTES

    def __post_init__(self) -> None:
        if not 1 <= len(self.scenes) <= MAX_SCENES_PER_TASK:
            raise ValueError(f"task {self.task_id}: {len(self.scenes)} scenes")
        if not 1 <= len(self.segments) <= MAX_SEGMENTS_PER_TASK:
            raise ValueError(f"task {self.task_id}: {len(self.segments)} segments")


def build_tasks(
    segments: Sequence[Segment],
    time_limit_minutes: float = DEFAULT_TIME_LIMIT_MINUTES,
) -> list[AnnotationTask]:
    """Greedy scene-then-segment packing under the 6-scene / 270-segment caps.

    Scenes stay whole unless a single scene alone exceeds the segment cap, in
    which case it is chunked across consecutive tasks.
    """
    if not segments:
        raise ValueError("no segments to pack")
    by_scene: dict[str, list[Segment]] = {}
    for seg in segments:
        by_scene.setdefault(seg.scene, []).append(seg)

    tasks: list[AnnotationTask] = []
    cur_scenes: list[str] = []
    cur_segments: list[Segment] = []

    def close() -> None:
        nonlocal cur_scenes, cur_segments
        if cur_segments:
            tasks.append(
                AnnotationTask(
                    len(tasks), tuple(cur_scenes), tuple(cur_segments), time_limit_minutes
                )
            )
            cur_scenes, cur_segments = [], []

    for scene in sorted(by_scene):
        scene_segments = by_scene[scene]
        chunks = [
            scene_segments[i : i + MAX_SEGMENTS_PER_TASK]
            for i in range(0, len(scene_segments), MAX_SEGMENTS_PER_TASK)
        ]
        for chunk in chunks:
            if len(cur_scenes) >= MAX_SCENES_PER_TASK or len(cur_segments) + len(
                chunk
            ) > MAX_SEGMENTS_PER_TASK:
                close()
            if scene not in cur_scenes:
                cur_scenes.append(scene)
            cur_segments.extend(chunk)
            if len(chunks) > 1:
                close()  # oversized scenes never share a task with their own tail
    close()
    return tasks


@dataclass(frozen=True)
class Vote:
    fmss: FmssId
    class_id: int
    worker: str
    ts_ms: int

    def to_json_obj(self) -> dict:
        return {
            "fmss": self.fmss.to_json_obj(),
            "class_id": self.class_id,
            "worker": self.worker,
            "ts_ms": self.ts_ms,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "Vote":
        try:
            return cls(
                FmssId.from_json_obj(obj["fmss"]),
                int(obj["class_id"]),
                str(obj["worker"]),
                int(obj["ts_ms"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise VoteLogFormatError(f"bad vote object: {exc}") from exc


@dataclass(frozen=True)
class Ballot:
    """All votes recorded for one identifier, ordered by timestamp."""

    fmss: FmssId
    votes: tuple[Vote, ...] = ()
    gold: int | None = None
    scene_count: int = 1

    def __post_init__(self) -> None:
        ts = [v.ts_ms for v in self.votes]
        if ts != sorted(ts):
            object.__setattr__(
                self, "votes", tuple(sorted(self.votes, key=lambda v: v.ts_ms))
            )


class VoteStore:
    """In-memory ballot store with exact-duplicate suppression.

    Duplicate means the same (worker, fmss, ts_ms) triple; resubmitting the
    identical vote is a no-op so retries are safe.
    """

    def __init__(self) -> None:
        self._votes: dict[FmssId, list[Vote]] = {}
        self._seen: set[tuple[str, FmssId, int]] = set()
        self._gold: dict[FmssId, int] = {}
        self._scene_count: dict[FmssId, int] = {}

    def record_vote(self, vote: Vote, class_count: int | None = None) -> bool:
        """Append a vote; returns False when it is an exact duplicate."""
        if class_count is not None and not 0 <= vote.class_id < class_count:
            raise ValueError(f"class id {vote.class_id} outside taxonomy of {class_count}")
        key = (vote.worker, vote.fmss, vote.ts_ms)
        if key in self._seen:
            return False
        self._seen.add(key)
        self._votes.setdefault(vote.fmss, []).append(vote)
        return True

    def has_worker_vote(self, fmss: FmssId, worker: str) -> bool:
        return any(v.worker == worker for v in self._votes.get(fmss, ()))

    def set_gold(self, fmss: FmssId, class_id: int) -> None:
        self._gold[fmss] = class_id

    def set_scene_count(self, fmss: FmssId, count: int) -> None:
        self._scene_count[fmss] = count

    def ballot(self, fmss: FmssId) -> Ballot:
        return Ballot(
            fmss,
            tuple(self._votes.get(fmss, ())),
            self._gold.get(fmss),
            self._scene_count.get(fmss, 1),
        )

    def ballots(self) -> list[Ballot]:
        known = set(self._votes) | set(self._gold) | set(self._scene_count)
        return [self.ballot(f) for f in sorted(known)]

    def vote_count(self, fmss: FmssId) -> int:
        return len(self._votes.get(fmss, ()))


def plurality_winner(votes: Sequence[Vote]) -> int:
    """Most-voted class; ties go to the class with the earliest tied vote.

    Identical timestamps inside a tie fall back to the smaller class id so the
    result never depends on input ordering. Empty input is unlabeled.
    """
    if not votes:
        return UNLABELED
    counts: dict[int, int] = {}
    earliest: dict[int, int] = {}
    for v in votes:
        counts[v.class_id] = counts.get(v.class_id, 0) + 1
        if v.class_id not in earliest or v.ts_ms < earliest[v.class_id]:
            earliest[v.class_id] = v.ts_ms
    top = max(counts.values())
    tied = [c for c, n in counts.items() if n == top]
    return min(tied, key=lambda c: (earliest[c], c))


def aggregate_labels(ballots: Iterable[Ballot]) -> FmssLabeling:
    """Plurality label per identifier; empty ballots stay unlabeled."""
    return FmssLabeling({b.fmss: plurality_winner(b.votes) for b in ballots})


@dataclass(frozen=True)
class CurvePoint:
    k: int
    accuracy: float
    stderr: float


def accuracy_vs_votes(ballots: Sequence[Ballot], k_max: int) -> list[CurvePoint]:
    """Plurality-at-k accuracy against gold for k = 1..k_max.

    Only ballots carrying a gold label and at least k_max votes participate;
    stderr is the binomial standard error at each k.
    """
    eligible = [b for b in ballots if b.gold is not None and len(b.votes) >= k_max]
    if not eligible:
        raise NoEligibleBallotsError(f"no ballot has a gold label and >= {k_max} votes")
    curve = []
    n = len(eligible)
    for k in range(1, k_max + 1):
        correct = sum(1 for b in eligible if plurality_winner(b.votes[:k]) == b.gold)
        acc = correct / n
        curve.append(CurvePoint(k, acc, math.sqrt(acc * (1.0 - acc) / n)))
    return curve


def isotonic_fit(values: Sequence[float]) -> list[float]:
    """Nondecreasing least-squares fit via pool-adjacent-violators."""
    blocks: list[tuple[float, int]] = []  # (mean, size)
    for v in values:
        mean, size = float(v), 1
        while blocks and blocks[-1][0] > mean:
            pm, ps = blocks.pop()
            mean = (pm * ps + mean * size) / (ps + size)
            size += ps
        blocks.append((mean, size))
    out: list[float] = []
    for mean, size in blocks:
        out.extend([mean] * size)
    return out


def diminishing_returns_point(
    curve: Sequence[CurvePoint], target: float = 0.75
) -> int | None:
    """Smallest k whose isotonic-fitted accuracy reaches the target, if any."""
    if not curve:
        raise ValueError("empty curve")
    ordered = sorted(curve, key=lambda p: p.k)
    fitted = isotonic_fit([p.accuracy for p in ordered])
    for p, f in zip(ordered, fitted):
        if f >= target:
            return p.k
    return None


def save_curve(curve: Sequence[CurvePoint]) -> str:
    lines = ["k,accuracy,stderr"]
    lines += [f"{p.k},{p.accuracy!r},{p.stderr!r}" for p in curve]
    return "\n".join(lines) + "\n"


def load_curve(source: bytes | str | IO) -> list[CurvePoint]:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    points = []
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0] == "k":
            continue
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected k,accuracy,stderr")
        points.append(CurvePoint(int(parts[0]), float(parts[1]), float(parts[2])))
    points.sort(key=lambda p: p.k)
    return points


def reference_accuracy_curve() -> list[CurvePoint]:
    """The shipped crowd-accuracy-versus-votes measurement series."""
    text = resources.files("ursa.data").joinpath("vote_accuracy_curve.csv").read_text()
    return load_curve(text)


@dataclass(frozen=True)
class AnnotatorModel:
    """Uniform-confusion annotator: correct with probability p, else uniform error."""

    accuracy: float
    class_count: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must be in [0, 1]")
        if self.class_count < 2:
            raise ValueError("need at least 2 classes")


def simulate_votes(gold: FmssLabeling, model: AnnotatorModel, k: int) -> list[Ballot]:
    """k synthetic votes per identifier under the uniform-confusion model.

    Deterministic for a given model seed; vote timestamps are sequential so
    the plurality tie rule behaves exactly as it does for collected votes.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(model.seed)
    ballots = []
    ts = 0
    for fmss in sorted(gold.classes):
        true_class = gold.classes[fmss]
        if true_class >= model.class_count:
            raise ValueError(
                f"gold class {true_class} outside the model's {model.class_count} classes"
            )
        votes = []
        for j in range(k):
            if rng.random() < model.accuracy:
                cid = true_class
            else:
                offset = int(rng.integers(1, model.class_count))
                cid = (true_class + offset) % model.class_count
            votes.append(Vote(fmss, cid, f"sim{j:03d}", ts))
            ts += 1
        ballots.append(Ballot(fmss, tuple(votes), gold=true_class, scene_count=1))
    return ballots


@dataclass(frozen=True)
class VoteStats:
    mean_votes: float | None
    eligible: int
    excluded: int
    threshold: int
    excluded_fraction: float
    threshold_percentile: float


def vote_stats(
    ballots: Sequence[Ballot], threshold: int = DEFAULT_SCENE_COUNT_THRESHOLD
) -> VoteStats:
    """Mean votes per identifier over ballots appearing in at most `threshold` scenes.

    Ubiquitous identifiers (scene_count above the threshold) are excluded so
    they cannot skew the mean; the report carries the excluded fraction and the
    percentile the threshold represents.
    """
    eligible = [b for b in ballots if b.scene_count <= threshold]
    excluded = len(ballots) - len(eligible)
    total = len(ballots)
    mean = (
        sum(len(b.votes) for b in eligible) / len(eligible) if eligible else None
    )
    return VoteStats(
        mean_votes=mean,
        eligible=len(eligible),
        excluded=excluded,
        threshold=threshold,
        excluded_fraction=excluded / total if total else 0.0,
        threshold_percentile=len(eligible) / total if total else 0.0,
    )


def dump_votes(votes: Iterable[Vote]) -> str:
    """Append-only log format: one JSON object per line."""
    return "".join(
        json.dumps(v.to_json_obj(), sort_keys=True, separators=(",", ":")) + "\n"
        for v in votes
    )


def load_votes(source: bytes | str | IO) -> list[Vote]:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    votes = []
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            votes.append(Vote.from_json_obj(json.loads(line)))
        except (json.JSONDecodeError, VoteLogFormatError) as exc:
            raise VoteLogFormatError(f"line {lineno}: {exc}") from exc
    return votes


def store_from_votes(votes: Iterable[Vote]) -> VoteStore:
    store = VoteStore()
    for v in votes:
        store.record_vote(v)
    return store


def segments_to_json_obj(segments: Sequence[Segment]) -> dict:
    return {
        "segments": [
            {
                "fmss": s.fmss.to_json_obj(),
                "scene": s.scene,
                "pixels": s.pixels,
                "bbox": list(s.bbox),
            }
            for s in segments
        ]
    }


def segments_from_json_obj(obj: dict) -> list[Segment]:
    out = []
    for i, rs in enumerate(obj.get("segments", [])):
        try:
            out.append(
                Segment(
                    FmssId.from_json_obj(rs["fmss"]),
                    str(rs["scene"]),
                    int(rs["pixels"]),
                    tuple(int(v) for v in rs["bbox"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"segments[{i}]: {exc}") from exc
    return out


def scene_counts(segments: Sequence[Segment]) -> dict[FmssId, int]:
    scenes_by_fmss: dict[FmssId, set[str]] = {}
    for s in segments:
        scenes_by_fmss.setdefault(s.fmss, set()).add(s.scene)
    return {f: len(sc) for f, sc in scenes_by_fmss.items()}


def tasks_to_json_obj(tasks: Sequence[AnnotationTask]) -> dict:
    return {
        "tasks": [
            {
                "task_id": t.task_id,
                "scenes": list(t.scenes),
                "time_limit_minutes": t.time_limit_minutes,
                **segments_to_json_obj(t.segments),
            }
            for t in tasks
        ]
    }


def tasks_from_json_obj(obj: dict) -> list[AnnotationTask]:
    out = []
    for rt in obj.get("tasks", []):
        out.append(
            AnnotationTask(
                int(rt["task_id"]),
                tuple(str(s) for s in rt["scenes"]),
                tuple(segments_from_json_obj(rt)),
                float(rt.get("time_limit_minutes", DEFAULT_TIME_LIMIT_MINUTES)),
            )
        )
    return out
