"""HTTP facade for the annotation workflow: lease tasks, accept votes, report progress."""

from __future__ import annotations

import hashlib
import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import parse_qs, urlparse

from .annotation import AnnotationTask, Vote, VoteStore, dump_votes, load_votes
from .taxonomy import ClassTaxonomy
from .world import FmssId

DEFAULT_WORKER_QUOTA = 7


class LeaseExpiredError(Exception):
    """The 20-minute (configurable) submission window has closed."""


class UnknownTaskError(KeyError):
    pass


class InvalidSubmissionError(ValueError):
    """A vote names an unknown class or an identifier outside the task."""


def system_clock_ms() -> int:
    return time.time_ns() // 1_000_000


@dataclass(frozen=True)
class Lease:
    worker: str
    task_id: int
    deadline_ms: int


@dataclass(frozen=True)
class ProgressReport:
    tasks_total: int
    tasks_outstanding: int
    ballots_by_vote_count: dict[int, int]
    remaining_votes_to_target: int
    target_votes: int

    def to_json_obj(self) -> dict:
        return {
            "tasks_total": self.tasks_total,
            "tasks_outstanding": self.tasks_outstanding,
            "ballots_by_vote_count": {str(k): v for k, v in sorted(self.ballots_by_vote_count.items())},
            "remaining_votes_to_target": self.remaining_votes_to_target,
            "target_votes": self.target_votes,
        }


class AnnotationService:
    """Linearizable core behind the HTTP routes.

    One lock guards all state; every mutation is appended to the data
    directory's logs first (votes.ndjson in the shared vote-log format, plus
    events.ndjson for leases and completions) so a restart replays to an
    identical progress snapshot.
    """

    def __init__(
        self,
        tasks: Sequence[AnnotationTask],
        taxonomy: ClassTaxonomy,
        palette: dict[int, tuple[int, int, int]],
        data_dir: str | Path,
        worker_quota: int = DEFAULT_WORKER_QUOTA,
        clock_ms: Callable[[], int] = system_clock_ms,
    ):
        self._lock = threading.RLock()
        self._tasks = {t.task_id: t for t in tasks}
        self._taxonomy = taxonomy
        self._palette = palette
        self._quota = worker_quota
        self._clock = clock_ms
        self._store = VoteStore()
        self._leases: dict[str, Lease] = {}  # at most one active lease per worker
        self._consumed: dict[str, set[int]] = {}  # tasks ever leased to a worker
        self._completed: dict[int, set[str]] = {t.task_id: set() for t in tasks}
        self._data_dir = Path(data_dir)
        self._data_dir.mkdir(parents=True, exist_ok=True)
        self._votes_log = self._data_dir / "votes.ndjson"
        self._events_log = self._data_dir / "events.ndjson"
        self._replay()

    # -- persistence ---------------------------------------------------------

    def _replay(self) -> None:
        if self._votes_log.exists():
            for vote in load_votes(self._votes_log.read_text(encoding="utf-8")):
                self._store.record_vote(vote)
        if self._events_log.exists():
            for line in self._events_log.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                ev = json.loads(line)
                worker, task_id = ev["worker"], int(ev["task_id"])
                if ev["type"] == "lease":
                    self._consumed.setdefault(worker, set()).add(task_id)
                    self._leases[worker] = Lease(worker, task_id, int(ev["deadline_ms"]))
                elif ev["type"] == "submit":
                    self._completed.setdefault(task_id, set()).add(worker)
                    self._leases.pop(worker, None)
                elif ev["type"] == "expire":
                    self._leases.pop(worker, None)

    def _append_event(self, obj: dict) -> None:
        with self._events_log.open("a", encoding="utf-8") as fp:
            fp.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
            fp.flush()

    def _append_votes(self, votes: Sequence[Vote]) -> None:
        with self._votes_log.open("a", encoding="utf-8") as fp:
            fp.write(dump_votes(votes))
            fp.flush()

    # -- core operations -----------------------------------------------------

    def _expire_stale_lease(self, worker: str, now: int) -> None:
        lease = self._leases.get(worker)
        if lease is not None and now > lease.deadline_ms:
            del self._leases[worker]
            self._append_event(
                {"type": "expire", "worker": worker, "task_id": lease.task_id, "ts_ms": now}
            )

    def _expire_all_stale(self, now: int) -> None:
        # Stale leases must not hold quota slots for absent workers.
        for worker in [w for w, l in self._leases.items() if now > l.deadline_ms]:
            self._expire_stale_lease(worker, now)

    def _active_worker_count(self, task_id: int) -> int:
        leased = sum(1 for l in self._leases.values() if l.task_id == task_id)
        return leased + len(self._completed.get(task_id, ()))

    def next_task(self, worker: str) -> dict | None:
        """Lease the lowest-id task this worker has not seen, or re-send the
        active lease; None when nothing remains under the worker quota."""
        with self._lock:
            now = self._clock()
            self._expire_all_stale(now)
            lease = self._leases.get(worker)
            if lease is not None:
                return self._payload(self._tasks[lease.task_id], lease)
            consumed = self._consumed.setdefault(worker, set())
            for task_id in sorted(self._tasks):
                if task_id in consumed:
                    continue
                if self._active_worker_count(task_id) >= self._quota:
                    continue
                task = self._tasks[task_id]
                deadline = now + int(task.time_limit_minutes * 60_000)
                lease = Lease(worker, task_id, deadline)
                self._leases[worker] = lease
                consumed.add(task_id)
                self._append_event(
                    {
                        "type": "lease",
                        "worker": worker,
                        "task_id": task_id,
                        "deadline_ms": deadline,
                        "ts_ms": now,
                    }
                )
                return self._payload(task, lease)
            return None

    def submit_votes(
        self, worker: str, task_id: int, votes: Sequence[tuple[FmssId, int]]
    ) -> int:
        """Record a whole submission atomically; returns the accepted count.

        Rejections: no/expired lease, unknown task, any invalid class id or an
        identifier outside the task (nothing is recorded in those cases).
        Votes for ballots this worker already voted on are skipped, keeping
        each ballot at one vote per worker.
        """
        with self._lock:
            if task_id not in self._tasks:
                raise UnknownTaskError(task_id)
            now = self._clock()
            lease = self._leases.get(worker)
            if lease is None or lease.task_id != task_id:
                raise LeaseExpiredError(f"worker {worker} holds no lease on task {task_id}")
            if now > lease.deadline_ms:
                self._expire_stale_lease(worker, now)
                raise LeaseExpiredError(
                    f"lease deadline passed {(now - lease.deadline_ms) / 1000.0:.1f}s ago"
                )
            task = self._tasks[task_id]
            task_fmss = {s.fmss for s in task.segments}
            for fmss, class_id in votes:
                if not 0 <= class_id < len(self._taxonomy):
                    raise InvalidSubmissionError(f"class id {class_id} outside the taxonomy")
                if fmss not in task_fmss:
                    raise InvalidSubmissionError(f"{fmss} is not part of task {task_id}")
            accepted: list[Vote] = []
            for fmss, class_id in votes:
                if self._store.has_worker_vote(fmss, worker):
                    continue
                vote = Vote(fmss, class_id, worker, now)
                if self._store.record_vote(vote):
                    accepted.append(vote)
            self._append_votes(accepted)
            del self._leases[worker]
            self._completed.setdefault(task_id, set()).add(worker)
            self._append_event(
                {
                    "type": "submit",
                    "worker": worker,
                    "task_id": task_id,
                    "accepted": len(accepted),
                    "ts_ms": now,
                }
            )
            return len(accepted)

    def progress(self) -> ProgressReport:
        with self._lock:
            histogram: dict[int, int] = {}
            remaining = 0
            all_fmss = {s.fmss for t in self._tasks.values() for s in t.segments}
            for fmss in all_fmss:
                n = self._store.vote_count(fmss)
                histogram[n] = histogram.get(n, 0) + 1
                remaining += max(0, self._quota - n)
            outstanding = sum(
                1 for tid in self._tasks if len(self._completed.get(tid, ())) < self._quota
            )
            return ProgressReport(
                tasks_total=len(self._tasks),
                tasks_outstanding=outstanding,
                ballots_by_vote_count=histogram,
                remaining_votes_to_target=remaining,
                target_votes=self._quota,
            )

    def store_snapshot(self) -> VoteStore:
        with self._lock:
            snap = VoteStore()
            for ballot in self._store.ballots():
                for v in ballot.votes:
                    snap.record_vote(v)
            return snap

    def ballots(self):
        with self._lock:
            return self._store.ballots()

    def completion_counts(self) -> dict[int, int]:
        """Distinct workers who completed each task (quota audit)."""
        with self._lock:
            return {tid: len(self._completed.get(tid, ())) for tid in self._tasks}

    # -- payloads ------------------------------------------------------------

    def _payload(self, task: AnnotationTask, lease: Lease) -> dict:
        segments = []
        for seg in task.segments:
            # Overlay names derive from segment content, not packing order, so
            # a scene split across tasks keeps stable references.
            slug = hashlib.sha1(
                json.dumps(
                    [seg.fmss.to_json_obj(), list(seg.bbox)], sort_keys=True
                ).encode("utf-8")
            ).hexdigest()[:10]
            segments.append(
                {
                    "fmss": seg.fmss.to_json_obj(),
                    "scene": seg.scene,
                    "scene_image": f"/static/scenes/{seg.scene}.png",
                    "overlay_image": f"/static/overlays/{seg.scene}/{slug}.png",
                    "bbox": list(seg.bbox),
                }
            )
        classes = [
            {"id": cid, "name": name, "rgb": list(self._palette.get(cid, (127, 127, 127)))}
            for cid, name in self._taxonomy.classes
        ]
        return {
            "task_id": task.task_id,
            "deadline_ms": lease.deadline_ms,
            "time_limit_minutes": task.time_limit_minutes,
            "scenes": list(task.scenes),
            "segments": segments,
            "classes": classes,
        }


class _Handler(BaseHTTPRequestHandler):
    service: AnnotationService
    static_root: Path | None = None
    ui_root: Path | None = None

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        pass

    def _send_json(self, status: int, obj: dict) -> None:
        body = json.dumps(obj, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _send_file(self, root: Path, rel: str) -> None:
        target = (root / rel.lstrip("/")).resolve()
        if not str(target).startswith(str(root.resolve())) or not target.is_file():
            self._send_json(404, {"error": "not-found"})
            return
        ctype = {
            ".html": "text/html",
            ".js": "application/javascript",
            ".css": "text/css",
            ".png": "image/png",
            ".ppm": "image/x-portable-pixmap",
            ".json": "application/json",
        }.get(target.suffix, "application/octet-stream")
        body = target.read_bytes()
        self.send_response(200)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self) -> None:
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self) -> None:
        url = urlparse(self.path)
        if url.path == "/api/task":
            worker = parse_qs(url.query).get("worker", [""])[0]
            if not worker:
                self._send_json(422, {"error": "missing-worker"})
                return
            payload = self.service.next_task(worker)
            if payload is None:
                self.send_response(204)
                self.send_header("Access-Control-Allow-Origin", "*")
                self.end_headers()
                return
            self._send_json(200, payload)
        elif url.path == "/api/progress":
            self._send_json(200, self.service.progress().to_json_obj())
        elif url.path.startswith("/static/") and self.static_root is not None:
            self._send_file(self.static_root, url.path[len("/static/") :])
        elif self.ui_root is not None:
            rel = "index.html" if url.path == "/" else url.path
            self._send_file(self.ui_root, rel)
        else:
            self._send_json(404, {"error": "not-found"})

    def do_POST(self) -> None:
        url = urlparse(self.path)
        if url.path != "/api/votes":
            self._send_json(404, {"error": "not-found"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            doc = json.loads(self.rfile.read(length).decode("utf-8"))
            worker = str(doc["worker"])
            task_id = int(doc["task_id"])
            votes = [
                (FmssId.from_json_obj(v["fmss"]), int(v["class_id"]))
                for v in doc["votes"]
            ]
        except (ValueError, KeyError, TypeError) as exc:
            self._send_json(422, {"error": "bad-request", "detail": str(exc)})
            return
        try:
            accepted = self.service.submit_votes(worker, task_id, votes)
        except LeaseExpiredError as exc:
            self._send_json(409, {"error": "expired-lease", "detail": str(exc)})
        except (UnknownTaskError, InvalidSubmissionError) as exc:
            self._send_json(422, {"error": "invalid-submission", "detail": str(exc)})
        else:
            self._send_json(200, {"accepted": accepted})


def make_server(
    service: AnnotationService,
    port: int = 0,
    static_root: str | Path | None = None,
    ui_root: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the threaded HTTP server; port 0 picks a free port."""
    handler = type(
        "BoundHandler",
        (_Handler,),
        {
            "service": service,
            "static_root": Path(static_root) if static_root else None,
            "ui_root": Path(ui_root) if ui_root else None,
        },
    )
    return ThreadingHTTPServer(("127.0.0.1", port), handler)


def serve_forever(server: ThreadingHTTPServer) -> None:
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
