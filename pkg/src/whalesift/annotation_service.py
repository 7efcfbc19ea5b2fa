"""HTTP backend for the human labeling workflow.

Serves annotation tasks (frame strips, current label/interval, version) and
persists label and interval decisions into the manifest.  Writes use
optimistic concurrency: every mutation names the version it read, a stale
version gets a 409 and changes nothing, and the manifest hits disk before
the 200 goes out, so an acknowledged write survives a crash.

Endpoints (JSON unless noted):

    GET  /api/videos?status=unlabeled|labeled|relevant|irrelevant|all
    GET  /api/videos/{id}
    GET  /api/videos/{id}/frames/{n}.jpg      (image/jpeg)
    POST /api/videos/{id}/label               {"label": ..., "version": n}
    POST /api/videos/{id}/interval            {"start_s": ..., "end_s": ..., "version": n}
    GET  /api/progress

Anything outside /api/ is served from an optional static directory (the
built annotator UI).
"""

from __future__ import annotations

import json
import logging
import mimetypes
import re
import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from filelock import Timeout

from .corpus import (
    CorpusIOError,
    Interval,
    Label,
    LabeledVideo,
    Manifest,
    assign_irrelevant_interval,
    frame_path,
    interval_violation,
    manifest_lock,
    read_frame_index,
)
from .errors import WhalesiftError
from .seeding import interval_seed

logger = logging.getLogger(__name__)

_STATUSES = ("unlabeled", "labeled", "relevant", "irrelevant", "all")


class AnnotationServiceError(WhalesiftError):
    """Service cannot start (bad corpus, bind failure, corpus lock held)."""


def validate_interval(label: Label, interval: Interval) -> str | None:
    """Gate a human-submitted interval; None means acceptable.

    Relevant videos take a 10-20 s interval.  Irrelevant excerpts are
    machine-assigned, so any manual interval is refused.
    """
    if label is Label.IRRELEVANT:
        return (
            "irrelevant intervals are machine-assigned; "
            "only relevant videos take a manual interval"
        )
    return interval_violation(label, interval)


@dataclass(frozen=True)
class ServiceConfig:
    corpus_dir: Path
    frame_cache: Path | None = None  # default: <corpus_dir>/frames
    host: str = "127.0.0.1"
    port: int = 8765
    static_dir: Path | None = None
    seed: int = 0
    durable: bool = True  # fsync manifest writes before acking


class AnnotationService:
    """Owns the manifest (exclusive corpus lock) and the HTTP server.

    Reads snapshot under a mutex; all mutations are serialized through the
    same mutex and saved before the response is acknowledged.
    """

    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        corpus_dir = Path(config.corpus_dir)
        self.manifest_path = corpus_dir / "manifest.ndjson"
        self.frame_cache = (
            Path(config.frame_cache) if config.frame_cache else corpus_dir / "frames"
        )
        self.static_dir = Path(config.static_dir) if config.static_dir else None

        if not self.manifest_path.exists():
            raise AnnotationServiceError(f"no manifest at {self.manifest_path}")
        self._corpus_lock = manifest_lock(self.manifest_path)
        try:
            self._corpus_lock.acquire(timeout=0.5)
        except Timeout:
            raise AnnotationServiceError(
                f"corpus lock held by another process: {self.manifest_path}"
            ) from None

        self._mutex = threading.RLock()
        self._thread: threading.Thread | None = None
        try:
            self.manifest = Manifest.load(self.manifest_path)
            self.httpd = _Server((config.host, config.port), _Handler, service=self)
        except OSError as err:
            self._corpus_lock.release()
            raise AnnotationServiceError(
                f"cannot bind {config.host}:{config.port}: {err}"
            ) from err
        except Exception:
            self._corpus_lock.release()
            raise

    # -- lifecycle ---------------------------------------------------------

    @property
    def address(self) -> tuple[str, int]:
        host, port = self.httpd.server_address[:2]
        return str(host), int(port)

    @property
    def url(self) -> str:
        host, port = self.address
        return f"http://{host}:{port}"

    def start(self) -> None:
        """Serve on a background thread (tests and embedding)."""
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        logger.info("annotation service listening on %s", self.url)
        try:
            self.httpd.serve_forever()
        finally:
            self.close()

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        if self._corpus_lock.is_locked:
            self._corpus_lock.release()

    # -- task views ----------------------------------------------------------

    def task_json(self, video: LabeledVideo) -> dict:
        local_id = video.local_id
        try:
            index = read_frame_index(self.frame_cache, local_id)
        except CorpusIOError:
            index = None
        frame_count = index.native_count if index else video.frame_count
        frames = [
            f"/api/videos/{local_id}/frames/{n}.jpg" for n in range(frame_count or 0)
        ]
        return {
            "local_id": local_id,
            "duration_s": video.record.duration_s,
            "label": None if video.label is None else video.label.name.lower(),
            "interval": None if video.interval is None else video.interval.to_dict(),
            "version": video.version,
            "frame_count": frame_count,
            "frames": frames,
            "timestamps_s": list(index.timestamps_s) if index else None,
        }

    def list_tasks(self, status: str) -> list[dict]:
        def wanted(video: LabeledVideo) -> bool:
            if status == "all":
                return True
            if status == "unlabeled":
                return video.label is None
            if status == "labeled":
                return video.label is not None
            return video.label is not None and video.label.name.lower() == status

        with self._mutex:
            return [self.task_json(v) for v in self.manifest if wanted(v)]

    def progress(self) -> dict:
        with self._mutex:
            counts = self.manifest.class_counts()
        return {
            "relevant": counts.relevant,
            "irrelevant": counts.irrelevant,
            "unlabeled": counts.unlabeled,
            "total": counts.total,
        }

    # -- mutations (called by the handler) -------------------------------------

    def apply_label(self, local_id: str, label: Label, version: int) -> dict:
        with self._mutex:
            video = self.manifest.get(local_id)
            if version != video.version:
                raise _Conflict(video.version)
            updated = self.manifest.upsert_label(local_id, label)
            if (
                label is Label.IRRELEVANT
                and updated.interval is None
                and updated.record.duration_s > 0
            ):
                updated = self.manifest.set_interval(
                    local_id,
                    assign_irrelevant_interval(
                        updated.record.duration_s,
                        seed=interval_seed(self.config.seed, local_id),
                    ),
                )
            self.manifest.save(self.manifest_path, durable=self.config.durable)
            return self.task_json(updated)

    def apply_interval(self, local_id: str, interval: Interval, version: int) -> dict:
        with self._mutex:
            video = self.manifest.get(local_id)
            if version != video.version:
                raise _Conflict(video.version)
            if video.label is None:
                raise _Invalid("label the video before marking an interval")
            violation = validate_interval(video.label, interval)
            if violation:
                raise _Invalid(violation)
            updated = self.manifest.set_interval(local_id, interval)
            self.manifest.save(self.manifest_path, durable=self.config.durable)
            return self.task_json(updated)


class _Conflict(Exception):
    def __init__(self, current_version: int) -> None:
        super().__init__("version conflict")
        self.current_version = current_version


class _Invalid(Exception):
    """Semantically invalid request (422)."""


class _Server(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, addr, handler, service: AnnotationService) -> None:
        self.service = service
        super().__init__(addr, handler)


_ROUTES = {
    "videos": re.compile(r"^/api/videos/?$"),
    "video": re.compile(r"^/api/videos/([^/]+)$"),
    "frame": re.compile(r"^/api/videos/([^/]+)/frames/(\d+)\.jpg$"),
    "label": re.compile(r"^/api/videos/([^/]+)/label$"),
    "interval": re.compile(r"^/api/videos/([^/]+)/interval$"),
    "progress": re.compile(r"^/api/progress$"),
}


def _parse_label(value) -> Label:
    if isinstance(value, str):
        name = value.strip().upper()
        if name in Label.__members__:
            return Label[name]
    elif isinstance(value, int) and not isinstance(value, bool):
        if value in (0, 1):
            return Label(value)
    raise _Invalid(f"label must be 'relevant', 'irrelevant', 0 or 1; got {value!r}")


class _Handler(BaseHTTPRequestHandler):
    server: _Server
    protocol_version = "HTTP/1.1"

    # -- plumbing -----------------------------------------------------------

    def log_message(self, fmt: str, *args) -> None:
        logger.debug("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _json(self, status: int, payload: dict | list) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"), "application/json")

    def _error(self, status: int, message: str, **extra) -> None:
        self._json(status, {"error": message, **extra})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise _Invalid("empty request body")
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as err:
            raise _Invalid(f"request body is not JSON: {err}") from err
        if not isinstance(body, dict):
            raise _Invalid("request body must be a JSON object")
        return body

    # -- GET -------------------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802  (http.server naming)
        service = self.server.service
        path, _, query = self.path.partition("?")

        if _ROUTES["videos"].match(path):
            status = "unlabeled"
            for part in query.split("&"):
                if part.startswith("status="):
                    status = part[len("status=") :]
            if status not in _STATUSES:
                return self._error(400, f"unknown status filter {status!r}")
            return self._json(200, {"videos": service.list_tasks(status)})

        if _ROUTES["progress"].match(path):
            return self._json(200, service.progress())

        match = _ROUTES["frame"].match(path)
        if match:
            local_id, n = match.group(1), int(match.group(2))
            jpeg = frame_path(service.frame_cache, local_id, n)
            if not jpeg.exists():
                return self._error(404, f"no frame {n} for {local_id}")
            return self._send(200, jpeg.read_bytes(), "image/jpeg")

        match = _ROUTES["video"].match(path)
        if match:
            with service._mutex:
                if match.group(1) not in service.manifest:
                    return self._error(404, f"unknown video {match.group(1)!r}")
                task = service.task_json(service.manifest.get(match.group(1)))
            return self._json(200, task)

        return self._static(path)

    def _static(self, path: str) -> None:
        root = self.server.service.static_dir
        if root is None or not root.is_dir():
            return self._error(404, "not found")
        name = path.lstrip("/") or "index.html"
        target = (root / name).resolve()
        if not target.is_relative_to(root.resolve()) or not target.is_file():
            return self._error(404, "not found")
        content_type = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send(200, target.read_bytes(), content_type)

    # -- POST ------------------------------------------------------------------

    def do_POST(self) -> None:  # noqa: N802
        service = self.server.service
        try:
            match = _ROUTES["label"].match(self.path)
            if match:
                body = self._read_body()
                task = service.apply_label(
                    match.group(1),
                    _parse_label(body.get("label")),
                    _require_version(body),
                )
                return self._json(200, {"task": task})

            match = _ROUTES["interval"].match(self.path)
            if match:
                body = self._read_body()
                try:
                    interval = Interval(
                        start_s=float(body["start_s"]), end_s=float(body["end_s"])
                    )
                except (KeyError, TypeError, ValueError) as err:
                    raise _Invalid(f"malformed interval: {err}") from err
                task = service.apply_interval(
                    match.group(1), interval, _require_version(body)
                )
                return self._json(200, {"task": task})

            return self._error(404, "not found")
        except _Conflict as err:
            return self._error(409, "version conflict", current_version=err.current_version)
        except _Invalid as err:
            return self._error(422, str(err))
        except WhalesiftError as err:
            return self._error(404, str(err))


def _require_version(body: dict) -> int:
    version = body.get("version")
    if not isinstance(version, int) or isinstance(version, bool):
        raise _Invalid("missing or non-integer 'version'")
    return version


def serve(config: ServiceConfig) -> AnnotationService:
    """Construct a service bound to the configured address, ready to run.

    Callers choose blocking (``serve_forever``) or background (``start``)
    operation; either way ``close`` releases the socket and corpus lock.
    """
    return AnnotationService(config)
