"""Video search, metadata retrieval, and anonymization.

Talks to the YouTube Data API v3 (search.list + videos.list), pages through
results under a token-bucket rate limit, and strips identifying information
from every record before it can enter a corpus.  The platform video id
survives only in a private mapping file kept separate from the shareable
manifest.
"""

from __future__ import annotations

import json
import logging
import re
import subprocess
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .errors import WhalesiftError

logger = logging.getLogger(__name__)

SEARCH_URL = "https://www.googleapis.com/youtube/v3/search"
VIDEOS_URL = "https://www.googleapis.com/youtube/v3/videos"


class QuotaExceededError(WhalesiftError):
    """Daily quota exhausted; ``retry_after_s`` is None when the API gave no hint."""

    def __init__(self, message: str, retry_after_s: float | None = None) -> None:
        super().__init__(message)
        self.retry_after_s = retry_after_s


class AuthFailureError(WhalesiftError):
    """API key missing, invalid, or not authorized."""


class NetworkFailureError(WhalesiftError):
    """Transport-level failure (DNS, connect, timeout, non-HTTP error)."""


class MalformedResponseError(WhalesiftError):
    """Response body is not the JSON shape the API documents."""


class DuplicateCounterError(WhalesiftError):
    """A local-id counter was used twice within one corpus."""


class VideoFetchError(WhalesiftError):
    """External fetch command failed or produced no usable file."""


@dataclass(frozen=True)
class SearchRequest:
    """One page request against the platform search endpoint."""

    query: str
    max_results: int = 50
    page_token: str | None = None

    def __post_init__(self) -> None:
        if not self.query.strip():
            raise ValueError("query must be non-empty")
        if not 1 <= self.max_results <= 50:
            raise ValueError("max_results must be in [1, 50]")


@dataclass(frozen=True)
class RawVideoMeta:
    """Metadata exactly as the platform returned it. Never persisted."""

    platform_video_id: str
    title: str
    duration_s: float
    published_at: str
    channel_ref: str

    def __post_init__(self) -> None:
        if not self.platform_video_id:
            raise ValueError("platform_video_id must be non-empty")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")


@dataclass(frozen=True)
class AnonymizedRecord:
    """A video known only by its local id; carries no uploader information."""

    local_id: str
    duration_s: float
    retrieved_at: str
    query: str

    def to_dict(self) -> dict:
        return {
            "local_id": self.local_id,
            "duration_s": self.duration_s,
            "retrieved_at": self.retrieved_at,
            "query": self.query,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnonymizedRecord":
        return cls(
            local_id=d["local_id"],
            duration_s=float(d["duration_s"]),
            retrieved_at=d["retrieved_at"],
            query=d["query"],
        )


@dataclass(frozen=True)
class PrivateMapEntry:
    """local_id -> platform id. Lives only in the private map file."""

    local_id: str
    platform_video_id: str


@dataclass(frozen=True)
class SearchPage:
    items: tuple[RawVideoMeta, ...]
    next_page_token: str | None


def format_local_id(counter: int) -> str:
    """Zero-padded local id, 4 digits wide, widening automatically past 9999."""
    if counter < 0:
        raise ValueError("counter must be non-negative")
    return f"vid_{counter:04d}"


def anonymize(
    meta: RawVideoMeta, counter: int, query: str, now: str
) -> tuple[AnonymizedRecord, PrivateMapEntry]:
    """Strip a raw record down to what the shareable manifest may contain.

    The caller is responsible for counter uniqueness; use :class:`Anonymizer`
    to get that guarantee.
    """
    local_id = format_local_id(counter)
    record = AnonymizedRecord(
        local_id=local_id,
        duration_s=meta.duration_s,
        retrieved_at=now,
        query=query,
    )
    return record, PrivateMapEntry(local_id, meta.platform_video_id)


class Anonymizer:
    """Thread-safe counter allocator wrapping :func:`anonymize`."""

    def __init__(self, start: int = 1) -> None:
        self._lock = threading.Lock()
        self._next = start
        self._used: set[int] = set()

    def anonymize(
        self,
        meta: RawVideoMeta,
        query: str,
        now: str,
        counter: int | None = None,
    ) -> tuple[AnonymizedRecord, PrivateMapEntry]:
        with self._lock:
            if counter is None:
                counter = self._next
            if counter in self._used:
                raise DuplicateCounterError(f"counter {counter} already used")
            self._used.add(counter)
            self._next = max(self._next, counter + 1)
        return anonymize(meta, counter, query, now)


class PrivateMap:
    """The only place a platform video id is allowed to persist.

    File format: one ``local_id<TAB>platform_video_id`` record per line.
    """

    def __init__(self) -> None:
        self._entries: dict[str, str] = {}

    def add(self, entry: PrivateMapEntry) -> None:
        if entry.local_id in self._entries:
            raise DuplicateCounterError(f"local id {entry.local_id} already mapped")
        self._entries[entry.local_id] = entry.platform_video_id

    def platform_id(self, local_id: str) -> str:
        return self._entries[local_id]

    def platform_ids(self) -> set[str]:
        """All platform ids already mapped (for dedupe across search runs)."""
        return set(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, local_id: str) -> bool:
        return local_id in self._entries

    def save(self, path: str | Path) -> None:
        lines = [f"{lid}\t{pid}\n" for lid, pid in sorted(self._entries.items())]
        Path(path).write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PrivateMap":
        pm = cls()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            lid, pid = line.split("\t", 1)
            pm.add(PrivateMapEntry(lid, pid))
        return pm


class TokenBucket:
    """Blocking token-bucket rate limiter.

    ``clock``/``sleep`` are injectable so tests can drive a simulated clock.
    Default capacity 1 gives the strict guarantee that N acquisitions take at
    least (N-1)/rate seconds.
    """

    def __init__(
        self,
        rate_per_s: float,
        capacity: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if rate_per_s <= 0:
            raise ValueError("rate_per_s must be positive")
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.rate = float(rate_per_s)
        self.capacity = float(capacity)
        self._clock = clock
        self._sleep = sleep
        self._tokens = self.capacity
        self._last = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        with self._lock:
            while True:
                now = self._clock()
                self._tokens = min(
                    self.capacity, self._tokens + (now - self._last) * self.rate
                )
                self._last = now
                if self._tokens >= 1.0:
                    self._tokens -= 1.0
                    return
                self._sleep((1.0 - self._tokens) / self.rate)


# A transport maps a fully-formed URL to (status, headers, body).  Injectable
# so every test can run from recorded fixture bodies without a network.
Transport = Callable[[str], tuple[int, dict, bytes]]


def urllib_transport(url: str) -> tuple[int, dict, bytes]:
    try:
        with urllib.request.urlopen(url, timeout=30) as resp:
            return resp.status, dict(resp.headers), resp.read()
    except urllib.error.HTTPError as err:
        return err.code, dict(err.headers or {}), err.read()
    except urllib.error.URLError as err:
        raise NetworkFailureError(f"request failed: {err.reason}") from err
    except OSError as err:
        raise NetworkFailureError(f"request failed: {err}") from err


_DURATION_RE = re.compile(
    r"^P(?:(?P<days>\d+)D)?"
    r"(?:T(?:(?P<hours>\d+)H)?(?:(?P<minutes>\d+)M)?(?:(?P<seconds>\d+)S)?)?$"
)


def parse_iso8601_duration(text: str) -> float:
    """ISO-8601 duration (the videos.list contentDetails form) to seconds."""
    m = _DURATION_RE.match(text)
    if m is None:
        raise MalformedResponseError(f"unparseable duration: {text!r}")
    parts = {k: int(v) for k, v in m.groupdict().items() if v is not None}
    return float(
        parts.get("days", 0) * 86400
        + parts.get("hours", 0) * 3600
        + parts.get("minutes", 0) * 60
        + parts.get("seconds", 0)
    )


class YouTubeClient:
    """search.list + videos.list client with paging and rate limiting.

    One client holds one credential and issues requests sequentially; run
    independent searches with separate client instances.
    """

    def __init__(
        self,
        api_key: str,
        requests_per_second: float = 1.0,
        transport: Transport = urllib_transport,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        if not api_key:
            raise AuthFailureError("api key must be non-empty")
        self._key = api_key
        self._transport = transport
        self._bucket = TokenBucket(requests_per_second, clock=clock, sleep=sleep)

    def _get(self, base: str, params: dict) -> dict:
        self._bucket.acquire()
        qs = urllib.parse.urlencode({**params, "key": self._key})
        status, headers, body = self._transport(f"{base}?{qs}")
        if status != 200:
            self._raise_api_error(status, headers, body)
        try:
            return json.loads(body)
        except json.JSONDecodeError as err:
            raise MalformedResponseError(f"invalid JSON in response: {err}") from err

    @staticmethod
    def _raise_api_error(status: int, headers: dict, body: bytes) -> None:
        reason = ""
        message = f"HTTP {status}"
        try:
            payload = json.loads(body)
            error = payload.get("error", {})
            message = error.get("message", message)
            errors = error.get("errors", [])
            if errors:
                reason = errors[0].get("reason", "")
        except (json.JSONDecodeError, AttributeError):
            pass
        if status == 403 and "quota" in (reason + message).lower():
            retry_after = None
            raw = headers.get("Retry-After")
            if raw is not None:
                try:
                    retry_after = float(raw)
                except ValueError:
                    retry_after = None
            raise QuotaExceededError(message, retry_after_s=retry_after)
        if status in (401, 403) or reason in ("keyInvalid", "forbidden"):
            raise AuthFailureError(message)
        raise MalformedResponseError(f"unexpected HTTP {status}: {message}")

    def search(self, request: SearchRequest) -> SearchPage:
        """One page of search results joined with per-video durations."""
        params = {
            "part": "snippet",
            "q": request.query,
            "type": "video",
            "maxResults": request.max_results,
        }
        if request.page_token:
            params["pageToken"] = request.page_token
        payload = self._get(SEARCH_URL, params)

        try:
            raw_items = payload["items"]
            next_token = payload.get("nextPageToken")
            snippets = []
            for item in raw_items:
                snippets.append(
                    (
                        item["id"]["videoId"],
                        item["snippet"]["title"],
                        item["snippet"]["publishedAt"],
                        item["snippet"]["channelId"],
                    )
                )
        except (KeyError, TypeError) as err:
            raise MalformedResponseError(f"search response missing field: {err}") from err

        if not snippets:
            return SearchPage(items=(), next_page_token=None)

        durations = self._fetch_durations([vid for vid, *_ in snippets])
        metas = tuple(
            RawVideoMeta(
                platform_video_id=vid,
                title=title,
                duration_s=durations.get(vid, 0.0),
                published_at=published,
                channel_ref=channel,
            )
            for vid, title, published, channel in snippets
        )
        return SearchPage(items=metas, next_page_token=next_token)

    def _fetch_durations(self, video_ids: list[str]) -> dict[str, float]:
        payload = self._get(
            VIDEOS_URL, {"part": "contentDetails", "id": ",".join(video_ids)}
        )
        try:
            return {
                item["id"]: parse_iso8601_duration(item["contentDetails"]["duration"])
                for item in payload["items"]
            }
        except (KeyError, TypeError) as err:
            raise MalformedResponseError(f"videos response missing field: {err}") from err

    def iter_search(self, request: SearchRequest) -> Iterator[RawVideoMeta]:
        """All result pages for a query, one item at a time."""
        token = request.page_token
        while True:
            page = self.search(
                SearchRequest(request.query, request.max_results, token)
            )
            yield from page.items
            token = page.next_page_token
            if token is None:
                return


def download_video(
    platform_video_id: str,
    command_template: str,
    dest: str | Path,
    runner: Callable = subprocess.run,
) -> Path:
    """Fetch video content via a user-supplied external command.

    ``command_template`` is formatted with ``{video_id}`` and ``{dest}``;
    the resulting file must exist and be non-empty.  Download mechanics are
    deliberately out of this package's hands.
    """
    dest = Path(dest)
    cmd = command_template.format(video_id=platform_video_id, dest=str(dest))
    logger.info("fetching %s", platform_video_id)
    result = runner(cmd, shell=True, capture_output=True)
    if result.returncode != 0:
        stderr = getattr(result, "stderr", b"") or b""
        raise VideoFetchError(
            f"fetch command exited {result.returncode}: {stderr.decode(errors='replace')[:500]}"
        )
    if not dest.exists() or dest.stat().st_size == 0:
        raise VideoFetchError(f"fetch produced no usable file at {dest}")
    return dest
