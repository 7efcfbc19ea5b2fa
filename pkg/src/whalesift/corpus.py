"""Persistent labeled dataset: manifest, labels, occurrence intervals, frame cache.

The manifest is newline-delimited JSON (one header line with the schema
version, then one video per line), which keeps it appendable, diff-friendly,
and streamable.  Writers must hold the manifest file lock; see
:func:`manifest_lock`.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path

import numpy as np
from filelock import FileLock

from .acquisition import AnonymizedRecord
from .errors import WhalesiftError

SCHEMA_VERSION = 1

# Interval length rules, in seconds.
RELEVANT_MIN_S = 10.0
RELEVANT_MAX_S = 20.0
IRRELEVANT_LEN_S = 15.0


class UnknownVideoError(WhalesiftError):
    """Referenced local id is not in the manifest."""


class DuplicateVideoError(WhalesiftError):
    """A local id occurs twice."""


class SchemaVersionError(WhalesiftError):
    """Manifest file was written by an incompatible schema."""


class CorpusIOError(WhalesiftError):
    """Manifest file could not be read or written."""


class Label(IntEnum):
    """Class indices are fixed system-wide: 0 irrelevant, 1 relevant."""

    IRRELEVANT = 0
    RELEVANT = 1


@dataclass(frozen=True)
class Interval:
    """A time span inside a video, in seconds.

    ``flagged_short`` marks irrelevant videos shorter than the standard
    15 s excerpt, which are kept whole rather than rejected.
    """

    start_s: float
    end_s: float
    flagged_short: bool = False

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValueError("start_s must be >= 0")
        if self.end_s <= self.start_s:
            raise ValueError("end_s must be > start_s")

    @property
    def length_s(self) -> float:
        return self.end_s - self.start_s

    def to_dict(self) -> dict:
        d = {"start_s": self.start_s, "end_s": self.end_s}
        if self.flagged_short:
            d["flagged_short"] = True
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Interval":
        return cls(
            start_s=float(d["start_s"]),
            end_s=float(d["end_s"]),
            flagged_short=bool(d.get("flagged_short", False)),
        )


def interval_violation(label: Label, interval: Interval) -> str | None:
    """Check a stored interval against the per-class length rules.

    Returns a human-readable violation, or None when the interval is valid.
    """
    length = interval.length_s
    if label is Label.RELEVANT:
        if length < RELEVANT_MIN_S:
            return f"relevant interval below {RELEVANT_MIN_S:g} s (got {length:g})"
        if length > RELEVANT_MAX_S:
            return f"relevant interval above {RELEVANT_MAX_S:g} s (got {length:g})"
        return None
    if interval.flagged_short:
        if interval.start_s != 0.0:
            return "short irrelevant interval must start at 0"
        if length >= IRRELEVANT_LEN_S:
            return "interval flagged short but is not shorter than 15 s"
        return None
    if abs(length - IRRELEVANT_LEN_S) > 1e-9:
        return f"irrelevant interval must be exactly {IRRELEVANT_LEN_S:g} s (got {length:g})"
    return None


def assign_irrelevant_interval(duration_s: float, seed: int) -> Interval:
    """Pick the machine-assigned 15 s excerpt of an irrelevant video.

    Start is uniform over [0, duration-15].  Videos shorter than 15 s are
    used whole and flagged rather than rejected.
    """
    if duration_s <= 0:
        raise ValueError("duration_s must be positive")
    if duration_s < IRRELEVANT_LEN_S:
        return Interval(0.0, duration_s, flagged_short=True)
    if duration_s == IRRELEVANT_LEN_S:
        return Interval(0.0, IRRELEVANT_LEN_S)
    rng = np.random.default_rng(seed)
    start = float(rng.uniform(0.0, duration_s - IRRELEVANT_LEN_S))
    return Interval(start, start + IRRELEVANT_LEN_S)


@dataclass(frozen=True)
class LabeledVideo:
    """One corpus entry; ``version`` increases on every successful mutation."""

    record: AnonymizedRecord
    label: Label | None = None
    interval: Interval | None = None
    frame_count: int | None = None
    version: int = 0

    @property
    def local_id(self) -> str:
        return self.record.local_id

    def to_dict(self) -> dict:
        return {
            "record": self.record.to_dict(),
            "label": None if self.label is None else int(self.label),
            "interval": None if self.interval is None else self.interval.to_dict(),
            "frame_count": self.frame_count,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledVideo":
        return cls(
            record=AnonymizedRecord.from_dict(d["record"]),
            label=None if d.get("label") is None else Label(d["label"]),
            interval=None
            if d.get("interval") is None
            else Interval.from_dict(d["interval"]),
            frame_count=d.get("frame_count"),
            version=int(d.get("version", 0)),
        )


@dataclass
class ClassCounts:
    relevant: int
    irrelevant: int
    unlabeled: int

    @property
    def total(self) -> int:
        return self.relevant + self.irrelevant + self.unlabeled


class Manifest:
    """Ordered collection of labeled videos with unique local ids."""

    def __init__(self, schema_version: int = SCHEMA_VERSION) -> None:
        self.schema_version = schema_version
        self._videos: dict[str, LabeledVideo] = {}

    # -- collection access ------------------------------------------------

    def __len__(self) -> int:
        return len(self._videos)

    def __contains__(self, local_id: str) -> bool:
        return local_id in self._videos

    def __iter__(self):
        return iter(self._videos.values())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return (
            self.schema_version == other.schema_version
            and self._videos == other._videos
        )

    def get(self, local_id: str) -> LabeledVideo:
        try:
            return self._videos[local_id]
        except KeyError:
            raise UnknownVideoError(f"unknown video {local_id!r}") from None

    def add(self, video: LabeledVideo) -> None:
        if video.local_id in self._videos:
            raise DuplicateVideoError(f"duplicate local id {video.local_id!r}")
        self._videos[video.local_id] = video

    # -- mutations (each bumps the per-video version) ----------------------

    def _put(self, video: LabeledVideo, **changes) -> LabeledVideo:
        updated = replace(video, version=video.version + 1, **changes)
        self._videos[updated.local_id] = updated
        return updated

    def upsert_label(self, local_id: str, label: Label) -> LabeledVideo:
        """Set a video's class label.

        Changing the label to a different class clears any stored interval:
        a relevant video's human-marked interval is meaningless once the
        video is irrelevant, and vice versa for the machine 15 s excerpt.
        """
        video = self.get(local_id)
        changes: dict = {"label": label}
        if video.label is not None and video.label != label:
            changes["interval"] = None
        return self._put(video, **changes)

    def set_interval(self, local_id: str, interval: Interval) -> LabeledVideo:
        video = self.get(local_id)
        return self._put(video, interval=interval)

    def set_frame_count(self, local_id: str, frame_count: int) -> LabeledVideo:
        if frame_count < 0:
            raise ValueError("frame_count must be >= 0")
        video = self.get(local_id)
        return self._put(video, frame_count=frame_count)

    # -- queries -----------------------------------------------------------

    def class_counts(self) -> ClassCounts:
        relevant = sum(1 for v in self if v.label is Label.RELEVANT)
        irrelevant = sum(1 for v in self if v.label is Label.IRRELEVANT)
        return ClassCounts(
            relevant=relevant,
            irrelevant=irrelevant,
            unlabeled=len(self) - relevant - irrelevant,
        )

    def labels(self) -> dict[str, Label]:
        """local_id -> label over the labeled subset."""
        return {v.local_id: v.label for v in self if v.label is not None}

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path, durable: bool = False) -> None:
        """Atomic write (temp file + rename); ``durable`` adds an fsync."""
        path = Path(path)
        lines = [json.dumps({"schema_version": self.schema_version})]
        lines += [
            json.dumps(v.to_dict(), separators=(",", ":")) for v in self
        ]
        data = "\n".join(lines) + "\n"
        try:
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(data)
                    if durable:
                        fh.flush()
                        os.fsync(fh.fileno())
                os.replace(tmp, path)
            except BaseException:
                os.unlink(tmp)
                raise
        except OSError as err:
            raise CorpusIOError(f"cannot write manifest {path}: {err}") from err

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            raise CorpusIOError(f"cannot read manifest {path}: {err}") from err
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise CorpusIOError(f"manifest {path} is empty")
        try:
            header = json.loads(lines[0])
            version = header["schema_version"]
        except (json.JSONDecodeError, KeyError, TypeError) as err:
            raise CorpusIOError(f"manifest {path} has no valid header") from err
        if version != SCHEMA_VERSION:
            raise SchemaVersionError(
                f"manifest schema {version} unsupported (this build reads {SCHEMA_VERSION})"
            )
        manifest = cls(schema_version=version)
        for ln in lines[1:]:
            try:
                video = LabeledVideo.from_dict(json.loads(ln))
            except (json.JSONDecodeError, KeyError, ValueError) as err:
                raise CorpusIOError(f"bad manifest line: {ln[:120]}") from err
            manifest.add(video)
        return manifest


def manifest_lock(path: str | Path) -> FileLock:
    """Exclusive writer lock for a manifest file (single-writer contract)."""
    return FileLock(str(path) + ".lock")


# -- frame cache layout ------------------------------------------------------
#
# frames/<local_id>/NNNNN.jpg     decoded native frames, interval-relative order
# frames/<local_id>/index.json    interval, native count, per-frame timestamps


def frames_dir(cache_root: str | Path, local_id: str) -> Path:
    return Path(cache_root) / local_id


def frame_path(cache_root: str | Path, local_id: str, index: int) -> Path:
    return frames_dir(cache_root, local_id) / f"{index:05d}.jpg"


@dataclass(frozen=True)
class FrameIndex:
    """Sidecar describing one video's cached frames."""

    local_id: str
    interval: Interval
    native_count: int
    timestamps_s: tuple[float, ...]
    extracted_at: str

    def to_dict(self) -> dict:
        return {
            "local_id": self.local_id,
            "interval": self.interval.to_dict(),
            "native_count": self.native_count,
            "timestamps_s": list(self.timestamps_s),
            "extracted_at": self.extracted_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameIndex":
        return cls(
            local_id=d["local_id"],
            interval=Interval.from_dict(d["interval"]),
            native_count=int(d["native_count"]),
            timestamps_s=tuple(float(t) for t in d["timestamps_s"]),
            extracted_at=d["extracted_at"],
        )


def write_frame_index(cache_root: str | Path, index: FrameIndex) -> Path:
    path = frames_dir(cache_root, index.local_id) / "index.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(index.to_dict(), indent=2), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_frame_index(cache_root: str | Path, local_id: str) -> FrameIndex:
    path = frames_dir(cache_root, local_id) / "index.json"
    try:
        return FrameIndex.from_dict(json.loads(path.read_text(encoding="utf-8")))
    except OSError as err:
        raise CorpusIOError(f"no frame index for {local_id}: {err}") from err
