"""Interval decoding and frame standardization.

Turns a video interval into exactly T standardized frames: decode every frame
the external decoder yields inside the interval, uniform-sample down or
middle-pad up to T, stretch-resize to the backbone's square input, and map
8-bit pixels into the backbone's float range.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image

from .errors import WhalesiftError

logger = logging.getLogger(__name__)

# All frames inside the interval, numbered in presentation order.
DEFAULT_DECODER_TEMPLATE = (
    "ffmpeg -loglevel error -ss {start_s} -to {end_s} -i {video} {outdir}/%05d.jpg"
)


class UndecodableVideoError(WhalesiftError):
    """Video file missing or yielded no frames."""


class DecoderError(WhalesiftError):
    """External decoder command failed."""


class PixelScale(str, Enum):
    """How 8-bit pixel values map into the backbone's float input range."""

    SYMMETRIC_UNIT = "symmetric_unit"  # [0, 255] -> [-1, 1]
    UNIT = "unit"  # [0, 255] -> [0, 1]


@dataclass(frozen=True)
class SamplePolicy:
    """How many frames every video is standardized to."""

    target_count: int = 31

    def __post_init__(self) -> None:
        if self.target_count < 1:
            raise ValueError("target_count must be >= 1")


@dataclass(frozen=True)
class PreprocessSpec:
    side_px: int = 224
    pixel_scale: PixelScale = PixelScale.SYMMETRIC_UNIT

    def __post_init__(self) -> None:
        if self.side_px <= 0:
            raise ValueError("side_px must be positive")


@dataclass(frozen=True)
class FrameSequence:
    """Exactly T standardized frames for one video, as (T, S, S, 3) float32."""

    local_id: str
    frames: np.ndarray
    native_count: int

    def __post_init__(self) -> None:
        if self.frames.ndim != 4 or self.frames.shape[3] != 3:
            raise ValueError(f"frames must be (T, S, S, 3), got {self.frames.shape}")
        if self.frames.dtype != np.float32:
            raise ValueError("frames must be float32")


def enumerate_frames(
    video_path: str | Path,
    start_s: float,
    end_s: float,
    decoder_template: str = DEFAULT_DECODER_TEMPLATE,
    runner: Callable = subprocess.run,
) -> tuple[list[np.ndarray], list[float]]:
    """Decode every frame the decoder yields inside [start_s, end_s].

    Returns (frames, timestamps): uint8 RGB arrays in presentation order plus
    strictly increasing timestamp estimates (frame midpoints of the interval).
    The native count is ``len(frames)``.
    """
    video_path = Path(video_path)
    if end_s <= start_s:
        raise ValueError(f"empty interval [{start_s}, {end_s}]")
    if not video_path.exists():
        raise UndecodableVideoError(f"no such video file: {video_path}")

    with tempfile.TemporaryDirectory(prefix="whalesift_decode_") as outdir:
        cmd = decoder_template.format(
            video=shlex.quote(str(video_path)),
            start_s=start_s,
            end_s=end_s,
            outdir=outdir,
        )
        logger.debug("decode: %s", cmd)
        result = runner(cmd, shell=True, capture_output=True)
        if result.returncode != 0:
            stderr = (getattr(result, "stderr", b"") or b"").decode(errors="replace")
            raise DecoderError(f"decoder exited {result.returncode}: {stderr[:500]}")

        image_paths = sorted(
            p for p in Path(outdir).iterdir() if p.suffix.lower() in (".jpg", ".jpeg", ".png")
        )
        if not image_paths:
            raise UndecodableVideoError(f"decoder produced no frames for {video_path}")
        frames = [load_frame_image(p) for p in image_paths]

    n = len(frames)
    step = (end_s - start_s) / n
    timestamps = [start_s + (i + 0.5) * step for i in range(n)]
    return frames, timestamps


def load_frame_image(path: str | Path) -> np.ndarray:
    """Read an image file as a (H, W, 3) uint8 RGB array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def uniform_sample_indices(n: int, target: int) -> list[int]:
    """Evenly spaced indices round(i*(n-1)/(target-1)), endpoints included."""
    if target < 1:
        raise ValueError("target must be >= 1")
    if n < target:
        raise ValueError(f"cannot sample {target} from {n} frames")
    if target == 1:
        return [0]
    positions = np.arange(target) * (n - 1) / (target - 1)
    return [int(i) for i in np.floor(positions + 0.5).astype(int)]


def uniform_sample(frames: Sequence, target: int) -> list:
    """Pick ``target`` evenly spaced frames, order preserved (needs n >= target)."""
    return [frames[i] for i in uniform_sample_indices(len(frames), target)]


def pad_middle(frames: Sequence, target: int) -> list:
    """Grow a short sequence to ``target`` by replicating the middle frame in place.

    With m = n//2 the output is frames[:m] + (target-n) copies of frames[m]
    + frames[m:], preserving the original ordering.
    """
    n = len(frames)
    if n == 0:
        raise ValueError("cannot pad an empty sequence")
    if not n < target:
        raise ValueError(f"pad_middle needs n < target, got n={n}, target={target}")
    m = n // 2
    return list(frames[:m]) + [frames[m]] * (target - n) + list(frames[m:])


def standardize(frames: Sequence, policy: SamplePolicy = SamplePolicy()) -> list:
    """Return exactly ``policy.target_count`` frames from n >= 1 inputs."""
    n = len(frames)
    if n == 0:
        raise ValueError("empty input: no frames to standardize")
    target = policy.target_count
    if n > target:
        return uniform_sample(frames, target)
    if n < target:
        return pad_middle(frames, target)
    return list(frames)


def resize_normalize(frame: np.ndarray, spec: PreprocessSpec = PreprocessSpec()) -> np.ndarray:
    """Bilinear stretch to (side, side, 3) and map pixel values to float range."""
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) input, got {frame.shape}")
    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise ValueError("zero-dimension input frame")
    if frame.dtype != np.uint8:
        raise ValueError("expected 8-bit pixel values")

    if frame.shape[0] == spec.side_px and frame.shape[1] == spec.side_px:
        resized = frame
    else:
        im = Image.fromarray(frame).resize(
            (spec.side_px, spec.side_px), Image.BILINEAR
        )
        resized = np.asarray(im, dtype=np.uint8)

    out = resized.astype(np.float32)
    if spec.pixel_scale is PixelScale.SYMMETRIC_UNIT:
        return out / np.float32(127.5) - np.float32(1.0)
    return out / np.float32(255.0)


def build_frame_sequence(
    local_id: str,
    raw_frames: Sequence[np.ndarray],
    policy: SamplePolicy = SamplePolicy(),
    spec: PreprocessSpec = PreprocessSpec(),
) -> FrameSequence:
    """Standardize raw decoded frames and stack them into one model-ready tensor."""
    native_count = len(raw_frames)
    chosen = standardize(raw_frames, policy)
    stacked = np.stack([resize_normalize(f, spec) for f in chosen])
    return FrameSequence(
        local_id=local_id, frames=stacked.astype(np.float32), native_count=native_count
    )
