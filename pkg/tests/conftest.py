from __future__ import annotations

import json
import os
import stat
import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

# -- frames ------------------------------------------------------------------


def solid_frame(value: int, side: int = 8) -> np.ndarray:
    """A solid-color (side, side, 3) uint8 frame; value identifies the frame."""
    return np.full((side, side, 3), value % 256, dtype=np.uint8)


def write_jpeg(path: Path, value: int, side: int = 8) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(solid_frame(value, side)).save(path, quality=95)
    return path


@pytest.fixture()
def fake_decoder(tmp_path: Path) -> str:
    """A decoder command template compatible with enumerate_frames.

    The "video file" is JSON: {"fps": N}.  The script emits
    round(fps * (end - start)) solid PNG frames whose gray level encodes the
    frame number, so tests can check ordering and counts exactly.
    """
    script = tmp_path / "fake_decoder.py"
    script.write_text(
        """\
import json, sys
from pathlib import Path
from PIL import Image
import numpy as np

start, end, video, outdir = float(sys.argv[1]), float(sys.argv[2]), sys.argv[3], sys.argv[4]
meta = json.loads(Path(video).read_text())
count = max(0, round(meta["fps"] * (end - start)))
for n in range(count):
    arr = np.full((8, 8, 3), n % 256, dtype=np.uint8)
    Image.fromarray(arr).save(Path(outdir) / f"{n:05d}.png")
""",
        encoding="utf-8",
    )
    return f"{sys.executable} {script} {{start_s}} {{end_s}} {{video}} {{outdir}}"


@pytest.fixture()
def fake_video(tmp_path: Path):
    """Factory for fake video files understood by the fake decoder."""

    def make(name: str = "clip.mp4", fps: float = 2.0) -> Path:
        path = tmp_path / name
        path.write_text(json.dumps({"fps": fps}), encoding="utf-8")
        return path

    return make


# -- platform API ------------------------------------------------------------


def search_page_body(ids: list[str], next_token: str | None = None) -> bytes:
    payload = {
        "items": [
            {
                "id": {"kind": "youtube#video", "videoId": vid},
                "snippet": {
                    "title": f"clip {vid}",
                    "publishedAt": "2024-05-01T00:00:00Z",
                    "channelId": f"chan-{vid}",
                },
            }
            for vid in ids
        ],
    }
    if next_token:
        payload["nextPageToken"] = next_token
    return json.dumps(payload).encode()


def videos_body(durations: dict[str, str]) -> bytes:
    payload = {
        "items": [
            {"id": vid, "contentDetails": {"duration": iso}}
            for vid, iso in durations.items()
        ]
    }
    return json.dumps(payload).encode()


QUOTA_BODY = json.dumps(
    {"error": {"code": 403, "errors": [{"reason": "quotaExceeded"}], "message": "quota"}}
).encode()

AUTH_BODY = json.dumps(
    {"error": {"code": 400, "errors": [{"reason": "keyInvalid"}], "message": "bad key"}}
).encode()


class ScriptedTransport:
    """Transport double: pops canned (status, headers, body) responses in order."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.urls: list[str] = []

    def __call__(self, url: str):
        self.urls.append(url)
        if not self.responses:
            raise AssertionError(f"unexpected request: {url}")
        return self.responses.pop(0)


# -- misc ---------------------------------------------------------------------


@pytest.fixture()
def no_api_key(monkeypatch):
    monkeypatch.delenv("WHALESIFT_API_KEY", raising=False)
