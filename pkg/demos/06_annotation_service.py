"""
The labeling service, end to end over HTTP
==========================================

Human labels enter the corpus through a small HTTP service (started by
`whalesift annotate`).  This walkthrough boots one on an ephemeral port,
drives it exactly as the browser UI would, and shows the two rules the
server enforces:

* optimistic concurrency — every write carries the version it saw, and a
  stale version is rejected with 409 instead of silently overwriting;
* interval hygiene — relevant videos take a human-marked 10–20 s
  interval, irrelevant ones get a machine-assigned 15 s excerpt.

Run:  python3 demos/06_annotation_service.py
"""

import json
import tempfile
import urllib.error
import urllib.request
from pathlib import Path

from whalesift.acquisition import AnonymizedRecord
from whalesift.annotation_service import ServiceConfig, serve
from whalesift.corpus import LabeledVideo, Manifest


def call(url, payload=None):
    """POST json (or GET when payload is None); returns (status, body)."""
    data = json.dumps(payload).encode() if payload is not None else None
    try:
        with urllib.request.urlopen(urllib.request.Request(url, data=data)) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


# ---------------------------------------------------------------------------
# A corpus of three unlabeled videos, fresh from acquisition.
with tempfile.TemporaryDirectory() as scratch:
    corpus = Path(scratch) / "corpus"
    corpus.mkdir()
    manifest = Manifest()
    for n, duration in ((1, 30.0), (2, 75.0), (3, 52.0)):
        manifest.add(
            LabeledVideo(
                record=AnonymizedRecord(
                    local_id=f"vid_{n:04d}",
                    duration_s=duration,
                    retrieved_at="2024-05-01T00:00:00Z",
                    query="humpback whale",
                )
            )
        )
    manifest.save(corpus / "manifest.ndjson")

    # Port 0 asks the OS for any free port; .url reports what we got.
    service = serve(ServiceConfig(corpus_dir=corpus, port=0))
    service.start()
    try:
        print(f"service up at {service.url}")

        # The review queue: unlabeled videos first.
        status, queue = call(f"{service.url}/api/videos?status=unlabeled")
        print(f"\nunlabeled queue: {[v['local_id'] for v in queue['videos']]}")

        # Label vid_0001 relevant at the version we saw (0), then mark the
        # 12-second span where the whale is visible.
        status, out = call(
            f"{service.url}/api/videos/vid_0001/label",
            {"label": "relevant", "version": 0},
        )
        print(f"\nlabel vid_0001 relevant -> {status}, version {out['task']['version']}")

        status, out = call(
            f"{service.url}/api/videos/vid_0001/interval",
            {"start_s": 8.0, "end_s": 20.0, "version": 1},
        )
        print(f"mark 8–20 s interval    -> {status}, interval {out['task']['interval']}")

        # A second annotator still holding version 0 tries to relabel: 409,
        # with the current version so their UI can reload, and nothing changes.
        status, out = call(
            f"{service.url}/api/videos/vid_0001/label",
            {"label": "irrelevant", "version": 0},
        )
        print(f"\nstale write (version 0) -> {status}: {out['error']} "
              f"(current_version {out['current_version']})")

        # Labeling irrelevant needs no human interval: the service assigns a
        # deterministic 15 s excerpt so downstream frame extraction has a span.
        status, out = call(
            f"{service.url}/api/videos/vid_0002/label",
            {"label": "irrelevant", "version": 0},
        )
        iv = out["task"]["interval"]
        print(f"\nlabel vid_0002 irrelevant -> machine excerpt "
              f"[{iv['start_s']:.1f}, {iv['end_s']:.1f}] s")

        # Interval rules are enforced server-side: a 25 s span is too long.
        status, out = call(
            f"{service.url}/api/videos/vid_0001/interval",
            {"start_s": 0.0, "end_s": 25.0, "version": 2},
        )
        print(f"25 s interval rejected  -> {status}: {out['error']}")

        status, progress = call(f"{service.url}/api/progress")
        print(f"\nprogress: {progress}")
    finally:
        service.close()

    # Every acknowledged write was already on disk when the 200 came back.
    final = Manifest.load(corpus / "manifest.ndjson")
    v1 = final.get("vid_0001")
    print(f"\nmanifest after shutdown: vid_0001 label={v1.label.name.lower()}, "
          f"interval=[{v1.interval.start_s}, {v1.interval.end_s}], version={v1.version}")
