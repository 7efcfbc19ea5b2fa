"""Single-seed randomness expansion.

Every stage of a run (training, fold assignment, synthetic data, per-video
machine intervals) derives its own RNG seed from one top-level seed and a
fixed stage label, so quoting that one number reproduces the whole run.
"""

from __future__ import annotations

import hashlib


def stage_seed(seed: int, label: str) -> int:
    """Derived seed for one named stage; stable across processes and runs."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def interval_seed(seed: int, local_id: str) -> int:
    """Seed for a video's machine-assigned 15 s excerpt."""
    return stage_seed(seed, f"interval:{local_id}")
