"""Deterministic synthetic feature corpora.

Generates labeled feature sequences whose two class means sit a configurable
number of noise standard deviations apart, so a working classifier must
separate them almost perfectly while a broken one cannot fake it.  Also
materializes the corpus on disk (manifest + feature cache) in exactly the
shape the real pipeline produces, which lets the end-to-end commands run
without any video data.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backbone as backbone_mod
from .acquisition import AnonymizedRecord
from .corpus import Interval, Label, LabeledVideo, Manifest, assign_irrelevant_interval

SYNTHETIC_BACKBONE = "synthetic"
_DURATION_S = 30.0
_RETRIEVED_AT = "2000-01-01T00:00:00Z"


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape and difficulty of a generated corpus.

    ``separation_sigmas`` is the Euclidean distance between the two class
    mean vectors, measured in units of the per-dimension noise sigma.
    """

    count: int = 200
    frame_count: int = 31
    feature_dim: int = 8
    noise_sigma: float = 1.0
    separation_sigmas: float = 2.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.count < 2:
            raise ValueError("count must be >= 2")
        if self.frame_count < 1:
            raise ValueError("frame_count must be >= 1")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be positive")
        if self.separation_sigmas < 0:
            raise ValueError("separation_sigmas must be >= 0")


def class_means(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Mean feature vectors (irrelevant, relevant), symmetric about zero."""
    direction = np.ones(spec.feature_dim) / np.sqrt(spec.feature_dim)
    half = 0.5 * spec.separation_sigmas * spec.noise_sigma
    return -half * direction, half * direction


def synthetic_label(index: int) -> Label:
    """Alternating labels: even indices irrelevant, odd relevant."""
    return Label.RELEVANT if index % 2 else Label.IRRELEVANT


def local_id(index: int) -> str:
    return f"syn_{index:04d}"


def generate(spec: SyntheticSpec) -> list[tuple[backbone_mod.FeatureSequence, Label]]:
    """Draw the corpus; the same spec always yields the same sequences."""
    rng = np.random.default_rng(spec.seed)
    means = class_means(spec)
    out = []
    for i in range(spec.count):
        label = synthetic_label(i)
        frames = means[int(label)] + spec.noise_sigma * rng.standard_normal(
            (spec.frame_count, spec.feature_dim)
        )
        seq = backbone_mod.FeatureSequence(
            local_id=local_id(i),
            features=frames.astype(np.float32),
            backbone_name=SYNTHETIC_BACKBONE,
        )
        out.append((seq, label))
    return out


def write_corpus(
    spec: SyntheticSpec, corpus_dir: str | Path, feature_cache: str | Path | None = None
) -> tuple[Path, Path]:
    """Materialize manifest + feature cache; returns (manifest_path, cache_root).

    Every file written is deterministic in ``spec``, so re-running over an
    existing corpus rewrites byte-identical content.
    """
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    cache_root = Path(feature_cache) if feature_cache else corpus_dir / "features"

    manifest = Manifest()
    for i, (seq, label) in enumerate(generate(spec)):
        record = AnonymizedRecord(
            local_id=seq.local_id,
            duration_s=_DURATION_S,
            retrieved_at=_RETRIEVED_AT,
            query=SYNTHETIC_BACKBONE,
        )
        if label is Label.RELEVANT:
            interval = Interval(5.0, 17.0)
        else:
            interval = assign_irrelevant_interval(_DURATION_S, seed=spec.seed * 100003 + i)
        manifest.add(
            LabeledVideo(
                record=record,
                label=label,
                interval=interval,
                frame_count=spec.frame_count,
            )
        )
        backbone_mod.save_features(cache_root, seq)

    manifest_path = corpus_dir / "manifest.ndjson"
    manifest.save(manifest_path)
    return manifest_path, cache_root
