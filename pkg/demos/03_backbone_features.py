"""
Turning frames into per-frame feature vectors
=============================================

A frozen convolutional backbone maps each standardized frame to one
embedding vector, so a whole video becomes a (T, D) float32 matrix.  Two
backbones are available behind the same interface:

* an ONNX model file (``BackboneSpec(model_path=...)``) for real
  pretrained networks, and
* a tiny seeded built-in CNN that needs no model file — used here and in
  tests, where only the plumbing matters, not visual quality.

Run:  python3 demos/03_backbone_features.py
"""

import tempfile
from pathlib import Path

import numpy as np

from whalesift.backbone import (
    BackboneSpec,
    extract,
    has_features,
    load_backbone,
    load_features,
    save_features,
)
from whalesift.framepipe import PreprocessSpec, SamplePolicy, build_frame_sequence

# ---------------------------------------------------------------------------
# Fake a decoded clip: 40 native frames of a bright square drifting across
# a dark background.  Real frames arrive from `whalesift prepare-frames`.
rng = np.random.default_rng(7)
raw_frames = []
for t in range(40):
    frame = rng.integers(0, 40, size=(48, 48, 3), dtype=np.uint8)
    x = 4 + t  # the square moves one pixel per frame
    frame[20:28, x : x + 8, :] = 230
    raw_frames.append(frame)

# Standardize to 31 frames and preprocess to the backbone's input size.
sequence = build_frame_sequence(
    "vid_0042",
    raw_frames,
    policy=SamplePolicy(target_count=31),
    spec=PreprocessSpec(side_px=32),
)
print(f"standardized tensor: {sequence.frames.shape} "
      f"(native count was {sequence.native_count})")

# ---------------------------------------------------------------------------
# Load the built-in backbone and embed the whole sequence at once.
backbone = load_backbone(BackboneSpec(input_side_px=32))
features = extract(backbone, sequence)
print(f"backbone {features.backbone_name!r} produced {features.features.shape} "
      f"features ({features.dim} per frame)")
print("first frame embedding:", np.round(features.features[0], 4))

# Same input, same seed -> identical features. The whole pipeline re-runs
# byte-for-byte, which is what makes cached features trustworthy.
again = extract(load_backbone(BackboneSpec(input_side_px=32)), sequence)
assert np.array_equal(features.features, again.features)
print("re-extraction is bit-identical: True")

# ---------------------------------------------------------------------------
# Cache round trip: features persist as a raw float32 block plus a small
# JSON sidecar, keyed by backbone name and video id.
with tempfile.TemporaryDirectory() as scratch:
    cache = Path(scratch) / "features"
    save_features(cache, features)
    print(f"\ncached under {cache.name}/: "
          f"{sorted(p.name for p in (cache / features.backbone_name).iterdir())}")
    assert has_features(cache, features.backbone_name, "vid_0042")
    loaded = load_features(cache, features.backbone_name, "vid_0042")
    assert np.array_equal(loaded.features, features.features)
    print("cache round trip exact: True")
