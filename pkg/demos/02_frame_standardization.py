"""
Standardizing every video to the same frame count
=================================================

The sequence classifier wants a fixed-length input, but decoded videos
yield anywhere from a handful to thousands of frames.  Two rules cover
both directions:

* too few frames  -> replicate the middle frame until the target is hit;
* too many frames -> keep an evenly spaced selection, endpoints included.

This script works on integer "frames" so the selection logic is visible,
then runs one real image through the resize/normalize step.

Run:  python3 demos/02_frame_standardization.py
"""

import numpy as np

from whalesift.framepipe import (
    PixelScale,
    PreprocessSpec,
    SamplePolicy,
    resize_normalize,
    standardize,
    uniform_sample_indices,
)

policy = SamplePolicy(target_count=31)

# ---------------------------------------------------------------------------
# A short clip: 7 native frames must become 31.  The middle frame (index 3)
# is replicated in place; original ordering survives.
short = list(range(7))
grown = standardize(short, policy)
print(f"7 -> {len(grown)} frames:")
print(" ", grown)

# ---------------------------------------------------------------------------
# A long clip: 120 native frames must shrink to 31.  The picks are evenly
# spaced and always include the first and last frame.
long = list(range(120))
picked = standardize(long, policy)
print(f"\n120 -> {len(picked)} frames (first/last kept: "
      f"{picked[0] == 0 and picked[-1] == 119}):")
print(" ", picked)

# The same index rule, directly: round(i * (n-1) / (target-1)).
print("\nindex rule for n=33 (barely above target):")
print(" ", uniform_sample_indices(33, 31))

# ---------------------------------------------------------------------------
# Exactly at the target nothing changes.
assert standardize(list(range(31)), policy) == list(range(31))
print("\n31 -> 31 is the identity")

# ---------------------------------------------------------------------------
# Pixel preprocessing: any decoded frame becomes a square float32 image in
# the backbone's input range.  Default is [-1, 1]; [0, 1] is available for
# models trained that way.
frame = np.zeros((48, 64, 3), dtype=np.uint8)
frame[:, :, 0] = np.linspace(0, 255, 64, dtype=np.uint8)  # red gradient

for scale in (PixelScale.SYMMETRIC_UNIT, PixelScale.UNIT):
    spec = PreprocessSpec(side_px=32, pixel_scale=scale)
    out = resize_normalize(frame, spec)
    print(f"\n{scale.value}: shape {out.shape}, dtype {out.dtype}, "
          f"range [{out.min():.3f}, {out.max():.3f}]")
