"""
Training the sequence classifier and scoring new videos
=======================================================

The classifier is two stacked recurrent (GRU) layers over the per-frame
feature sequence, a small dense layer, and a two-way softmax: relevant
vs irrelevant.  Training is plain seeded gradient descent with adaptive
moments — the same seed always yields the same trained network, down to
the last bit.

A synthetic feature corpus stands in for real embeddings so this runs in
seconds with no video data.

Run:  python3 demos/04_train_and_predict.py
"""

import tempfile
from pathlib import Path

import numpy as np

from whalesift.seqclassifier import TrainConfig, load_checkpoint, predict, save_checkpoint, train
from whalesift.synthetic import SyntheticSpec, generate

# ---------------------------------------------------------------------------
# 60 labeled sequences (T=16 frames, 8 features per frame), class means two
# noise sigmas apart: hard enough that the untrained network is at chance.
spec = SyntheticSpec(count=60, frame_count=16, feature_dim=8, seed=3)
data = generate(spec)
train_set = [(seq.features, label) for seq, label in data[:48]]
held_out = data[48:]
print(f"{len(train_set)} training sequences, {len(held_out)} held out")

# ---------------------------------------------------------------------------
# Train. The history is the mean loss per epoch; watching it fall is the
# quickest sanity check that learning is happening.
config = TrainConfig(epochs=15, batch_size=8, seed=0)
net, history = train(train_set, config, hidden_sizes=(16, 8, 8))
print(f"loss: first epoch {history[0]:.4f} -> last epoch {history[-1]:.4f}")

# ---------------------------------------------------------------------------
# Score the held-out sequences. Each prediction carries the class, both
# softmax probabilities, and the confidence (probability of the chosen class).
hits = 0
for seq, truth in held_out:
    p = predict(net, seq.features)
    hits += p.label is truth
    marker = "ok " if p.label is truth else "MISS"
    print(f"  {seq.local_id}  {p.label.name.lower():10s} "
          f"conf {p.confidence:.3f}  truth {truth.name.lower():10s} {marker}")
print(f"held-out accuracy: {hits}/{len(held_out)}")

# ---------------------------------------------------------------------------
# Checkpoint round trip: weights persist as float32, so reloaded predictions
# match to float32 resolution. The header records the architecture, so
# loading needs no other context.
with tempfile.TemporaryDirectory() as scratch:
    path = Path(scratch) / "model.ckpt"
    save_checkpoint(net, path, seed=config.seed)
    reloaded, header = load_checkpoint(path)
    print(f"\ncheckpoint: {path.stat().st_size} bytes, "
          f"hidden sizes {header['hidden_sizes']}, d_in {header['d_in']}")

    sample = held_out[0][0].features
    before = np.array(predict(net, sample).probs)
    after = np.array(predict(reloaded, sample).probs)
    print(f"prediction drift after reload: {np.abs(before - after).max():.2e}")
