"""Deterministic synthetic corpora: geometry, labels, on-disk shape."""

from __future__ import annotations

import numpy as np
import pytest

from whalesift.backbone import load_features
from whalesift.corpus import Interval, Label, Manifest
from whalesift.synthetic import (
    SYNTHETIC_BACKBONE,
    SyntheticSpec,
    class_means,
    generate,
    local_id,
    synthetic_label,
    write_corpus,
)


def test_labels_alternate_and_split_evenly():
    assert synthetic_label(0) is Label.IRRELEVANT
    assert synthetic_label(1) is Label.RELEVANT
    labels = [synthetic_label(i) for i in range(200)]
    assert labels.count(Label.IRRELEVANT) == 100
    assert labels.count(Label.RELEVANT) == 100
    assert local_id(0) == "syn_0000"
    assert local_id(123) == "syn_0123"


def test_class_means_distance_in_sigma_units():
    spec = SyntheticSpec(feature_dim=8, noise_sigma=0.5, separation_sigmas=2.0)
    lo, hi = class_means(spec)
    np.testing.assert_allclose(lo, -hi, atol=1e-15)
    # Euclidean separation = separation_sigmas * noise_sigma.
    assert np.linalg.norm(hi - lo) == pytest.approx(2.0 * 0.5, abs=1e-12)


def test_generate_is_deterministic_and_shaped():
    spec = SyntheticSpec(count=10, frame_count=7, feature_dim=4, seed=3)
    a = generate(spec)
    b = generate(spec)
    assert len(a) == 10
    for (seq_a, label_a), (seq_b, label_b) in zip(a, b):
        assert label_a is label_b
        assert seq_a.local_id == seq_b.local_id
        assert seq_a.backbone_name == SYNTHETIC_BACKBONE
        assert seq_a.features.shape == (7, 4)
        assert seq_a.features.dtype == np.float32
        np.testing.assert_array_equal(seq_a.features, seq_b.features)
    c = generate(SyntheticSpec(count=10, frame_count=7, feature_dim=4, seed=4))
    assert not np.array_equal(a[0][0].features, c[0][0].features)


def test_generate_sample_means_land_near_class_means():
    # With 31 frames x 100 sequences per class the empirical class mean
    # should sit within a few hundredths of sigma of the configured mean.
    spec = SyntheticSpec(count=200, frame_count=31, feature_dim=8, seed=0)
    lo, hi = class_means(spec)
    data = generate(spec)
    per_class = {Label.IRRELEVANT: [], Label.RELEVANT: []}
    for seq, label in data:
        per_class[label].append(seq.features.mean(axis=0))
    got_lo = np.mean(per_class[Label.IRRELEVANT], axis=0)
    got_hi = np.mean(per_class[Label.RELEVANT], axis=0)
    assert np.max(np.abs(got_lo - lo)) < 0.1
    assert np.max(np.abs(got_hi - hi)) < 0.1
    # And the two clouds are on opposite sides along the mean direction.
    direction = (hi - lo) / np.linalg.norm(hi - lo)
    assert (got_hi - got_lo) @ direction > 0.5


def test_spec_validation():
    with pytest.raises(ValueError, match="count"):
        SyntheticSpec(count=1)
    with pytest.raises(ValueError, match="frame_count"):
        SyntheticSpec(frame_count=0)
    with pytest.raises(ValueError, match="feature_dim"):
        SyntheticSpec(feature_dim=0)
    with pytest.raises(ValueError, match="noise_sigma"):
        SyntheticSpec(noise_sigma=0.0)
    with pytest.raises(ValueError, match="separation_sigmas"):
        SyntheticSpec(separation_sigmas=-1.0)


def test_write_corpus_materializes_manifest_and_features(tmp_path):
    spec = SyntheticSpec(count=6, frame_count=5, feature_dim=3, seed=1)
    manifest_path, cache_root = write_corpus(spec, tmp_path / "corpus")
    manifest = Manifest.load(manifest_path)
    counts = manifest.class_counts()
    assert (counts.irrelevant, counts.relevant, counts.unlabeled) == (3, 3, 0)
    for i in range(6):
        video = manifest.get(local_id(i))
        assert video.label is synthetic_label(i)
        assert video.record.query == SYNTHETIC_BACKBONE
        assert video.frame_count == 5
        if video.label is Label.RELEVANT:
            assert video.interval == Interval(5.0, 17.0)
        else:
            # Machine-assigned 15 s excerpt inside the 30 s duration.
            assert video.interval.end_s - video.interval.start_s == pytest.approx(15.0)
            assert 0.0 <= video.interval.start_s <= 15.0
        seq = load_features(cache_root, SYNTHETIC_BACKBONE, local_id(i))
        assert seq.features.shape == (5, 3)


def test_write_corpus_rewrites_byte_identically(tmp_path):
    spec = SyntheticSpec(count=4, frame_count=3, feature_dim=2, seed=9)
    manifest_path, cache_root = write_corpus(spec, tmp_path / "corpus")
    snapshot = {
        p: p.read_bytes() for p in sorted((tmp_path / "corpus").rglob("*")) if p.is_file()
    }
    write_corpus(spec, tmp_path / "corpus")
    for path, blob in snapshot.items():
        assert path.read_bytes() == blob, path


def test_write_corpus_features_match_generate(tmp_path):
    spec = SyntheticSpec(count=4, frame_count=3, feature_dim=2, seed=5)
    _, cache_root = write_corpus(spec, tmp_path / "corpus")
    for seq, _ in generate(spec):
        on_disk = load_features(cache_root, SYNTHETIC_BACKBONE, seq.local_id)
        np.testing.assert_array_equal(on_disk.features, seq.features)
