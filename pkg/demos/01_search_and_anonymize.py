"""
From platform search results to a shareable manifest
=====================================================

A search against the video platform returns metadata we must not keep:
titles, channel handles, platform video ids.  This walkthrough takes a
batch of raw results (faked here, so no network or API key is needed)
and shows how the anonymization step splits them into a manifest that is
safe to publish and a private id map that never leaves the machine.

Run:  python3 demos/01_search_and_anonymize.py
"""

import tempfile
from pathlib import Path

from whalesift.acquisition import Anonymizer, PrivateMap, RawVideoMeta
from whalesift.corpus import LabeledVideo, Manifest

# ---------------------------------------------------------------------------
# Pretend the platform client just handed us a page of search results.
# In the real pipeline these come from `whalesift search` with an API key.
raw_results = [
    RawVideoMeta(
        platform_video_id=f"x{n}Qq7wLbFo{n}",
        title=f"Whale watching trip day {n} — unbelievable breach!!",
        duration_s=45.0 + 13 * n,
        published_at=f"2023-0{n + 1}-11T09:00:00Z",
        channel_ref=f"channel/UCboat-tours-{n}",
    )
    for n in range(4)
]
print(f"got {len(raw_results)} raw results; first title: {raw_results[0].title!r}")

# ---------------------------------------------------------------------------
# Anonymize: each raw record becomes (shareable record, private map entry).
# The counter allocator guarantees local ids are unique.
anonymizer = Anonymizer()
manifest = Manifest()
private_map = PrivateMap()

for meta in raw_results:
    record, map_entry = anonymizer.anonymize(
        meta, query="humpback whale", now="2024-05-01T12:00:00Z"
    )
    manifest.add(LabeledVideo(record=record))
    private_map.add(map_entry)
    print(f"  {meta.platform_video_id}  ->  {record.local_id}")

# ---------------------------------------------------------------------------
# Persist both files and prove the separation: the manifest text contains
# no platform identifiers, titles, or channel references.
with tempfile.TemporaryDirectory() as scratch:
    corpus = Path(scratch)
    manifest_path = corpus / "manifest.ndjson"
    manifest.save(manifest_path)
    private_map.save(corpus / "private_map.tsv")

    text = manifest_path.read_text()
    print("\nmanifest lines:")
    for line in text.splitlines():
        print(" ", line)

    leaked = [
        needle
        for meta in raw_results
        for needle in (meta.platform_video_id, meta.title, meta.channel_ref)
        if needle in text
    ]
    print(f"\nplatform strings found in manifest: {len(leaked)} (want 0)")
    assert not leaked

    print("private map (stays local, one row per video):")
    print(" ", (corpus / "private_map.tsv").read_text().splitlines()[1])
