from __future__ import annotations

import itertools

import pytest

from whalesift.acquisition import (
    Anonymizer,
    AuthFailureError,
    DuplicateCounterError,
    MalformedResponseError,
    PrivateMap,
    PrivateMapEntry,
    QuotaExceededError,
    RawVideoMeta,
    SearchRequest,
    TokenBucket,
    YouTubeClient,
    anonymize,
    format_local_id,
    parse_iso8601_duration,
)

from conftest import AUTH_BODY, QUOTA_BODY, ScriptedTransport, search_page_body, videos_body


def meta(vid: str = "dQw4w9WgXcQ", duration: float = 212.0) -> RawVideoMeta:
    return RawVideoMeta(
        platform_video_id=vid,
        title="a title that must never leak",
        duration_s=duration,
        published_at="2024-05-01T00:00:00Z",
        channel_ref="some-channel",
    )


# -- anonymization -------------------------------------------------------------


def test_local_ids_are_sequential_and_zero_padded():
    assert format_local_id(1) == "vid_0001"
    assert format_local_id(407) == "vid_0407"
    assert format_local_id(12345) == "vid_12345"


def test_anonymize_keeps_only_neutral_fields():
    record, entry = anonymize(meta(), counter=7, query="humpback whale", now="2026-01-01T00:00:00Z")
    assert record.local_id == "vid_0007"
    assert record.duration_s == 212.0
    assert record.query == "humpback whale"
    assert entry.local_id == "vid_0007"
    assert entry.platform_video_id == "dQw4w9WgXcQ"
    # Nothing platform-identifying may survive on the shareable record.
    public = vars(record)
    assert "dQw4w9WgXcQ" not in repr(public)
    assert "title" not in public and "channel_ref" not in public


def test_anonymizer_rejects_reused_counters():
    anon = Anonymizer(start=1)
    anon.anonymize(meta("a"), query="q", now="t")
    anon.anonymize(meta("b"), query="q", now="t")
    with pytest.raises(DuplicateCounterError):
        anon.anonymize(meta("c"), query="q", now="t", counter=2)
    record, _ = anon.anonymize(meta("c"), query="q", now="t")
    assert record.local_id == "vid_0003"


def test_private_map_round_trip(tmp_path):
    pm = PrivateMap()
    pm.add(PrivateMapEntry("vid_0001", "abc"))
    pm.add(PrivateMapEntry("vid_0002", "def"))
    with pytest.raises(DuplicateCounterError):
        pm.add(PrivateMapEntry("vid_0001", "xyz"))
    path = tmp_path / "map.tsv"
    pm.save(path)
    loaded = PrivateMap.load(path)
    assert loaded.platform_id("vid_0002") == "def"
    assert loaded.platform_ids() == {"abc", "def"}
    assert len(loaded) == 2


# -- rate limiting ---------------------------------------------------------------


def test_token_bucket_spaces_acquisitions():
    now = [0.0]
    sleeps = []

    def clock():
        return now[0]

    def sleep(dt):
        sleeps.append(dt)
        now[0] += dt

    bucket = TokenBucket(rate_per_s=2.0, clock=clock, sleep=sleep)
    for _ in range(5):
        bucket.acquire()
    # First is free (full bucket); the rest wait 0.5 s each at 2/s.
    assert sum(sleeps) == pytest.approx(2.0)
    assert now[0] == pytest.approx(2.0)


def test_token_bucket_rejects_bad_rate():
    with pytest.raises(ValueError):
        TokenBucket(rate_per_s=0.0)


# -- duration parsing -------------------------------------------------------------


@pytest.mark.parametrize(
    "text,seconds",
    [
        ("PT15S", 15.0),
        ("PT3M32S", 212.0),
        ("PT1H2M3S", 3723.0),
        ("P1DT1S", 86401.0),
        ("PT4M", 240.0),
        ("P0D", 0.0),
    ],
)
def test_parse_iso8601_duration(text, seconds):
    assert parse_iso8601_duration(text) == seconds


def test_parse_iso8601_duration_rejects_garbage():
    with pytest.raises(MalformedResponseError):
        parse_iso8601_duration("3 minutes")


# -- search client ----------------------------------------------------------------


def client_with(transport) -> YouTubeClient:
    return YouTubeClient(
        api_key="k", requests_per_second=1000.0, transport=transport, sleep=lambda s: None
    )


def test_search_joins_snippets_with_durations():
    transport = ScriptedTransport(
        [
            (200, {}, search_page_body(["aaa", "bbb"])),
            (200, {}, videos_body({"aaa": "PT20S", "bbb": "PT3M"})),
        ]
    )
    page = client_with(transport).search(SearchRequest(query="humpback whale"))
    assert [m.platform_video_id for m in page.items] == ["aaa", "bbb"]
    assert [m.duration_s for m in page.items] == [20.0, 180.0]
    assert page.next_page_token is None
    assert "search" in transport.urls[0] and "videos" in transport.urls[1]
    assert "key=k" in transport.urls[0]


def test_iter_search_follows_page_tokens():
    transport = ScriptedTransport(
        [
            (200, {}, search_page_body(["a"], next_token="T2")),
            (200, {}, videos_body({"a": "PT10S"})),
            (200, {}, search_page_body(["b"])),
            (200, {}, videos_body({"b": "PT11S"})),
        ]
    )
    items = list(client_with(transport).iter_search(SearchRequest(query="q")))
    assert [m.platform_video_id for m in items] == ["a", "b"]
    assert "pageToken=T2" in transport.urls[2]


def test_quota_error_carries_retry_after():
    transport = ScriptedTransport([(403, {"Retry-After": "30"}, QUOTA_BODY)])
    with pytest.raises(QuotaExceededError) as err:
        client_with(transport).search(SearchRequest(query="q"))
    assert err.value.retry_after_s == 30.0


def test_auth_failure_is_distinct_from_quota():
    transport = ScriptedTransport([(400, {}, AUTH_BODY)])
    with pytest.raises(AuthFailureError):
        client_with(transport).search(SearchRequest(query="q"))


def test_malformed_json_raises():
    transport = ScriptedTransport([(200, {}, b"not json")])
    with pytest.raises(MalformedResponseError):
        client_with(transport).search(SearchRequest(query="q"))


def test_missing_fields_raise():
    transport = ScriptedTransport([(200, {}, b'{"items": [{"id": {}}]}')])
    with pytest.raises(MalformedResponseError):
        client_with(transport).search(SearchRequest(query="q"))


def test_empty_page_short_circuits_videos_call():
    transport = ScriptedTransport([(200, {}, b'{"items": []}')])
    page = client_with(transport).search(SearchRequest(query="q"))
    assert page.items == ()
    assert len(transport.urls) == 1  # no videos.list for an empty page


def test_search_request_validation():
    with pytest.raises(ValueError):
        SearchRequest(query="   ")
    for bad in (0, 51):
        with pytest.raises(ValueError):
            SearchRequest(query="q", max_results=bad)


def test_client_requires_key():
    with pytest.raises(AuthFailureError):
        YouTubeClient(api_key="")
