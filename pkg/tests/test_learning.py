"""Per-context rate baseline and severity prediction."""

import math

import pytest
from hypothesis import given, settings, strategies as st

from vigil.learning import (
    BACKOFF_MIN_TOTAL,
    RATING_LEVELS,
    WINDOW_LENGTH_MS,
    Baseline,
    ContextKey,
    InvalidRating,
    SeverityModel,
    context_key,
    hour_bucket,
)
from conftest import make_event


KEY = ContextKey("cam1", 10, "theft")
HOUR10 = 10 * 3_600_000
DAY_MS = 86_400_000


def theft_at(day=0, offset=0, camera="cam1", concept="theft"):
    # Same hour-of-day bucket every day, but a different 20-minute window.
    return make_event(f"{camera}-{concept}-{day}-{offset}", camera_id=camera,
                      timestamp=day * DAY_MS + HOUR10 + offset, concept=concept)


def bump(baseline, count, day=0, camera="cam1", concept="theft"):
    for i in range(count):
        baseline.update(theft_at(day=day, offset=i, camera=camera,
                                 concept=concept))


# -- context keys ---------------------------------------------------------------

def test_hour_bucket_wraps_at_midnight():
    assert hour_bucket(0) == 0
    assert hour_bucket(23 * 3_600_000) == 23
    assert hour_bucket(24 * 3_600_000) == 0
    assert hour_bucket(24 * 3_600_000 + 3_599_999) == 0


def test_context_key_from_event():
    e = make_event("e1", camera_id="cam7", timestamp=11 * 3_600_000, concept="crowd")
    assert context_key(e) == ContextKey("cam7", 11, "crowd")


def test_context_key_rejects_bad_hour():
    with pytest.raises(ValueError):
        ContextKey("cam1", 24, "theft")


# -- baseline rate estimation ----------------------------------------------------

def test_ten_events_one_window_is_rate_ten():
    b = Baseline()
    bump(b, 10)
    assert b.counts(KEY) == (10, 1)
    assert b.rate(KEY) == 10.0


def test_events_across_disjoint_windows():
    b = Baseline()
    for day in (1, 4, 9):
        bump(b, 2, day=day)
    assert b.counts(KEY) == (6, 3)
    assert b.rate(KEY) == 2.0


def test_unseen_key_rate_zero():
    b = Baseline()
    assert b.rate(KEY) == 0.0
    assert b.counts(KEY) == (0, 0)


def test_anomaly_empty_window_is_zero():
    b = Baseline()
    bump(b, 4)
    assert b.anomaly_score("cam1", 10, []) == 0.0


def test_anomaly_zero_at_expected_rate():
    b = Baseline()
    bump(b, 4)
    window = [make_event(f"e{i}", timestamp=HOUR10) for i in range(4)]
    assert b.anomaly_score("cam1", 10, window) == 0.0


def test_anomaly_unseen_concept_burst():
    b = Baseline()
    # five events of a concept this context has never produced: lambda = 0
    window = [make_event(f"e{i}", concept="crowd", timestamp=HOUR10)
              for i in range(5)]
    assert b.anomaly_score("cam1", 10, window) == 5.0


def test_anomaly_never_negative():
    b = Baseline()
    bump(b, 100)  # lambda = 100
    window = [make_event("e1", concept="theft", timestamp=HOUR10)]
    assert b.anomaly_score("cam1", 10, window) == 0.0


def test_anomaly_takes_worst_concept():
    b = Baseline()
    bump(b, 9)
    window = (
        [make_event(f"t{i}", concept="theft", timestamp=HOUR10) for i in range(9)]
        + [make_event(f"c{i}", concept="crowd", timestamp=HOUR10) for i in range(4)]
    )
    # theft scores 0 (at rate); crowd is unseen so scores 4
    assert b.anomaly_score("cam1", 10, window) == 4.0


def test_anomaly_matches_formula():
    b = Baseline()
    for day in range(5):
        bump(b, 2, day=day)
    # lambda = 2, n = 6
    window = [make_event(f"e{i}", concept="theft", timestamp=HOUR10)
              for i in range(6)]
    want = (6 - 2.0) / math.sqrt(2.0 + 1.0)
    assert b.anomaly_score("cam1", 10, window) == pytest.approx(want)


def test_anomaly_monotone_in_count():
    b = Baseline()
    bump(b, 3)
    scores = []
    for n in range(1, 12):
        window = [make_event(f"e{i}", concept="theft", timestamp=HOUR10)
                  for i in range(n)]
        scores.append(b.anomaly_score("cam1", 10, window))
    assert scores == sorted(scores)


def test_baseline_snapshot_round_trip(tmp_path):
    b = Baseline()
    for i, (camera, concept) in enumerate(
            [("cam1", "theft"), ("cam2", "crowd"), ("cam1", "tag")]):
        for day in range(i + 1):
            bump(b, 1, day=day, camera=camera, concept=concept)
    path = tmp_path / "baseline.snap"
    b.save(path)
    loaded = Baseline.load(path)
    assert loaded == b
    loaded.save(tmp_path / "again.snap")
    assert (tmp_path / "again.snap").read_bytes() == path.read_bytes()


# -- severity prediction ----------------------------------------------------------

def test_fresh_model_is_uniform():
    m = SeverityModel()
    dist, expectation = m.predict(KEY)
    assert dist == (0.2, 0.2, 0.2, 0.2, 0.2)
    assert expectation == pytest.approx(2.0)


def test_repeated_rating_dominates():
    m = SeverityModel()
    for _ in range(10):
        m.update(KEY, 4)
    dist, expectation = m.predict(KEY)
    assert dist[4] == pytest.approx(11 / 15)
    assert all(p == pytest.approx(1 / 15) for p in dist[:4])
    assert expectation == pytest.approx(sum(r * p for r, p in enumerate(dist)))


def test_split_ratings_average_out():
    m = SeverityModel()
    for _ in range(5):
        m.update(KEY, 0)
        m.update(KEY, 4)
    _, expectation = m.predict(KEY)
    assert expectation == pytest.approx(2.0)


def test_distribution_sums_to_one():
    m = SeverityModel()
    for r in (0, 1, 1, 3, 4, 4, 4):
        m.update(KEY, r)
    dist, _ = m.predict(KEY)
    assert sum(dist) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("bad", [-1, 5, 7, 2.0, "3", True])
def test_update_rejects_bad_rating(bad):
    m = SeverityModel()
    with pytest.raises(InvalidRating):
        m.update(KEY, bad)


def test_backoff_to_hour_concept():
    m = SeverityModel()
    other_cam = ContextKey("cam9", KEY.hour_bucket, KEY.concept)
    for _ in range(BACKOFF_MIN_TOTAL):
        m.update(other_cam, 3)
    # KEY itself has too little data; hour+concept level has enough
    dist, _ = m.predict(KEY)
    assert dist.index(max(dist)) == 3


def test_backoff_to_concept():
    m = SeverityModel()
    other = ContextKey("cam9", (KEY.hour_bucket + 5) % 24, KEY.concept)
    for _ in range(BACKOFF_MIN_TOTAL):
        m.update(other, 1)
    dist, _ = m.predict(KEY)
    assert dist.index(max(dist)) == 1


def test_backoff_prefers_most_specific():
    m = SeverityModel()
    for _ in range(BACKOFF_MIN_TOTAL):
        m.update(KEY, 4)
    for _ in range(50):
        m.update(ContextKey("cam9", KEY.hour_bucket, KEY.concept), 0)
    dist, _ = m.predict(KEY)
    assert dist.index(max(dist)) == 4


def test_sparse_exact_context_ignored():
    m = SeverityModel()
    for _ in range(BACKOFF_MIN_TOTAL - 1):
        m.update(KEY, 4)  # below threshold
    # no coarser data either, so both coarser levels also fall through
    dist, _ = m.predict(ContextKey("cam2", KEY.hour_bucket, "crowd"))
    assert dist == (0.2, 0.2, 0.2, 0.2, 0.2)


def test_argmax_recovers_planted_rating():
    import random
    rng = random.Random(3)
    m = SeverityModel()
    planted = {}
    for i in range(20):
        key = ContextKey(f"cam{i}", rng.randrange(24), "theft")
        r = rng.randrange(RATING_LEVELS)
        planted[key] = r
        for _ in range(25):
            m.update(key, r if rng.random() < 0.8 else rng.randrange(RATING_LEVELS))
    hits = sum(
        1 for key, r in planted.items()
        if m.predict(key)[0].index(max(m.predict(key)[0])) == r)
    assert hits >= 18


def test_severity_snapshot_round_trip(tmp_path):
    m = SeverityModel()
    for i, r in enumerate((0, 1, 2, 3, 4, 4, 4)):
        m.update(ContextKey(f"cam{i % 3}", i % 24, "theft"), r)
    path = tmp_path / "severity.snap"
    m.save(path)
    loaded = SeverityModel.load(path)
    assert loaded == m
    assert loaded.predict(ContextKey("cam0", 0, "theft")) == m.predict(
        ContextKey("cam0", 0, "theft"))
    loaded.save(tmp_path / "again.snap")
    assert (tmp_path / "again.snap").read_bytes() == path.read_bytes()


def test_snapshot_rebuilds_backoff_levels(tmp_path):
    m = SeverityModel()
    for _ in range(BACKOFF_MIN_TOTAL):
        m.update(ContextKey("cam9", 10, "theft"), 3)
    path = tmp_path / "severity.snap"
    m.save(path)
    loaded = SeverityModel.load(path)
    # querying a different camera exercises the aggregate tallies
    dist, _ = loaded.predict(ContextKey("cam1", 10, "theft"))
    assert dist.index(max(dist)) == 3


@settings(max_examples=50)
@given(st.lists(st.integers(0, RATING_LEVELS - 1), max_size=40))
def test_predict_is_proper_distribution(ratings):
    m = SeverityModel()
    for r in ratings:
        m.update(KEY, r)
    dist, expectation = m.predict(KEY)
    assert sum(dist) == pytest.approx(1.0, abs=1e-9)
    assert all(p > 0 for p in dist)
    assert 0.0 <= expectation <= RATING_LEVELS - 1


@settings(max_examples=50)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 100)),
                max_size=30))
def test_window_count_never_exceeds_event_count(updates):
    b = Baseline()
    keys = set()
    for i, (cam, window) in enumerate(updates):
        e = make_event(f"e{i}", camera_id=f"cam{cam}",
                       timestamp=window * WINDOW_LENGTH_MS + 1)
        b.update(e)
        keys.add(context_key(e))
    for key in keys:
        events, windows = b.counts(key)
        assert 0 < windows <= events
