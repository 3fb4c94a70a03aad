"""Long-term normality baselines and the rating-supervised severity model.

Normality is remembered per (camera, UTC hour of day, concept): how many
events of that kind this camera usually produces in a 20-minute window.
The anomaly score of a live window is the largest standardized excess over
those remembered rates.  Severity is a per-context tally of operator
ratings (0..4) with additive smoothing and a coarse-to-fine backoff.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import sqrt

from .events import SensorEvent
from .snapshots import read_snapshot, write_snapshot

WINDOW_LENGTH_MS = 20 * 60 * 1000
HOUR_MS = 3_600_000
RATING_LEVELS = 5
BACKOFF_MIN_TOTAL = 5  # below this, a tally level is too thin to trust

BASELINE_SNAPSHOT_VERSION = 1
SEVERITY_SNAPSHOT_VERSION = 1


class InvalidRating(Exception):
    def __init__(self, rating):
        super().__init__(f"rating {rating!r} not an integer in 0..4")
        self.rating = rating


def hour_bucket(timestamp_ms: int) -> int:
    return (timestamp_ms // HOUR_MS) % 24


@dataclass(frozen=True, order=True)
class ContextKey:
    camera_id: str
    hour_bucket: int
    concept: str

    def __post_init__(self):
        if not (0 <= self.hour_bucket <= 23):
            raise ValueError(f"hour_bucket {self.hour_bucket} outside 0..23")


def context_key(e: SensorEvent) -> ContextKey:
    return ContextKey(e.camera_id, hour_bucket(e.timestamp), e.concept)


class Baseline:
    """Per-context event rates over 20-minute windows.

    window_count tracks distinct windows in which the key was observed, so
    the learned rate is events per active window.
    """

    def __init__(self, window_length: int = WINDOW_LENGTH_MS):
        self.window_length = window_length
        # key -> [event_count, window_count, last_window_index]
        self._counts: dict[ContextKey, list[int]] = {}

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Baseline)
            and self.window_length == other.window_length
            and self._counts == other._counts
        )

    def __len__(self) -> int:
        return len(self._counts)

    def update(self, e: SensorEvent) -> None:
        key = context_key(e)
        window = e.timestamp // self.window_length
        entry = self._counts.get(key)
        if entry is None:
            self._counts[key] = [1, 1, window]
            return
        entry[0] += 1
        if window != entry[2]:
            entry[1] += 1
            entry[2] = window

    def rate(self, key: ContextKey) -> float:
        entry = self._counts.get(key)
        if entry is None:
            return 0.0
        return entry[0] / entry[1]

    def counts(self, key: ContextKey) -> tuple[int, int]:
        entry = self._counts.get(key)
        if entry is None:
            return (0, 0)
        return (entry[0], entry[1])

    def anomaly_score(self, camera_id: str, hour: int,
                      window_events: list[SensorEvent]) -> float:
        """Largest standardized excess of observed counts over learned rates.

        For each concept in the window with count n, against learned rate
        lam: max(0, (n - lam) / sqrt(lam + 1)).  Empty window scores 0.
        """
        if not window_events:
            return 0.0
        observed = Counter(e.concept for e in window_events)
        best = 0.0
        for concept, n in observed.items():
            lam = self.rate(ContextKey(camera_id, hour, concept))
            score = (n - lam) / sqrt(lam + 1.0)
            if score > best:
                best = score
        return best

    def save(self, path) -> None:
        records = [
            {
                "camera_id": k.camera_id,
                "hour_bucket": k.hour_bucket,
                "concept": k.concept,
                "event_count": v[0],
                "window_count": v[1],
                "last_window": v[2],
            }
            for k, v in sorted(self._counts.items())
        ]
        write_snapshot(path, BASELINE_SNAPSHOT_VERSION, records)

    @classmethod
    def load(cls, path, window_length: int = WINDOW_LENGTH_MS) -> "Baseline":
        b = cls(window_length)
        for r in read_snapshot(path, BASELINE_SNAPSHOT_VERSION):
            key = ContextKey(r["camera_id"], r["hour_bucket"], r["concept"])
            b._counts[key] = [r["event_count"], r["window_count"], r["last_window"]]
        return b


class SeverityModel:
    """Rating tallies per context with additive smoothing.

    Prediction backs off exact key -> (hour, concept) -> concept -> uniform,
    taking the most specific level holding at least BACKOFF_MIN_TOTAL ratings.
    """

    def __init__(self, alpha: float = 1.0):
        if alpha <= 0:
            raise ValueError(f"alpha {alpha} must be positive")
        self.alpha = alpha
        self._exact: dict[ContextKey, list[int]] = {}
        self._by_hour_concept: dict[tuple[int, str], list[int]] = {}
        self._by_concept: dict[str, list[int]] = {}

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, SeverityModel)
            and self.alpha == other.alpha
            and self._exact == other._exact
        )

    def __len__(self) -> int:
        return len(self._exact)

    def update(self, key: ContextKey, rating: int) -> None:
        if not isinstance(rating, int) or isinstance(rating, bool) or not (0 <= rating <= 4):
            raise InvalidRating(rating)
        for table, k in (
            (self._exact, key),
            (self._by_hour_concept, (key.hour_bucket, key.concept)),
            (self._by_concept, key.concept),
        ):
            tally = table.get(k)
            if tally is None:
                tally = [0] * RATING_LEVELS
                table[k] = tally
            tally[rating] += 1

    def tallies(self, key: ContextKey) -> tuple[int, ...]:
        return tuple(self._exact.get(key, [0] * RATING_LEVELS))

    def predict(self, key: ContextKey) -> tuple[tuple[float, ...], float]:
        """Distribution over ratings 0..4 and its expectation."""
        tally = [0] * RATING_LEVELS
        for candidate in (
            self._exact.get(key),
            self._by_hour_concept.get((key.hour_bucket, key.concept)),
            self._by_concept.get(key.concept),
        ):
            if candidate is not None and sum(candidate) >= BACKOFF_MIN_TOTAL:
                tally = candidate
                break
        total = sum(tally)
        denom = total + RATING_LEVELS * self.alpha
        dist = tuple((tally[r] + self.alpha) / denom for r in range(RATING_LEVELS))
        expectation = sum(r * p for r, p in enumerate(dist))
        return dist, expectation

    def save(self, path) -> None:
        records = [
            {
                "camera_id": k.camera_id,
                "hour_bucket": k.hour_bucket,
                "concept": k.concept,
                "tallies": list(v),
            }
            for k, v in sorted(self._exact.items())
        ]
        write_snapshot(path, SEVERITY_SNAPSHOT_VERSION, records)

    @classmethod
    def load(cls, path, alpha: float = 1.0) -> "SeverityModel":
        m = cls(alpha)
        for r in read_snapshot(path, SEVERITY_SNAPSHOT_VERSION):
            key = ContextKey(r["camera_id"], r["hour_bucket"], r["concept"])
            for rating, count in enumerate(r["tallies"]):
                tally = m._exact.setdefault(key, [0] * RATING_LEVELS)
                tally[rating] += count
                hc = m._by_hour_concept.setdefault((key.hour_bucket, key.concept),
                                                   [0] * RATING_LEVELS)
                hc[rating] += count
                c = m._by_concept.setdefault(key.concept, [0] * RATING_LEVELS)
                c[rating] += count
        return m
