import random

import pytest

from vigil import SensorEvent, load_seed_ontology

BASE_TS = 1_700_000_000_000  # 2023-11-14T22:13:20Z


@pytest.fixture(scope="session")
def seed_ontology():
    return load_seed_ontology()


def make_event(event_id: str, camera_id: str = "cam1", timestamp: int = BASE_TS,
               concept: str = "theft", confidence: float = 0.9,
               **extra) -> SensorEvent:
    return SensorEvent(event_id=event_id, camera_id=camera_id, timestamp=timestamp,
                       concept=concept, confidence=confidence, **extra)


def random_events(rng: random.Random, count: int, concepts, cameras,
                  start_ts: int = BASE_TS, span_ms: int = 3_600_000):
    """Events with unique ids at random times; sorted by (timestamp, event_id)."""
    events = [
        make_event(
            f"ev-{i:05d}",
            camera_id=rng.choice(cameras),
            timestamp=start_ts + rng.randrange(span_ms),
            concept=rng.choice(concepts),
            confidence=round(rng.uniform(0.3, 1.0), 2),
        )
        for i in range(count)
    ]
    events.sort(key=lambda e: (e.timestamp, e.event_id))
    return events
