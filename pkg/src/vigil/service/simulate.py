"""Seeded scenario simulator: a deterministic stand-in for live camera feeds.

Background traffic is a Poisson process per (concept, hour-of-day) rate,
drawn window by window; scripted injections place exact concept sequences
at fixed offsets.  Identical seeds produce byte-identical streams.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from math import exp
from pathlib import Path

import yaml

from ..events import CameraMeta, SensorEvent, validate_camera
from ..learning import WINDOW_LENGTH_MS, hour_bucket
from ..ontology import Ontology

BACKGROUND_CONFIDENCE_RANGE = (0.55, 0.95)
INJECTED_CONFIDENCE = 0.95
_POISSON_CHUNK = 500.0  # exp(-lam) underflows for huge lam; draw in chunks


class InvalidScript(Exception):
    pass


@dataclass(frozen=True)
class Injection:
    offset_ms: int
    camera_id: str
    concepts: tuple[str, ...]
    spacing_ms: int = 30_000


@dataclass(frozen=True)
class ScenarioScript:
    seed: int
    duration_ms: int
    start_time_ms: int
    cameras: tuple[CameraMeta, ...]
    base_rates: dict[tuple[str, int], float] = field(default_factory=dict)
    injections: tuple[Injection, ...] = ()


def validate_script(script: ScenarioScript, ontology: Ontology | None = None) -> None:
    if script.duration_ms <= 0:
        raise InvalidScript("duration_ms must be positive")
    if script.start_time_ms <= 0:
        raise InvalidScript("start_time_ms must be positive")
    if not script.cameras:
        raise InvalidScript("at least one camera required")
    for cam in script.cameras:
        validate_camera(cam)
    for (concept, hour), rate in script.base_rates.items():
        if rate < 0:
            raise InvalidScript(f"rate for ({concept}, {hour}) is negative")
        if not (0 <= hour <= 23):
            raise InvalidScript(f"hour {hour} outside 0..23")
        if ontology is not None and concept not in ontology:
            raise InvalidScript(f"unknown concept {concept!r} in base_rates")
    camera_ids = {c.camera_id for c in script.cameras}
    for inj in script.injections:
        if not (0 <= inj.offset_ms < script.duration_ms):
            raise InvalidScript(f"injection offset {inj.offset_ms} outside the run")
        if inj.camera_id not in camera_ids:
            raise InvalidScript(f"injection camera {inj.camera_id!r} not in cameras")
        if not inj.concepts:
            raise InvalidScript("injection needs at least one concept")
        if inj.spacing_ms <= 0:
            raise InvalidScript("injection spacing_ms must be positive")
        if ontology is not None:
            for concept in inj.concepts:
                if concept not in ontology:
                    raise InvalidScript(f"unknown concept {concept!r} in injection")


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    total = 0
    while lam > _POISSON_CHUNK:
        total += _poisson(rng, _POISSON_CHUNK)
        lam -= _POISSON_CHUNK
    threshold = exp(-lam)
    k = 0
    p = rng.random()
    while p > threshold:
        k += 1
        p *= rng.random()
    return total + k


def generate_events(script: ScenarioScript,
                    ontology: Ontology | None = None) -> list[SensorEvent]:
    """The full event list for a script, sorted by (timestamp, event_id).

    Iteration order (window, camera, sorted concept) is fixed, so a seed
    fully determines the output.
    """
    validate_script(script, ontology)
    rng = random.Random(script.seed)
    window_count = -(-script.duration_ms // WINDOW_LENGTH_MS)
    rates_by_hour: dict[int, list[tuple[str, float]]] = {}
    for (concept, hour), rate in sorted(script.base_rates.items()):
        rates_by_hour.setdefault(hour, []).append((concept, rate))

    draws: list[tuple[int, str, str, float]] = []
    for w in range(window_count):
        window_start = script.start_time_ms + w * WINDOW_LENGTH_MS
        window_span = min(WINDOW_LENGTH_MS, script.duration_ms - w * WINDOW_LENGTH_MS)
        hour = hour_bucket(window_start)
        for camera in script.cameras:
            for concept, rate in rates_by_hour.get(hour, ()):
                n = _poisson(rng, rate * (window_span / WINDOW_LENGTH_MS))
                for _ in range(n):
                    ts = window_start + rng.randrange(window_span)
                    confidence = round(rng.uniform(*BACKGROUND_CONFIDENCE_RANGE), 2)
                    draws.append((ts, camera.camera_id, concept, confidence))
    for inj in script.injections:
        for i, concept in enumerate(inj.concepts):
            ts = script.start_time_ms + inj.offset_ms + i * inj.spacing_ms
            draws.append((ts, inj.camera_id, concept, INJECTED_CONFIDENCE))

    draws.sort()
    events = [
        SensorEvent(
            event_id=f"sim-{i:08d}",
            camera_id=camera_id,
            timestamp=ts,
            concept=concept,
            confidence=confidence,
            source="machine",
        )
        for i, (ts, camera_id, concept, confidence) in enumerate(draws, start=1)
    ]
    return events


def _camera_from_raw(raw) -> CameraMeta:
    if isinstance(raw, str):
        return CameraMeta(camera_id=raw)
    if isinstance(raw, dict):
        try:
            return CameraMeta(**raw)
        except TypeError as exc:
            raise InvalidScript(f"bad camera entry {raw!r}: {exc}") from exc
    raise InvalidScript(f"bad camera entry {raw!r}")


def load_script(path) -> ScenarioScript:
    """Script file: YAML mapping.

    Keys: seed, duration_ms, start_time_ms, cameras (ids or mappings),
    base_rates (list of {concept, rate, hour?}; hour omitted = all hours),
    injections (list of {offset_ms, camera, concepts, spacing_ms?}).
    """
    try:
        raw = yaml.safe_load(Path(path).read_text("utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidScript(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InvalidScript(f"{path}: top level must be a mapping")
    known = {"seed", "duration_ms", "start_time_ms", "cameras", "base_rates", "injections"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise InvalidScript(f"{path}: unknown keys {', '.join(unknown)}")
    try:
        cameras = tuple(_camera_from_raw(c) for c in raw.get("cameras", []))
        base_rates: dict[tuple[str, int], float] = {}
        for entry in raw.get("base_rates", []):
            concept = entry["concept"]
            rate = float(entry["rate"])
            hours = [int(entry["hour"])] if "hour" in entry else list(range(24))
            for hour in hours:
                base_rates[(concept, hour)] = rate
        injections = tuple(
            Injection(
                offset_ms=int(entry["offset_ms"]),
                camera_id=entry["camera"],
                concepts=tuple(entry["concepts"]),
                spacing_ms=int(entry.get("spacing_ms", 30_000)),
            )
            for entry in raw.get("injections", [])
        )
        script = ScenarioScript(
            seed=int(raw.get("seed", 0)),
            duration_ms=int(raw["duration_ms"]),
            start_time_ms=int(raw["start_time_ms"]),
            cameras=cameras,
            base_rates=base_rates,
            injections=injections,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidScript(f"{path}: {exc!r}") from exc
    validate_script(script)
    return script
