"""Canonical annotation records and the append-only on-disk event log.

Machine label events and operator annotations share one record shape so
baselines, pattern matchers and queries see a single uniform stream.
Storage is newline-delimited JSON in segment files named
``events-<first_seq>.log`` plus a single-line JSON ``manifest`` listing
segments in order.  The in-memory index is rebuilt on open; a torn final
record (crash mid-write) is silently dropped and repaired.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .ontology import Ontology, UnknownConceptError

SOURCES = ("machine", "human")
SEVERITY_LEVELS = (0, 1, 2, 3, 4)
MAX_FREE_TEXT = 2000


class StoreError(Exception):
    """Base for event-store failures."""


class DuplicateEventIdError(StoreError):
    def __init__(self, event_id: str):
        super().__init__(f"event id {event_id!r} already stored")
        self.event_id = event_id


class InvalidEventError(StoreError):
    def __init__(self, field_name: str, detail: str = ""):
        super().__init__(f"invalid field {field_name!r}" + (f": {detail}" if detail else ""))
        self.field = field_name


class InvalidRangeError(StoreError):
    pass


class CorruptSegmentError(StoreError):
    def __init__(self, path, line: int):
        super().__init__(f"{path}: unreadable record at line {line}")
        self.path = path
        self.line = line


@dataclass(frozen=True)
class SensorEvent:
    """One observation bound to a camera, timestamp and ontology concept."""

    event_id: str
    camera_id: str
    timestamp: int  # ms since Unix epoch, UTC
    concept: str
    confidence: float
    source: str = "machine"
    bbox: tuple[float, float, float, float] | None = None
    video_ref: str | None = None
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class OperatorAnnotation:
    annotation_id: str
    operator_id: str
    camera_id: str
    timestamp: int
    concept: str
    free_text: str = ""
    severity: int = 0


@dataclass(frozen=True)
class CameraMeta:
    camera_id: str
    zone: str = ""
    latitude: float | None = None
    longitude: float | None = None
    status: str = "online"


@dataclass(frozen=True)
class RetentionPolicy:
    video_retention: int  # ms
    metadata_retention: int  # ms


@dataclass(frozen=True)
class SweepReport:
    events_stripped: int
    records_deleted: int


def validate_event(e: SensorEvent) -> None:
    if not e.event_id:
        raise InvalidEventError("event_id", "must be non-empty")
    if not e.camera_id:
        raise InvalidEventError("camera_id", "must be non-empty")
    if not isinstance(e.timestamp, int) or e.timestamp <= 0:
        raise InvalidEventError("timestamp", "must be a positive integer (ms UTC)")
    if not (0.0 <= e.confidence <= 1.0):
        raise InvalidEventError("confidence", f"{e.confidence} outside [0,1]")
    if e.source not in SOURCES:
        raise InvalidEventError("source", f"{e.source!r} not in {SOURCES}")
    if e.bbox is not None:
        if len(e.bbox) != 4:
            raise InvalidEventError("bbox", "needs exactly (x, y, w, h)")
        x, y, w, h = e.bbox
        if not all(0.0 <= v <= 1.0 for v in e.bbox):
            raise InvalidEventError("bbox", "components outside [0,1]")
        if w <= 0 or h <= 0:
            raise InvalidEventError("bbox", "width and height must be positive")


def validate_annotation(a: OperatorAnnotation) -> None:
    if not a.annotation_id:
        raise InvalidEventError("annotation_id", "must be non-empty")
    if not a.operator_id:
        raise InvalidEventError("operator_id", "must be non-empty")
    if not a.camera_id:
        raise InvalidEventError("camera_id", "must be non-empty")
    if not isinstance(a.timestamp, int) or a.timestamp <= 0:
        raise InvalidEventError("timestamp", "must be a positive integer (ms UTC)")
    if a.severity not in SEVERITY_LEVELS:
        raise InvalidEventError("severity", f"{a.severity} not in 0..4")
    if len(a.free_text) > MAX_FREE_TEXT:
        raise InvalidEventError("free_text", f"longer than {MAX_FREE_TEXT} characters")


def validate_camera(c: CameraMeta) -> None:
    if not c.camera_id:
        raise InvalidEventError("camera_id", "must be non-empty")
    if c.status not in ("online", "offline"):
        raise InvalidEventError("status", f"{c.status!r} not online/offline")
    if c.latitude is not None and not (-90.0 <= c.latitude <= 90.0):
        raise InvalidEventError("latitude", f"{c.latitude} outside [-90,90]")
    if c.longitude is not None and not (-180.0 <= c.longitude <= 180.0):
        raise InvalidEventError("longitude", f"{c.longitude} outside [-180,180]")


def validate_policy(p: RetentionPolicy) -> None:
    if p.video_retention <= 0:
        raise InvalidEventError("video_retention", "must be positive")
    if p.metadata_retention < p.video_retention:
        raise InvalidEventError("metadata_retention", "must be >= video_retention")


def annotation_to_event(a: OperatorAnnotation) -> SensorEvent:
    """Project an operator annotation into the uniform event stream.

    Annotation-only fields ride along in ``attributes`` so a store query
    returns the submission verbatim.
    """
    return SensorEvent(
        event_id=a.annotation_id,
        camera_id=a.camera_id,
        timestamp=a.timestamp,
        concept=a.concept,
        confidence=1.0,
        source="human",
        attributes={
            "operator_id": a.operator_id,
            "free_text": a.free_text,
            "severity": a.severity,
        },
    )


def event_to_record(e: SensorEvent) -> dict:
    record = {
        "event_id": e.event_id,
        "camera_id": e.camera_id,
        "timestamp": e.timestamp,
        "concept": e.concept,
        "confidence": e.confidence,
        "source": e.source,
    }
    if e.bbox is not None:
        record["bbox"] = list(e.bbox)
    if e.video_ref is not None:
        record["video_ref"] = e.video_ref
    if e.attributes:
        record["attributes"] = e.attributes
    return record


def event_from_record(record: dict) -> SensorEvent:
    try:
        return SensorEvent(
            event_id=record["event_id"],
            camera_id=record["camera_id"],
            timestamp=record["timestamp"],
            concept=record["concept"],
            confidence=record["confidence"],
            source=record.get("source", "machine"),
            bbox=tuple(record["bbox"]) if record.get("bbox") is not None else None,
            video_ref=record.get("video_ref"),
            attributes=record.get("attributes", {}),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidEventError(str(exc)) from exc


def _dump_line(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":")) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


class _Segment:
    def __init__(self, name: str, events: list[SensorEvent]):
        self.name = name
        self.events = events


class EventStore:
    """Append-only event log: single writer, queries over the in-memory index.

    ``next_seq`` survives retention sweeps via a deleted-record counter in
    the manifest, so sequence numbers never move backwards across reopen.
    """

    MANIFEST = "manifest"

    def __init__(self, root, ontology: Ontology | None = None,
                 segment_max_records: int = 50_000):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.ontology = ontology
        self.segment_max_records = segment_max_records
        self._segments: list[_Segment] = []
        self._by_id: set[str] = set()
        self._deleted = 0
        self._active_fh = None
        self._active_needs_newline = False
        self._load()

    # -- open / recovery ----------------------------------------------------

    def _manifest_path(self) -> Path:
        return self.root / self.MANIFEST

    def _load(self) -> None:
        manifest = self._manifest_path()
        if not manifest.exists():
            return
        meta = json.loads(manifest.read_text("utf-8"))
        self._deleted = int(meta.get("deleted", 0))
        names = list(meta.get("segments", []))
        for pos, name in enumerate(names):
            path = self.root / name
            is_last = pos == len(names) - 1
            events = self._scan_segment(path, allow_partial_tail=is_last)
            self._segments.append(_Segment(name, events))
            for e in events:
                self._by_id.add(e.event_id)

    def _scan_segment(self, path: Path, allow_partial_tail: bool) -> list[SensorEvent]:
        data = path.read_bytes()
        events: list[SensorEvent] = []
        good_bytes = 0
        tail_complete_no_newline = False
        offset = 0
        lineno = 0
        while offset < len(data):
            lineno += 1
            nl = data.find(b"\n", offset)
            chunk = data[offset:] if nl < 0 else data[offset:nl]
            try:
                record = json.loads(chunk.decode("utf-8"))
                events.append(event_from_record(record))
            except (ValueError, InvalidEventError) as exc:
                at_tail = nl < 0 or nl == len(data) - 1
                if allow_partial_tail and at_tail:
                    break  # torn final record: drop it
                raise CorruptSegmentError(path, lineno) from exc
            if nl < 0:
                good_bytes = len(data)
                tail_complete_no_newline = True
                break
            offset = nl + 1
            good_bytes = offset
        if good_bytes < len(data):
            with open(path, "r+b") as fh:
                fh.truncate(good_bytes)
        if tail_complete_no_newline:
            self._active_needs_newline = True
        return events

    # -- appends -------------------------------------------------------------

    @property
    def next_seq(self) -> int:
        return sum(len(s.events) for s in self._segments) + self._deleted + 1

    def __len__(self) -> int:
        return sum(len(s.events) for s in self._segments)

    def __contains__(self, event_id: str) -> bool:
        return event_id in self._by_id

    def max_timestamp(self) -> int:
        latest = 0
        for segment in self._segments:
            for e in segment.events:
                if e.timestamp > latest:
                    latest = e.timestamp
        return latest

    def append(self, e: SensorEvent) -> int:
        validate_event(e)
        if self.ontology is not None and e.concept not in self.ontology:
            raise UnknownConceptError(e.concept)
        if e.event_id in self._by_id:
            raise DuplicateEventIdError(e.event_id)
        seq = self.next_seq
        if not self._segments or len(self._segments[-1].events) >= self.segment_max_records:
            self._rotate(first_seq=seq)
        if self._active_fh is None:
            self._open_active()
        if self._active_needs_newline:
            self._active_fh.write("\n")
            self._active_needs_newline = False
        self._active_fh.write(_dump_line(event_to_record(e)))
        self._active_fh.flush()
        self._segments[-1].events.append(e)
        self._by_id.add(e.event_id)
        return seq

    def _rotate(self, first_seq: int) -> None:
        if self._active_fh is not None:
            self._active_fh.close()
            self._active_fh = None
        name = f"events-{first_seq}.log"
        (self.root / name).touch()
        self._segments.append(_Segment(name, []))
        self._write_manifest()
        self._active_needs_newline = False

    def _open_active(self) -> None:
        self._active_fh = open(self.root / self._segments[-1].name, "a", encoding="utf-8")

    def _write_manifest(self) -> None:
        meta = {"segments": [s.name for s in self._segments], "deleted": self._deleted}
        _atomic_write(self._manifest_path(), json.dumps(meta) + "\n")

    # -- queries -------------------------------------------------------------

    def query(self, time_from: int, time_to: int, camera_id: str | None = None,
              concept: str | None = None) -> list[SensorEvent]:
        """Events with time_from <= t < time_to, ordered by (timestamp, event_id).

        ``concept`` filters by subsumption: an event matches when its concept
        is the given one or any descendant of it.
        """
        if time_from > time_to:
            raise InvalidRangeError(f"time_from {time_from} > time_to {time_to}")
        if concept is not None:
            if self.ontology is None:
                raise StoreError("concept filter requires an ontology")
            wanted = self.ontology.descendants(concept)
        out = []
        for segment in self._segments:
            for e in segment.events:
                if not (time_from <= e.timestamp < time_to):
                    continue
                if camera_id is not None and e.camera_id != camera_id:
                    continue
                if concept is not None and e.concept not in wanted:
                    continue
                out.append(e)
        out.sort(key=lambda e: (e.timestamp, e.event_id))
        return out

    # -- retention -----------------------------------------------------------

    def retention_sweep(self, now: int, policy: RetentionPolicy) -> SweepReport:
        """Strip video_ref past video retention; delete records past metadata retention.

        Rewrites affected segments atomically (write temp, rename); the manifest
        is updated first so sequence numbers stay monotonic even if interrupted.
        """
        validate_policy(policy)
        video_cut = now - policy.video_retention
        meta_cut = now - policy.metadata_retention
        stripped = 0
        deleted = 0
        dirty: list[_Segment] = []
        for segment in self._segments:
            new_events = []
            changed = False
            for e in segment.events:
                if e.timestamp < meta_cut:
                    deleted += 1
                    self._by_id.discard(e.event_id)
                    changed = True
                    continue
                if e.timestamp < video_cut and e.video_ref is not None:
                    e = replace(e, video_ref=None)
                    stripped += 1
                    changed = True
                new_events.append(e)
            if changed:
                segment.events = new_events
                dirty.append(segment)
        if not dirty:
            return SweepReport(0, 0)

        if self._active_fh is not None:
            self._active_fh.close()
            self._active_fh = None
        empty = [s for s in dirty if not s.events]
        self._segments = [s for s in self._segments if s.events or s not in empty]
        self._deleted += deleted
        self._write_manifest()
        for segment in dirty:
            if segment.events:
                body = "".join(_dump_line(event_to_record(e)) for e in segment.events)
                _atomic_write(self.root / segment.name, body)
        for segment in empty:
            (self.root / segment.name).unlink(missing_ok=True)
        self._active_needs_newline = False
        return SweepReport(stripped, deleted)

    def close(self) -> None:
        if self._active_fh is not None:
            self._active_fh.close()
            self._active_fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
