"""Wire protocol shared by sensors and consoles.

One UTF-8 JSON object per line: {"kind": ..., "seq": ..., "payload": {...}}.
``kind`` fixes the minimum payload fields; extra payload fields are allowed
and preserved, so the format can grow without breaking old parsers.  seq is
assigned by the sender and must increase strictly per connection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..events import SensorEvent, OperatorAnnotation, event_to_record

REQUIRED_FIELDS: dict[str, tuple[str, ...]] = {
    "sensor_event": ("event_id", "camera_id", "timestamp", "concept", "confidence", "source"),
    "annotation": ("annotation_id", "operator_id", "camera_id", "timestamp",
                   "concept", "free_text", "severity"),
    "rating": ("camera_id", "hour_bucket", "concept", "rating"),
    "feedback": ("recommendation_id", "camera_id", "outcome"),
    "add_pattern": ("name", "pattern_text"),
    "subscribe": ("role",),
    "board_update": ("recommendation_id", "issued_at", "cameras"),
    "alert": ("name", "event_ids", "camera_id"),
    "ack": ("seq",),
    "error": ("seq", "code", "detail"),
}

MESSAGE_KINDS = tuple(REQUIRED_FIELDS)


class ProtocolError(Exception):
    pass


class MalformedMessage(ProtocolError):
    def __init__(self, detail: str):
        super().__init__(f"malformed message: {detail}")
        self.detail = detail


class UnknownKind(ProtocolError):
    def __init__(self, kind):
        super().__init__(f"unknown message kind {kind!r}")
        self.kind = kind


class MissingField(ProtocolError):
    def __init__(self, field_name: str):
        super().__init__(f"missing payload field {field_name!r}")
        self.field = field_name


@dataclass(frozen=True)
class Message:
    kind: str
    seq: int
    payload: dict = field(default_factory=dict)


def parse_message(line: str) -> Message:
    try:
        obj = json.loads(line)
    except ValueError as exc:
        raise MalformedMessage(f"not valid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise MalformedMessage("top level must be a JSON object")
    for name in ("kind", "seq", "payload"):
        if name not in obj:
            raise MalformedMessage(f"missing {name!r}")
    kind = obj["kind"]
    if kind not in REQUIRED_FIELDS:
        raise UnknownKind(kind)
    seq = obj["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool):
        raise MalformedMessage(f"seq must be an integer, got {seq!r}")
    payload = obj["payload"]
    if not isinstance(payload, dict):
        raise MalformedMessage("payload must be a JSON object")
    for name in REQUIRED_FIELDS[kind]:
        if name not in payload:
            raise MissingField(name)
    return Message(kind, seq, payload)


def serialize_message(m: Message) -> str:
    """One line of wire text; parse_message inverts it exactly."""
    if m.kind not in REQUIRED_FIELDS:
        raise UnknownKind(m.kind)
    for name in REQUIRED_FIELDS[m.kind]:
        if name not in m.payload:
            raise MissingField(name)
    return json.dumps(
        {"kind": m.kind, "seq": m.seq, "payload": m.payload},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )


def event_message(seq: int, e: SensorEvent) -> Message:
    return Message("sensor_event", seq, event_to_record(e))


def annotation_message(seq: int, a: OperatorAnnotation) -> Message:
    return Message("annotation", seq, {
        "annotation_id": a.annotation_id,
        "operator_id": a.operator_id,
        "camera_id": a.camera_id,
        "timestamp": a.timestamp,
        "concept": a.concept,
        "free_text": a.free_text,
        "severity": a.severity,
    })


def annotation_from_payload(payload: dict) -> OperatorAnnotation:
    return OperatorAnnotation(
        annotation_id=payload["annotation_id"],
        operator_id=payload["operator_id"],
        camera_id=payload["camera_id"],
        timestamp=payload["timestamp"],
        concept=payload["concept"],
        free_text=payload["free_text"],
        severity=payload["severity"],
    )
