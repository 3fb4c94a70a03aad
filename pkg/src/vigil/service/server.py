"""Network front end: TCP listeners, a WebSocket console gateway, pipe mode.

One asyncio loop owns the pipeline, so message handling is serialized in
arrival order no matter how many connections are open.  Sensor and console
ports speak the same line protocol; the WebSocket gateway carries one
message per text frame with identical bodies.  Pipe mode feeds a message
stream from a file handle through the same dispatch, emitting alerts and a
final board, for offline and reproducibility runs.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import sys

from ..events import (
    DuplicateEventIdError,
    InvalidEventError,
    StoreError,
    event_from_record,
)
from ..learning import InvalidRating
from ..ontology import MissingAttributeError, OntologyError, UnknownConceptError
from ..patterns import OutOfOrderEvent, PatternError, PatternSyntaxError
from ..retex import (
    CameraNotOnBoard,
    InvalidBudget,
    InvalidOutcome,
    InvalidWeights,
    RetexError,
    UnknownRecommendation,
)
from ..retex import Recommendation, explain
from .config import ServiceConfig, load_patterns
from .pipeline import Alert, FusionPipeline
from .protocol import (
    MalformedMessage,
    Message,
    MissingField,
    ProtocolError,
    UnknownKind,
    annotation_from_payload,
    parse_message,
    serialize_message,
)

MAX_LINE_BYTES = 8 * 1024 * 1024

MUTATING_KINDS = ("sensor_event", "annotation", "rating", "feedback", "add_pattern")

_ERROR_CODES = (
    (MalformedMessage, "malformed"),
    (UnknownKind, "unknown_kind"),
    (MissingField, "missing_field"),
    (UnknownConceptError, "unknown_concept"),
    (MissingAttributeError, "missing_attribute"),
    (OntologyError, "ontology"),
    (PatternSyntaxError, "bad_pattern"),
    (OutOfOrderEvent, "out_of_order"),
    (PatternError, "pattern"),
    (InvalidRating, "invalid_rating"),
    (UnknownRecommendation, "unknown_recommendation"),
    (CameraNotOnBoard, "camera_not_on_board"),
    (InvalidOutcome, "invalid_outcome"),
    (InvalidBudget, "invalid_budget"),
    (InvalidWeights, "invalid_weights"),
    (RetexError, "retex"),
    (DuplicateEventIdError, "duplicate_event"),
    (InvalidEventError, "invalid_event"),
    (StoreError, "store"),
    (ProtocolError, "protocol"),
    (ValueError, "invalid_value"),
    (KeyError, "missing_field"),
    (TypeError, "invalid_value"),
)


def error_code(exc: Exception) -> str:
    for klass, code in _ERROR_CODES:
        if isinstance(exc, klass):
            return code
    return "internal"


def board_payload(recommendation: Recommendation) -> dict:
    return {
        "recommendation_id": recommendation.recommendation_id,
        "issued_at": recommendation.issued_at,
        "cameras": [
            {
                "camera_id": cr.camera_id,
                "risk": cr.risk,
                "components": {
                    "anomaly": cr.components.anomaly,
                    "severity": cr.components.severity,
                    "pattern": cr.components.pattern,
                    "recency": cr.components.recency,
                },
                "rank": cr.rank,
                "explain_text": explain(recommendation, cr.camera_id),
            }
            for cr in recommendation.cameras
        ],
    }


def alert_payload(alert: Alert) -> dict:
    return {
        "name": alert.name,
        "event_ids": list(alert.match.event_ids),
        "camera_id": alert.camera_id,
        "pattern_text": alert.match.pattern_text,
        "start": alert.match.start,
        "end": alert.match.end,
    }


def dispatch(pipeline: FusionPipeline, msg: Message) -> list[Alert]:
    """Apply one mutating message to the pipeline; returns raised alerts."""
    if msg.kind == "sensor_event":
        return list(pipeline.ingest_event(event_from_record(msg.payload)).alerts)
    if msg.kind == "annotation":
        return list(pipeline.ingest_annotation(annotation_from_payload(msg.payload)).alerts)
    if msg.kind == "rating":
        p = msg.payload
        pipeline.apply_rating(p["camera_id"], p["hour_bucket"], p["concept"], p["rating"])
        return []
    if msg.kind == "feedback":
        p = msg.payload
        pipeline.apply_feedback(p["recommendation_id"], p["camera_id"], p["outcome"],
                                p.get("operator_id", ""))
        return []
    if msg.kind == "add_pattern":
        pipeline.add_pattern(msg.payload["name"], msg.payload["pattern_text"])
        return []
    raise UnknownKind(msg.kind)


class _Connection:
    """One client on any transport; owns outbound seq and subscribe state."""

    def __init__(self, send_line):
        self._send_line = send_line
        self._out_seq = 0
        self.subscribed = False
        self.last_in_seq = 0

    async def send(self, kind: str, payload: dict) -> None:
        self._out_seq += 1
        await self._send_line(serialize_message(Message(kind, self._out_seq, payload)))


class FusionServer:
    def __init__(self, config: ServiceConfig, pipeline: FusionPipeline):
        self.config = config
        self.pipeline = pipeline
        self.connections: set[_Connection] = set()
        self._servers = []
        self._tasks: list[asyncio.Task] = []

    # -- message flow ---------------------------------------------------------

    async def _broadcast(self, kind: str, payload: dict) -> None:
        for conn in list(self.connections):
            if conn.subscribed:
                with contextlib.suppress(ConnectionError, OSError):
                    await conn.send(kind, payload)

    async def _push_board(self) -> None:
        recommendation = self.pipeline.compute_board()
        await self._broadcast("board_update", board_payload(recommendation))

    async def handle_line(self, conn: _Connection, line: str) -> None:
        try:
            msg = parse_message(line)
        except ProtocolError as exc:
            await conn.send("error", {"seq": 0, "code": error_code(exc), "detail": str(exc)})
            return
        if msg.seq <= conn.last_in_seq:
            await conn.send("error", {
                "seq": msg.seq,
                "code": "bad_seq",
                "detail": f"seq {msg.seq} not above {conn.last_in_seq}",
            })
            return
        conn.last_in_seq = msg.seq

        if msg.kind == "subscribe":
            conn.subscribed = True
            await conn.send("ack", {
                "seq": msg.seq,
                "concepts": self.pipeline.ontology.ids(),
                "board_cadence_ms": self.config.board_cadence_ms,
            })
            return
        if msg.kind not in MUTATING_KINDS:
            await conn.send("error", {
                "seq": msg.seq,
                "code": "unexpected_kind",
                "detail": f"{msg.kind} is not accepted from clients",
            })
            return
        try:
            alerts = dispatch(self.pipeline, msg)
        except Exception as exc:  # per-connection errors keep the connection alive
            await conn.send("error", {
                "seq": msg.seq, "code": error_code(exc), "detail": str(exc),
            })
            return
        await conn.send("ack", {"seq": msg.seq})
        if alerts:
            for alert in alerts:
                await self._broadcast("alert", alert_payload(alert))
            await self._push_board()

    # -- transports -----------------------------------------------------------

    async def _serve_tcp(self, reader: asyncio.StreamReader,
                         writer: asyncio.StreamWriter) -> None:
        async def send_line(line: str) -> None:
            writer.write(line.encode("utf-8") + b"\n")
            await writer.drain()

        conn = _Connection(send_line)
        self.connections.add(conn)
        try:
            while True:
                raw = await reader.readline()
                if not raw:
                    break
                line = raw.decode("utf-8", errors="replace").strip()
                if line:
                    await self.handle_line(conn, line)
        except (ConnectionError, asyncio.IncompleteReadError):
            pass
        finally:
            self.connections.discard(conn)
            with contextlib.suppress(ConnectionError, OSError):
                writer.close()
                await writer.wait_closed()

    async def _serve_ws(self, websocket) -> None:
        async def send_line(line: str) -> None:
            await websocket.send(line)

        conn = _Connection(send_line)
        self.connections.add(conn)
        try:
            async for frame in websocket:
                if isinstance(frame, bytes):
                    frame = frame.decode("utf-8", errors="replace")
                line = frame.strip()
                if line:
                    await self.handle_line(conn, line)
        finally:
            self.connections.discard(conn)

    # -- periodic tasks ---------------------------------------------------------

    async def _board_loop(self) -> None:
        while True:
            await asyncio.sleep(self.config.board_cadence_ms / 1000)
            if any(c.subscribed for c in self.connections):
                await self._push_board()

    async def _snapshot_loop(self) -> None:
        while True:
            await asyncio.sleep(self.config.snapshot_interval_ms / 1000)
            self.pipeline.snapshot_models()

    # -- lifecycle ----------------------------------------------------------------

    async def start(self) -> None:
        from websockets.asyncio.server import serve as ws_serve

        host = self.config.host
        self._servers.append(await asyncio.start_server(
            self._serve_tcp, host, self.config.sensor_port, limit=MAX_LINE_BYTES))
        self._servers.append(await asyncio.start_server(
            self._serve_tcp, host, self.config.console_port, limit=MAX_LINE_BYTES))
        self._servers.append(await ws_serve(
            self._serve_ws, host, self.config.console_ws_port, max_size=MAX_LINE_BYTES))
        self._tasks.append(asyncio.create_task(self._board_loop()))
        self._tasks.append(asyncio.create_task(self._snapshot_loop()))

    async def stop(self) -> None:
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            with contextlib.suppress(asyncio.CancelledError):
                await task
        self._tasks.clear()
        for server in self._servers:
            server.close()
            if hasattr(server, "wait_closed"):
                with contextlib.suppress(Exception):
                    await server.wait_closed()
        self._servers.clear()
        self.pipeline.snapshot_models()
        self.pipeline.close()


async def run_server(config: ServiceConfig, pipeline: FusionPipeline,
                     ready: asyncio.Event | None = None) -> None:
    """Serve until cancelled; flushes snapshots and the store on the way out."""
    server = FusionServer(config, pipeline)
    await server.start()
    if ready is not None:
        ready.set()
    try:
        await asyncio.Future()
    except asyncio.CancelledError:
        pass
    finally:
        await server.stop()


def build_pipeline(config: ServiceConfig) -> FusionPipeline:
    from ..ontology import load_ontology_file, load_seed_ontology

    ontology = (
        load_ontology_file(config.ontology_path)
        if config.ontology_path
        else load_seed_ontology()
    )
    pipeline = FusionPipeline(config, ontology)
    if config.pattern_path:
        for named in load_patterns(config.pattern_path, ontology):
            pipeline.add_pattern(named.name, named.text)
    return pipeline


def run_pipe(config: ServiceConfig, lines, out=sys.stdout, err=sys.stderr) -> None:
    """Offline mode: read a message stream, write alerts then the final board.

    The same input bytes always produce the same output bytes and the same
    snapshot files, which is what makes end-to-end runs comparable.
    """
    pipeline = build_pipeline(config)
    out_seq = 0

    def emit(kind: str, payload: dict) -> None:
        nonlocal out_seq
        out_seq += 1
        out.write(serialize_message(Message(kind, out_seq, payload)) + "\n")

    last_in_seq = 0
    try:
        for lineno, line in enumerate(lines, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                msg = parse_message(line)
            except ProtocolError as exc:
                err.write(f"line {lineno}: {exc}\n")
                continue
            if msg.seq <= last_in_seq:
                err.write(f"line {lineno}: seq {msg.seq} not above {last_in_seq}\n")
                continue
            last_in_seq = msg.seq
            if msg.kind == "subscribe":
                continue
            if msg.kind not in MUTATING_KINDS:
                err.write(f"line {lineno}: {msg.kind} not accepted\n")
                continue
            try:
                alerts = dispatch(pipeline, msg)
            except Exception as exc:
                err.write(f"line {lineno}: {error_code(exc)}: {exc}\n")
                continue
            for alert in alerts:
                emit("alert", alert_payload(alert))
        emit("board_update", board_payload(pipeline.compute_board()))
        pipeline.snapshot_models()
    finally:
        pipeline.close()


class CorruptLog(Exception):
    def __init__(self, line: int, detail: str = ""):
        super().__init__(f"unreadable record at line {line}" + (f": {detail}" if detail else ""))
        self.line = line


def read_event_log(path):
    """Events from a stored segment or captured wire stream.

    Lines are either bare event records or sensor_event/annotation wire
    messages.  A torn final line is tolerated (reported, not fatal), any
    earlier unreadable line raises CorruptLog.
    """
    from ..events import annotation_to_event

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    events = []
    truncated = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if isinstance(obj, dict) and "kind" in obj:
                msg = parse_message(line)
                if msg.kind == "sensor_event":
                    events.append(event_from_record(msg.payload))
                elif msg.kind == "annotation":
                    events.append(annotation_to_event(annotation_from_payload(msg.payload)))
                continue
            events.append(event_from_record(obj))
        except (ValueError, ProtocolError, InvalidEventError) as exc:
            if lineno == len(lines):
                truncated = True
                break
            raise CorruptLog(lineno, str(exc)) from exc
    return events, truncated


def replay_into(pipeline: FusionPipeline, events, speed: float = 0.0) -> int:
    """Feed stored events through the pipeline in timestamp order.

    speed 0 means as fast as possible; speed N paces at N times real time.
    Duplicates of already-stored events are skipped, so replaying a log the
    pipeline already holds is harmless.
    """
    import time

    ingested = 0
    previous_ts = None
    for e in sorted(events, key=lambda ev: (ev.timestamp, ev.event_id)):
        if speed > 0 and previous_ts is not None and e.timestamp > previous_ts:
            time.sleep((e.timestamp - previous_ts) / 1000.0 / speed)
        previous_ts = e.timestamp
        if pipeline.ingest_event(e).stored:
            ingested += 1
    return ingested
