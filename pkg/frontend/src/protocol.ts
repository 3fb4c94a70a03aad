/**
 * Wire format shared with the service: one UTF-8 JSON envelope per
 * WebSocket frame, `{kind, seq, payload}`, bodies identical to the TCP
 * transport. Field names are snake_case because they are the wire
 * contract, not local style.
 */

export interface Envelope {
  kind: string;
  seq: number;
  payload: Record<string, unknown>;
}

export interface ComponentValues {
  anomaly: number;
  severity: number;
  pattern: number;
  recency: number;
}

/** One board tile. Risk, rank and explain_text are server-computed and
 * must be displayed verbatim; the console never recomputes them. */
export interface CameraTile {
  camera_id: string;
  risk: number;
  components: ComponentValues;
  rank: number;
  explain_text: string;
}

export interface BoardUpdatePayload {
  recommendation_id: string;
  issued_at: number;
  cameras: CameraTile[];
}

export interface AlertPayload {
  name: string;
  camera_id: string;
  event_ids: string[];
  pattern_text?: string;
  start?: number;
  end?: number;
}

/** Plain acks carry just the inbound seq; the subscribe ack additionally
 * carries the concept inventory and the board cadence. */
export interface AckPayload {
  seq: number;
  concepts?: string[];
  board_cadence_ms?: number;
}

export interface ErrorPayload {
  seq: number;
  code: string;
  detail: string;
}

export interface AnnotationPayload {
  annotation_id: string;
  camera_id: string;
  timestamp: number;
  concept: string;
  severity: number;
  operator_id: string;
  free_text: string;
}

export interface RatingPayload {
  camera_id: string;
  hour_bucket: number;
  concept: string;
  rating: number;
}

export interface FeedbackPayload {
  recommendation_id: string;
  camera_id: string;
  outcome: "accept" | "dismiss";
  operator_id?: string;
}

export type ServerMessage =
  | { kind: "ack"; seq: number; payload: AckPayload }
  | { kind: "error"; seq: number; payload: ErrorPayload }
  | { kind: "alert"; seq: number; payload: AlertPayload }
  | { kind: "board_update"; seq: number; payload: BoardUpdatePayload }
  | { kind: "other"; seq: number; payload: Record<string, unknown>; rawKind: string };

export class ProtocolError extends Error {}

const SERVER_REQUIRED: Record<string, string[]> = {
  ack: ["seq"],
  error: ["seq", "code", "detail"],
  alert: ["name", "camera_id", "event_ids"],
  board_update: ["recommendation_id", "issued_at", "cameras"],
};

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

/**
 * Parse one frame from the service. Unknown kinds come back as
 * `{kind: "other"}` so older consoles survive newer servers; structural
 * garbage throws.
 */
export function parseServerFrame(data: unknown): ServerMessage {
  if (typeof data !== "string") {
    throw new ProtocolError("frame is not text");
  }
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    throw new ProtocolError(`frame is not JSON: ${data.slice(0, 80)}`);
  }
  if (!isRecord(raw)) {
    throw new ProtocolError("frame is not an object");
  }
  const { kind, seq, payload } = raw;
  if (typeof kind !== "string" || !kind) {
    throw new ProtocolError("missing kind");
  }
  if (typeof seq !== "number" || !Number.isInteger(seq) || seq < 0) {
    throw new ProtocolError("missing or bad seq");
  }
  if (!isRecord(payload)) {
    throw new ProtocolError("payload must be an object");
  }
  const required = SERVER_REQUIRED[kind];
  if (required === undefined) {
    return { kind: "other", seq, payload, rawKind: kind };
  }
  for (const field of required) {
    if (!(field in payload)) {
      throw new ProtocolError(`${kind} payload missing ${field}`);
    }
  }
  return { kind, seq, payload } as ServerMessage;
}

export function serialize(env: Envelope): string {
  return JSON.stringify({ kind: env.kind, seq: env.seq, payload: env.payload });
}

export function subscribeMessage(seq: number): Envelope {
  return { kind: "subscribe", seq, payload: { role: "console" } };
}

export function annotationMessage(seq: number, payload: AnnotationPayload): Envelope {
  return { kind: "annotation", seq, payload: { ...payload } };
}

export function ratingMessage(seq: number, payload: RatingPayload): Envelope {
  return { kind: "rating", seq, payload: { ...payload } };
}

export function feedbackMessage(seq: number, payload: FeedbackPayload): Envelope {
  return { kind: "feedback", seq, payload: { ...payload } };
}

export function addPatternMessage(seq: number, name: string, patternText: string): Envelope {
  return { kind: "add_pattern", seq, payload: { name, pattern_text: patternText } };
}
