/**
 * Live console session: one WebSocket to the service's console gateway.
 *
 * Owns the per-connection seq counter, correlates acks and errors back to
 * the requests that caused them, resubscribes after reconnecting, and
 * backs off exponentially (1 s doubling to 30 s) while the service is
 * away. The socket factory and clock are injectable so the whole state
 * machine is testable without a network.
 */

import type {
  AlertPayload,
  BoardUpdatePayload,
  FeedbackPayload,
} from "./protocol.js";
import {
  ProtocolError,
  annotationMessage,
  feedbackMessage,
  addPatternMessage,
  parseServerFrame,
  ratingMessage,
  serialize,
  subscribeMessage,
} from "./protocol.js";
import type { AnnotationDraft } from "./draft.js";
import { annotationPayload, ratingPayload } from "./draft.js";

export type SessionState = "connecting" | "connected" | "reconnecting" | "disconnected";

/** What a pending seq was for, echoed back on its ack or error. */
export type RequestContext =
  | { kind: "subscribe" }
  | { kind: "annotation"; camera_id: string; annotation_id: string }
  | { kind: "rating"; camera_id: string }
  | { kind: "feedback"; camera_id: string; outcome: "accept" | "dismiss" }
  | { kind: "add_pattern"; name: string };

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionCallbacks {
  onState?: (state: SessionState) => void;
  /** Subscribe ack: concept inventory plus board cadence. */
  onReady?: (concepts: string[], boardCadenceMs: number | undefined) => void;
  onBoard?: (payload: BoardUpdatePayload) => void;
  onAlert?: (payload: AlertPayload) => void;
  onAcked?: (context: RequestContext) => void;
  /** Server error replies, rendered inline; context is null when the
   * error was not tied to anything this session sent. */
  onServerError?: (context: RequestContext | null, code: string, detail: string) => void;
}

export interface SessionOptions {
  url: string;
  operatorId: string;
  callbacks: SessionCallbacks;
  socketFactory?: SocketFactory;
  /** Annotation id minting, overridable for deterministic tests. */
  mintId?: () => string;
}

const BACKOFF_BASE_MS = 1_000;
const BACKOFF_MAX_MS = 30_000;

function defaultSocketFactory(url: string): SocketLike {
  return new WebSocket(url) as unknown as SocketLike;
}

export class ConsoleSession {
  private readonly url: string;
  private readonly operatorId: string;
  private readonly callbacks: SessionCallbacks;
  private readonly factory: SocketFactory;
  private readonly mintId: () => string;

  private socket: SocketLike | null = null;
  private open = false;
  private outSeq = 0;
  private pending = new Map<number, RequestContext>();
  private reconnectAttempt = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private shouldReconnect = false;
  private minted = 0;

  constructor(options: SessionOptions) {
    this.url = options.url;
    this.operatorId = options.operatorId;
    this.callbacks = options.callbacks;
    this.factory = options.socketFactory ?? defaultSocketFactory;
    this.mintId =
      options.mintId ??
      (() => `ann-${Date.now().toString(36)}-${(++this.minted).toString(36)}`);
  }

  connect(): void {
    this.shouldReconnect = true;
    this.callbacks.onState?.("connecting");
    this.createSocket();
  }

  disconnect(): void {
    this.shouldReconnect = false;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    const socket = this.socket;
    this.socket = null;
    this.open = false;
    this.pending.clear();
    socket?.close();
    this.callbacks.onState?.("disconnected");
  }

  get connected(): boolean {
    return this.open;
  }

  /**
   * Send the draft as an annotation plus a rating for the same context.
   * Returns the minted annotation id, or null when not connected.
   */
  submitAnnotation(draft: AnnotationDraft, timestampMs: number): string | null {
    if (!this.open) {
      return null;
    }
    const annotationId = this.mintId();
    const annotation = annotationPayload(draft, annotationId, this.operatorId, timestampMs);
    const rating = ratingPayload(draft, timestampMs);
    this.sendTracked(
      (seq) => annotationMessage(seq, annotation),
      { kind: "annotation", camera_id: draft.camera_id, annotation_id: annotationId },
    );
    this.sendTracked(
      (seq) => ratingMessage(seq, rating),
      { kind: "rating", camera_id: draft.camera_id },
    );
    return annotationId;
  }

  /** Feedback always names the recommendation the operator was looking at. */
  sendFeedback(recommendationId: string, cameraId: string,
               outcome: "accept" | "dismiss"): boolean {
    if (!this.open) {
      return false;
    }
    const payload: FeedbackPayload = {
      recommendation_id: recommendationId,
      camera_id: cameraId,
      outcome,
      operator_id: this.operatorId,
    };
    this.sendTracked(
      (seq) => feedbackMessage(seq, payload),
      { kind: "feedback", camera_id: cameraId, outcome },
    );
    return true;
  }

  addPattern(name: string, patternText: string): boolean {
    if (!this.open) {
      return false;
    }
    this.sendTracked(
      (seq) => addPatternMessage(seq, name, patternText),
      { kind: "add_pattern", name },
    );
    return true;
  }

  private sendTracked(
    build: (seq: number) => ReturnType<typeof subscribeMessage>,
    context: RequestContext,
  ): void {
    const seq = ++this.outSeq;
    this.pending.set(seq, context);
    this.socket?.send(serialize(build(seq)));
  }

  private createSocket(): void {
    const socket = this.factory(this.url);
    this.socket = socket;

    socket.onopen = () => {
      if (this.socket !== socket) {
        return; // superseded while connecting
      }
      this.open = true;
      this.reconnectAttempt = 0;
      this.outSeq = 0; // seq is per connection on the wire
      this.pending.clear();
      this.callbacks.onState?.("connected");
      this.sendTracked(subscribeMessage, { kind: "subscribe" });
    };

    socket.onmessage = (ev) => {
      if (this.socket !== socket) {
        return;
      }
      this.handleFrame(ev.data);
    };

    socket.onclose = () => {
      if (this.socket !== socket) {
        return;
      }
      this.socket = null;
      this.open = false;
      this.pending.clear();
      if (this.shouldReconnect) {
        this.scheduleReconnect();
      } else {
        this.callbacks.onState?.("disconnected");
      }
    };

    socket.onerror = () => {
      // the close handler owns recovery
    };
  }

  private handleFrame(data: unknown): void {
    let msg;
    try {
      msg = parseServerFrame(data);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.callbacks.onServerError?.(null, "bad_frame", err.message);
        return;
      }
      throw err;
    }
    switch (msg.kind) {
      case "board_update":
        this.callbacks.onBoard?.(msg.payload);
        return;
      case "alert":
        this.callbacks.onAlert?.(msg.payload);
        return;
      case "ack": {
        const context = this.pending.get(msg.payload.seq);
        if (context === undefined) {
          return;
        }
        this.pending.delete(msg.payload.seq);
        if (context.kind === "subscribe") {
          this.callbacks.onReady?.(msg.payload.concepts ?? [], msg.payload.board_cadence_ms);
        }
        this.callbacks.onAcked?.(context);
        return;
      }
      case "error": {
        const context = this.pending.get(msg.payload.seq) ?? null;
        if (context !== null) {
          this.pending.delete(msg.payload.seq);
        }
        this.callbacks.onServerError?.(context, msg.payload.code, msg.payload.detail);
        return;
      }
      case "other":
        return; // newer server, kinds we do not know; skip
    }
  }

  private scheduleReconnect(): void {
    this.callbacks.onState?.("reconnecting");
    const delay = Math.min(BACKOFF_BASE_MS * 2 ** this.reconnectAttempt, BACKOFF_MAX_MS);
    this.reconnectAttempt += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.createSocket();
    }, delay);
  }
}
