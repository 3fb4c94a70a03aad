/**
 * Board view state: a pure reducer over server messages and UI actions.
 *
 * Tiles mirror the latest board_update exactly: same order, same values,
 * never more entries than the message carried. Handled/confirmation marks
 * are per-camera decorations that reset when the next board arrives.
 */

import type { BoardUpdatePayload, CameraTile } from "./protocol.js";

export type TileMark = "accepted" | "dismissed" | "annotated";

export interface BoardState {
  tiles: readonly CameraTile[];
  recommendationId: string | null;
  issuedAt: number | null;
  /** Local clock (ms) of the last board_update, or of subscribe when none
   * has arrived yet; the staleness reference point. */
  lastUpdateAt: number | null;
  cadenceMs: number;
  selected: number; // index into tiles, -1 when the board is empty
  marks: Readonly<Record<string, TileMark>>;
}

export const DEFAULT_CADENCE_MS = 5_000;

export function initialBoard(): BoardState {
  return {
    tiles: [],
    recommendationId: null,
    issuedAt: null,
    lastUpdateAt: null,
    cadenceMs: DEFAULT_CADENCE_MS,
    selected: -1,
    marks: {},
  };
}

/** Subscribe ack arrived: record the cadence and start the staleness clock. */
export function applySubscribed(state: BoardState, cadenceMs: number | undefined,
                                now: number): BoardState {
  return {
    ...state,
    cadenceMs: cadenceMs && cadenceMs > 0 ? cadenceMs : state.cadenceMs,
    lastUpdateAt: now,
  };
}

export function applyBoard(state: BoardState, payload: BoardUpdatePayload,
                           now: number): BoardState {
  const tiles = payload.cameras.slice(); // tile objects stay verbatim
  // follow the selected camera across re-ranks; fall back to the top tile
  let selected = -1;
  if (tiles.length > 0) {
    const previous = state.selected >= 0 ? state.tiles[state.selected] : undefined;
    selected = previous
      ? tiles.findIndex((t) => t.camera_id === previous.camera_id)
      : -1;
    if (selected < 0) {
      selected = 0;
    }
  }
  return {
    ...state,
    tiles,
    recommendationId: payload.recommendation_id,
    issuedAt: payload.issued_at,
    lastUpdateAt: now,
    selected,
    marks: {}, // a new recommendation clears handled/confirmation marks
  };
}

export function selectTile(state: BoardState, index: number): BoardState {
  if (index < 0 || index >= state.tiles.length) {
    return state;
  }
  return { ...state, selected: index };
}

export function moveSelection(state: BoardState, delta: number): BoardState {
  if (state.tiles.length === 0) {
    return state;
  }
  const at = state.selected < 0 ? 0 : state.selected + delta;
  return selectTile(state, Math.max(0, Math.min(state.tiles.length - 1, at)));
}

export function markTile(state: BoardState, cameraId: string, mark: TileMark): BoardState {
  if (!state.tiles.some((t) => t.camera_id === cameraId)) {
    return state;
  }
  return { ...state, marks: { ...state.marks, [cameraId]: mark } };
}

export function selectedTile(state: BoardState): CameraTile | null {
  return state.selected >= 0 ? state.tiles[state.selected] ?? null : null;
}

export function secondsSinceUpdate(state: BoardState, now: number): number | null {
  if (state.lastUpdateAt === null) {
    return null;
  }
  return Math.max(0, (now - state.lastUpdateAt) / 1000);
}

/** Stale once more than three cadence intervals pass without an update. */
export function isStale(state: BoardState, now: number): boolean {
  if (state.lastUpdateAt === null) {
    return false;
  }
  return now - state.lastUpdateAt > 3 * state.cadenceMs;
}
