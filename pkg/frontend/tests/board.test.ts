import { describe, expect, it } from "vitest";

import {
  applyBoard,
  applySubscribed,
  initialBoard,
  isStale,
  markTile,
  moveSelection,
  secondsSinceUpdate,
  selectTile,
  selectedTile,
} from "../src/board.js";
import type { BoardUpdatePayload, CameraTile } from "../src/protocol.js";

function tile(cameraId: string, rank: number, risk: number): CameraTile {
  return {
    camera_id: cameraId,
    risk,
    rank,
    components: { anomaly: 0.1, severity: 0.5, pattern: 0, recency: 1 },
    explain_text: `camera ${cameraId} risk ${risk}`,
  };
}

function update(id: string, tiles: CameraTile[]): BoardUpdatePayload {
  return { recommendation_id: id, issued_at: 1_700_000_000_000, cameras: tiles };
}

describe("applyBoard", () => {
  it("mirrors the message: same tiles, same order, nothing added", () => {
    const payload = update("rec-1", [tile("c", 1, 0.9), tile("a", 2, 0.5), tile("b", 3, 0.2)]);
    const state = applyBoard(initialBoard(), payload, 1000);
    expect(state.tiles.map((t) => t.camera_id)).toEqual(["c", "a", "b"]);
    expect(state.tiles).toHaveLength(payload.cameras.length);
    // tile objects are the payload's own, values verbatim
    expect(state.tiles[0]).toBe(payload.cameras[0]);
    expect(state.recommendationId).toBe("rec-1");
    expect(state.lastUpdateAt).toBe(1000);
  });

  it("selects the top tile on the first board", () => {
    const state = applyBoard(initialBoard(), update("r", [tile("a", 1, 1)]), 0);
    expect(state.selected).toBe(0);
    expect(selectedTile(state)?.camera_id).toBe("a");
  });

  it("follows the selected camera across re-ranking", () => {
    let state = applyBoard(initialBoard(), update("r1", [tile("a", 1, 1), tile("b", 2, 0.5)]), 0);
    state = selectTile(state, 1); // b
    state = applyBoard(state, update("r2", [tile("b", 1, 0.9), tile("a", 2, 0.1)]), 1);
    expect(selectedTile(state)?.camera_id).toBe("b");
    expect(state.selected).toBe(0);
  });

  it("falls back to the top when the selected camera drops off", () => {
    let state = applyBoard(initialBoard(), update("r1", [tile("a", 1, 1), tile("b", 2, 0.5)]), 0);
    state = selectTile(state, 1);
    state = applyBoard(state, update("r2", [tile("a", 1, 1)]), 1);
    expect(state.selected).toBe(0);
  });

  it("clears marks when a new recommendation arrives", () => {
    let state = applyBoard(initialBoard(), update("r1", [tile("a", 1, 1)]), 0);
    state = markTile(state, "a", "accepted");
    expect(state.marks["a"]).toBe("accepted");
    state = applyBoard(state, update("r2", [tile("a", 1, 1)]), 1);
    expect(state.marks).toEqual({});
  });

  it("renders an empty board as empty", () => {
    const state = applyBoard(initialBoard(), update("r", []), 5);
    expect(state.tiles).toEqual([]);
    expect(state.selected).toBe(-1);
    expect(selectedTile(state)).toBeNull();
  });
});

describe("marks and selection", () => {
  it("ignores marks for cameras not on the board", () => {
    const state = applyBoard(initialBoard(), update("r", [tile("a", 1, 1)]), 0);
    expect(markTile(state, "ghost", "dismissed")).toBe(state);
  });

  it("selection is clamped to the board", () => {
    const state = applyBoard(initialBoard(), update("r", [tile("a", 1, 1), tile("b", 2, 0)]), 0);
    expect(selectTile(state, 5)).toBe(state);
    expect(selectTile(state, -1)).toBe(state);
    expect(selectTile(state, 1).selected).toBe(1);
  });

  it("moveSelection walks and stops at the edges", () => {
    let state = applyBoard(
      initialBoard(),
      update("r", [tile("a", 1, 1), tile("b", 2, 0.5), tile("c", 3, 0.1)]),
      0,
    );
    state = moveSelection(state, 1);
    expect(state.selected).toBe(1);
    state = moveSelection(state, 1);
    state = moveSelection(state, 1);
    expect(state.selected).toBe(2);
    state = moveSelection(state, -1);
    expect(state.selected).toBe(1);
  });
});

describe("staleness", () => {
  it("is fresh until three cadence intervals pass", () => {
    let state = applySubscribed(initialBoard(), 5000, 0);
    state = applyBoard(state, update("r", [tile("a", 1, 1)]), 10_000);
    expect(isStale(state, 10_000 + 3 * 5000)).toBe(false);
    expect(isStale(state, 10_000 + 3 * 5000 + 1)).toBe(true);
    expect(secondsSinceUpdate(state, 22_000)).toBe(12);
  });

  it("uses the cadence announced at subscribe time", () => {
    const state = applySubscribed(initialBoard(), 100, 0);
    expect(state.cadenceMs).toBe(100);
    expect(isStale(state, 301)).toBe(true);
  });

  it("waits for the subscribe ack before going stale", () => {
    const state = initialBoard();
    expect(isStale(state, 1e12)).toBe(false);
    expect(secondsSinceUpdate(state, 1e12)).toBeNull();
  });

  it("keeps the default cadence when the ack omits it", () => {
    const state = applySubscribed(initialBoard(), undefined, 50);
    expect(state.cadenceMs).toBe(5000);
    expect(state.lastUpdateAt).toBe(50);
  });

  it("a fresh update resets the clock after a stale stretch", () => {
    let state = applySubscribed(initialBoard(), 1000, 0);
    expect(isStale(state, 10_000)).toBe(true);
    state = applyBoard(state, update("r", [tile("a", 1, 1)]), 10_000);
    expect(isStale(state, 10_500)).toBe(false);
  });
});
