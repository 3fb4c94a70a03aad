/**
 * Browser entry point: wires the session, board state, draft state and
 * keyboard handling to a plain DOM rendering. No framework; the board is
 * at most a few dozen tiles and is rebuilt per update.
 */

import type { AlertPayload, CameraTile } from "./protocol.js";
import {
  BoardState,
  applyBoard,
  applySubscribed,
  initialBoard,
  isStale,
  markTile,
  moveSelection,
  secondsSinceUpdate,
  selectTile,
  selectedTile,
} from "./board.js";
import {
  AnnotationDraft,
  SEVERITY_LEVELS,
  canSubmit,
  emptyDraft,
  setConcept,
  setFreeText,
  setSeverity,
} from "./draft.js";
import { isEditingTarget, keyAction } from "./keys.js";
import { ConsoleSession, SessionState } from "./session.js";

interface ConsoleOptions {
  gateway: string;
  operatorId: string;
}

export function startConsole(root: HTMLElement, options: ConsoleOptions): void {
  let board: BoardState = initialBoard();
  let concepts: string[] = [];
  let draft: AnnotationDraft | null = null;
  let connection: SessionState = "connecting";
  let notice = "";
  const alerts: AlertPayload[] = [];

  const session = new ConsoleSession({
    url: options.gateway,
    operatorId: options.operatorId,
    callbacks: {
      onState: (state) => {
        connection = state;
        render();
      },
      onReady: (known, cadenceMs) => {
        concepts = known;
        board = applySubscribed(board, cadenceMs, Date.now());
        render();
      },
      onBoard: (payload) => {
        board = applyBoard(board, payload, Date.now());
        render();
      },
      onAlert: (payload) => {
        alerts.unshift(payload);
        alerts.length = Math.min(alerts.length, 8);
        render();
      },
      onAcked: (context) => {
        if (context.kind === "annotation") {
          board = markTile(board, context.camera_id, "annotated");
          notice = `annotation ${context.annotation_id} stored`;
        } else if (context.kind === "feedback") {
          board = markTile(
            board,
            context.camera_id,
            context.outcome === "accept" ? "accepted" : "dismissed",
          );
        }
        render();
      },
      onServerError: (context, code, detail) => {
        const scope = context ? context.kind : "connection";
        notice = `${scope}: [${code}] ${detail}`;
        render();
      },
    },
  });

  function sendFeedback(outcome: "accept" | "dismiss"): void {
    const tile = selectedTile(board);
    if (!tile || board.recommendationId === null) {
      notice = "no tile selected on a live board";
      return;
    }
    session.sendFeedback(board.recommendationId, tile.camera_id, outcome);
  }

  function submitDraft(): void {
    if (!draft || !canSubmit(draft, concepts)) {
      return;
    }
    // annotations ride the stream's own clock, not the operator's wall clock
    const timestamp = board.issuedAt ?? Date.now();
    const annotationId = session.submitAnnotation(draft, timestamp);
    notice = annotationId === null ? "not connected" : "annotation sent";
    draft = null;
    render();
  }

  window.addEventListener("keydown", (event) => {
    const action = keyAction(event.key, { editing: isEditingTarget(event.target) });
    if (!action) {
      return;
    }
    event.preventDefault();
    switch (action.type) {
      case "select":
        board = selectTile(board, action.index);
        break;
      case "move":
        board = moveSelection(board, action.delta);
        break;
      case "feedback":
        sendFeedback(action.outcome);
        break;
      case "annotate": {
        const tile = selectedTile(board);
        if (tile) {
          draft = emptyDraft(tile.camera_id);
        }
        break;
      }
      case "cancel":
        draft = null;
        break;
    }
    render();
  });

  function el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    node.className = className;
    if (text !== undefined) {
      node.textContent = text;
    }
    return node;
  }

  function renderTile(tile: CameraTile, index: number): HTMLElement {
    const card = el("div", "tile");
    if (index === board.selected) {
      card.classList.add("selected");
    }
    const mark = board.marks[tile.camera_id];
    if (mark) {
      card.classList.add(mark);
    }
    const head = el("div", "tile-head");
    head.append(
      el("span", "tile-key", index < 10 ? String((index + 1) % 10) : ""),
      el("span", "tile-camera", tile.camera_id),
      el("span", "tile-risk", tile.risk.toFixed(3)),
      el("span", "tile-rank", `#${tile.rank}`),
    );
    card.append(head);
    const bars = el("div", "bars");
    const values: [string, number][] = [
      ["anomaly", tile.components.anomaly],
      ["severity", tile.components.severity],
      ["pattern", tile.components.pattern],
      ["recency", tile.components.recency],
    ];
    for (const [name, value] of values) {
      const row = el("div", "bar-row");
      row.append(el("span", "bar-name", name));
      const track = el("div", "bar-track");
      const fill = el("div", "bar-fill");
      fill.style.width = `${Math.max(0, Math.min(1, value)) * 100}%`;
      track.append(fill);
      row.append(track);
      bars.append(row);
    }
    card.append(bars);
    if (mark) {
      card.append(el("div", "tile-mark", mark));
    }
    card.append(el("pre", "explain", tile.explain_text));
    card.addEventListener("click", () => {
      board = selectTile(board, index);
      render();
    });
    return card;
  }

  function renderDraftForm(active: AnnotationDraft): HTMLElement {
    const panel = el("div", "draft");
    panel.append(el("div", "draft-title", `annotate ${active.camera_id}`));

    const conceptSelect = el("select", "draft-concept");
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "choose a concept";
    conceptSelect.append(blank);
    for (const id of concepts) {
      const option = document.createElement("option");
      option.value = id;
      option.textContent = id;
      option.selected = id === active.concept;
      conceptSelect.append(option);
    }
    conceptSelect.addEventListener("change", () => {
      draft = setConcept(active, conceptSelect.value || null, concepts);
      render();
    });
    panel.append(conceptSelect);

    const severityRow = el("div", "draft-severity");
    for (const level of SEVERITY_LEVELS) {
      const button = el("button", "severity-button", String(level));
      if (level === active.severity) {
        button.classList.add("chosen");
      }
      button.addEventListener("click", () => {
        draft = setSeverity(active, level);
        render();
      });
      severityRow.append(button);
    }
    panel.append(severityRow);

    const text = document.createElement("textarea");
    text.className = "draft-text";
    text.placeholder = "free text";
    text.value = active.free_text;
    text.addEventListener("input", () => {
      draft = setFreeText(active, text.value);
    });
    panel.append(text);

    const submit = el("button", "draft-submit", "submit");
    submit.disabled = !canSubmit(active, concepts);
    submit.addEventListener("click", submitDraft);
    panel.append(submit);
    panel.append(el("div", "draft-hint", "Esc cancels"));
    return panel;
  }

  function render(): void {
    root.textContent = "";
    const now = Date.now();

    const status = el("div", "status");
    status.append(el("span", `conn conn-${connection}`, connection));
    const age = secondsSinceUpdate(board, now);
    if (age !== null) {
      status.append(el("span", "age", `board ${age.toFixed(0)}s ago`));
    }
    if (isStale(board, now) || connection === "reconnecting") {
      status.append(el("span", "stale", "STALE — board out of date"));
    }
    if (notice) {
      status.append(el("span", "notice", notice));
    }
    root.append(status);

    const tiles = el("div", "board");
    board.tiles.forEach((tile, index) => tiles.append(renderTile(tile, index)));
    if (board.tiles.length === 0) {
      tiles.append(el("div", "empty", "no board yet"));
    }
    root.append(tiles);

    if (draft) {
      root.append(renderDraftForm(draft));
    }

    if (alerts.length > 0) {
      const list = el("div", "alerts");
      list.append(el("div", "alerts-title", "alerts"));
      for (const alert of alerts) {
        list.append(
          el("div", "alert-row", `${alert.name} on ${alert.camera_id} (${alert.event_ids.join(", ")})`),
        );
      }
      root.append(list);
    }

    root.append(
      el("div", "help", "keys: 1-9/0 select tile, arrows move, A accept, D dismiss, N annotate"),
    );
  }

  setInterval(render, 500); // keeps the staleness readout moving
  render();
  session.connect();
}
