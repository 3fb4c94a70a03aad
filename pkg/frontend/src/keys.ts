/**
 * Keyboard-first interaction: number keys select a tile, A/D send
 * accept/dismiss feedback, N opens the annotation form. While a form
 * field has focus only Escape is intercepted, so typing stays typing.
 */

export type KeyAction =
  | { type: "select"; index: number }
  | { type: "move"; delta: 1 | -1 }
  | { type: "feedback"; outcome: "accept" | "dismiss" }
  | { type: "annotate" }
  | { type: "cancel" };

export interface KeyContext {
  /** True when focus sits in an input, textarea or select. */
  editing: boolean;
}

export function keyAction(key: string, ctx: KeyContext): KeyAction | null {
  if (ctx.editing) {
    return key === "Escape" ? { type: "cancel" } : null;
  }
  if (key >= "1" && key <= "9") {
    return { type: "select", index: key.charCodeAt(0) - "1".charCodeAt(0) };
  }
  switch (key) {
    case "0":
      return { type: "select", index: 9 };
    case "ArrowDown":
      return { type: "move", delta: 1 };
    case "ArrowUp":
      return { type: "move", delta: -1 };
    case "a":
    case "A":
      return { type: "feedback", outcome: "accept" };
    case "d":
    case "D":
      return { type: "feedback", outcome: "dismiss" };
    case "n":
    case "N":
      return { type: "annotate" };
    case "Escape":
      return { type: "cancel" };
    default:
      return null;
  }
}

const EDITING_TAGS = new Set(["INPUT", "TEXTAREA", "SELECT"]);

export function isEditingTarget(target: EventTarget | null): boolean {
  const el = target as { tagName?: string; isContentEditable?: boolean } | null;
  if (!el || typeof el.tagName !== "string") {
    return false;
  }
  return EDITING_TAGS.has(el.tagName) || el.isContentEditable === true;
}
