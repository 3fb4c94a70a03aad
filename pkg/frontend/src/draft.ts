/**
 * Annotation drafts: what an operator is about to submit for one camera.
 * A draft becomes two wire messages, the annotation itself plus a rating
 * for the same context, so the severity model learns from every label.
 */

import type { AnnotationPayload, RatingPayload } from "./protocol.js";

export const SEVERITY_LEVELS = [0, 1, 2, 3, 4] as const;

export interface AnnotationDraft {
  camera_id: string;
  concept: string | null;
  severity: number;
  free_text: string;
}

export function emptyDraft(cameraId: string): AnnotationDraft {
  return { camera_id: cameraId, concept: null, severity: 2, free_text: "" };
}

/** Severity stays one of the five levels; anything else leaves the draft alone. */
export function setSeverity(draft: AnnotationDraft, severity: number): AnnotationDraft {
  if (!Number.isInteger(severity) || severity < 0 || severity > 4) {
    return draft;
  }
  return { ...draft, severity };
}

export function setConcept(draft: AnnotationDraft, concept: string | null,
                           known: readonly string[]): AnnotationDraft {
  if (concept !== null && !known.includes(concept)) {
    return draft;
  }
  return { ...draft, concept };
}

export function setFreeText(draft: AnnotationDraft, text: string): AnnotationDraft {
  return { ...draft, free_text: text };
}

/** Submit stays disabled until a concept is chosen from the known set. */
export function canSubmit(draft: AnnotationDraft, known: readonly string[]): boolean {
  return (
    draft.camera_id !== "" &&
    draft.concept !== null &&
    known.includes(draft.concept) &&
    Number.isInteger(draft.severity) &&
    draft.severity >= 0 &&
    draft.severity <= 4
  );
}

/** Hour-of-day bucket for a ms-UTC timestamp, matching the service. */
export function hourBucket(timestampMs: number): number {
  return Math.floor(timestampMs / 3_600_000) % 24;
}

export function annotationPayload(
  draft: AnnotationDraft,
  annotationId: string,
  operatorId: string,
  timestampMs: number,
): AnnotationPayload {
  if (draft.concept === null) {
    throw new Error("draft has no concept");
  }
  return {
    annotation_id: annotationId,
    camera_id: draft.camera_id,
    timestamp: timestampMs,
    concept: draft.concept,
    severity: draft.severity,
    operator_id: operatorId,
    free_text: draft.free_text,
  };
}

export function ratingPayload(draft: AnnotationDraft, timestampMs: number): RatingPayload {
  if (draft.concept === null) {
    throw new Error("draft has no concept");
  }
  return {
    camera_id: draft.camera_id,
    hour_bucket: hourBucket(timestampMs),
    concept: draft.concept,
    rating: draft.severity,
  };
}
