// Console state and the pure update/derivation logic the DOM layer calls
// into. Drafts are held per tab and never cleared by switching tabs; the
// canvas bytes are always exactly what the service last returned.

import type { MaskView } from "./api.js";
import { NormBox, splitConcepts } from "./transform.js";

export type TabId = "remove_change" | "inpaint" | "generate";

export interface StrokeDraft {
  points: [number, number][];
  brushRadius: number;
}

export interface RemoveChangeDraft {
  strokes: StrokeDraft[];
  referringText: string;
  groundingText: string; // "Enter grounding text for generating a new image"
}

export interface InpaintDraft {
  boxes: NormBox[];
  groundingText: string; // semicolon-joined concepts
}

export interface GenerateDraft {
  boxes: NormBox[];
  groundingText: string;
  caption: string;
}

export interface UiState {
  sessionId: string | null;
  activeTab: TabId;
  busy: boolean; // one in-flight API call; controls disabled while true
  canvasB64: string | null;
  canvasHash: string | null;
  canvasDims: { width: number; height: number } | null;
  masks: MaskView[];
  selectedMaskId: string | null;
  dragOffsetPx: { dx: number; dy: number };
  transcript: [string, string][];
  chatDraft: string;
  lastLatencies: { capability: string; duration_s: number }[];
  drafts: {
    remove_change: RemoveChangeDraft;
    inpaint: InpaintDraft;
    generate: GenerateDraft;
  };
  error: string | null;
}

export const DEFAULT_BRUSH_RADIUS = 0.004;

export function initialState(): UiState {
  return {
    sessionId: null,
    activeTab: "remove_change",
    busy: false,
    canvasB64: null,
    canvasHash: null,
    canvasDims: null,
    masks: [],
    selectedMaskId: null,
    dragOffsetPx: { dx: 0, dy: 0 },
    transcript: [],
    chatDraft: "",
    lastLatencies: [],
    drafts: {
      remove_change: { strokes: [], referringText: "", groundingText: "" },
      inpaint: { boxes: [], groundingText: "" },
      generate: { boxes: [], groundingText: "", caption: "" },
    },
    error: null,
  };
}

export function selectTab(state: UiState, tab: TabId): UiState {
  // other tabs' drafts survive the switch
  return { ...state, activeTab: tab };
}

export function addStroke(state: UiState, stroke: StrokeDraft): UiState {
  const draft = state.drafts.remove_change;
  return {
    ...state,
    drafts: {
      ...state.drafts,
      remove_change: { ...draft, strokes: [...draft.strokes, stroke] },
    },
  };
}

export function clearSketch(state: UiState, tab: TabId): UiState {
  const drafts = { ...state.drafts };
  if (tab === "remove_change") {
    drafts.remove_change = { ...drafts.remove_change, strokes: [] };
  } else if (tab === "inpaint") {
    drafts.inpaint = { ...drafts.inpaint, boxes: [], groundingText: "" };
  } else {
    drafts.generate = { ...drafts.generate, boxes: [], groundingText: "" };
  }
  return { ...state, drafts };
}

export function addBox(state: UiState, tab: "inpaint" | "generate", box: NormBox): UiState {
  const drafts = { ...state.drafts };
  if (tab === "inpaint") {
    drafts.inpaint = { ...drafts.inpaint, boxes: [...drafts.inpaint.boxes, box] };
  } else {
    drafts.generate = { ...drafts.generate, boxes: [...drafts.generate.boxes, box] };
  }
  return { ...state, drafts };
}

export interface ApplyResult {
  canvas: string | null;
  canvas_hash: string | null;
  masks: MaskView[];
  transcript: [string, string][];
  latencies?: { capability: string; duration_s: number }[];
}

export function latenciesFromEntry(
  entry: { backend_calls: { capability: string; duration_s: number }[] } | null,
): { capability: string; duration_s: number }[] {
  if (!entry) return [];
  return entry.backend_calls.map((c) => ({
    capability: c.capability,
    duration_s: c.duration_s,
  }));
}

export function applyServerState(state: UiState, result: ApplyResult): UiState {
  return {
    ...state,
    canvasB64: result.canvas ?? state.canvasB64,
    canvasHash: result.canvas_hash ?? state.canvasHash,
    masks: result.masks,
    transcript: result.transcript,
    lastLatencies: result.latencies ?? state.lastLatencies,
    selectedMaskId: result.masks.some((m) => m.id === state.selectedMaskId)
      ? state.selectedMaskId
      : result.masks.length > 0
        ? result.masks[result.masks.length - 1].id
        : null,
    dragOffsetPx: { dx: 0, dy: 0 },
    error: null,
  };
}

/** Inpaint Generate is enabled only when boxes and concepts pair up 1:1. */
export function inpaintValidation(draft: InpaintDraft): { ok: boolean; message: string | null } {
  const concepts = splitConcepts(draft.groundingText);
  if (draft.boxes.length === 0 || concepts.length === 0) {
    return { ok: false, message: "draw boxes and name one concept per box" };
  }
  if (draft.boxes.length !== concepts.length) {
    return {
      ok: false,
      message: `${concepts.length} concepts for ${draft.boxes.length} boxes: counts must match`,
    };
  }
  return { ok: true, message: null };
}

export function generateValidation(draft: GenerateDraft): { ok: boolean; message: string | null } {
  if (draft.caption.trim().length === 0) {
    return { ok: false, message: "caption required" };
  }
  const concepts = splitConcepts(draft.groundingText);
  if (draft.boxes.length !== concepts.length) {
    return {
      ok: false,
      message: `${concepts.length} concepts for ${draft.boxes.length} boxes: counts must match`,
    };
  }
  return { ok: true, message: null };
}

// --- command builders (pure; the DOM layer sends what these return) -------

export function segmentByStrokeCommand(draft: RemoveChangeDraft) {
  return {
    type: "segment_by_stroke",
    strokes: draft.strokes.map((s) => ({
      points: s.points,
      brush_radius: s.brushRadius,
    })),
  };
}

export function segmentByTextCommand(text: string) {
  return { type: "segment_by_text", text: text.trim() };
}

export function inpaintCommand(draft: InpaintDraft) {
  return {
    type: "inpaint_objects",
    grounding: {
      concepts: splitConcepts(draft.groundingText),
      boxes: draft.boxes.map((b) => [b.x0, b.y0, b.x1, b.y1]),
    },
  };
}

export function generateCommand(draft: GenerateDraft) {
  const concepts = splitConcepts(draft.groundingText);
  return {
    type: "generate_image",
    caption: draft.caption.trim(),
    grounding:
      concepts.length > 0
        ? {
            concepts,
            boxes: draft.boxes.map((b) => [b.x0, b.y0, b.x1, b.y1]),
          }
        : null,
  };
}
