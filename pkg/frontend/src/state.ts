import { ApiError } from "./api.js";
import type { Phase, ResultRow, SessionView, SummaryResponse, TurnView } from "./types.js";

export type ChatEntry =
  | { kind: "question"; text: string }
  | { kind: "answer"; text: string; action: TurnView["action"] | null; score: number | null }
  | { kind: "notice"; text: string };

export interface AppState {
  sessionId: string | null;
  phase: Phase | null;
  question: string | null;
  thread: ChatEntry[];
  turns: TurnView[];
  result: ResultRow[] | null;
  remaining: number | null;
  view: SessionView | null;
  heatmapDims: number[];
  busy: boolean;
  error: string | null;
}

export function initialState(): AppState {
  return {
    sessionId: null,
    phase: null,
    question: null,
    thread: [],
    turns: [],
    result: null,
    remaining: null,
    view: null,
    heatmapDims: [],
    busy: false,
    error: null,
  };
}

/** State never mutates except through these reducers, and they only carry
 * data returned by the two POST endpoints and the session view. */
export function applyStart(state: AppState, response: SummaryResponse): AppState {
  const thread: ChatEntry[] = [];
  if (response.question) {
    thread.push({ kind: "question", text: response.question });
  }
  return {
    ...initialState(),
    sessionId: response.session_id,
    phase: response.state,
    question: response.question,
    remaining: response.remaining,
    result: response.result,
    thread,
  };
}

export function applyAnswer(state: AppState, answer: string,
                            response: SummaryResponse): AppState {
  const thread = [...state.thread];
  const turns = [...state.turns];
  if (response.turn) {
    thread.push({
      kind: "answer",
      text: answer,
      action: response.turn.action,
      score: response.turn.score,
    });
    turns.push(response.turn);
  } else {
    thread.push({ kind: "answer", text: answer, action: null, score: null });
    thread.push({ kind: "notice", text: "I could not interpret that answer, try again." });
  }
  if (response.state === "awaiting_answer" && response.turn && response.question) {
    thread.push({ kind: "question", text: response.question });
  }
  return {
    ...state,
    phase: response.state,
    question: response.question,
    remaining: response.remaining,
    result: response.result,
    thread,
    turns,
    error: null,
  };
}

export function applyView(state: AppState, view: SessionView): AppState {
  if (view.crm && view.crm.n !== view.clusters.length) {
    throw new Error(`heatmap dimension ${view.crm.n} != cluster count ${view.clusters.length}`);
  }
  if (view.crm && view.crm.entries.length !== view.crm.n * view.crm.n) {
    throw new Error("CRM entries are not n*n");
  }
  const dims = view.crm ? [...state.heatmapDims, view.crm.n] : state.heatmapDims;
  return { ...state, view, heatmapDims: dims };
}

/** Page-reload path: rebuild the whole thread from the server's view. */
export function restoreFromView(view: SessionView): AppState {
  const thread: ChatEntry[] = [];
  for (const turn of view.history) {
    thread.push({ kind: "question", text: turn.question });
    thread.push({ kind: "answer", text: turn.answer, action: turn.action, score: turn.score });
  }
  if (view.state === "awaiting_answer" && view.question) {
    thread.push({ kind: "question", text: view.question });
  }
  const base = applyView({
    ...initialState(),
    sessionId: view.session_id,
    phase: view.state,
    question: view.question,
    remaining: view.remaining,
    result: view.result,
    thread,
    turns: [...view.history],
  }, view);
  return base;
}

export function applyError(state: AppState, error: unknown): AppState {
  if (error instanceof ApiError && error.status === 409) {
    return { ...state, error: "session finished" };
  }
  const message = error instanceof Error ? error.message : String(error);
  return { ...state, error: message };
}
