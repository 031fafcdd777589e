import type { AppState } from "./state.js";
import type { Phase, ResultRow, TurnView } from "./types.js";

export interface Transcript {
  turns: { question: string; answer: string; action: TurnView["action"]; score: number }[];
  finalState: Phase | null;
  result: ResultRow[] | null;
}

/** The canonical record of what the UI rendered, for transcript comparison. */
export function transcriptFromState(state: AppState): Transcript {
  return {
    turns: state.turns.map((t) => ({
      question: t.question,
      answer: t.answer,
      action: t.action,
      score: t.score,
    })),
    finalState: state.phase,
    result: state.result,
  };
}
