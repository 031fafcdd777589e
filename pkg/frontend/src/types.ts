// Shapes mirror the service's JSON responses exactly (read-only client).

export type Phase = "awaiting_answer" | "converged" | "exhausted" | "terminated";

export type TurnAction = "kept" | "eliminated" | "reclustered" | "terminated";

export interface TurnView {
  question: string;
  source_word: string;
  source_sentence: [string, number] | null;
  source_cluster: number;
  source_doc: string;
  answer: string;
  score: number;
  action: TurnAction;
}

export interface ResultRow {
  doc_id: string;
  text: string;
  score: number;
}

export interface SummaryResponse {
  session_id: string;
  state: Phase;
  question: string | null;
  result: ResultRow[] | null;
  remaining: number;
  turn?: TurnView | null;
}

export interface CrmView {
  n: number;
  entries: number[];
}

export interface SessionView {
  session_id: string;
  query: string;
  state: Phase;
  question: string | null;
  delta: number;
  result_size: number;
  remaining: number;
  documents: { doc_id: string; text: string }[];
  crm: CrmView | null;
  clusters: string[][];
  ranked_words: { word: string; distance: number }[];
  history: TurnView[];
  engine_events: Record<string, unknown>[];
  result: ResultRow[] | null;
}
