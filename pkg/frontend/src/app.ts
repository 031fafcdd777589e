import { ApiClient } from "./api.js";
import { heatmapCells } from "./heatmap.js";
import {
  AppState, applyAnswer, applyError, applyStart, applyView, initialState,
  restoreFromView,
} from "./state.js";

const SESSION_KEY = "qir-session-id";

const api = new ApiClient("");
let state: AppState = initialState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function actionBadge(action: string | null): string {
  if (!action) return "";
  return `<span class="badge badge-${action}">${action}</span>`;
}

function render(): void {
  const thread = el<HTMLDivElement>("thread");
  thread.innerHTML = state.thread.map((entry) => {
    if (entry.kind === "question") {
      return `<div class="bubble question">${escapeHtml(entry.text)}</div>`;
    }
    if (entry.kind === "answer") {
      const score = entry.score === null ? "" :
        `<span class="score">score ${entry.score.toFixed(3)}</span>`;
      return `<div class="bubble answer">${escapeHtml(entry.text)}` +
        `${actionBadge(entry.action)}${score}</div>`;
    }
    return `<div class="bubble notice">${escapeHtml(entry.text)}</div>`;
  }).join("");

  const status = el<HTMLDivElement>("status");
  const remaining = state.remaining === null ? "" :
    `${state.remaining} candidate document${state.remaining === 1 ? "" : "s"} remaining`;
  status.textContent = state.phase ? `${state.phase} - ${remaining}` : "";

  const banner = el<HTMLDivElement>("error-banner");
  banner.textContent = state.error ?? "";
  banner.style.display = state.error ? "block" : "none";

  const resultBox = el<HTMLDivElement>("result");
  if (state.result && state.phase !== "awaiting_answer") {
    resultBox.innerHTML = "<h3>Result</h3>" + state.result.map((row) =>
      `<div class="result-row"><b>${escapeHtml(row.doc_id)}</b> ` +
      `${escapeHtml(row.text)} <span class="score">${row.score.toFixed(3)}</span></div>`,
    ).join("");
  } else {
    resultBox.innerHTML = "";
  }

  renderInspector();

  const input = el<HTMLInputElement>("answer-input");
  const send = el<HTMLButtonElement>("send-button");
  const active = state.phase === "awaiting_answer" && !state.busy;
  input.disabled = !active;
  send.disabled = !active;
  thread.scrollTop = thread.scrollHeight;
}

function renderInspector(): void {
  const view = state.view;
  const heat = el<HTMLDivElement>("heatmap");
  const words = el<HTMLDivElement>("ranked-words");
  if (!view || !view.crm) {
    heat.innerHTML = "";
    words.innerHTML = "";
    return;
  }
  const cells = heatmapCells(view.crm);
  heat.style.gridTemplateColumns = `repeat(${view.crm.n}, 22px)`;
  heat.innerHTML = cells.map((c) =>
    `<div class="heat-cell" title="(${c.row},${c.col}) ${c.value.toFixed(3)}"` +
    ` style="background:${c.color}"></div>`).join("");
  words.innerHTML = view.ranked_words.slice(0, 12).map((w) =>
    `<div class="ranked-word">${escapeHtml(w.word)} ` +
    `<span class="score">${w.distance.toFixed(3)}</span></div>`).join("");
}

function escapeHtml(text: string): string {
  return text.replace(/[&<>"']/g, (c) => ({
    "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;", "'": "&#39;",
  }[c] as string));
}

async function refreshView(): Promise<void> {
  if (!state.sessionId) return;
  try {
    state = applyView(state, await api.getView(state.sessionId));
  } catch (error) {
    state = applyError(state, error);
  }
}

async function onStart(): Promise<void> {
  const queryInput = el<HTMLInputElement>("query-input");
  const query = queryInput.value.trim();
  if (!query || state.busy) return;
  state = { ...state, busy: true, error: null };
  render();
  try {
    const response = await api.startSession(query);
    state = applyStart(state, response);
    localStorage.setItem(SESSION_KEY, response.session_id);
    await refreshView();
  } catch (error) {
    state = applyError(state, error);
  }
  state = { ...state, busy: false };
  render();
}

async function onSend(): Promise<void> {
  const input = el<HTMLInputElement>("answer-input");
  const answer = input.value.trim();
  const sessionId = state.sessionId;
  if (!answer || !sessionId || state.busy) return;
  state = { ...state, busy: true };
  render();
  try {
    const response = await api.submitAnswer(sessionId, answer);
    state = applyAnswer(state, answer, response);
    input.value = "";
    await refreshView();
  } catch (error) {
    state = applyError(state, error);
  }
  state = { ...state, busy: false };
  render();
}

async function onLoad(): Promise<void> {
  const stored = localStorage.getItem(SESSION_KEY);
  if (stored) {
    try {
      state = restoreFromView(await api.getView(stored));
    } catch {
      localStorage.removeItem(SESSION_KEY);
    }
  }
  render();
}

export function wire(): void {
  el<HTMLButtonElement>("start-button").addEventListener("click", () => void onStart());
  el<HTMLButtonElement>("send-button").addEventListener("click", () => void onSend());
  el<HTMLInputElement>("answer-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void onSend();
  });
  el<HTMLInputElement>("query-input").addEventListener("keydown", (event) => {
    if (event.key === "Enter") void onStart();
  });
  void onLoad();
}

if (typeof document !== "undefined" && document.getElementById("thread")) {
  wire();
}
