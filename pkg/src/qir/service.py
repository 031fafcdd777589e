"""HTTP session API over the retrieval loop."""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import entity, session as sess
from .config import ServiceConfig
from .corpus import LemmaTable, ingest
from .embedding import EmbeddingTable, load_embeddings, pca_fit, pca_transform_all
from .qgen import load_checkpoint
from .session import (AWAITING, Session, SessionContext, SessionStore,
                      UnknownSessionError, WrongPhaseError)


class StartRequest(BaseModel):
    query: str


class AnswerRequest(BaseModel):
    answer: str


def load_context(config: ServiceConfig) -> tuple[SessionContext, list]:
    """Load embeddings (optionally PCA-reduced), model, and corpus."""
    table = load_embeddings(config.embeddings_path)
    if config.pca_dim is not None and config.pca_dim < table.dim:
        words = table.words()
        model = pca_fit([table[w] for w in words], config.pca_dim)
        reduced = pca_transform_all(model, [table[w] for w in words])
        table = EmbeddingTable({w: reduced[i] for i, w in enumerate(words)}, config.pca_dim)
    lemma_table = LemmaTable.bundled()
    docs = ingest(config.corpus_path, config.corpus_format, lemma_table)
    context = SessionContext(table=table, model=load_checkpoint(config.model_path),
                             lemma_table=lemma_table)
    return context, docs


def _turn_view(turn: sess.Turn) -> dict:
    return turn.to_dict()


def _summary_view(s: Session) -> dict:
    return {
        "session_id": s.id,
        "state": s.phase,
        "question": s.question,
        "result": s.result,
        "remaining": s.remaining(),
    }


def _full_view(s: Session) -> dict:
    engine = s.engine
    ranked_words = []
    if engine is not None and s.phase == AWAITING:
        ranked = entity.rank_cluster(engine)
        ranked_words = [{"word": w, "distance": d} for w, d in ranked.words]
    return {
        "session_id": s.id,
        "query": s.query,
        "state": s.phase,
        "question": s.question,
        "delta": s.delta,
        "result_size": s.result_size,
        "remaining": s.remaining(),
        "documents": [{"doc_id": d.id, "text": d.raw_text} for d in s.docs],
        "crm": None if engine is None else {
            "n": engine.crm.n,
            "entries": engine.crm.entries.flatten().tolist(),
        },
        "clusters": [] if engine is None else [list(c) for c in engine.clusters],
        "ranked_words": ranked_words,
        "history": [_turn_view(t) for t in s.history],
        "engine_events": [] if engine is None else list(engine.history),
        "result": s.result,
    }


def build_app(config: ServiceConfig) -> FastAPI:
    config.validate()
    context, docs = load_context(config)
    store = SessionStore(config.store_dir)
    app = FastAPI(title="qir", docs_url=None, redoc_url=None)
    state = {"counter": 0}
    counter_lock = threading.Lock()
    session_locks: dict[str, threading.Lock] = {}
    locks_guard = threading.Lock()

    def lock_for(session_id: str) -> threading.Lock:
        with locks_guard:
            return session_locks.setdefault(session_id, threading.Lock())

    @app.exception_handler(RequestValidationError)
    def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"error": "malformed request body",
                                     "detail": str(exc.errors())})

    @app.exception_handler(UnknownSessionError)
    def unknown_session(request: Request, exc: UnknownSessionError):
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(WrongPhaseError)
    def wrong_phase(request: Request, exc: WrongPhaseError):
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(Exception)
    def internal_error(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"error": "internal error",
                                     "detail": f"{type(exc).__name__}: {exc}"})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions")
    def start(body: StartRequest):
        with counter_lock:
            state["counter"] += 1
            session_id = f"s{state['counter']:06d}"
        s = sess.start_session(docs, body.query, context, session_id,
                               delta=config.delta, seed=config.seed,
                               result_size=config.result_size)
        store.save(s)
        return _summary_view(s)

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, body: AnswerRequest):
        with lock_for(session_id):
            s = store.load(session_id, context)
            before = len(s.history)
            s = sess.submit_answer(s, body.answer, context)
            store.save(s)
            turn = s.history[-1] if len(s.history) > before else None
            view = _summary_view(s)
            view["turn"] = _turn_view(turn) if turn else None
            return view

    @app.get("/sessions/{session_id}")
    def view(session_id: str):
        with lock_for(session_id):
            s = store.load(session_id, context)
            return _full_view(s)

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(build_app(config), host=config.listen_host, port=config.listen_port)
