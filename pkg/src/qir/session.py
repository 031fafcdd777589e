"""Interactive retrieval sessions: question loop, elimination, termination.

Each turn scores the user's answer against the questioned document with a
rescaled Word Mover's Distance and either keeps that document's cluster
(score >= delta) or removes the document and its cluster (score < delta),
reclustering when every remaining cluster pair is still too close.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import entity
from .corpus import Document, LemmaTable, Sentence, Token, build_document, preprocess
from .embedding import EmbeddingTable, OovError
from .entity import (EngineState, ExhaustionError, RecluterCapError,
                     SingletonClusterError)
from .qgen import Seq2SeqModel, generate_question
from .transport import NBow, nbow, wmd

AWAITING = "awaiting_answer"
CONVERGED = "converged"
EXHAUSTED = "exhausted"
TERMINATED = "terminated"

ACTION_KEPT = "kept"
ACTION_ELIMINATED = "eliminated"
ACTION_RECLUSTERED = "reclustered"
ACTION_TERMINATED = "terminated"

DEFAULT_RESULT_SIZE = 3
SCALE_PERCENTILE = 95.0
MAX_SCALE_PAIRS = 1000

# leading question words stripped before the answer/question concatenation
INTERROGATIVES = frozenset(
    {"what", "when", "where", "why", "how", "do", "does", "is", "are", "can"})


class SessionError(RuntimeError):
    pass


class WrongPhaseError(SessionError):
    """Operation not allowed in the session's current phase."""


class UnknownSessionError(SessionError):
    pass


@dataclass(frozen=True)
class SessionContext:
    """Shared immutable resources: embeddings, generator model, lemma rules."""

    table: EmbeddingTable
    model: Seq2SeqModel
    lemma_table: LemmaTable


@dataclass
class Turn:
    question: str
    source_word: str
    source_sentence: tuple[str, int] | None
    source_cluster: int
    source_doc: str
    answer: str
    score: float
    action: str

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "source_word": self.source_word,
            "source_sentence": list(self.source_sentence) if self.source_sentence else None,
            "source_cluster": self.source_cluster,
            "source_doc": self.source_doc,
            "answer": self.answer,
            "score": self.score,
            "action": self.action,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Turn":
        return cls(
            question=d["question"],
            source_word=d["source_word"],
            source_sentence=tuple(d["source_sentence"]) if d["source_sentence"] else None,
            source_cluster=d["source_cluster"],
            source_doc=d["source_doc"],
            answer=d["answer"],
            score=d["score"],
            action=d["action"],
        )


@dataclass
class Pending:
    question_tokens: tuple[str, ...]
    word: str
    sentence_key: tuple[str, int] | None
    cluster_id: int
    doc_id: str

    @property
    def question(self) -> str:
        return " ".join(self.question_tokens)


@dataclass
class Session:
    id: str
    query: str
    delta: float
    seed: int
    result_size: int
    docs: list[Document]
    engine: EngineState | None
    phase: str
    history: list[Turn]
    pending: Pending | None
    used_sentences: set[tuple[str, int]]
    scale: float
    op_counter: int
    result: list[dict] | None = None

    @property
    def question(self) -> str | None:
        return self.pending.question if self.pending else None

    def remaining(self) -> int:
        return len(self.docs)


def _derived_seed(seed: int, counter: int) -> int:
    return seed * 100_003 + counter


def _doc_nbow(doc: Document, table: EmbeddingTable) -> NBow | None:
    try:
        return nbow(doc.lemmas(), table)
    except OovError:
        return None


def _doc_centroid(doc: Document, table: EmbeddingTable) -> np.ndarray | None:
    vecs = [table[w] for w in doc.lemmas() if w in table]
    return np.mean(vecs, axis=0) if vecs else None


def _wmd_scale(docs: Sequence[Document], table: EmbeddingTable, seed: int) -> float:
    """95th percentile of pairwise document WMDs; the delta comparison is
    made on raw WMD divided by this, putting it on the CRM's [0, 1] scale."""
    bows = [b for b in (_doc_nbow(d, table) for d in docs) if b is not None]
    if len(bows) < 2:
        return 1.0
    pairs = [(i, j) for i in range(len(bows)) for j in range(i + 1, len(bows))]
    if len(pairs) > MAX_SCALE_PAIRS:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pairs), size=MAX_SCALE_PAIRS, replace=False)
        pairs = [pairs[i] for i in sorted(idx)]
    distances = [wmd(bows[i], bows[j], table)[0] for i, j in pairs]
    scale = float(np.percentile(distances, SCALE_PERCENTILE))
    return scale if scale > 0.0 else 1.0


def _doc_cluster(doc: Document, engine: EngineState) -> int:
    """Majority-vote cluster of a document's in-vocabulary lemmas (-1: none)."""
    counts = [0] * len(engine.clusters)
    membership = {w: cid for cid, cluster in enumerate(engine.clusters) for w in cluster}
    for lemma in doc.lemmas():
        cid = membership.get(lemma)
        if cid is not None:
            counts[cid] += 1
    if not any(counts):
        return -1
    return int(np.argmax(counts))   # ties toward lower cluster id


def _rank_docs(session: Session, context: SessionContext,
               au: NBow | None) -> list[dict]:
    """Remaining documents ordered by score against A_u, best first."""
    ranked = []
    for doc in session.docs:
        bow = _doc_nbow(doc, context.table)
        if au is not None and bow is not None:
            score = wmd(bow, au, context.table)[0] / session.scale
        else:
            score = 0.0
        ranked.append({"doc_id": doc.id, "text": doc.raw_text, "score": score})
    ranked.sort(key=lambda r: (-r["score"], r["doc_id"]))
    return ranked


def _prepare_question(session: Session, context: SessionContext) -> None:
    """Algorithm-2 advance: recluster while required, then rank and select."""
    engine = session.engine
    while engine.crm.n >= 2 and entity.needs_reclustering(engine.crm, session.delta):
        try:
            session.op_counter += 1
            engine = entity.recluster(engine, _derived_seed(session.seed, session.op_counter))
        except (SingletonClusterError, RecluterCapError):
            break   # cannot split further; fall through to ranking
    session.engine = engine
    ranked = entity.rank_cluster(engine)
    try:
        word, sentence = entity.select_questionable_sentence(ranked, session.docs,
                                                             session.used_sentences)
    except ExhaustionError:
        session.phase = EXHAUSTED
        session.result = _rank_docs(session, context, None)
        session.pending = None
        return
    input_tokens = list(sentence.lemmas()) if sentence is not None else [word]
    question = generate_question(context.model, input_tokens)
    if not question:
        question = [word]
    if sentence is not None:
        session.used_sentences.add(sentence.key)
        doc_id = sentence.doc_id
    else:
        doc_id = _nearest_doc(session, context, word)
    session.pending = Pending(
        question_tokens=tuple(question),
        word=word,
        sentence_key=sentence.key if sentence is not None else None,
        cluster_id=ranked.cluster_id,
        doc_id=doc_id,
    )
    session.phase = AWAITING


def _nearest_doc(session: Session, context: SessionContext, word: str) -> str:
    """Closest document to a bare word by embedding centroid distance."""
    target = context.table[word]
    best = None
    for doc in session.docs:
        center = _doc_centroid(doc, context.table)
        if center is None:
            continue
        dist = float(np.linalg.norm(center - target))
        if best is None or (dist, doc.id) < best[:2]:
            best = (dist, doc.id)
    if best is None:
        raise SessionError("no embeddable document for word-only question")
    return best[1]


def start_session(docs: Sequence[Document], query: str, context: SessionContext,
                  session_id: str, delta: float = entity.DEFAULT_DELTA,
                  seed: int = 0, result_size: int = DEFAULT_RESULT_SIZE,
                  max_reclusters: int = entity.DEFAULT_MAX_RECLUSTERS) -> Session:
    """Initialize the engine over the corpus and produce the first question."""
    docs = list(docs)
    if not docs:
        raise SessionError("corpus is empty")
    session = Session(
        id=session_id, query=query, delta=delta, seed=seed,
        result_size=result_size, docs=docs, engine=None, phase=AWAITING,
        history=[], pending=None, used_sentences=set(),
        scale=_wmd_scale(docs, context.table, seed), op_counter=0,
    )
    words = [lemma for doc in docs for lemma in doc.lemmas()]
    session.engine = entity.init_engine(words, context.table, delta,
                                        _derived_seed(seed, 0),
                                        max_reclusters=max_reclusters)
    _prepare_question(session, context)
    if session.phase == AWAITING and session.pending is None:
        raise SessionError("failed to produce an opening question")
    return session


def _answer_union(question_tokens: Sequence[str], answer_tokens: Sequence[Token]) -> list[str]:
    """A_u: question minus its leading interrogative word, plus the answer."""
    q = list(question_tokens)
    if q and q[0] in INTERROGATIVES:
        q = q[1:]
    return q + [t.lemma for t in answer_tokens]


def submit_answer(session: Session, answer: str, context: SessionContext) -> Session:
    """Score the answer, then keep or eliminate per the delta comparison.

    An answer that preprocesses to nothing embeddable re-prompts: the
    session state is left untouched and the same question stands.
    """
    if session.phase != AWAITING:
        raise WrongPhaseError(f"session is {session.phase}, not awaiting an answer")
    pending = session.pending
    answer_tokens = preprocess(answer, context.lemma_table)
    if not any(t.lemma in context.table for t in answer_tokens):
        return session   # nothing embeddable to score: same question stands
    au_tokens = _answer_union(pending.question_tokens, answer_tokens)
    try:
        au = nbow(au_tokens, context.table)
    except OovError:
        return session
    source_doc = next(d for d in session.docs if d.id == pending.doc_id)
    source_bow = _doc_nbow(source_doc, context.table)
    if source_bow is None:
        raise SessionError(f"question document {source_doc.id} has no embeddable words")
    raw, _ = wmd(source_bow, au, context.table)
    score = raw / session.scale

    turn = Turn(
        question=pending.question, source_word=pending.word,
        source_sentence=pending.sentence_key, source_cluster=pending.cluster_id,
        source_doc=pending.doc_id, answer=answer, score=score, action="",
    )
    if score >= session.delta:
        _keep_branch(session, context, turn, au)
    else:
        _eliminate_branch(session, context, turn, au)
    session.history.append(turn)
    return session


def _keep_branch(session: Session, context: SessionContext, turn: Turn,
                 au: NBow) -> None:
    turn.action = ACTION_KEPT
    cluster_id = turn.source_cluster
    kept = [d for d in session.docs
            if d.id == turn.source_doc or _doc_cluster(d, session.engine) == cluster_id]
    no_shrink = len(kept) == len(session.docs)
    session.docs = kept
    if no_shrink or len(session.docs) <= session.result_size:
        # either converged small enough, or the answer cannot discriminate
        # further along this axis; stop with what we have
        session.phase = CONVERGED
        session.result = _rank_docs(session, context, au)
        session.pending = None
        return
    words = [lemma for doc in session.docs for lemma in doc.lemmas()]
    session.op_counter += 1
    try:
        session.engine = entity.init_engine(
            words, context.table, session.delta,
            _derived_seed(session.seed, session.op_counter),
            max_reclusters=session.engine.max_reclusters)
    except entity.EngineError:
        session.phase = EXHAUSTED
        session.result = _rank_docs(session, context, au)
        session.pending = None
        return
    _prepare_question(session, context)


def _eliminate_branch(session: Session, context: SessionContext, turn: Turn,
                      au: NBow) -> None:
    cluster_id = turn.source_cluster
    dropped = {d.id for d in session.docs if _doc_cluster(d, session.engine) == cluster_id}
    dropped.add(turn.source_doc)
    session.docs = [d for d in session.docs if d.id not in dropped]
    session.engine = entity.drop_cluster(session.engine, cluster_id)

    if 0 < len(session.docs) <= session.result_size:
        turn.action = ACTION_ELIMINATED
        session.phase = CONVERGED
        session.result = _rank_docs(session, context, au)
        session.pending = None
        return
    if not session.docs or session.engine.crm.n < 2:
        turn.action = ACTION_ELIMINATED
        session.phase = EXHAUSTED
        session.result = _rank_docs(session, context, au)
        session.pending = None
        return
    if entity.needs_reclustering(session.engine.crm, session.delta):
        try:
            session.op_counter += 1
            session.engine = entity.recluster(
                session.engine, _derived_seed(session.seed, session.op_counter))
            turn.action = ACTION_RECLUSTERED
        except (SingletonClusterError, RecluterCapError):
            turn.action = ACTION_ELIMINATED
        _prepare_question(session, context)
        return
    # remaining clusters are already distinct enough: the process stops here
    turn.action = ACTION_TERMINATED
    session.phase = TERMINATED
    session.result = _rank_docs(session, context, au)
    session.pending = None


# --- persistence ---------------------------------------------------------

def _doc_to_dict(doc: Document) -> dict:
    return {
        "id": doc.id,
        "raw_text": doc.raw_text,
        "sentences": [
            {"index": s.index,
             "tokens": [[t.surface, t.lemma] for t in s.tokens]}
            for s in doc.sentences
        ],
    }


def _doc_from_dict(d: dict) -> Document:
    sentences = tuple(
        Sentence(doc_id=d["id"], index=s["index"],
                 tokens=tuple(Token(surface=t[0], lemma=t[1]) for t in s["tokens"]))
        for s in d["sentences"]
    )
    return Document(id=d["id"], raw_text=d["raw_text"], sentences=sentences)


def session_to_dict(session: Session) -> dict:
    engine = session.engine
    return {
        "id": session.id,
        "query": session.query,
        "delta": session.delta,
        "seed": session.seed,
        "result_size": session.result_size,
        "phase": session.phase,
        "scale": session.scale,
        "op_counter": session.op_counter,
        "docs": [_doc_to_dict(d) for d in session.docs],
        "engine": None if engine is None else {
            "clusters": [list(c) for c in engine.clusters],
            "crm": engine.crm.entries.flatten().tolist(),
            "history": list(engine.history),
            "recluster_count": engine.recluster_count,
            "max_reclusters": engine.max_reclusters,
        },
        "pending": None if session.pending is None else {
            "question_tokens": list(session.pending.question_tokens),
            "word": session.pending.word,
            "sentence_key": list(session.pending.sentence_key) if session.pending.sentence_key else None,
            "cluster_id": session.pending.cluster_id,
            "doc_id": session.pending.doc_id,
        },
        "used_sentences": sorted([list(k) for k in session.used_sentences]),
        "history": [t.to_dict() for t in session.history],
        "result": session.result,
    }


def session_from_dict(d: dict, context: SessionContext) -> Session:
    engine = None
    if d["engine"] is not None:
        e = d["engine"]
        n = len(e["clusters"])
        from .transport import Crm
        engine = EngineState(
            clusters=tuple(tuple(c) for c in e["clusters"]),
            crm=Crm(n=n, entries=np.array(e["crm"], dtype=np.float64).reshape(n, n)),
            delta=d["delta"],
            table=context.table,
            history=tuple(e["history"]),
            recluster_count=e["recluster_count"],
            max_reclusters=e["max_reclusters"],
        )
    pending = None
    if d["pending"] is not None:
        p = d["pending"]
        pending = Pending(
            question_tokens=tuple(p["question_tokens"]),
            word=p["word"],
            sentence_key=tuple(p["sentence_key"]) if p["sentence_key"] else None,
            cluster_id=p["cluster_id"],
            doc_id=p["doc_id"],
        )
    return Session(
        id=d["id"], query=d["query"], delta=d["delta"], seed=d["seed"],
        result_size=d["result_size"],
        docs=[_doc_from_dict(x) for x in d["docs"]],
        engine=engine, phase=d["phase"],
        history=[Turn.from_dict(t) for t in d["history"]],
        pending=pending,
        used_sentences={tuple(k) for k in d["used_sentences"]},
        scale=d["scale"], op_counter=d["op_counter"], result=d["result"],
    )


class SessionStore:
    """One canonical-JSON file per session id under a directory."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise UnknownSessionError(f"bad session id: {session_id!r}")
        return self.directory / f"{session_id}.json"

    def save(self, session: Session) -> None:
        payload = json.dumps(session_to_dict(session), sort_keys=True,
                             separators=(",", ":"))
        tmp = self._path(session.id).with_suffix(".tmp")
        tmp.write_text(payload, encoding="utf-8")
        tmp.replace(self._path(session.id))

    def load(self, session_id: str, context: SessionContext) -> Session:
        path = self._path(session_id)
        if not path.exists():
            raise UnknownSessionError(f"no such session: {session_id}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SessionError(f"corrupt session record {session_id}: {exc}") from exc
        return session_from_dict(data, context)

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.json"))
