"""Corpus ingestion and the six-step preprocessing pipeline.

A corpus is a sequence of documents; each document is split into sentences
and every sentence into normalized tokens.  Normalization runs, in order:
underscore to space, lowercase, tab to space, strip special characters,
collapse repeated spaces, lemmatize.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

_DATA_DIR = Path(__file__).parent / "data"

# everything outside this class is a "special character"; hyphens kept so
# hyphenated terms (e.g. x-ray) survive intact
_SPECIAL_RE = re.compile(r"[^a-z0-9 \-]")
_MULTISPACE_RE = re.compile(r" {2,}")
_SENTENCE_SPLIT_RE = re.compile(r"[.?!;\n]")

_TOKEN_OK_RE = re.compile(r"^[a-z0-9\-]+$")


class MalformedRecordError(ValueError):
    """A corpus file record could not be parsed; carries its line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass(frozen=True)
class Token:
    """A normalized word: cleaned surface form plus its lemma."""

    surface: str
    lemma: str

    def __post_init__(self):
        if not _TOKEN_OK_RE.match(self.surface):
            raise ValueError(f"bad token surface: {self.surface!r}")
        if not _TOKEN_OK_RE.match(self.lemma):
            raise ValueError(f"bad token lemma: {self.lemma!r}")


@dataclass(frozen=True)
class Sentence:
    doc_id: str
    index: int
    tokens: tuple[Token, ...]

    @property
    def key(self) -> tuple[str, int]:
        return (self.doc_id, self.index)

    def lemmas(self) -> tuple[str, ...]:
        return tuple(t.lemma for t in self.tokens)

    def text(self) -> str:
        return " ".join(t.lemma for t in self.tokens)


@dataclass(frozen=True)
class Document:
    id: str
    raw_text: str
    sentences: tuple[Sentence, ...]

    def tokens(self) -> Iterator[Token]:
        for s in self.sentences:
            yield from s.tokens

    def lemmas(self) -> list[str]:
        return [t.lemma for t in self.tokens()]


class LemmaTable:
    """Dictionary lemmatizer with a deterministic suffix-strip fallback.

    The table maps an inflected surface form directly to its lemma; words
    not in the table fall back to stripping -ies/-es/-s with short guards
    so already-singular words are left alone.
    """

    def __init__(self, entries: dict[str, str] | None = None):
        self._entries = dict(entries or {})

    @classmethod
    def load(cls, path: str | Path) -> "LemmaTable":
        """Load a two-column UTF-8 file: one "surface<TAB>lemma" pair per line."""
        entries = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedRecordError(line_no, "expected 'surface<TAB>lemma'")
            entries[parts[0].strip()] = parts[1].strip()
        return cls(entries)

    @classmethod
    def bundled(cls) -> "LemmaTable":
        return cls.load(_DATA_DIR / "lemmas.tsv")

    @classmethod
    def empty(cls) -> "LemmaTable":
        return cls({})

    def lemma(self, word: str) -> str:
        hit = self._entries.get(word)
        if hit is not None:
            return hit
        return _strip_suffix(word)


def _strip_suffix(word: str) -> str:
    # guards keep lemmatization idempotent: outputs are fixed points
    if word.endswith("ies") and len(word) > 4:
        return word[:-3] + "y"
    if len(word) > 4 and word.endswith(("sses", "shes", "ches", "xes", "zes")):
        return word[:-2]
    if word.endswith("s") and len(word) > 3 and not word.endswith(("ss", "us", "is")):
        return word[:-1]
    return word


def preprocess(raw: str, lemma_table: LemmaTable | None = None) -> list[Token]:
    """Apply the six normalization steps in order and emit tokens.

    Empty input yields an empty list.  Whitespace variants (tabs, newlines)
    all become single spaces before special-character removal, so they never
    glue two words together.
    """
    table = lemma_table if lemma_table is not None else LemmaTable.bundled()
    text = raw.replace("_", " ")
    text = text.lower()
    text = text.replace("\t", " ").replace("\n", " ").replace("\r", " ")
    text = _SPECIAL_RE.sub("", text)
    text = _MULTISPACE_RE.sub(" ", text).strip()
    tokens = []
    for word in text.split(" "):
        if not word:
            continue
        tokens.append(Token(surface=word, lemma=table.lemma(word)))
    return tokens


def split_sentences(raw: str) -> list[str]:
    """Split on terminal punctuation [.?!;] and newlines, dropping empties."""
    return [seg.strip() for seg in _SENTENCE_SPLIT_RE.split(raw) if seg.strip()]


def build_document(doc_id: str, raw_text: str, lemma_table: LemmaTable | None = None) -> Document:
    """Split, preprocess, and assemble one document; empty sentences dropped."""
    sentences = []
    for segment in split_sentences(raw_text):
        tokens = preprocess(segment, lemma_table)
        if not tokens:
            continue
        sentences.append(Sentence(doc_id=doc_id, index=len(sentences), tokens=tuple(tokens)))
    return Document(id=doc_id, raw_text=raw_text, sentences=tuple(sentences))


def ingest(path: str | Path, format: str = "lines",
           lemma_table: LemmaTable | None = None) -> list[Document]:
    """Read a corpus file: one document per line (``lines``) or per JSONL record.

    JSONL records need "id" and "text" fields.  Documents that come out
    empty after preprocessing are dropped.  Malformed records raise
    :class:`MalformedRecordError` with their line number.
    """
    if format not in ("lines", "jsonl"):
        raise ValueError(f"unknown corpus format: {format!r}")
    table = lemma_table if lemma_table is not None else LemmaTable.bundled()
    docs: list[Document] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if format == "lines":
                doc_id, text = f"doc-{line_no:03d}", line
            else:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from exc
                if not isinstance(record, dict) or "text" not in record:
                    raise MalformedRecordError(line_no, 'missing "text" field')
                if "id" not in record:
                    raise MalformedRecordError(line_no, 'missing "id" field')
                doc_id, text = str(record["id"]), str(record["text"])
            if doc_id in seen_ids:
                raise MalformedRecordError(line_no, f"duplicate document id {doc_id!r}")
            doc = build_document(doc_id, text, table)
            if not doc.sentences:
                continue
            seen_ids.add(doc_id)
            docs.append(doc)
    return docs


def corpus_lemmas(docs: Iterable[Document]) -> list[str]:
    """Distinct lemmas across the corpus, in first-appearance order."""
    seen: dict[str, None] = {}
    for doc in docs:
        for lemma in doc.lemmas():
            seen.setdefault(lemma, None)
    return list(seen)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    p = Path(path) if path is not None else _DATA_DIR / "stopwords.txt"
    words = [w.strip() for w in p.read_text(encoding="utf-8").splitlines()]
    return frozenset(w for w in words if w and not w.startswith("#"))
