"""BLEU-1/BLEU-2, a METEOR-style score, and evaluation report summaries.

Scores are kept in [0, 1] internally; rendering multiplies by 100 to match
the usual reporting scale.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

BLEU_SMOOTHING_EPS = 1e-9
METEOR_RECALL_WEIGHT = 9.0
METEOR_PENALTY_WEIGHT = 0.5
METEOR_PENALTY_POWER = 3.0

_VOWELS = set("aeiou")


class EvalError(ValueError):
    pass


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _clipped_matches(hypothesis: Sequence[str], references: Sequence[Sequence[str]],
                     n: int) -> tuple[int, int]:
    """(clipped match count, total hypothesis n-grams) for one sentence."""
    hyp_counts = _ngram_counts(hypothesis, n)
    total = sum(hyp_counts.values())
    if total == 0:
        return 0, 0
    max_ref: Counter = Counter()
    for ref in references:
        for gram, count in _ngram_counts(ref, n).items():
            if count > max_ref[gram]:
                max_ref[gram] = count
    matched = sum(min(count, max_ref[gram]) for gram, count in hyp_counts.items())
    return matched, total


def _effective_ref_length(hyp_len: int, references: Sequence[Sequence[str]]) -> int:
    # closest reference length; ties prefer the shorter one
    return min((len(r) for r in references), key=lambda rl: (abs(rl - hyp_len), rl))


def _brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / hyp_len)


def bleu(hypothesis: Sequence[str], references: Sequence[Sequence[str]],
         max_n: int = 2) -> float:
    """Cumulative BLEU up to ``max_n`` with brevity penalty.

    Zero unigram overlap scores exactly 0; higher-order zero precisions are
    smoothed with a small epsilon so the geometric mean stays defined.
    """
    if max_n not in (1, 2):
        raise EvalError(f"max_n must be 1 or 2, got {max_n}")
    if not hypothesis:
        raise EvalError("empty hypothesis")
    references = [list(r) for r in references]
    if not references or any(not r for r in references):
        raise EvalError("need at least one non-empty reference")
    precisions = []
    for n in range(1, max_n + 1):
        matched, total = _clipped_matches(hypothesis, references, n)
        precisions.append(matched / total if total > 0 else 0.0)
    if precisions[0] == 0.0:
        return 0.0
    log_sum = sum(math.log(p if p > 0.0 else BLEU_SMOOTHING_EPS) for p in precisions)
    geo_mean = math.exp(log_sum / max_n)
    bp = _brevity_penalty(len(hypothesis), _effective_ref_length(len(hypothesis), references))
    return bp * geo_mean


def _has_vowel(word: str) -> bool:
    return any(c in _VOWELS or c == "y" for c in word)


def porter_stem(word: str) -> str:
    """Deterministic Porter-style suffix stripping (plural + -ed/-ing rules)."""
    w = word
    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif not w.endswith("ss") and w.endswith("s") and len(w) > 2:
        w = w[:-1]
    # step 1b
    if w.endswith("eed"):
        if len(w) > 4:
            w = w[:-1]
    elif w.endswith("ed") and _has_vowel(w[:-2]) and len(w) > 3:
        w = w[:-2]
        w = _fix_stem_tail(w)
    elif w.endswith("ing") and _has_vowel(w[:-3]) and len(w) > 4:
        w = w[:-3]
        w = _fix_stem_tail(w)
    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]) and len(w) > 2:
        w = w[:-1] + "i"
    return w


def _fix_stem_tail(w: str) -> str:
    if w.endswith(("at", "bl", "iz")):
        return w + "e"
    if len(w) >= 2 and w[-1] == w[-2] and w[-1] not in "lsz" and w[-1] not in _VOWELS:
        return w[:-1]
    return w


class SynonymTable:
    """Synonym groups: one whitespace-separated group of words per line."""

    def __init__(self, groups: Sequence[Sequence[str]]):
        self._group_ids: dict[str, set[int]] = {}
        for gid, group in enumerate(groups):
            for word in group:
                self._group_ids.setdefault(word, set()).add(gid)

    @classmethod
    def load(cls, path: str | Path) -> "SynonymTable":
        groups = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            words = line.split()
            if words and not words[0].startswith("#"):
                groups.append(words)
        return cls(groups)

    def are_synonyms(self, a: str, b: str) -> bool:
        return bool(self._group_ids.get(a, set()) & self._group_ids.get(b, set()))


def _align(hypothesis: Sequence[str], reference: Sequence[str],
           stemmer: Callable[[str], str] | None,
           synonyms: SynonymTable | None) -> list[tuple[int, int]]:
    """Staged greedy unigram alignment: exact, then stem, then synonym."""
    hyp_free = list(range(len(hypothesis)))
    ref_free = list(range(len(reference)))
    pairs: list[tuple[int, int]] = []

    def run_stage(match) -> None:
        for hi in list(hyp_free):
            for rj in ref_free:
                if match(hypothesis[hi], reference[rj]):
                    pairs.append((hi, rj))
                    hyp_free.remove(hi)
                    ref_free.remove(rj)
                    break

    run_stage(lambda h, r: h == r)
    if stemmer is not None:
        run_stage(lambda h, r: stemmer(h) == stemmer(r))
    if synonyms is not None:
        run_stage(synonyms.are_synonyms)
    return sorted(pairs)


def _count_chunks(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for hi, rj in pairs:
        if prev is None or hi != prev[0] + 1 or rj != prev[1] + 1:
            chunks += 1
        prev = (hi, rj)
    return chunks


def meteor(hypothesis: Sequence[str], reference: Sequence[str],
           stemmer: Callable[[str], str] | None = porter_stem,
           synonyms: SynonymTable | None = None) -> float:
    """Unigram F-mean (recall-weighted 9:1) with a fragmentation penalty."""
    if not hypothesis or not reference:
        raise EvalError("meteor needs non-empty hypothesis and reference")
    pairs = _align(hypothesis, reference, stemmer, synonyms)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(hypothesis)
    recall = m / len(reference)
    f_mean = ((1.0 + METEOR_RECALL_WEIGHT) * precision * recall
              / (METEOR_RECALL_WEIGHT * precision + recall))
    penalty = METEOR_PENALTY_WEIGHT * (_count_chunks(pairs) / m) ** METEOR_PENALTY_POWER
    return f_mean * (1.0 - penalty)


@dataclass(frozen=True)
class PredictionRecord:
    """One model output with its reference; NLL/match stats are optional."""

    predicted: tuple[str, ...]
    reference: tuple[str, ...]
    token_nlls: tuple[float, ...] = ()


@dataclass(frozen=True)
class EvalReport:
    meteor: float
    bleu1: float
    bleu2: float
    perplexity: float
    accuracy: float

    def to_json(self) -> str:
        return json.dumps({
            "meteor": self.meteor, "bleu1": self.bleu1, "bleu2": self.bleu2,
            "perplexity": self.perplexity, "accuracy": self.accuracy,
        }, sort_keys=True)

    def to_text(self) -> str:
        header = f"{'METEOR':>8}  {'BLEU-1':>8}  {'BLEU-2':>8}  {'Perplexity':>10}  {'Accuracy':>8}"
        row = (f"{self.meteor * 100:8.2f}  {self.bleu1 * 100:8.2f}  {self.bleu2 * 100:8.2f}  "
               f"{self.perplexity:10.4f}  {self.accuracy * 100:8.2f}")
        return header + "\n" + row


def summarize(records: Sequence[PredictionRecord],
              stemmer: Callable[[str], str] | None = porter_stem,
              synonyms: SynonymTable | None = None) -> EvalReport:
    """Corpus-level BLEU, mean METEOR, perplexity, and exact-match accuracy."""
    if not records:
        raise EvalError("no records to summarize")
    matched = {1: 0, 2: 0}
    totals = {1: 0, 2: 0}
    hyp_len_sum = 0
    ref_len_sum = 0
    meteor_sum = 0.0
    correct = 0
    compared = 0
    nll_sum = 0.0
    nll_count = 0
    for rec in records:
        if len(rec.predicted) == 0 or len(rec.reference) == 0:
            raise EvalError("records need non-empty predicted and reference sequences")
        for n in (1, 2):
            got, tot = _clipped_matches(rec.predicted, [rec.reference], n)
            matched[n] += got
            totals[n] += tot
        hyp_len_sum += len(rec.predicted)
        ref_len_sum += _effective_ref_length(len(rec.predicted), [rec.reference])
        meteor_sum += meteor(rec.predicted, rec.reference, stemmer, synonyms)
        compared += len(rec.reference)
        correct += sum(1 for p, r in zip(rec.predicted, rec.reference) if p == r)
        nll_sum += sum(rec.token_nlls)
        nll_count += len(rec.token_nlls)

    def corpus_bleu(max_n: int) -> float:
        p1 = matched[1] / totals[1] if totals[1] else 0.0
        if p1 == 0.0:
            return 0.0
        precisions = [p1]
        if max_n == 2:
            precisions.append(matched[2] / totals[2] if totals[2] else 0.0)
        log_sum = sum(math.log(p if p > 0.0 else BLEU_SMOOTHING_EPS) for p in precisions)
        return _brevity_penalty(hyp_len_sum, ref_len_sum) * math.exp(log_sum / max_n)

    perplexity = math.exp(nll_sum / nll_count) if nll_count else 1.0
    return EvalReport(
        meteor=meteor_sum / len(records),
        bleu1=corpus_bleu(1),
        bleu2=corpus_bleu(2),
        perplexity=perplexity,
        accuracy=correct / compared if compared else 0.0,
    )
