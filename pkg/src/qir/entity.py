"""Multilayered clustering engine: cluster graph, reclustering, and ranking.

The engine keeps the corpus vocabulary grouped into clusters, measures how
distinct the clusters are with the CRM, and on demand either splits the
least-distinct cluster or ranks the most-distinct one to pick the next
questionable entity.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .clustering import kmeans
from .corpus import Document, Sentence
from .embedding import EmbeddingTable
from .transport import Crm, crm

INITIAL_CLUSTERS = 3
DEFAULT_DELTA = 0.8
DEFAULT_MAX_RECLUSTERS = 10


class EngineError(RuntimeError):
    pass


class SingletonClusterError(EngineError):
    """minDisCluster has one word and cannot be split."""


class RecluterCapError(EngineError):
    """The per-session reclustering cap was reached."""


class ExhaustionError(EngineError):
    """No unused questionable sentence or word remains."""


@dataclass(frozen=True)
class RankedList:
    """Cluster words sorted by distance from the cluster centroid, ascending."""

    cluster_id: int
    words: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class EngineState:
    clusters: tuple[tuple[str, ...], ...]
    crm: Crm
    delta: float
    table: EmbeddingTable
    history: tuple[dict, ...] = ()
    recluster_count: int = 0
    max_reclusters: int = DEFAULT_MAX_RECLUSTERS

    def all_words(self) -> set[str]:
        return {w for cluster in self.clusters for w in cluster}

    def cluster_of(self, word: str) -> int:
        for cid, cluster in enumerate(self.clusters):
            if word in cluster:
                return cid
        raise EngineError(f"word not in any cluster: {word!r}")

    def centroid(self, cluster_id: int) -> np.ndarray:
        vectors = np.array([self.table[w] for w in self.clusters[cluster_id]])
        return vectors.mean(axis=0)


def _embeddable(words: Iterable, table: EmbeddingTable) -> list[str]:
    seen: dict[str, None] = {}
    for w in words:
        lemma = w.lemma if hasattr(w, "lemma") else str(w)
        if lemma in table:
            seen.setdefault(lemma, None)
    return list(seen)


def init_engine(corpus_words: Iterable, table: EmbeddingTable,
                delta: float = DEFAULT_DELTA, seed: int = 0,
                max_reclusters: int = DEFAULT_MAX_RECLUSTERS) -> EngineState:
    """Cluster the corpus vocabulary into 3 initial clusters and build the CRM."""
    words = _embeddable(corpus_words, table)
    if len(words) < INITIAL_CLUSTERS:
        raise EngineError(f"need at least {INITIAL_CLUSTERS} distinct embeddable words, got {len(words)}")
    if not 0.0 < delta <= 1.0:
        raise EngineError(f"delta must be in (0, 1], got {delta}")
    vectors = np.array([table[w] for w in words])
    assignment = kmeans(vectors, INITIAL_CLUSTERS, seed)
    clusters = tuple(
        tuple(sorted(words[i] for i in assignment.members(cid)))
        for cid in range(INITIAL_CLUSTERS)
    )
    matrix = crm(clusters, table)
    event = {"event": "init", "clusters": [len(c) for c in clusters], "seed": seed}
    return EngineState(clusters=clusters, crm=matrix, delta=delta, table=table,
                       history=(event,), max_reclusters=max_reclusters)


def find_extreme_nodes(matrix: Crm) -> tuple[int, int]:
    """(maxDisNode, minDisNode) by row sum; ties break toward lower index.

    When the extremes coincide (all-equal sums, or n = 2), the min node is
    the lowest index distinct from the max node.
    """
    if matrix.n < 2:
        raise EngineError("find_extreme_nodes needs at least 2 clusters")
    sums = matrix.row_sums()
    max_node = int(np.argmax(sums))
    candidates = [i for i in range(matrix.n) if i != max_node]
    min_node = min(candidates, key=lambda i: (sums[i], i))
    return max_node, min_node


def needs_reclustering(matrix: Crm, delta: float) -> bool:
    """True iff every off-diagonal CRM entry is below the threshold."""
    return bool(np.all(matrix.off_diagonal() < delta))


def recluster(state: EngineState, seed: int = 0) -> EngineState:
    """Split minDisCluster in two with K-Means and rebuild the CRM at (N+1)^2."""
    if state.recluster_count >= state.max_reclusters:
        raise RecluterCapError(f"recluster cap {state.max_reclusters} reached")
    _, min_node = find_extreme_nodes(state.crm)
    target = state.clusters[min_node]
    if len(target) < 2:
        raise SingletonClusterError(f"cluster {min_node} has a single word; cannot split")
    vectors = np.array([state.table[w] for w in target])
    assignment = kmeans(vectors, 2, seed)
    part_a = tuple(sorted(target[i] for i in assignment.members(0)))
    part_b = tuple(sorted(target[i] for i in assignment.members(1)))
    clusters = list(state.clusters)
    clusters[min_node] = part_a
    clusters.append(part_b)
    matrix = crm(clusters, state.table)
    event = {"event": "recluster", "split": min_node, "n": len(clusters), "seed": seed}
    return replace(state, clusters=tuple(clusters), crm=matrix,
                   history=state.history + (event,),
                   recluster_count=state.recluster_count + 1)


def drop_cluster(state: EngineState, cluster_id: int) -> EngineState:
    """Remove a cluster and its CRM row/column without renormalizing."""
    clusters = tuple(c for i, c in enumerate(state.clusters) if i != cluster_id)
    event = {"event": "drop", "cluster": cluster_id, "n": len(clusters)}
    return replace(state, clusters=clusters, crm=state.crm.drop(cluster_id),
                   history=state.history + (event,))


def rank_cluster(state: EngineState) -> RankedList:
    """Sort maxDisCluster's words by Euclidean distance from its centroid."""
    max_node, _ = find_extreme_nodes(state.crm)
    members = state.clusters[max_node]
    if not members:
        raise EngineError(f"cluster {max_node} is empty")
    center = state.centroid(max_node)
    scored = [(w, float(np.linalg.norm(state.table[w] - center))) for w in members]
    scored.sort(key=lambda pair: (pair[1], pair[0]))
    return RankedList(cluster_id=max_node, words=tuple(scored))


def select_questionable_sentence(ranked: RankedList, corpus: Sequence[Document],
                                 used: set[tuple[str, int]]) -> tuple[str, Sentence | None]:
    """First ranked word with an unused sentence containing it.

    A word that occurs in no corpus sentence at all yields a word-only
    result (the question is generated from the bare word).  When every
    candidate is exhausted an ExhaustionError signals session termination.
    """
    if not ranked.words:
        raise EngineError("ranked list is empty")
    for word, _dist in ranked.words:
        hits = [s for doc in corpus for s in doc.sentences if word in s.lemmas()]
        if not hits:
            return word, None
        for sentence in hits:
            if sentence.key not in used:
                return word, sentence
    raise ExhaustionError("every ranked word's sentences are used up")
