"""Pretrained word-vector loading, phrase pooling, and PCA reduction."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class EmbeddingError(ValueError):
    pass


class OovError(EmbeddingError):
    """Raised when every token of a phrase is out of vocabulary."""


class EmbeddingTable:
    """Immutable word -> dense vector map with a fixed dimension."""

    def __init__(self, vectors: dict[str, np.ndarray], dim: int):
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}
        for word, vec in vectors.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise EmbeddingError(f"vector for {word!r} has length {arr.shape}, expected {self.dim}")
            if not np.all(np.isfinite(arr)):
                raise EmbeddingError(f"vector for {word!r} has NaN/Inf components")
            arr.setflags(write=False)
            self._vectors[word] = arr

    def __contains__(self, word: str) -> bool:
        return word in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)

    def __getitem__(self, word: str) -> np.ndarray:
        try:
            return self._vectors[word]
        except KeyError:
            raise OovError(f"word not in embedding table: {word!r}") from None

    def words(self) -> list[str]:
        return list(self._vectors)

    def get(self, word: str):
        return self._vectors.get(word)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a word-vector text file: "word v1 v2 ... vd" per line, fixed d."""
    vectors: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, fields = parts[0], parts[1:]
            if dim is None:
                dim = len(fields)
                if dim == 0:
                    raise EmbeddingError(f"line {line_no}: no vector components")
            elif len(fields) != dim:
                raise EmbeddingError(
                    f"line {line_no}: inconsistent dimension {len(fields)} (expected {dim})")
            try:
                vec = np.array([float(x) for x in fields], dtype=np.float64)
            except ValueError as exc:
                raise EmbeddingError(f"line {line_no}: unparsable float ({exc})") from exc
            vectors[word] = vec
    if dim is None:
        raise EmbeddingError(f"empty embedding file: {path}")
    return EmbeddingTable(vectors, dim)


def embed_phrase(tokens: Sequence, table: EmbeddingTable) -> np.ndarray:
    """Mean of in-vocabulary token vectors; OOV tokens are skipped.

    Token order does not matter.  Raises :class:`OovError` when nothing in
    the phrase is embeddable.
    """
    words = [_word_of(t) for t in tokens]
    vecs = [table[w] for w in words if w in table]
    if not vecs:
        raise OovError(f"all tokens out of vocabulary: {' '.join(words)!r}")
    return np.mean(vecs, axis=0)


def _word_of(token) -> str:
    return token.lemma if hasattr(token, "lemma") else str(token)


@dataclass(frozen=True)
class PcaModel:
    """Affine projection onto the top principal directions.

    ``components`` has orthonormal rows (output_dim x input_dim), sorted by
    explained variance, descending.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.components.shape[1]

    @property
    def output_dim(self) -> int:
        return self.components.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "input_dim": self.input_dim,
            "output_dim": self.output_dim,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained_variance": self.explained_variance.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "PcaModel":
        obj = json.loads(text)
        return cls(
            mean=np.asarray(obj["mean"], dtype=np.float64),
            components=np.asarray(obj["components"], dtype=np.float64),
            explained_variance=np.asarray(obj["explained_variance"], dtype=np.float64),
        )


def pca_fit(data: Iterable[np.ndarray], out_dim: int) -> PcaModel:
    """Fit PCA by eigendecomposition of the sample covariance matrix.

    Sign convention: the largest-magnitude component of each principal
    direction is made positive, so results are stable across platforms.
    """
    X = np.asarray(list(data), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise EmbeddingError("pca_fit needs at least 2 data vectors")
    n, d = X.shape
    if not 1 <= out_dim <= d:
        raise EmbeddingError(f"out_dim {out_dim} not in 1..{d}")
    mean = X.mean(axis=0)
    centered = X - mean
    if np.allclose(centered, 0.0):
        raise EmbeddingError("degenerate data: all points identical")
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:out_dim]
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean,
                    components=components,
                    explained_variance=np.maximum(eigvals[order], 0.0))


def pca_transform(model: PcaModel, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.input_dim,):
        raise EmbeddingError(f"vector has shape {v.shape}, expected ({model.input_dim},)")
    return model.components @ (v - model.mean)


def pca_transform_all(model: PcaModel, vectors: Iterable[np.ndarray]) -> np.ndarray:
    V = np.asarray(list(vectors), dtype=np.float64)
    return (V - model.mean) @ model.components.T
