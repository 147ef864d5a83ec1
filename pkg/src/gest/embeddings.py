"""Word-vector table in GloVe text format and phrase similarity on top of it."""
from __future__ import annotations

from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np


class EmbeddingError(ValueError):
    pass


class EmbeddingTable:
    """Read-only map from lowercase word to a float vector of length ``dim``."""

    def __init__(self, vectors: Mapping[str, Sequence[float]], dim: int | None = None):
        rows = {}
        for word, vec in vectors.items():
            key = word.lower()
            if key in rows:
                continue
            arr = np.asarray(vec, dtype=np.float64)
            arr.setflags(write=False)
            rows[key] = arr
        if dim is None:
            dim = len(next(iter(rows.values()))) if rows else 1
        if dim <= 0:
            raise EmbeddingError("dim must be positive")
        for word, arr in rows.items():
            if arr.shape != (dim,):
                raise EmbeddingError(f"vector for {word!r} has length {arr.size}, expected {dim}")
        self.dim = dim
        self.vectors: Mapping[str, np.ndarray] = MappingProxyType(rows)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, word: str) -> np.ndarray:
        return self.vectors[word.lower()]

    def get(self, word: str, default=None):
        return self.vectors.get(word.lower(), default)

    def mean_vector(self, words: Sequence[str]) -> np.ndarray | None:
        """Mean of the in-vocabulary vectors, None if every word is unknown."""
        vecs = [self.vectors[w] for w in (x.lower() for x in words) if w in self.vectors]
        if not vecs:
            return None
        return np.mean(vecs, axis=0)


def load_embeddings(path, expected_dim: int | None = None, vocab_limit: int | None = None) -> EmbeddingTable:
    """Read ``word v1 ... vd`` lines (no header).

    At most ``vocab_limit`` distinct words are kept, in file order. When
    ``expected_dim`` is None the first row fixes the dimension.
    """
    vectors: dict[str, list[float]] = {}
    dim = expected_dim
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise EmbeddingError(f"cannot read embeddings {path}: {exc}") from None
    with fh:
        for lineno, line in enumerate(fh, 1):
            if vocab_limit is not None and len(vectors) >= vocab_limit:
                break
            parts = line.rstrip("\n").split(" ")
            if not line.strip():
                continue
            word, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            if len(values) != dim:
                raise EmbeddingError(f"line {lineno}: expected {dim} values, found {len(values)}")
            try:
                vec = [float(v) for v in values]
            except ValueError:
                raise EmbeddingError(f"line {lineno}: non-numeric value") from None
            vectors.setdefault(word.lower(), vec)
    return EmbeddingTable(vectors, dim if dim else None)


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return 0.0
    return float(min(1.0, max(-1.0, np.dot(u, v) / (nu * nv))))


def phrase_similarity(table: EmbeddingTable, phrase_a: Sequence[str], phrase_b: Sequence[str]) -> float:
    """Similarity in [0, 1] of two word lists.

    Mean-pooled vectors compared by cosine rescaled to ``(cos + 1) / 2``.
    If either phrase has no known word, fall back to exact string equality.
    """
    va, vb = table.mean_vector(phrase_a), table.mean_vector(phrase_b)
    if va is None or vb is None:
        joined_a = " ".join(w.lower() for w in phrase_a)
        joined_b = " ".join(w.lower() for w in phrase_b)
        return 1.0 if joined_a == joined_b else 0.0
    return min(1.0, max(0.0, (cosine(va, vb) + 1.0) / 2.0))


def words(text: str) -> list[str]:
    return text.lower().split()


__all__ = ["EmbeddingTable", "EmbeddingError", "load_embeddings", "cosine", "phrase_similarity", "words"]

