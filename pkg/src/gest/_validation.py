"""Input checks shared by the estimator wrappers."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .model import GestGraph


def check_texts(X) -> list[str]:
    if isinstance(X, str):
        raise TypeError("expected a sequence of texts, got a single string")
    texts = list(X)
    bad = [i for i, t in enumerate(texts) if not isinstance(t, str)]
    if bad:
        raise TypeError(f"item {bad[0]} is {type(texts[bad[0]]).__name__}, expected str")
    return texts


def check_graph_pairs(X) -> list[tuple[GestGraph, GestGraph]]:
    pairs = []
    for i, item in enumerate(X):
        try:
            a, b = item
        except (TypeError, ValueError):
            raise ValueError(f"item {i} is not a (graph, graph) pair") from None
        if not isinstance(a, GestGraph) or not isinstance(b, GestGraph):
            raise TypeError(f"item {i} must hold two GestGraph objects")
        pairs.append((a, b))
    return pairs


def check_binary_labels(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-d, got shape {y.shape}")
    if n is not None:
        check_consistent_length(np.empty(n), y)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


def check_score_columns(X, n_columns: int) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != n_columns:
        raise ValueError(f"expected {n_columns} score columns, got {X.shape[1]}")
    return X
