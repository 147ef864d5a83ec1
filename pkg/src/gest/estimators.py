"""scikit-learn style wrappers over the functional core.

>>> from gest.estimators import TextToGest
>>> g, = TextToGest().fit_transform(["John eats. Then he sleeps."])
>>> sorted(g.events)
['e1', 'e2']
"""
from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_binary_labels, check_graph_pairs, check_score_columns, check_texts
from .embeddings import EmbeddingTable, load_embeddings
from .evaluation import MinMax, grid_alpha
from .matching import MatchConfig, graph_similarity
from .metrics import best_threshold_accuracy
from .text2gest import default_lexicon, load_lexicon, parse_text


class TextToGest(TransformerMixin, BaseEstimator):
    """Texts in, event graphs out. ``lexicon`` is a path or None for the default."""

    def __init__(self, lexicon=None):
        self.lexicon = lexicon

    def fit(self, X=None, y=None):
        self.lexicon_ = default_lexicon() if self.lexicon is None else load_lexicon(self.lexicon)
        return self

    def transform(self, X):
        check_is_fitted(self, "lexicon_")
        return [parse_text(t, self.lexicon_) for t in check_texts(X)]


class GestSimilarity(ClassifierMixin, BaseEstimator):
    """Scores graph pairs with spectral matching; ``fit`` learns a decision threshold.

    ``embeddings`` is an :class:`EmbeddingTable` or a path to a GloVe text file.
    """

    def __init__(
        self,
        embeddings=None,
        dim=None,
        vocab_limit=None,
        w_action=0.4,
        w_entities=0.3,
        w_location=0.1,
        w_time=0.1,
        w_props=0.1,
        alpha_rel=0.5,
        tol=1e-8,
        max_iter=1000,
        max_candidates=4096,
        refs_as_edges=False,
    ):
        self.embeddings = embeddings
        self.dim = dim
        self.vocab_limit = vocab_limit
        self.w_action = w_action
        self.w_entities = w_entities
        self.w_location = w_location
        self.w_time = w_time
        self.w_props = w_props
        self.alpha_rel = alpha_rel
        self.tol = tol
        self.max_iter = max_iter
        self.max_candidates = max_candidates
        self.refs_as_edges = refs_as_edges

    def _prepare(self):
        if isinstance(self.embeddings, EmbeddingTable):
            self.table_ = self.embeddings
        elif self.embeddings is None:
            raise ValueError("GestSimilarity needs embeddings")
        else:
            self.table_ = load_embeddings(self.embeddings, self.dim, self.vocab_limit)
        self.config_ = MatchConfig.from_dict({k: getattr(self, k) for k in MatchConfig().to_dict()})

    def fit(self, X, y=None):
        self._prepare()
        self.classes_ = np.array([0, 1])
        if y is None:
            self.threshold_ = 0.5
            return self
        s = self.score_samples(X)
        self.threshold_, self.train_accuracy_ = best_threshold_accuracy(s, check_binary_labels(y, len(s)))
        return self

    def score_samples(self, X) -> np.ndarray:
        if not hasattr(self, "table_"):
            self._prepare()
        pairs = check_graph_pairs(X)
        return np.array([graph_similarity(a, b, self.table_, self.config_) for a, b in pairs], dtype=np.float64)

    def decision_function(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        return self.score_samples(X) - (self.threshold_ if math.isfinite(self.threshold_) else 0.0)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "threshold_")
        return (self.score_samples(X) >= self.threshold_).astype(np.int64)


class LinearMetricCombiner(TransformerMixin, BaseEstimator):
    """Convex combination of two min-max normalized score columns.

    With ``alpha=None`` the weight is grid-searched on ``fit`` to maximize
    point-biserial correlation with ``y``.
    """

    def __init__(self, alpha=None):
        self.alpha = alpha

    def fit(self, X, y=None):
        X = check_score_columns(X, 2)
        self.norms_ = (MinMax.fit(X[:, 0]), MinMax.fit(X[:, 1]))
        if self.alpha is not None:
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("alpha must be in [0, 1]")
            self.alpha_ = float(self.alpha)
            return self
        if y is None:
            raise ValueError("fitting alpha needs labels")
        y = check_binary_labels(y, len(X))
        a, b = self.norms_[0].apply(X[:, 0]), self.norms_[1].apply(X[:, 1])
        self.alpha_ = grid_alpha(a, b, y)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "alpha_")
        X = check_score_columns(X, 2)
        a, b = self.norms_[0].apply(X[:, 0]), self.norms_[1].apply(X[:, 1])
        return self.alpha_ * a + (1 - self.alpha_) * b
