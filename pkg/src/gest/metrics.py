"""Binary-separation metrics for a score column against same/different labels."""
from __future__ import annotations

import math
import warnings

import numpy as np

FISHER_EPS = 1e-12
FISHER_CAP = 1e12


class DegenerateInputWarning(UserWarning):
    pass


def _arrays(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"{len(s)} scores but {len(y)} labels")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    return s, y.astype(bool)


def is_degenerate(scores, labels) -> bool:
    s, y = _arrays(scores, labels)
    return y.all() or not y.any() or len(s) == 0 or bool((s == s[0]).all())


def point_biserial(scores, labels) -> float:
    """Pearson correlation of scores with 0/1 labels.

    Constant scores or a single class give 0.0 and a
    :class:`DegenerateInputWarning`.
    """
    s, y = _arrays(scores, labels)
    if is_degenerate(s, y):
        warnings.warn("point-biserial undefined (constant scores or one class); using 0", DegenerateInputWarning)
        return 0.0
    ds = s - math.fsum(s) / len(s)
    yf = y.astype(np.float64)
    dy = yf - math.fsum(yf) / len(yf)
    num = math.fsum(ds * dy)
    den = math.sqrt(math.fsum(ds * ds) * math.fsum(dy * dy))
    return max(-1.0, min(1.0, num / den))


def best_threshold_accuracy(scores, labels) -> tuple[float, float]:
    """Best accuracy of the rule ``score >= t``.

    Candidate thresholds are -inf, the midpoints of consecutive distinct
    scores and +inf. Ties go to the lowest threshold.
    """
    s, y = _arrays(scores, labels)
    if y.all() or not y.any():
        raise ValueError("need at least one positive and one negative")
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    uniq, start = np.unique(s, return_index=True)
    n, n_pos = len(s), int(y.sum())
    # negatives strictly below each cut; cut k sits just below uniq[k]
    neg_below = np.concatenate([[0], np.cumsum(~y)])[start]
    pos_below = np.concatenate([[0], np.cumsum(y)])[start]
    correct = np.concatenate([neg_below + (n_pos - pos_below), [n - n_pos]])
    k = int(np.argmax(correct))
    if k == 0:
        thr = -math.inf
    elif k == len(uniq):
        thr = math.inf
    else:
        thr = float(uniq[k - 1] + (uniq[k] - uniq[k - 1]) / 2)
    return thr, int(correct[k]) / n


def fisher_score(scores, labels) -> float:
    """(mu+ - mu-)^2 / (var+ + var- + eps), population variances, capped."""
    s, y = _arrays(scores, labels)
    pos, neg = s[y], s[~y]
    if len(pos) < 2 or len(neg) < 2:
        raise ValueError("fisher score needs at least two samples per class")
    mp, mn = math.fsum(pos) / len(pos), math.fsum(neg) / len(neg)
    vp = math.fsum((pos - mp) ** 2) / len(pos)
    vn = math.fsum((neg - mn) ** 2) / len(neg)
    return min(FISHER_CAP, (mp - mn) ** 2 / (vp + vn + FISHER_EPS))


def pr_curve(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(precision, recall, threshold) after each group of tied scores, best first."""
    s, y = _arrays(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("precision-recall curve needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    last = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    tp = np.cumsum(y)[last]
    predicted = last + 1
    return tp / predicted, tp / n_pos, s[last]


def pr_auc(scores, labels) -> float:
    """Trapezoidal area under the grouped PR curve, anchored at recall 0."""
    precision, recall, _ = pr_curve(scores, labels)
    p = np.concatenate([[precision[0]], precision])
    r = np.concatenate([[0.0], recall])
    return math.fsum(np.diff(r) * (p[1:] + p[:-1]) / 2)

