"""Baseline text-overlap metrics: BLEU@4 and ROUGE-L."""
from __future__ import annotations

import math
import re
from collections import Counter

_WORD_RE = re.compile(r"[a-z0-9']+")
MAX_ORDER = 4

BLEU_SMOOTHING = "zero clipped counts replaced by 1/(2*len(hypothesis)); order capped at len(hypothesis)"


def tokenize(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def clipped_counts(ref: list[str], hyp: list[str], n: int) -> tuple[int, int]:
    """(clipped matches, hypothesis n-gram count) for order ``n``."""
    h, r = _ngrams(hyp, n), _ngrams(ref, n)
    return sum(min(c, r[g]) for g, c in h.items()), sum(h.values())


def clipped_precision(reference: str, hypothesis: str, n: int = 1) -> float:
    matches, total = clipped_counts(tokenize(reference), tokenize(hypothesis), n)
    return matches / total if total else 0.0


def bleu4(reference: str, hypothesis: str) -> float:
    """Sentence BLEU with up to 4-gram precisions and brevity penalty.

    Orders longer than the hypothesis are dropped and a zero clipped count
    becomes ``1 / (2 * len(hypothesis))`` so short texts stay comparable.
    """
    ref, hyp = tokenize(reference), tokenize(hypothesis)
    if not hyp or not ref:
        return 0.0
    c, r = len(hyp), len(ref)
    order = min(MAX_ORDER, c)
    logs = []
    for n in range(1, order + 1):
        matches, total = clipped_counts(ref, hyp, n)
        num = matches if matches else 1 / (2 * c)
        logs.append(math.log(num / total))
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(math.fsum(logs) / order))


def lcs_length(a: list[str], b: list[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(reference: str, hypothesis: str) -> float:
    """F1 of longest-common-subsequence precision and recall."""
    ref, hyp = tokenize(reference), tokenize(hypothesis)
    if not ref or not hyp:
        return 0.0
    lcs = lcs_length(ref, hyp)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hyp), lcs / len(ref)
    return 2 * p * r / (p + r)


def bleu4_pair(text_a: str, text_b: str) -> float:
    """BLEU@4 averaged over both directions so the pair score is symmetric."""
    return (bleu4(text_a, text_b) + bleu4(text_b, text_a)) / 2
