"""Corpus loading, pair construction, pair scoring and evaluation reports."""
from __future__ import annotations

import csv
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .embeddings import EmbeddingTable
from .matching import MatchConfig, graph_similarity, self_objective
from .metrics import DegenerateInputWarning, best_threshold_accuracy, fisher_score, point_biserial, pr_auc
from .model import GestGraph
from .serialization import graph_from_dict
from .text2gest import Lexicon, parse_text
from .textmetrics import BLEU_SMOOTHING, bleu4_pair, rouge_l

logger = logging.getLogger(__name__)

BUILTIN_SCORERS = ("gest-sm", "bleu4", "rouge-l")
EXTERNAL_PREFIX = "external:"
ALPHA_GRID = tuple(k / 100 for k in range(101))
CORR_TIE = 1e-12

METRIC_DEFINITIONS = {
    "corr": "Pearson correlation of score with 0/1 label (point-biserial); 0 when degenerate",
    "acc": "best accuracy of score >= t over t in {-inf, midpoints of distinct scores, +inf}; ties -> lowest t",
    "fisher": "(mu+ - mu-)^2 / (var+ + var- + 1e-12), population variances, capped at 1e12",
    "pr_auc": "trapezoid over recall of tie-grouped PR curve, anchored at (0, first precision)",
    "bleu4": BLEU_SMOOTHING + "; pair score averages both directions",
    "rouge-l": "F1 of LCS precision and recall over lowercase word tokens",
}


class CorpusError(ValueError):
    def __init__(self, message: str, lineno: int | None = None):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


class MissingMetricError(KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "missing metric"


class ExternalScoreError(ValueError):
    pass


@dataclass(frozen=True)
class Record:
    source_id: str
    text_id: str
    text: Optional[str] = None
    graph: Optional[GestGraph] = None


@dataclass
class Corpus:
    records: list[Record] = field(default_factory=list)

    def __post_init__(self):
        self._by_id = {}
        for r in self.records:
            if r.text_id in self._by_id:
                raise CorpusError(f"duplicate text_id {r.text_id!r}")
            self._by_id[r.text_id] = r

    def __len__(self):
        return len(self.records)

    def __getitem__(self, text_id: str) -> Record:
        return self._by_id[text_id]


def load_corpus(path) -> Corpus:
    """Read a JSONL corpus; blank lines are skipped."""
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"malformed JSON ({exc.msg})", lineno) from None
            if not isinstance(obj, dict):
                raise CorpusError("record must be a JSON object", lineno)
            for key in ("source_id", "text_id"):
                if not isinstance(obj.get(key), str) or not obj[key]:
                    raise CorpusError(f"missing or non-string {key!r}", lineno)
            text, graph = obj.get("text"), obj.get("graph")
            if text is None and graph is None:
                raise CorpusError("record needs 'text' or 'graph'", lineno)
            if text is not None and not isinstance(text, str):
                raise CorpusError("'text' must be a string", lineno)
            if graph is not None:
                try:
                    graph = graph_from_dict(graph)
                except (KeyError, TypeError, ValueError) as exc:
                    raise CorpusError(f"bad graph: {exc}", lineno) from None
            if obj["text_id"] in seen:
                raise CorpusError(f"duplicate text_id {obj['text_id']!r}", lineno)
            seen.add(obj["text_id"])
            records.append(Record(obj["source_id"], obj["text_id"], text, graph))
    return Corpus(records)


@dataclass
class PairRow:
    text_id_a: str
    text_id_b: str
    label: int
    scores: dict[str, float] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, str]:
        return pair_key(self.text_id_a, self.text_id_b)


def pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class ScoreTable:
    rows: list[PairRow] = field(default_factory=list)
    metrics: list[str] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)

    def column(self, name: str) -> np.ndarray:
        if name not in self.metrics:
            raise MissingMetricError(f"metric column {name!r} not in table (have {self.metrics})")
        return np.array([r.scores[name] for r in self.rows], dtype=np.float64)

    def with_column(self, name: str, values: Sequence[float]) -> "ScoreTable":
        if len(values) != len(self.rows):
            raise ValueError(f"{len(values)} values for {len(self.rows)} rows")
        rows = [PairRow(r.text_id_a, r.text_id_b, r.label, {**r.scores, name: float(v)}) for r, v in zip(self.rows, values)]
        metrics = self.metrics + [name] if name not in self.metrics else list(self.metrics)
        return ScoreTable(rows, metrics)

    def to_dicts(self) -> list[dict[str, Any]]:
        return [
            {"text_id_a": r.text_id_a, "text_id_b": r.text_id_b, "label": r.label, **{m: r.scores[m] for m in self.metrics}}
            for r in self.rows
        ]


def make_pairs(corpus: Corpus, neg_per_pos: int = 0, seed: int = 0) -> ScoreTable:
    """All same-source pairs plus sampled cross-source pairs.

    ``neg_per_pos=0`` keeps every cross-source pair; otherwise
    ``neg_per_pos`` negatives per positive are drawn without replacement.
    Rows follow corpus order.
    """
    if neg_per_pos < 0:
        raise ValueError("neg_per_pos must be >= 0")
    recs = corpus.records
    pos, neg = [], []
    for i in range(len(recs)):
        for j in range(i + 1, len(recs)):
            (pos if recs[i].source_id == recs[j].source_id else neg).append((i, j))
    if neg_per_pos and neg:
        k = min(len(neg), neg_per_pos * len(pos))
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(neg), size=k, replace=False))
        neg = [neg[t] for t in picked]
    rows = [
        PairRow(recs[i].text_id, recs[j].text_id, int(recs[i].source_id == recs[j].source_id))
        for i, j in sorted(pos + neg)
    ]
    return ScoreTable(rows, [])


@dataclass
class ScoringContext:
    """What the built-in scorers need besides the pair list."""

    corpus: Corpus
    embeddings: Optional[EmbeddingTable] = None
    lexicon: Optional[Lexicon] = None
    match_config: MatchConfig = field(default_factory=MatchConfig)


def _pmap(fn: Callable, items: list, parallelism: int) -> list:
    if parallelism <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def _text(corpus: Corpus, text_id: str) -> str:
    text = corpus[text_id].text
    if text is None:
        raise CorpusError(f"text {text_id!r} has no 'text' field")
    return text


def corpus_graphs(ctx: ScoringContext, text_ids) -> dict[str, GestGraph]:
    graphs = {}
    for tid in text_ids:
        rec = ctx.corpus[tid]
        if rec.graph is not None:
            graphs[tid] = rec.graph
        elif rec.text is not None:
            graphs[tid] = parse_text(rec.text, ctx.lexicon)
        else:
            raise CorpusError(f"no graph for {tid!r}")
    return graphs


def score_pairs(table: ScoreTable, scorer: str, ctx: ScoringContext, parallelism: int = 1) -> ScoreTable:
    """Fill the ``scorer`` column; the result does not depend on ``parallelism``."""
    pairs = [(r.text_id_a, r.text_id_b) for r in table.rows]
    if scorer.startswith(EXTERNAL_PREFIX):
        name = scorer[len(EXTERNAL_PREFIX) :]
        if name not in table.metrics:
            raise MissingMetricError(f"external metric {name!r} has not been loaded")
        return table
    if scorer == "gest-sm":
        if ctx.embeddings is None:
            raise ValueError("gest-sm needs an embedding table")
        ids = sorted({t for p in pairs for t in p})
        graphs = corpus_graphs(ctx, ids)
        cfg = ctx.match_config
        selfs = dict(zip(ids, _pmap(lambda t: self_objective(graphs[t], ctx.embeddings, cfg), ids, parallelism)))

        def score(p):
            a, b = p
            return graph_similarity(graphs[a], graphs[b], ctx.embeddings, cfg, (selfs[a], selfs[b]))

    elif scorer == "bleu4":

        def score(p):
            return bleu4_pair(_text(ctx.corpus, p[0]), _text(ctx.corpus, p[1]))

    elif scorer == "rouge-l":

        def score(p):
            return rouge_l(_text(ctx.corpus, p[0]), _text(ctx.corpus, p[1]))

    else:
        raise ValueError(f"unknown scorer {scorer!r}; expected one of {BUILTIN_SCORERS} or external:<name>")
    return table.with_column(scorer, _pmap(score, pairs, parallelism))


def metric_column_name(scorer: str) -> str:
    return scorer[len(EXTERNAL_PREFIX) :] if scorer.startswith(EXTERNAL_PREFIX) else scorer


def load_external_scores(table: ScoreTable, path, metric_name: str) -> ScoreTable:
    """Join a ``text_id_a,text_id_b,score`` CSV onto ``table`` by unordered pair."""
    found: dict[tuple[str, str], float] = {}
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise ExternalScoreError(f"cannot read external scores {path}: {exc}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"text_id_a", "text_id_b", "score"} <= set(reader.fieldnames):
            raise ExternalScoreError(f"{path}: header must be text_id_a,text_id_b,score")
        for row in reader:
            key = pair_key(row["text_id_a"], row["text_id_b"])
            where = f"{path} line {reader.line_num}"
            if key in found:
                raise ExternalScoreError(f"{where}: duplicate pair {key}")
            try:
                val = float(row["score"])
            except (TypeError, ValueError):
                raise ExternalScoreError(f"{where}: non-numeric score {row['score']!r}") from None
            if not math.isfinite(val):
                raise ExternalScoreError(f"{where}: non-finite score {row['score']!r}")
            found[key] = val
    values = []
    for r in table.rows:
        if r.key not in found:
            raise ExternalScoreError(f"{path}: no score for pair ({r.text_id_a}, {r.text_id_b})")
        values.append(found[r.key])
    return table.with_column(metric_name, values)


@dataclass(frozen=True)
class MinMax:
    low: float
    high: float

    @classmethod
    def fit(cls, values) -> "MinMax":
        v = np.asarray(values, dtype=np.float64)
        if v.size == 0:
            return cls(0.0, 1.0)
        return cls(float(v.min()), float(v.max()))

    def apply(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        span = self.high - self.low
        # a constant column carries no ranking information
        if span <= 0:
            return np.zeros_like(v)
        return (v - self.low) / span


def combine_linear(
    table: ScoreTable,
    metric_a: str,
    metric_b: str,
    alpha: float,
    name: str | None = None,
    norms: tuple[MinMax, MinMax] | None = None,
) -> tuple[ScoreTable, tuple[MinMax, MinMax]]:
    """Add ``alpha * a + (1 - alpha) * b`` over min-max normalized columns.

    Normalization constants come from ``table`` unless ``norms`` is given;
    they are returned so a fitted combination can be replayed elsewhere.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    a, b = table.column(metric_a), table.column(metric_b)
    if norms is None:
        norms = (MinMax.fit(a), MinMax.fit(b))
    combined = alpha * norms[0].apply(a) + (1 - alpha) * norms[1].apply(b)
    name = name or combined_name(metric_a, metric_b, alpha)
    return table.with_column(name, combined), norms


def combined_name(metric_a: str, metric_b: str, alpha: float) -> str:
    return f"{alpha:.2f}*{metric_a}+{1 - alpha:.2f}*{metric_b}"


def grid_alpha(a, b, labels) -> float:
    """Alpha in {0, 0.01, ..., 1} maximizing point-biserial of the mix; ties -> smaller."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    best_alpha, best = 0.0, -math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateInputWarning)
        for alpha in ALPHA_GRID:
            c = point_biserial(alpha * a + (1 - alpha) * b, labels)
            if c > best + CORR_TIE:
                best_alpha, best = alpha, c
    return best_alpha


def fit_alpha(table: ScoreTable, metric_a: str, metric_b: str) -> float:
    a, b = table.column(metric_a), table.column(metric_b)
    return grid_alpha(MinMax.fit(a).apply(a), MinMax.fit(b).apply(b), table.labels())


@dataclass(frozen=True)
class MetricResult:
    corr: float
    acc: float
    threshold: float
    fisher: Optional[float]
    pr_auc: float
    warnings: tuple[str, ...] = ()


def evaluate_column(scores, labels) -> MetricResult:
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateInputWarning)
        corr = point_biserial(scores, labels)
    notes += [str(w.message) for w in caught]
    thr, acc = best_threshold_accuracy(scores, labels)
    labels = np.asarray(labels)
    if min(int(labels.sum()), int((1 - labels).sum())) >= 2:
        fisher = fisher_score(scores, labels)
    else:
        fisher = None
        notes.append("fisher undefined: fewer than two samples in a class")
    return MetricResult(corr, acc, thr, fisher, pr_auc(scores, labels), tuple(notes))


def _fmt(x):
    if x is None:
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.6f}")


@dataclass
class EvalReport:
    results: dict[str, MetricResult]
    config: dict[str, Any]
    seed: int
    n_pairs: int = 0
    n_positive: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "n_pairs": self.n_pairs,
            "n_positive": self.n_positive,
            "metrics": [
                {
                    "metric": name,
                    "corr": _fmt(r.corr),
                    "acc": _fmt(r.acc),
                    "threshold": _fmt(r.threshold),
                    "fisher": _fmt(r.fisher),
                    "pr_auc": _fmt(r.pr_auc),
                    "warnings": list(r.warnings),
                }
                for name, r in sorted(self.results.items())
            ],
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        head = ["metric", "corr", "acc", "threshold", "fisher", "pr_auc"]
        body = []
        for row in self.to_dict()["metrics"]:
            cells = [row["metric"]]
            for k in head[1:]:
                v = row[k]
                cells.append("n/a" if v is None else v if isinstance(v, str) else f"{v:.6f}")
            body.append(cells)
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))) for r in [head] + body]
        return "\n".join(lines) + "\n"


def evaluate_table(table: ScoreTable, metrics: Sequence[str], config: dict[str, Any] | None = None, seed: int = 0) -> EvalReport:
    labels = table.labels()
    results = {m: evaluate_column(table.column(m), labels) for m in metrics}
    cfg = {"definitions": METRIC_DEFINITIONS, **(config or {})}
    return EvalReport(results, cfg, seed, len(table), int(labels.sum()))
