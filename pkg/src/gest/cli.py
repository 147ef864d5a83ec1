"""Command-line entry point: ``gest parse|inspect|compare|evaluate|combine``.

Exit codes: 0 ok, 1 invalid graph (inspect), 2 unreadable or malformed
input, 3 malformed lexicon, 4 candidate cap exceeded, 5 external metric
missing. Payload goes to stdout, diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .embeddings import EmbeddingError, load_embeddings
from .evaluation import (
    BUILTIN_SCORERS,
    EXTERNAL_PREFIX,
    CorpusError,
    ExternalScoreError,
    MissingMetricError,
    ScoringContext,
    combine_linear,
    combined_name,
    evaluate_table,
    fit_alpha,
    load_corpus,
    load_external_scores,
    make_pairs,
    metric_column_name,
    score_pairs,
)
from .matching import CandidateCapError, MatchConfig, build_affinity, graph_similarity, sm_match_affinity
from .model import GestGraph, validate_graph
from .serialization import CanonicalParseError, from_json, parse_canonical_string, to_canonical_string, to_json
from .text2gest import LexiconError, default_lexicon, load_lexicon, parse_text_report

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INPUT = 2
EXIT_LEXICON = 3
EXIT_CAP = 4
EXIT_EXTERNAL = 5

_CONFIG_FLAGS = {
    "w_action": float,
    "w_entities": float,
    "w_location": float,
    "w_time": float,
    "w_props": float,
    "alpha_rel": float,
    "tol": float,
    "max_iter": int,
    "max_candidates": int,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_INPUT) from None


def _lexicon(args):
    if args.lexicon is None:
        return default_lexicon()
    try:
        return load_lexicon(args.lexicon)
    except LexiconError as exc:
        raise CliError(str(exc), EXIT_LEXICON) from None


def _embeddings(args):
    if not args.embeddings:
        raise CliError("--embeddings is required", EXIT_INPUT)
    try:
        return load_embeddings(args.embeddings, args.dim, args.vocab_limit)
    except EmbeddingError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None


def _match_config(args) -> MatchConfig:
    cfg = MatchConfig()
    if args.config:
        try:
            cfg = MatchConfig.from_json(_read(args.config))
        except (ValueError, TypeError, KeyError) as exc:
            raise CliError(f"bad config {args.config}: {exc}", EXIT_INPUT) from None
    overrides = {k: getattr(args, k) for k in _CONFIG_FLAGS if getattr(args, k) is not None}
    if args.refs_as_edges:
        overrides["refs_as_edges"] = True
    try:
        return MatchConfig.from_dict({**cfg.to_dict(), **overrides}) if overrides else cfg
    except (ValueError, TypeError) as exc:
        raise CliError(f"bad matching parameters: {exc}", EXIT_INPUT) from None


def _load_graph(path: str, args, lexicon=None) -> GestGraph:
    """JSON, canonical text, or controlled English (with ``--text``)."""
    content = _read(path)
    stripped = content.lstrip()
    try:
        if args.text:
            return parse_text_report(content, lexicon or _lexicon(args)).graph
        if stripped.startswith("{"):
            return from_json(content)
        if not stripped or stripped.startswith(("EVENT ", "PAYLOAD ")):
            return parse_canonical_string(content)
    except CanonicalParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_INPUT) from None
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(f"{path}: malformed graph: {exc}", EXIT_INPUT) from None
    raise CliError(f"{path}: not a graph file (use --text for plain text)", EXIT_INPUT)


def cmd_parse(args) -> int:
    lex = _lexicon(args)
    text = _read(args.input)
    result = parse_text_report(text, lex)
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.format == "canonical":
        sys.stdout.write(to_canonical_string(result.graph))
    else:
        sys.stdout.write(to_json(result.graph) + "\n")
    return EXIT_OK


def cmd_inspect(args) -> int:
    g = _load_graph(args.graph, args)
    report = validate_graph(g)
    out = {
        "events": len(g),
        "relations": len(g.relations),
        "collapsed": sorted(g.payloads),
        "depth": g.depth(),
        "valid": report.ok,
        "violations": [{"code": v.code, "message": v.message, "where": v.where} for v in report],
    }
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_compare(args) -> int:
    table = _embeddings(args)
    cfg = _match_config(args)
    lex = _lexicon(args) if args.text else None
    g1, g2 = _load_graph(args.a, args, lex), _load_graph(args.b, args, lex)
    try:
        score = graph_similarity(g1, g2, table, cfg)
        lines = [f"{score:.6f}"]
        if args.explain and g1.events and g2.events:
            aff = build_affinity(g1, g2, table, cfg)
            match = sm_match_affinity(aff, cfg)
            lines.append(f"objective {match.objective:.6f}")
            for (i, a), (id1, id2) in zip(match.pairs, match.id_pairs):
                k = aff.index(i, a)
                lines.append(f"{id1} -> {id2} {aff.M[k, k]:.6f}")
    except CandidateCapError as exc:
        raise CliError(str(exc), EXIT_CAP) from None
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _parse_externals(specs) -> dict[str, str]:
    out = {}
    for spec in specs or ():
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise CliError(f"--external expects NAME=CSV, got {spec!r}", EXIT_INPUT)
        out[name] = path
    return out


def _scorers(names, externals) -> list[str]:
    scorers = []
    for name in names:
        if name in BUILTIN_SCORERS or name.startswith(EXTERNAL_PREFIX):
            scorers.append(name)
        elif name in externals:
            scorers.append(EXTERNAL_PREFIX + name)
        else:
            raise CliError(f"unknown metric {name!r}; give --external {name}=CSV for external scores", EXIT_EXTERNAL)
    return scorers


def _scored_table(corpus_path, scorers, externals, args, embeddings):
    try:
        corpus = load_corpus(corpus_path)
    except OSError as exc:
        raise CliError(f"cannot read {corpus_path}: {exc}", EXIT_INPUT) from None
    except CorpusError as exc:
        raise CliError(f"{corpus_path}: {exc}", EXIT_INPUT) from None
    table = make_pairs(corpus, args.neg_per_pos, args.seed)
    if not any(r.label for r in table.rows) or all(r.label for r in table.rows):
        raise CliError(f"{corpus_path}: need both same-source and cross-source pairs", EXIT_INPUT)
    ctx = ScoringContext(corpus, embeddings, _lexicon(args), _match_config(args))
    for scorer in scorers:
        if scorer.startswith(EXTERNAL_PREFIX):
            name = metric_column_name(scorer)
            if name not in externals:
                raise CliError(f"external metric {name!r} needs --external {name}=CSV", EXIT_EXTERNAL)
            try:
                table = load_external_scores(table, externals[name], name)
            except ExternalScoreError as exc:
                raise CliError(str(exc), EXIT_EXTERNAL) from None
            continue
        try:
            table = score_pairs(table, scorer, ctx, args.parallel)
        except CandidateCapError as exc:
            raise CliError(str(exc), EXIT_CAP) from None
        except CorpusError as exc:
            raise CliError(f"{corpus_path}: {exc}", EXIT_INPUT) from None
    return table


def _config_snapshot(args, scorers, embeddings) -> dict:
    snap = {
        "metrics": list(scorers),
        "neg_per_pos": args.neg_per_pos,
        "lexicon": args.lexicon or "default",
    }
    if embeddings is not None:
        snap["embeddings"] = {"path": args.embeddings, "dim": embeddings.dim, "words": len(embeddings)}
        snap["match_config"] = _match_config(args).to_dict()
    return snap


def _emit_report(report, fmt, extra=None):
    if fmt == "table":
        if extra:
            for k, v in extra.items():
                sys.stdout.write(f"{k}: {v}\n")
        sys.stdout.write(report.to_table())
        return
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def cmd_evaluate(args) -> int:
    externals = _parse_externals(args.external)
    scorers = _scorers([m.strip() for m in args.metrics.split(",") if m.strip()], externals)
    if not scorers:
        raise CliError("--metrics is empty", EXIT_INPUT)
    embeddings = _embeddings(args) if "gest-sm" in scorers else None
    table = _scored_table(args.corpus, scorers, externals, args, embeddings)
    names = [metric_column_name(s) for s in scorers]
    report = evaluate_table(table, names, _config_snapshot(args, scorers, embeddings), args.seed)
    _emit_report(report, args.format)
    return EXIT_OK


def cmd_combine(args) -> int:
    externals = _parse_externals(args.external)
    scorers = _scorers(list(dict.fromkeys([args.metric_a, args.metric_b])), externals)
    embeddings = _embeddings(args) if "gest-sm" in scorers else None
    a, b = metric_column_name(_scorers([args.metric_a], externals)[0]), metric_column_name(_scorers([args.metric_b], externals)[0])
    train = _scored_table(args.train, scorers, externals, args, embeddings)
    test = _scored_table(args.eval, scorers, externals, args, embeddings)
    alpha = fit_alpha(train, a, b)
    _, norms = combine_linear(train, a, b, alpha)
    name = combined_name(a, b, alpha)
    test, _ = combine_linear(test, a, b, alpha, name=name, norms=norms)
    snap = _config_snapshot(args, scorers, embeddings)
    snap["normalization"] = {"fit_on": "train", a: [norms[0].low, norms[0].high], b: [norms[1].low, norms[1].high]}
    report = evaluate_table(test, list(dict.fromkeys([a, b, name])), snap, args.seed)
    _emit_report(report, args.format, {"alpha": f"{alpha:.2f}", "combined": name})
    return EXIT_OK


def _add_embedding_flags(p):
    p.add_argument("--embeddings", help="GloVe-format text file")
    p.add_argument("--dim", type=int, help="expected vector dimension")
    p.add_argument("--vocab-limit", type=int, help="keep only the first N words")
    p.add_argument("--config", help="MatchConfig JSON file")
    for name, typ in _CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, help="overrides --config")
    p.add_argument("--refs-as-edges", action="store_true", help="treat same-X refs as extra edges")


def _add_eval_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neg-per-pos", type=int, default=0, help="0 keeps every cross-source pair")
    p.add_argument("--parallel", type=int, default=1, help="scoring threads; output does not depend on it")
    p.add_argument("--external", action="append", metavar="NAME=CSV", help="precomputed scores (repeatable)")
    p.add_argument("--format", choices=("json", "table"), default="json")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("--lexicon", help="lexicon JSON (default: bundled)")
    parser = argparse.ArgumentParser(prog="gest", description="Event-graph parsing, matching and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", parents=[common], help="controlled English to graph")
    p.add_argument("input", nargs="?", default="-", help="text file, default stdin")
    p.add_argument("--format", choices=("json", "canonical"), default="json")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("inspect", parents=[common], help="validate a graph file and summarize it")
    p.add_argument("graph")
    p.add_argument("--text", action="store_true", help="input is controlled English")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("compare", parents=[common], help="similarity of two graphs or texts")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--text", action="store_true", help="inputs are controlled English")
    p.add_argument("--explain", action="store_true", help="list matched pairs and their affinities")
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", parents=[common], help="score all pairs of a corpus and report separation metrics")
    p.add_argument("corpus")
    p.add_argument("--metrics", default="gest-sm", help="comma list of gest-sm, bleu4, rouge-l, external:NAME")
    _add_embedding_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("combine", parents=[common], help="fit a linear mix of two metrics on train, report on eval")
    p.add_argument("train")
    p.add_argument("eval")
    p.add_argument("metric_a")
    p.add_argument("metric_b")
    _add_embedding_flags(p)
    _add_eval_flags(p)
    p.set_defaults(func=cmd_combine)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    # the parser reports skipped clauses itself
    logging.getLogger("gest.text2gest").setLevel(logging.ERROR)
    if getattr(args, "parallel", 1) < 1:
        parser.error("--parallel must be >= 1")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"gest: error: {exc}", file=sys.stderr)
        return exc.code
    except MissingMetricError as exc:
        print(f"gest: error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL


if __name__ == "__main__":
    sys.exit(main())
