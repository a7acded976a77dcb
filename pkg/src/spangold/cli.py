"""Command line entry point for the whole pipeline and each stage."""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from pathlib import Path

from . import corpus_io
from .adjudication import NO_LABEL, NO_MAJORITY, adjudicate_corpus
from .metric_validation import (
    DEFAULT_ENTITY_WINDOW,
    MetricReport,
    align_metric_errors,
    summarize_validation,
)
from .model import (
    DEFAULT_FUNCTION_WORDS,
    WEEKDAYS,
    AnnotationSet,
    ValidationError,
    tokenize,
)
from .qualification import DEFAULT_THRESHOLD, score_qualification
from .stats import (
    CATEGORY_LABELS,
    KAPPA_MODES,
    confusion_matrix,
    error_profile,
    fleiss_kappa,
    render_profiles_csv,
    render_profiles_text,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def load_lexicon(path: str | None) -> tuple[frozenset, frozenset]:
    """Function-word and weekday lexicons, optionally from a JSON config."""
    if not path:
        return frozenset(DEFAULT_FUNCTION_WORDS), frozenset(WEEKDAYS)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return (
        frozenset(data.get("function_words", DEFAULT_FUNCTION_WORDS)),
        frozenset(data.get("weekdays", WEEKDAYS)),
    )


def _load(args) -> tuple:
    return corpus_io.load_corpus(args.corpus, fmt=args.format)


def cmd_tokenize(args) -> int:
    text = (
        Path(args.text).read_text(encoding="utf-8")
        if args.text and Path(args.text).exists()
        else (args.text if args.text else sys.stdin.read())
    )
    tokens = tokenize(text)
    if args.json:
        print(json.dumps([t.to_json() for t in tokens], indent=2))
    else:
        for tok in tokens:
            print(f"{tok.index}\t{tok.surface}")
    return EXIT_OK


def cmd_lint(args) -> int:
    docs, sets = _load(args)
    warnings = corpus_io.lint_corpus(docs, sets)
    for warning in warnings:
        print(warning)
    print(f"{len(docs)} documents, {len(sets)} annotation sets, {len(warnings)} warnings")
    return EXIT_OK


def cmd_adjudicate(args) -> int:
    function_words, weekdays = load_lexicon(args.lexicon)
    docs, sets = _load(args)
    golds, _ = adjudicate_corpus(docs, sets, function_words, weekdays)
    skipped = [
        entry
        for gold in golds
        for entry in gold.rule_log
        if entry.rule.endswith("_skipped")
    ]
    if args.strict and skipped:
        for entry in skipped:
            print(f"strict: {entry.doc_id}: {entry.rule}: {entry.note}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.out:
        corpus_io.save_gold(golds, args.out)
    totals = Counter()
    for gold in golds:
        totals.update(gold.category_counts())
    grand = sum(totals.values())
    print(f"{grand} accuracy errors in {len(golds)} stories")
    for label in CATEGORY_LABELS:
        print(f"  {label.replace('_', ' '):<14} {totals[label]}")
    print(f"  {'no majority':<14} {totals[NO_MAJORITY] + totals[NO_LABEL]}")
    return EXIT_OK


def cmd_kappa(args) -> int:
    function_words, weekdays = load_lexicon(args.lexicon)
    docs, sets = _load(args)
    _, clusters = adjudicate_corpus(docs, sets, function_words, weekdays)
    modes = [args.mode] if args.mode else list(KAPPA_MODES)
    for mode in modes:
        report = fleiss_kappa(clusters, mode=mode)
        flag = " (degenerate)" if report.degenerate else ""
        print(
            f"kappa[{mode}] = {report.kappa:.2f} "
            f"({report.n_items} items, {report.n_raters} raters){flag}"
        )
        if args.json:
            print(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return EXIT_OK


def cmd_confusion(args) -> int:
    function_words, weekdays = load_lexicon(args.lexicon)
    docs, sets = _load(args)
    _, clusters = adjudicate_corpus(docs, sets, function_words, weekdays)
    matrix = confusion_matrix(clusters)
    print(matrix.render_csv() if args.csv else matrix.render_text())
    return EXIT_OK


def cmd_profile(args) -> int:
    docs, sets = _load(args)
    if args.gold:
        golds = corpus_io.load_gold(args.gold)
    else:
        function_words, weekdays = load_lexicon(args.lexicon)
        golds, _ = adjudicate_corpus(docs, sets, function_words, weekdays)
    profiles = error_profile(golds, docs)
    print(render_profiles_csv(profiles) if args.csv else render_profiles_text(profiles))
    return EXIT_OK


def cmd_validate_metric(args) -> int:
    docs, sets = _load(args)
    if args.gold:
        golds = corpus_io.load_gold(args.gold)
    else:
        golds, _ = adjudicate_corpus(docs, sets)
    with open(args.metric, encoding="utf-8") as fh:
        report, rejected = MetricReport.from_json(json.load(fh))
    for reason in rejected:
        print(f"rejected metric record: {reason}", file=sys.stderr)
    result = align_metric_errors(report, golds, docs, window=args.window)
    fmt = "csv" if args.csv else ("json" if args.json else "text")
    print(summarize_validation(result, fmt=fmt))
    return EXIT_OK


def cmd_qualify(args) -> int:
    docs, _ = _load(args)
    golds = corpus_io.load_gold(args.gold)
    with open(args.candidate, encoding="utf-8") as fh:
        data = json.load(fh)
    doc = next((d for d in docs if d.doc_id == data.get("doc_id")), None)
    if doc is None:
        print(f"candidate references unknown document {data.get('doc_id')!r}", file=sys.stderr)
        return EXIT_VALIDATION
    candidate = AnnotationSet.from_json(data, doc)
    reference = next((g for g in golds if g.doc_id == doc.doc_id), None)
    if reference is None:
        print(f"no gold standard for {doc.doc_id!r}", file=sys.stderr)
        return EXIT_VALIDATION
    result = score_qualification(
        candidate, reference, doc, threshold=args.threshold, span_only=args.span_only
    )
    print(json.dumps(result.to_json(), indent=2, sort_keys=True))
    return EXIT_OK if result.passed else EXIT_VALIDATION


def cmd_serve(args) -> int:
    from .service import ServiceConfig, serve

    config = ServiceConfig.from_file(args.config)
    if args.static:
        config.static_dir = args.static
    if args.k is not None:
        config.submissions_per_doc = args.k
    if args.threshold is not None:
        config.qualification_threshold = args.threshold
    serve(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spangold",
        description="Adjudicate span-level accuracy-error annotations into a gold standard.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def corpus_args(p):
        p.add_argument("--in", dest="corpus", required=True, help="corpus directory")
        p.add_argument(
            "--format",
            choices=[corpus_io.FORMAT_NATIVE, corpus_io.FORMAT_RELEASED],
            default=corpus_io.FORMAT_NATIVE,
        )
        p.add_argument("--lexicon", help="JSON file with function_words/weekdays lists")

    p = sub.add_parser("tokenize", help="tokenize text from a file, argument, or stdin")
    p.add_argument("text", nargs="?", help="file path or literal text (stdin if absent)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("lint", help="report corpus quality warnings")
    corpus_args(p)
    p.set_defaults(func=cmd_lint)

    p = sub.add_parser("adjudicate", help="produce the gold standard")
    corpus_args(p)
    p.add_argument("--out", help="output gold file or directory")
    p.add_argument("--strict", action="store_true", help="skipped guideline rules become errors")
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("kappa", help="inter-annotator agreement")
    corpus_args(p)
    p.add_argument("--mode", choices=list(KAPPA_MODES))
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("confusion", help="majority-vs-minority confusion matrix")
    corpus_args(p)
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_confusion)

    p = sub.add_parser("profile", help="per-system average error counts")
    corpus_args(p)
    p.add_argument("--gold", help="gold file produced by adjudicate (recomputed if absent)")
    p.add_argument("--csv", action="store_true")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("validate-metric", help="recall/precision of a metric vs gold")
    corpus_args(p)
    p.add_argument("--gold", help="gold file (recomputed if absent)")
    p.add_argument("--metric", required=True, help="metric report JSON")
    p.add_argument("--window", type=int, default=DEFAULT_ENTITY_WINDOW)
    p.add_argument("--csv", action="store_true")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate_metric)

    p = sub.add_parser("qualify", help="score a candidate annotator against a reference")
    corpus_args(p)
    p.add_argument("--gold", required=True, help="reference gold file")
    p.add_argument("--candidate", required=True, help="candidate annotation set JSON")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--span-only", action="store_true", help="ignore categories when matching")
    p.set_defaults(func=cmd_qualify)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--config", required=True, help="service config JSON")
    p.add_argument("--static", help="directory of UI files to serve at /")
    p.add_argument("--k", type=int, help="submissions per document (overrides config)")
    p.add_argument("--threshold", type=float, help="qualification pass threshold (overrides config)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
