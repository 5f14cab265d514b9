"""Command-line surface: ingest, label, train, evaluate, benchmark, analyze,
serve, gen-corpus.

Exit codes: 0 success, 1 usage, 2 data/validation error, 3 transport/I-O.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from imrec.bugzilla import fetch_bugzilla
from imrec.corpus import (
    apply_label_overrides,
    atomic_write_text,
    label_corpus,
    load_annotations,
    load_corpus,
    load_label_overrides,
    parse_rfc3339,
    write_corpus,
)
from imrec.errors import DataError, TransportError
from imrec.evaluation import benchmark, generate_planted_corpus
from imrec.features import FeatureConfig
from imrec.pipeline import analyze, evaluate_model, parse_draft, train_pipeline
from imrec.pipeline import PipelineConfig
from imrec.service import (
    DEFAULT_ORIGINS,
    DEFAULT_PORT,
    canonical_json,
    load_model,
    recommendation_payload,
    save_model,
    serve,
)


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a corpus file from JSONL or a Bugzilla REST endpoint")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--from-jsonl", metavar="PATH")
    source.add_argument("--from-bugzilla", metavar="URL")
    p.add_argument("--product")
    p.add_argument("--since", help="RFC 3339 timestamp, inclusive")
    p.add_argument("--until", help="RFC 3339 timestamp, inclusive")
    p.add_argument("--page-size", type=int, default=200)
    p.add_argument("--cache", metavar="DIR", help="record/replay cache for Bugzilla responses")
    p.add_argument("--out", required=True)

    p = sub.add_parser("label", help="attach annotator label vectors and expert overrides")
    p.add_argument("--corpus", required=True)
    p.add_argument("--annotations", help="JSONL of {image_id, annotator_id, categories}")
    p.add_argument("--overrides", help="JSONL of {image_id, label_vector}")
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train the two-stage model and save an artifact")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--include-post-submission-features", action="store_true")
    p.add_argument("--recommender", choices=("gnb", "svm"), default="gnb")

    p = sub.add_parser("evaluate", help="hold out a test slice and report metrics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("benchmark", help="compare necessity models on one split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--csv", metavar="PATH", help="also write the table as CSV")

    p = sub.add_parser("analyze", help="read a draft report JSON from stdin, print the recommendation")
    p.add_argument("--model", required=True)

    p = sub.add_parser("serve", help="run the local inference service")
    p.add_argument("--model", required=True)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--bind", default="127.0.0.1")
    p.add_argument(
        "--origin",
        action="append",
        default=None,
        help="allowed CORS origin (repeatable; defaults to the bundled panel's dev origins)",
    )

    p = sub.add_parser("gen-corpus", help="generate the synthetic planted-signal corpus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    return parser


def _cmd_ingest(args) -> int:
    if args.from_jsonl:
        corpus = load_corpus(args.from_jsonl)
    else:
        missing = [name for name in ("product", "since", "until") if getattr(args, name) is None]
        if missing:
            raise UsageError(f"--from-bugzilla requires --{missing[0]}")
        corpus = fetch_bugzilla(
            args.from_bugzilla,
            product=args.product,
            since=parse_rfc3339(args.since, "--since"),
            until=parse_rfc3339(args.until, "--until"),
            page_size=args.page_size,
            cache_dir=args.cache,
        )
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} reports to {args.out}")
    return 0


def _cmd_label(args) -> int:
    if not args.annotations and not args.overrides:
        raise UsageError("label needs --annotations and/or --overrides")
    corpus = load_corpus(args.corpus)
    if args.annotations:
        corpus = label_corpus(corpus, load_annotations(args.annotations))
    if args.overrides:
        corpus = apply_label_overrides(corpus, load_label_overrides(args.overrides))
    write_corpus(corpus, args.out)
    labeled = sum(1 for r in corpus if r.label_vector is not None)
    print(f"wrote {len(corpus)} reports ({labeled} labeled) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    corpus = load_corpus(args.corpus)
    config = PipelineConfig(
        feature=FeatureConfig(include_post_submission=args.include_post_submission_features),
        recommender=args.recommender,
    )
    model = train_pipeline(corpus, config, seed=args.seed)
    save_model(model, args.out)
    members = ",".join(m.kind for m in model.members)
    print(
        f"trained model {model.model_version} (members={members}, "
        f"threshold={model.decision_threshold}, recommender={model.recommender_kind}) -> {args.out}"
    )
    return 0


def _eval_payload(report) -> dict:
    b = report.binary
    payload = {
        "n_train": report.n_train,
        "n_test": report.n_test,
        "binary": {
            "tp": b.tp,
            "fp": b.fp,
            "fn": b.fn,
            "tn": b.tn,
            "precision": b.precision,
            "recall": b.recall,
            "f1": b.f1,
        },
        "multilabel": None,
    }
    if report.multilabel is not None:
        m = report.multilabel
        payload["multilabel"] = {
            "n": len(m.correct_counts),
            "avg_correct": m.avg_correct,
            "frac_ge5": m.frac_ge5,
            "frac_gt5": m.frac_gt5,
        }
    return payload


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    corpus = load_corpus(args.corpus)
    report = evaluate_model(model, corpus, ratio=args.ratio, seed=args.seed)
    if args.json:
        print(canonical_json(_eval_payload(report)))
        return 0
    b = report.binary
    print(f"n_train={report.n_train} n_test={report.n_test}")
    print(
        f"binary: tp={b.tp} fp={b.fp} fn={b.fn} tn={b.tn} "
        f"precision={b.precision:.6f} recall={b.recall:.6f} f1={b.f1:.6f}"
    )
    if report.multilabel is None:
        print("multilabel: no labeled image-bearing reports in the test slice")
    else:
        m = report.multilabel
        print(
            f"multilabel: n={len(m.correct_counts)} avg_correct={m.avg_correct:.4f} "
            f"frac_ge5={m.frac_ge5:.6f} frac_gt5={m.frac_gt5:.6f}"
        )
    return 0


def _cmd_benchmark(args) -> int:
    corpus = load_corpus(args.corpus)
    table = benchmark(corpus, seed=args.seed, ratio=args.ratio)
    sys.stdout.write(table.to_text())
    if args.csv:
        atomic_write_text(Path(args.csv), table.to_csv())
    return 0


def _cmd_analyze(args) -> int:
    model = load_model(args.model)
    raw = sys.stdin.read()
    try:
        record = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON on stdin: {exc.msg}") from None
    draft = parse_draft(record)
    rec = analyze(model, draft)
    print(canonical_json(recommendation_payload(rec)))
    return 0


def _cmd_serve(args) -> int:
    model = load_model(args.model)
    origins = tuple(args.origin) if args.origin else DEFAULT_ORIGINS
    print(
        f"serving model {model.model_version} on http://{args.bind}:{args.port}",
        file=sys.stderr,
    )
    serve(model, bind=args.bind, port=args.port, origins=origins)
    return 0


def _cmd_gen_corpus(args) -> int:
    corpus = generate_planted_corpus(args.n, args.seed)
    write_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} synthetic reports to {args.out}")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "label": _cmd_label,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "analyze": _cmd_analyze,
    "serve": _cmd_serve,
    "gen-corpus": _cmd_gen_corpus,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses 2 for usage; our contract is 1
        return 0 if exc.code in (0, None) else 1
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        return 0


if __name__ == "__main__":
    sys.exit(main())
