"""Compare the necessity classifiers (forest, gnb, svm, ensemble) on one split.

Without --corpus, runs on a freshly generated planted-signal corpus so the
table is reproducible from nothing.

Usage:
    python3 scripts/run_benchmark.py [--corpus PATH] [--n 400] [--seed 0] [--csv out.csv]
"""

import argparse
import sys
from pathlib import Path

from imrec.corpus import atomic_write_text, load_corpus
from imrec.evaluation import benchmark, generate_planted_corpus


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", help="labeled corpus JSONL; omit to use a synthetic one")
    parser.add_argument("--n", type=int, default=400, help="synthetic corpus size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ratio", type=float, default=0.8)
    parser.add_argument("--csv", help="also write the table as CSV")
    args = parser.parse_args(argv)

    if args.corpus:
        corpus = load_corpus(args.corpus)
    else:
        corpus = generate_planted_corpus(args.n, args.seed)
        print(f"# synthetic planted-signal corpus: n={args.n} seed={args.seed}", file=sys.stderr)

    table = benchmark(corpus, seed=args.seed, ratio=args.ratio)
    sys.stdout.write(table.to_text())
    if args.csv:
        atomic_write_text(Path(args.csv), table.to_csv())
        print(f"# wrote {args.csv}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
