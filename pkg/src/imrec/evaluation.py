"""Splitting, metrics, the model benchmark table, and the synthetic corpus.

The planted-signal corpus gives a desk-scale ground truth: each category has
one distinctive description token, so a correct pipeline must recover the
token -> category mapping almost perfectly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Sequence

from imrec.corpus import (
    Corpus,
    ImageCategory,
    IssueReport,
    LabelVector,
    NUM_CATEGORIES,
)
from imrec.errors import DataError
from imrec.features import FeatureConfig, compute_schema_id, fit_metadata_encoder, fit_tfidf, report_text
from imrec.models import (
    ForestConfig,
    ensemble_predict,
    necessity_proba,
    train_necessity_scorer,
)
from imrec.textprep import default_stopwords, preprocess

# --- Splitting -----------------------------------------------------------------

_STRATA_ORDER = (True, False, None)


def split(corpus: Corpus, ratio: float, seed: int) -> tuple[Corpus, Corpus]:
    """Stratified (by has_image) seeded holdout; train gets round(ratio * n).

    Per-stratum train counts are the largest-remainder apportionment of the
    total, so class proportions are preserved within rounding. Both sides
    keep the original corpus order.
    """
    n = len(corpus)
    if n < 2:
        raise DataError("cannot split a corpus with fewer than 2 reports")
    if not 0.0 < ratio < 1.0:
        raise DataError("split ratio must be in (0,1)")
    total_target = int(math.floor(ratio * n + 0.5))
    if total_target < 1 or total_target >= n:
        raise DataError(f"degenerate split: train size would be {total_target} of {n}")

    strata: dict[bool | None, list[int]] = {key: [] for key in _STRATA_ORDER}
    for i, report in enumerate(corpus):
        strata[report.has_image].append(i)
    present = [key for key in _STRATA_ORDER if strata[key]]

    floors = {}
    remainders = []
    for key in present:
        exact = ratio * len(strata[key])
        floors[key] = int(math.floor(exact))
        remainders.append((-(exact - floors[key]), present.index(key), key))
    leftover = total_target - sum(floors.values())
    remainders.sort()
    bumped = {key for _, _, key in remainders[:leftover]}

    rng = random.Random(seed)
    train_ids: set[int] = set()
    for key in present:
        target = floors[key] + (1 if key in bumped else 0)
        target = min(target, len(strata[key]))
        train_ids.update(rng.sample(strata[key], target))

    train = tuple(corpus.reports[i] for i in range(n) if i in train_ids)
    test = tuple(corpus.reports[i] for i in range(n) if i not in train_ids)
    return (
        Corpus(train, provenance=corpus.provenance),
        Corpus(test, provenance=corpus.provenance),
    )


# --- Metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryMetrics:
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float


def binary_metrics(preds: Sequence[bool], truth: Sequence[bool]) -> BinaryMetrics:
    """Confusion counts with the 0-denominator convention P = R = F1 = 0."""
    preds = [bool(p) for p in preds]
    truth = [bool(t) for t in truth]
    if len(preds) != len(truth):
        raise DataError("preds and truth lengths differ")
    if not preds:
        raise DataError("cannot compute metrics on empty inputs")
    tp = sum(1 for p, t in zip(preds, truth) if p and t)
    fp = sum(1 for p, t in zip(preds, truth) if p and not t)
    fn = sum(1 for p, t in zip(preds, truth) if not p and t)
    tn = sum(1 for p, t in zip(preds, truth) if not p and not t)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return BinaryMetrics(tp=tp, fp=fp, fn=fn, tn=tn, precision=precision, recall=recall, f1=f1)


@dataclass(frozen=True)
class MultiLabelMetrics:
    correct_counts: tuple[int, ...]  # per instance, 0..10
    avg_correct: float
    frac_ge5: float
    frac_gt5: float


def multilabel_metrics(
    pred_sets: Sequence[set[ImageCategory]], truth_sets: Sequence[set[ImageCategory]]
) -> MultiLabelMetrics:
    """Per-instance agreement count over all 10 categories (both present and
    both absent count as correct)."""
    if len(pred_sets) != len(truth_sets):
        raise DataError("pred_sets and truth_sets lengths differ")
    if not pred_sets:
        raise DataError("cannot compute metrics on empty inputs")
    counts = []
    for pred, truth in zip(pred_sets, truth_sets):
        agree = sum(
            1 for c in range(NUM_CATEGORIES) if (ImageCategory(c) in pred) == (ImageCategory(c) in truth)
        )
        counts.append(agree)
    n = len(counts)
    return MultiLabelMetrics(
        correct_counts=tuple(counts),
        avg_correct=sum(counts) / n,
        frac_ge5=sum(1 for c in counts if c >= 5) / n,
        frac_gt5=sum(1 for c in counts if c > 5) / n,
    )


# --- Benchmark -------------------------------------------------------------------

BENCHMARK_MODELS = ("forest", "gnb", "svm", "ensemble")


@dataclass(frozen=True)
class BenchmarkRow:
    name: str
    metrics: BinaryMetrics | None
    error: str | None


@dataclass(frozen=True)
class BenchmarkTable:
    rows: tuple[BenchmarkRow, ...]

    def to_text(self) -> str:
        header = ("model", "tp", "fp", "fn", "tn", "precision", "recall", "f1")
        lines = [list(header)]
        for row in self.rows:
            if row.metrics is None:
                lines.append([row.name, "-", "-", "-", "-", "-", "-", f"error: {row.error}"])
            else:
                m = row.metrics
                lines.append(
                    [
                        row.name,
                        str(m.tp),
                        str(m.fp),
                        str(m.fn),
                        str(m.tn),
                        f"{m.precision:.6f}",
                        f"{m.recall:.6f}",
                        f"{m.f1:.6f}",
                    ]
                )
        widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
        out = []
        for line in lines:
            out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        out = ["model,tp,fp,fn,tn,precision,recall,f1"]
        for row in self.rows:
            if row.metrics is None:
                # error rows keep the 8-column shape; message lands in the f1 cell
                message = f"error: {row.error or ''}".replace('"', '""')
                out.append(f'{row.name},,,,,,,"{message}"')
            else:
                m = row.metrics
                out.append(
                    f"{row.name},{m.tp},{m.fp},{m.fn},{m.tn},"
                    f"{m.precision:.6f},{m.recall:.6f},{m.f1:.6f}"
                )
        return "\n".join(out) + "\n"


def benchmark(
    corpus: Corpus,
    model_names: Sequence[str] = BENCHMARK_MODELS,
    seed: int = 0,
    ratio: float = 0.8,
    feature_config: FeatureConfig = FeatureConfig(),
    forest_config: ForestConfig = ForestConfig(),
) -> BenchmarkTable:
    """Train each configured necessity model on one shared split and score it
    on the test side at the fixed 0.5 decision rule; the ensemble row combines
    forest and gnb under negative voting. Row failures become error cells."""
    if not model_names:
        raise DataError("benchmark needs at least one model name")
    for report in corpus:
        if report.has_image is None:
            raise DataError(f"report {report.id} is missing has_image; cannot benchmark")
    train, test = split(corpus, ratio, seed)
    stopwords = default_stopwords()
    encoder = fit_metadata_encoder(train, feature_config)
    docs = [preprocess(report_text(r, feature_config), stopwords) for r in train]
    tfidf = fit_tfidf(docs, feature_config)
    schema_id = compute_schema_id(encoder, tfidf, feature_config)

    from imrec.features import assemble_features  # local alias for brevity

    def vectors(reports):
        return [
            assemble_features(encoder, tfidf, r, feature_config, stopwords=stopwords, schema_id=schema_id)
            for r in reports
        ]

    x_train = vectors(train.reports)
    y_train = [int(bool(r.has_image)) for r in train]
    x_test = vectors(test.reports)
    truth = [bool(r.has_image) for r in test]

    rows = []
    for name in model_names:
        try:
            if name == "ensemble":
                members = [
                    ("forest", train_necessity_scorer("forest", x_train, y_train, forest_config=forest_config, seed=seed)),
                    ("gnb", train_necessity_scorer("gnb", x_train, y_train, seed=seed)),
                ]
                preds = []
                for fv in x_test:
                    probs = [necessity_proba(kind, model, fv) for kind, model in members]
                    verdict, _ = ensemble_predict(probs, [0.5] * len(members))
                    preds.append(verdict)
            else:
                model = train_necessity_scorer(name, x_train, y_train, forest_config=forest_config, seed=seed)
                preds = [necessity_proba(name, model, fv) >= 0.5 for fv in x_test]
            rows.append(BenchmarkRow(name=name, metrics=binary_metrics(preds, truth), error=None))
        except Exception as exc:  # degrade to an error cell, keep other rows
            rows.append(BenchmarkRow(name=name, metrics=None, error=str(exc)))
    return BenchmarkTable(rows=tuple(rows))


# --- Synthetic planted-signal corpus ---------------------------------------------

SIGNAL_TOKENS = (
    "codeblock",
    "traceback",
    "menubar",
    "inputdata",
    "mockup",
    "printout",
    "popupbox",
    "stepflow",
    "gpuload",
    "flowchart",
)

_NEGATIVE_TOKENS = (
    "typo",
    "docs",
    "readme",
    "translation",
    "license",
    "changelog",
    "dependency",
    "makefile",
    "lint",
    "refactor",
)

_FILLER_SENTENCES = (
    "the application behaves unexpectedly after the latest update",
    "this happens every time on a fresh profile",
    "restarting does not change anything and the problem persists",
    "worked fine in the previous release installed from the archive",
    "observed on two different machines with the same build",
    "no other software is running while this occurs",
)

_PRODUCTS = ("editor", "compiler", "terminal")
_COMPONENTS = {"editor": ("rendering", "layout"), "compiler": ("frontend", "optimizer"), "terminal": ("shell", "display")}
_PLATFORMS = ("x86_64", "arm64")
_OP_SYS = ("Linux", "Windows", "macOS")
_SEVERITIES = ("minor", "major", "critical")
_PRIORITIES = ("p1", "p2", "p3")


def generate_planted_corpus(n: int, seed: int) -> Corpus:
    """Deterministic synthetic corpus: n//2 positives with 1-3 planted signal
    tokens (annotator count 3 on the matching categories), negatives drawn
    from a disjoint token pool, metadata weakly correlated with the label."""
    if n < 40:
        raise DataError("planted corpus needs n >= 40")
    rng = random.Random(seed)
    n_pos = n // 2
    base = datetime(2020, 1, 1, tzinfo=timezone.utc)
    reports = []
    pos_made = 0
    neg_made = 0
    for i in range(n):
        make_positive = (i % 2 == 0 and pos_made < n_pos) or neg_made >= n - n_pos
        if make_positive:
            pos_made += 1
        else:
            neg_made += 1
        weights = (3, 2, 1) if make_positive else (1, 2, 3)
        product = rng.choices(_PRODUCTS, weights=weights)[0]
        component = rng.choice(_COMPONENTS[product])
        filler = rng.sample(_FILLER_SENTENCES, 2)
        if make_positive:
            k = rng.randint(1, 3)
            cats = rng.sample(range(NUM_CATEGORIES), k)
            phrases = []
            for c in cats:
                phrases.append(" ".join([SIGNAL_TOKENS[c]] * rng.randint(2, 3)))
            description = f"{filler[0]} {' '.join(phrases)} {filler[1]}"
            summary = f"problem involving {SIGNAL_TOKENS[cats[0]]} behavior"
            counts = [0] * NUM_CATEGORIES
            for c in cats:
                counts[c] = 3
            noise = rng.random()
            if noise < 0.3:
                spare = [c for c in range(NUM_CATEGORIES) if c not in cats]
                counts[rng.choice(spare)] = 1
            report = IssueReport(
                id=f"synth-{i + 1:04d}",
                summary=summary,
                description=description,
                product=product,
                component=component,
                platform=rng.choice(_PLATFORMS),
                op_sys=rng.choice(_OP_SYS),
                severity=rng.choices(_SEVERITIES, weights=weights)[0],
                priority=rng.choice(_PRIORITIES),
                status="NEW",
                keywords=("ui",) if rng.random() < 0.3 else (),
                created_at=base + timedelta(hours=i),
                attachment_mimes=("image/png",),
                has_image=True,
                label_vector=LabelVector(tuple(counts)),
            )
        else:
            k = rng.randint(1, 3)
            picks = rng.sample(_NEGATIVE_TOKENS, k)
            phrases = [" ".join([p] * rng.randint(2, 3)) for p in picks]
            description = f"{filler[0]} {' '.join(phrases)} {filler[1]}"
            summary = f"minor request about {picks[0]} cleanup"
            report = IssueReport(
                id=f"synth-{i + 1:04d}",
                summary=summary,
                description=description,
                product=product,
                component=component,
                platform=rng.choice(_PLATFORMS),
                op_sys=rng.choice(_OP_SYS),
                severity=rng.choices(_SEVERITIES, weights=weights)[0],
                priority=rng.choice(_PRIORITIES),
                status="NEW",
                keywords=("docs",) if rng.random() < 0.3 else (),
                created_at=base + timedelta(hours=i),
                attachment_mimes=(),
                has_image=False,
                label_vector=None,
            )
        reports.append(report)
    return Corpus(tuple(reports), provenance=f"planted(n={n}, seed={seed})")
