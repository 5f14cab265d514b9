"""Two-stage composition: necessity ensemble first, category recommender second.

Stage 1 is trained on all has_image-labeled reports (optionally balanced) and
gated by an F1-learned threshold; stage 2 is trained only on image-bearing
reports whose annotation vectors reached a majority for some category.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from imrec.corpus import (
    CATEGORY_NAMES,
    NUM_CATEGORIES,
    Corpus,
    ImageCategory,
    IssueReport,
    balanced_sample,
    binarize_labels,
    category_from_name,
    report_to_record,
)
from imrec.errors import DataError
from imrec.evaluation import BinaryMetrics, MultiLabelMetrics, binary_metrics, multilabel_metrics, split
from imrec.features import (
    FeatureConfig,
    FeatureVector,
    MetadataEncoder,
    TfidfModel,
    assemble_features,
    compute_schema_id,
    fit_metadata_encoder,
    fit_tfidf,
    report_text,
)
from imrec.models import (
    ForestConfig,
    ForestModel,
    GnbModel,
    SvmBinaryModel,
    SvmOvrModel,
    ensemble_predict,
    gnb_positive_proba,
    learn_threshold,
    necessity_proba,
    svm_confidences,
    train_gnb,
    train_necessity_scorer,
    train_svm_ovr,
)
from imrec.textprep import default_stopwords, preprocess

MEMBER_KINDS = ("forest", "gnb", "svm")
RECOMMENDER_KINDS = ("gnb", "svm")


@dataclass(frozen=True)
class PipelineConfig:
    feature: FeatureConfig = FeatureConfig()
    forest: ForestConfig = ForestConfig()
    svm_lambda: float = 1e-4
    svm_epochs: int = 20
    recommender: str = "gnb"  # gnb (binary relevance) | svm (one-vs-rest)
    members: tuple[str, ...] = ("forest", "gnb")
    balance: bool = True
    validation_ratio: float = 0.2
    top_k: int = 3
    category_cutoff: float = 0.5

    def __post_init__(self):
        if self.recommender not in RECOMMENDER_KINDS:
            raise DataError(f"recommender must be one of {RECOMMENDER_KINDS}, got {self.recommender!r}")
        if not self.members:
            raise DataError("ensemble needs at least one member")
        for kind in self.members:
            if kind not in MEMBER_KINDS:
                raise DataError(f"unknown ensemble member kind {kind!r}")
        if not 0.0 < self.validation_ratio < 1.0:
            raise DataError("validation_ratio must be in (0,1)")
        if self.top_k < 1:
            raise DataError("top_k must be >= 1")
        if not 0.0 <= self.category_cutoff <= 1.0:
            raise DataError("category_cutoff must be in [0,1]")

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.to_dict(),
            "forest": {
                "n_trees": self.forest.n_trees,
                "max_features": self.forest.max_features,
                "min_samples_leaf": self.forest.min_samples_leaf,
                "bootstrap": self.forest.bootstrap,
            },
            "svm_lambda": self.svm_lambda,
            "svm_epochs": self.svm_epochs,
            "recommender": self.recommender,
            "members": list(self.members),
            "balance": self.balance,
            "validation_ratio": self.validation_ratio,
            "top_k": self.top_k,
            "category_cutoff": self.category_cutoff,
        }

    @staticmethod
    def from_dict(raw: dict) -> "PipelineConfig":
        forest = raw["forest"]
        return PipelineConfig(
            feature=FeatureConfig.from_dict(raw["feature"]),
            forest=ForestConfig(
                n_trees=int(forest["n_trees"]),
                max_features=None if forest["max_features"] is None else int(forest["max_features"]),
                min_samples_leaf=int(forest["min_samples_leaf"]),
                bootstrap=bool(forest["bootstrap"]),
            ),
            svm_lambda=float(raw["svm_lambda"]),
            svm_epochs=int(raw["svm_epochs"]),
            recommender=str(raw["recommender"]),
            members=tuple(raw["members"]),
            balance=bool(raw["balance"]),
            validation_ratio=float(raw["validation_ratio"]),
            top_k=int(raw["top_k"]),
            category_cutoff=float(raw["category_cutoff"]),
        )


@dataclass(frozen=True, eq=False)
class NecessityMember:
    kind: str
    vote_threshold: float
    model: ForestModel | GnbModel | SvmBinaryModel


@dataclass(frozen=True, eq=False)
class CategoryScorer:
    """Binary-relevance entry: a GNB, or a constant when training was one-class."""

    kind: str  # gnb | constant
    gnb: GnbModel | None = None
    constant: float | None = None


@dataclass(frozen=True, eq=False)
class TrainedModel:
    config: PipelineConfig
    encoder: MetadataEncoder
    tfidf: TfidfModel
    stopwords: frozenset[str]
    members: tuple[NecessityMember, ...]
    decision_threshold: float
    recommender_kind: str
    gnb_bank: tuple[CategoryScorer, ...] | None
    svm_model: SvmOvrModel | None
    templates: tuple[str, ...]  # category order
    model_version: str
    schema_id: str
    training_fingerprint: dict


@dataclass(frozen=True)
class CategoryRecommendation:
    category: ImageCategory
    confidence: float
    suggestion: str


@dataclass(frozen=True)
class Recommendation:
    needs_image: bool
    probability: float
    threshold: float
    categories: tuple[CategoryRecommendation, ...]
    model_version: str


class DraftValidationError(DataError):
    """A rejected analyze request; `field` names the offending key when known."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class DraftReport:
    """The inference-time subset of a report; labels and post-submission
    signals do not exist while drafting."""

    summary: str = ""
    description: str = ""
    product: str | None = None
    component: str | None = None
    platform: str | None = None
    op_sys: str | None = None
    severity: str | None = None
    priority: str | None = None
    status: str | None = None
    keywords: tuple[str, ...] = ()

    def to_issue_report(self) -> IssueReport:
        return IssueReport(
            id="draft",
            summary=self.summary,
            description=self.description,
            product=self.product,
            component=self.component,
            platform=self.platform,
            op_sys=self.op_sys,
            severity=self.severity,
            priority=self.priority,
            status=self.status,
            keywords=self.keywords,
        )


_DRAFT_STRING_FIELDS = (
    "summary",
    "description",
    "product",
    "component",
    "platform",
    "op_sys",
    "severity",
    "priority",
    "status",
)


def parse_draft(record: dict) -> DraftReport:
    """Validate an analyze-request object. Raises DraftValidationError naming
    the first bad field; unknown keys are ignored."""
    if not isinstance(record, dict):
        raise DraftValidationError("request body must be a JSON object")
    for name in ("summary", "description"):
        if name not in record:
            raise DraftValidationError(f"missing required field '{name}'", field=name)
    values: dict = {}
    for name in _DRAFT_STRING_FIELDS:
        if name in record and record[name] is not None:
            if not isinstance(record[name], str):
                raise DraftValidationError(f"field '{name}' must be a string", field=name)
            values[name] = record[name]
    keywords = record.get("keywords", [])
    if keywords is None:
        keywords = []
    if not isinstance(keywords, list) or not all(isinstance(k, str) for k in keywords):
        raise DraftValidationError("field 'keywords' must be a list of strings", field="keywords")
    values["keywords"] = tuple(keywords)
    return DraftReport(**values)


# --- Templates ---------------------------------------------------------------


def load_templates(path: str | Path | None = None) -> tuple[str, ...]:
    """Read the 10-line CategoryName<TAB>text table, returned in category order."""
    if path is None:
        text = resources.files("imrec").joinpath("data/templates.tsv").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    by_category: dict[int, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if "\t" not in raw:
            raise DataError(f"templates line {lineno}: expected CategoryName<TAB>text")
        name, template = raw.split("\t", 1)
        category = category_from_name(name.strip())
        if int(category) in by_category:
            raise DataError(f"templates line {lineno}: duplicate category {name.strip()!r}")
        if not template.strip():
            raise DataError(f"templates line {lineno}: empty template text")
        by_category[int(category)] = template.strip()
    missing = [CATEGORY_NAMES[i] for i in range(NUM_CATEGORIES) if i not in by_category]
    if missing:
        raise DataError(f"templates missing categories: {', '.join(missing)}")
    return tuple(by_category[i] for i in range(NUM_CATEGORIES))


def suggestion_for(category: ImageCategory, templates: tuple[str, ...] | None = None) -> str:
    if templates is None:
        templates = load_templates()
    return templates[int(category)]


# --- Training ----------------------------------------------------------------


def _corpus_sha256(corpus: Corpus) -> str:
    payload = "".join(
        json.dumps(report_to_record(r), sort_keys=True, separators=(",", ":")) + "\n" for r in corpus
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _member_prob(member: NecessityMember, fv: FeatureVector) -> float:
    return necessity_proba(member.kind, member.model, fv)


def _train_member(kind: str, X, y, config: PipelineConfig, seed: int):
    return train_necessity_scorer(
        kind,
        X,
        y,
        forest_config=config.forest,
        lam=config.svm_lambda,
        epochs=config.svm_epochs,
        seed=seed,
    )


def _features_for(
    encoder: MetadataEncoder,
    tfidf: TfidfModel,
    reports: Sequence[IssueReport],
    config: FeatureConfig,
    stopwords: frozenset[str],
    schema_id: str,
) -> list[FeatureVector]:
    return [
        assemble_features(encoder, tfidf, r, config, stopwords=stopwords, schema_id=schema_id)
        for r in reports
    ]


def train_pipeline(corpus: Corpus, config: PipelineConfig, seed: int) -> TrainedModel:
    if len(corpus) == 0:
        raise DataError("cannot train on an empty corpus")
    for report in corpus:
        if report.has_image is None:
            raise DataError(
                f"report {report.id} is missing the has_image label; training needs labeled reports"
            )
    stopwords = default_stopwords()

    stage1 = balanced_sample(corpus, seed) if config.balance else corpus
    train_slice, val_slice = split(stage1, 1.0 - config.validation_ratio, seed)

    encoder = fit_metadata_encoder(train_slice, config.feature)
    docs = [preprocess(report_text(r, config.feature), stopwords) for r in train_slice]
    tfidf = fit_tfidf(docs, config.feature)
    schema_id = compute_schema_id(encoder, tfidf, config.feature)

    x_train = _features_for(encoder, tfidf, train_slice.reports, config.feature, stopwords, schema_id)
    y_train = [int(bool(r.has_image)) for r in train_slice]
    raw_members = [(kind, _train_member(kind, x_train, y_train, config, seed)) for kind in config.members]

    x_val = _features_for(encoder, tfidf, val_slice.reports, config.feature, stopwords, schema_id)
    y_val = [int(bool(r.has_image)) for r in val_slice]
    first_kind, first_model = raw_members[0]
    first_probs = [
        _member_prob(NecessityMember(first_kind, 0.5, first_model), fv) for fv in x_val
    ]
    try:
        decision_threshold = learn_threshold(first_probs, y_val)
    except DataError as exc:
        raise DataError(f"validation slice is degenerate ({exc}); corpus too small to learn a threshold") from None
    members = tuple(
        NecessityMember(kind, decision_threshold if i == 0 else 0.5, model)
        for i, (kind, model) in enumerate(raw_members)
    )

    stage2 = [
        r
        for r in corpus
        if r.has_image and r.label_vector is not None and binarize_labels(r.label_vector)
    ]
    if not stage2:
        raise DataError("no image-bearing reports with majority-labeled vectors; cannot train the recommender")
    x_stage2 = _features_for(encoder, tfidf, stage2, config.feature, stopwords, schema_id)
    relevance = [binarize_labels(r.label_vector) for r in stage2]

    gnb_bank = None
    svm_model = None
    if config.recommender == "gnb":
        bank = []
        for c in range(NUM_CATEGORIES):
            y_c = [int(ImageCategory(c) in rel) for rel in relevance]
            if len(set(y_c)) < 2:
                bank.append(CategoryScorer(kind="constant", constant=float(y_c[0])))
            else:
                bank.append(CategoryScorer(kind="gnb", gnb=train_gnb(x_stage2, y_c)))
        gnb_bank = tuple(bank)
    else:
        svm_model = train_svm_ovr(
            x_stage2, relevance, lam=config.svm_lambda, epochs=config.svm_epochs, seed=seed
        )

    corpus_sha = _corpus_sha256(corpus)
    fingerprint = {"corpus_sha256": corpus_sha, "seed": seed, "config": config.to_dict()}
    version_blob = json.dumps(fingerprint, sort_keys=True, separators=(",", ":")).encode("utf-8")
    model_version = hashlib.sha256(version_blob).hexdigest()[:12]

    return TrainedModel(
        config=config,
        encoder=encoder,
        tfidf=tfidf,
        stopwords=stopwords,
        members=members,
        decision_threshold=decision_threshold,
        recommender_kind=config.recommender,
        gnb_bank=gnb_bank,
        svm_model=svm_model,
        templates=load_templates(),
        model_version=model_version,
        schema_id=schema_id,
        training_fingerprint=fingerprint,
    )


# --- Inference ----------------------------------------------------------------


def recommender_confidences(model: TrainedModel, fv: FeatureVector) -> np.ndarray:
    """Stage-2 confidence per category, in category index order."""
    if model.recommender_kind == "gnb":
        out = np.zeros(NUM_CATEGORIES)
        for c, scorer in enumerate(model.gnb_bank):
            out[c] = scorer.constant if scorer.kind == "constant" else gnb_positive_proba(scorer.gnb, fv)
        return out
    return svm_confidences(model.svm_model, fv)


def _draft_features(model: TrainedModel, draft: DraftReport) -> FeatureVector:
    return assemble_features(
        model.encoder,
        model.tfidf,
        draft.to_issue_report(),
        model.config.feature,
        stopwords=model.stopwords,
        schema_id=model.schema_id,
    )


def analyze(model: TrainedModel, draft: DraftReport) -> Recommendation:
    """Stage-1 verdict, then (only on a positive) ranked category suggestions."""
    fv = _draft_features(model, draft)
    probs = [_member_prob(m, fv) for m in model.members]
    thresholds = [m.vote_threshold for m in model.members]
    needs_image, probability = ensemble_predict(probs, thresholds)
    categories: tuple[CategoryRecommendation, ...] = ()
    if needs_image:
        confidences = recommender_confidences(model, fv)
        ranked = sorted(range(NUM_CATEGORIES), key=lambda c: (-confidences[c], c))
        kept = [c for c in ranked if confidences[c] >= model.config.category_cutoff]
        if not kept:
            kept = [ranked[0]]
        kept = kept[: model.config.top_k]
        categories = tuple(
            CategoryRecommendation(
                category=ImageCategory(c),
                confidence=float(confidences[c]),
                suggestion=model.templates[c],
            )
            for c in kept
        )
    return Recommendation(
        needs_image=needs_image,
        probability=float(probability),
        threshold=float(model.decision_threshold),
        categories=categories,
        model_version=model.model_version,
    )


# --- Whole-model evaluation -----------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    n_train: int
    n_test: int
    binary: BinaryMetrics
    multilabel: MultiLabelMetrics | None


def _report_to_draft(report: IssueReport) -> DraftReport:
    return DraftReport(
        summary=report.summary,
        description=report.description,
        product=report.product,
        component=report.component,
        platform=report.platform,
        op_sys=report.op_sys,
        severity=report.severity,
        priority=report.priority,
        status=report.status,
        keywords=report.keywords,
    )


def evaluate_model(model: TrainedModel, corpus: Corpus, ratio: float, seed: int) -> EvalReport:
    """Split the corpus and score the model on the held-out test side.

    Stage 1 is scored as the full ensemble verdict against has_image;
    stage 2 as the cutoff-binarized confidence sets against the binarized
    annotation vectors (display truncation does not apply here).
    """
    _, test = split(corpus, ratio, seed)
    preds = []
    truths = []
    pred_sets = []
    truth_sets = []
    for report in test:
        if report.has_image is None:
            raise DataError(f"report {report.id} is missing has_image; cannot evaluate")
        fv = _draft_features(model, _report_to_draft(report))
        probs = [_member_prob(m, fv) for m in model.members]
        thresholds = [m.vote_threshold for m in model.members]
        verdict, _ = ensemble_predict(probs, thresholds)
        preds.append(verdict)
        truths.append(bool(report.has_image))
        if report.has_image and report.label_vector is not None:
            truth_set = binarize_labels(report.label_vector)
            if truth_set:
                confidences = recommender_confidences(model, fv)
                pred_sets.append(
                    {ImageCategory(c) for c in range(NUM_CATEGORIES) if confidences[c] >= model.config.category_cutoff}
                )
                truth_sets.append(truth_set)
    binary = binary_metrics(preds, truths)
    multilabel = multilabel_metrics(pred_sets, truth_sets) if truth_sets else None
    n_test = len(test)
    return EvalReport(n_train=len(corpus) - n_test, n_test=n_test, binary=binary, multilabel=multilabel)
