"""Feature extraction: metadata one-hot block, derived metrics, TF-IDF text block.

The TF-IDF implementation is the smooth-idf variant: idf(t) = ln((1+N)/(1+df(t))) + 1
with raw term counts and L2 normalization. Vocabulary survival is decided by
document frequency; column order is lexicographic over the survivors.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from imrec.corpus import Corpus, IssueReport
from imrec.errors import DataError
from imrec.textprep import DerivedFeatures, default_stopwords, derived_metrics, preprocess

logger = logging.getLogger(__name__)

CATEGORICAL_FIELDS = ("product", "component", "platform", "op_sys", "severity", "priority", "status")


@dataclass(frozen=True)
class FeatureConfig:
    include_post_submission: bool = False
    keyword_top_k: int = 100
    min_df: int = 2
    max_vocab: int = 20000
    text_fields: str = "both"  # summary | description | both

    def __post_init__(self):
        if self.text_fields not in ("summary", "description", "both"):
            raise DataError(f"text_fields must be summary/description/both, got {self.text_fields!r}")
        if self.keyword_top_k < 0 or self.min_df < 1 or self.max_vocab < 0:
            raise DataError("keyword_top_k/max_vocab must be >= 0 and min_df >= 1")

    def to_dict(self) -> dict:
        return {
            "include_post_submission": self.include_post_submission,
            "keyword_top_k": self.keyword_top_k,
            "min_df": self.min_df,
            "max_vocab": self.max_vocab,
            "text_fields": self.text_fields,
        }

    @staticmethod
    def from_dict(raw: dict) -> "FeatureConfig":
        return FeatureConfig(
            include_post_submission=bool(raw["include_post_submission"]),
            keyword_top_k=int(raw["keyword_top_k"]),
            min_df=int(raw["min_df"]),
            max_vocab=int(raw["max_vocab"]),
            text_fields=str(raw["text_fields"]),
        )


@dataclass(frozen=True)
class MetadataEncoder:
    """Fitted vocabularies for the categorical one-hot blocks.

    Each categorical field gets its observed values (descending training
    frequency, ties lexicographic) plus a trailing UNKNOWN slot; keywords
    get a top-K multi-hot vocabulary with no UNKNOWN slot.
    """

    field_vocabs: tuple[tuple[str, ...], ...]  # aligned with CATEGORICAL_FIELDS
    keywords: tuple[str, ...]
    config: FeatureConfig

    @cached_property
    def _field_index(self) -> tuple[dict[str, int], ...]:
        return tuple({v: i for i, v in enumerate(vocab)} for vocab in self.field_vocabs)

    @cached_property
    def _keyword_index(self) -> dict[str, int]:
        return {k: i for i, k in enumerate(self.keywords)}

    @property
    def width(self) -> int:
        categorical = sum(len(v) + 1 for v in self.field_vocabs)
        derived = 5 if self.config.include_post_submission else 1
        return categorical + len(self.keywords) + derived


def _ranked_vocab(counts: Counter, limit: int | None = None) -> tuple[str, ...]:
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if limit is not None:
        ordered = ordered[:limit]
    return tuple(value for value, _ in ordered)


def fit_metadata_encoder(corpus: Corpus, config: FeatureConfig) -> MetadataEncoder:
    if len(corpus) == 0:
        raise DataError("cannot fit metadata encoder on an empty corpus")
    vocabs = []
    for field_name in CATEGORICAL_FIELDS:
        counts = Counter()
        for report in corpus:
            value = getattr(report, field_name)
            if value is not None:
                counts[value] += 1
        vocabs.append(_ranked_vocab(counts))
    keyword_counts = Counter()
    for report in corpus:
        for kw in report.keywords:
            keyword_counts[kw] += 1
    keywords = _ranked_vocab(keyword_counts, limit=config.keyword_top_k)
    return MetadataEncoder(field_vocabs=tuple(vocabs), keywords=keywords, config=config)


def encode_metadata(
    encoder: MetadataEncoder,
    report: IssueReport,
    derived: DerivedFeatures,
    config: FeatureConfig,
) -> np.ndarray:
    """One-hot + multi-hot + derived block. Unseen/absent values hit UNKNOWN."""
    if encoder.config != config:
        raise DataError("encoder was fitted under a different feature config")
    parts: list[float] = []
    for field_name, vocab, index in zip(CATEGORICAL_FIELDS, encoder.field_vocabs, encoder._field_index):
        block = [0.0] * (len(vocab) + 1)
        value = getattr(report, field_name)
        slot = index.get(value, len(vocab)) if value is not None else len(vocab)
        block[slot] = 1.0
        parts.extend(block)
    kw_block = [0.0] * len(encoder.keywords)
    for kw in report.keywords:
        slot = encoder._keyword_index.get(kw)
        if slot is not None:
            kw_block[slot] = 1.0
    parts.extend(kw_block)
    parts.append(math.log1p(derived.description_length_words))
    if config.include_post_submission:
        cc = derived.initial_comment_count
        parts.append(math.log1p(cc) if cc is not None else 0.0)
        parts.append(1.0 if cc is not None else 0.0)
        hours = derived.time_to_first_reply_hours
        parts.append(math.log1p(hours) if hours is not None else 0.0)
        parts.append(1.0 if hours is not None else 0.0)
    return np.asarray(parts, dtype=np.float64)


# --- TF-IDF ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TfidfModel:
    terms: tuple[str, ...]  # column order; lexicographic
    idf: np.ndarray  # aligned with terms
    min_df: int
    max_vocab: int

    @cached_property
    def _term_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    @property
    def width(self) -> int:
        return len(self.terms)


def fit_tfidf(docs: Sequence[list[str]], config: FeatureConfig) -> TfidfModel:
    """Build the vocabulary and idf table from tokenized documents.

    Terms must appear in at least min_df documents; if more than max_vocab
    survive, the most document-frequent win (ties lexicographic).
    """
    if len(docs) == 0:
        raise DataError("cannot fit TF-IDF on an empty document list")
    n_docs = len(docs)
    df = Counter()
    for doc in docs:
        for term in set(doc):
            df[term] += 1
    surviving = [t for t, c in df.items() if c >= config.min_df]
    if len(surviving) > config.max_vocab:
        surviving.sort(key=lambda t: (-df[t], t))
        surviving = surviving[: config.max_vocab]
    surviving.sort()
    if not surviving:
        logger.warning("TF-IDF vocabulary is empty (min_df=%d over %d docs)", config.min_df, n_docs)
    idf = np.array(
        [math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in surviving], dtype=np.float64
    )
    return TfidfModel(terms=tuple(surviving), idf=idf, min_df=config.min_df, max_vocab=config.max_vocab)


def transform_tfidf(model: TfidfModel, doc: list[str]) -> np.ndarray:
    """Raw term counts times idf, L2-normalized; all-zero vectors stay zero."""
    vec = np.zeros(len(model.terms), dtype=np.float64)
    if not model.terms:
        return vec
    counts = Counter(doc)
    index = model._term_index
    for term, count in counts.items():
        slot = index.get(term)
        if slot is not None:
            vec[slot] = count * model.idf[slot]
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


# --- Assembly ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema_id: str


def compute_schema_id(encoder: MetadataEncoder, tfidf: TfidfModel, config: FeatureConfig) -> str:
    payload = {
        "fields": {name: list(vocab) for name, vocab in zip(CATEGORICAL_FIELDS, encoder.field_vocabs)},
        "keywords": list(encoder.keywords),
        "tfidf_terms": list(tfidf.terms),
        "idf": [repr(float(v)) for v in tfidf.idf],
        "config": config.to_dict(),
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def report_text(report: IssueReport, config: FeatureConfig) -> str:
    if config.text_fields == "summary":
        return report.summary
    if config.text_fields == "description":
        return report.description
    return report.summary + " " + report.description


def assemble_features(
    encoder: MetadataEncoder,
    tfidf: TfidfModel,
    report: IssueReport,
    config: FeatureConfig,
    stopwords: frozenset[str] | None = None,
    schema_id: str | None = None,
) -> FeatureVector:
    """Concatenate metadata block, derived block, and TF-IDF block, in that order."""
    if encoder.config != config:
        raise DataError("encoder and config disagree; sub-models were fitted differently")
    if tfidf.min_df != config.min_df or tfidf.max_vocab != config.max_vocab:
        raise DataError("tfidf model and config disagree; sub-models were fitted differently")
    if stopwords is None:
        stopwords = default_stopwords()
    if schema_id is None:
        schema_id = compute_schema_id(encoder, tfidf, config)
    meta = encode_metadata(encoder, report, derived_metrics(report), config)
    text_vec = transform_tfidf(tfidf, preprocess(report_text(report, config), stopwords))
    return FeatureVector(values=np.concatenate([meta, text_vec]), schema_id=schema_id)


def feature_matrix(
    encoder: MetadataEncoder,
    tfidf: TfidfModel,
    reports: Sequence[IssueReport],
    config: FeatureConfig,
    stopwords: frozenset[str] | None = None,
) -> np.ndarray:
    """Stack assembled vectors for a batch of reports (shared schema)."""
    schema_id = compute_schema_id(encoder, tfidf, config)
    rows = [
        assemble_features(encoder, tfidf, r, config, stopwords=stopwords, schema_id=schema_id).values
        for r in reports
    ]
    width = encoder.width + tfidf.width
    if not rows:
        return np.zeros((0, width), dtype=np.float64)
    return np.vstack(rows)
