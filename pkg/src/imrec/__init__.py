"""imrec: decide whether a draft issue report needs a screenshot and which
image categories to attach, with a trainable pipeline, CLI, and local service.
"""

from imrec.corpus import (
    CATEGORY_NAMES,
    NUM_CATEGORIES,
    AnnotationSet,
    Corpus,
    ImageCategory,
    IssueReport,
    LabelVector,
    aggregate_annotations,
    apply_label_overrides,
    binarize_labels,
    classify_attachment_mime,
    is_conflicted,
    load_corpus,
    write_corpus,
)
from imrec.errors import ArtifactError, DataError, TransportError
from imrec.evaluation import (
    BinaryMetrics,
    MultiLabelMetrics,
    benchmark,
    binary_metrics,
    generate_planted_corpus,
    multilabel_metrics,
    split,
)
from imrec.features import FeatureConfig, FeatureVector, fit_metadata_encoder, fit_tfidf
from imrec.models import ForestConfig, ensemble_predict, learn_threshold
from imrec.pipeline import (
    DraftReport,
    PipelineConfig,
    Recommendation,
    TrainedModel,
    analyze,
    evaluate_model,
    parse_draft,
    train_pipeline,
)
from imrec.service import load_model, make_server, save_model, serve
from imrec.textprep import preprocess, stem, tokenize

__version__ = "0.1.0"

__all__ = [
    "CATEGORY_NAMES",
    "NUM_CATEGORIES",
    "AnnotationSet",
    "ArtifactError",
    "BinaryMetrics",
    "Corpus",
    "DataError",
    "DraftReport",
    "FeatureConfig",
    "FeatureVector",
    "ForestConfig",
    "ImageCategory",
    "IssueReport",
    "LabelVector",
    "MultiLabelMetrics",
    "PipelineConfig",
    "Recommendation",
    "TrainedModel",
    "TransportError",
    "aggregate_annotations",
    "analyze",
    "apply_label_overrides",
    "benchmark",
    "binarize_labels",
    "binary_metrics",
    "classify_attachment_mime",
    "ensemble_predict",
    "evaluate_model",
    "fit_metadata_encoder",
    "fit_tfidf",
    "generate_planted_corpus",
    "is_conflicted",
    "learn_threshold",
    "load_corpus",
    "load_model",
    "make_server",
    "multilabel_metrics",
    "parse_draft",
    "preprocess",
    "save_model",
    "serve",
    "split",
    "stem",
    "tokenize",
    "train_pipeline",
    "write_corpus",
]
