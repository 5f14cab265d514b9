from datetime import datetime, timezone

import pytest

from imrec.corpus import Corpus, IssueReport, LabelVector
from imrec.evaluation import generate_planted_corpus
from imrec.pipeline import PipelineConfig, train_pipeline


def make_report(
    i: int,
    has_image: bool | None = None,
    counts: tuple[int, ...] | None = None,
    **overrides,
) -> IssueReport:
    """Small labeled-report factory for unit tests."""
    fields = dict(
        id=f"r{i}",
        summary=f"summary {i}",
        description=f"description text number {i}",
        product="editor",
        component="rendering",
        platform="x86_64",
        op_sys="Linux",
        severity="major",
        priority="p2",
        status="NEW",
        created_at=datetime(2021, 1, 1, tzinfo=timezone.utc),
        has_image=has_image,
        label_vector=LabelVector(counts) if counts is not None else None,
    )
    fields.update(overrides)
    return IssueReport(**fields)


def make_corpus(reports) -> Corpus:
    return Corpus(tuple(reports), provenance="test")


@pytest.fixture(scope="session")
def planted_corpus():
    return generate_planted_corpus(200, 7)


@pytest.fixture(scope="session")
def small_corpus():
    return generate_planted_corpus(60, 3)


@pytest.fixture(scope="session")
def trained_model(small_corpus):
    return train_pipeline(small_corpus, PipelineConfig(), seed=3)
