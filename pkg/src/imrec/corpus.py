"""Issue-report corpus: domain types, JSONL persistence, labeling, sampling.

A corpus is an ordered, immutable sequence of issue reports. Reports may
carry two kinds of training labels: a boolean ``has_image`` (the report had
an image attachment) and a ten-slot ``label_vector`` of annotator counts,
one per screenshot category.
"""

from __future__ import annotations

import enum
import json
import os
import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping

from imrec.errors import DataError

NUM_CATEGORIES = 10
MAX_ANNOTATORS = 3


class ImageCategory(enum.IntEnum):
    """The ten screenshot categories, in frozen index order."""

    CODE = 0
    RUNTIME_ERROR = 1
    MENUS_PREFERENCES = 2
    PROGRAM_INPUT = 3
    DESIRED_OUTPUT = 4
    PROGRAM_OUTPUT = 5
    DIALOG_BOX = 6
    STEPS_PROCESSES = 7
    CPU_GPU_PERFORMANCE = 8
    ALGORITHM_CONCEPT = 9


# Canonical spellings; serialized forms use exactly these strings.
CATEGORY_NAMES: tuple[str, ...] = (
    "Code",
    "Runtime Error",
    "Menus/Preferences",
    "Program Input",
    "Desired Output",
    "Program Output",
    "Dialog Box",
    "Steps/Processes",
    "CPU/GPU Performance",
    "Algorithm/Concept Description",
)

_NAME_TO_CATEGORY = {name: ImageCategory(i) for i, name in enumerate(CATEGORY_NAMES)}


def category_name(category: ImageCategory) -> str:
    return CATEGORY_NAMES[int(category)]


def category_from_name(name: str) -> ImageCategory:
    try:
        return _NAME_TO_CATEGORY[name]
    except KeyError:
        raise DataError(f"unknown image category name: {name!r}") from None


# MIME types counted as image attachments. Closed allowlist; anything else
# (including unknown types) is treated as a non-image.
IMAGE_MIME_TYPES = frozenset(
    {
        "image/avif",
        "image/jpeg",
        "image/png",
        "image/gif",
        "image/bmp",
        "image/tiff",
        "image/svg+xml",
        "image/webp",
    }
)


def classify_attachment_mime(mime: str) -> bool:
    """True iff the MIME string names an image format we recognise."""
    return mime.strip().lower() in IMAGE_MIME_TYPES


@dataclass(frozen=True)
class LabelVector:
    """Annotator counts per category; each count in 0..3."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if len(self.counts) != NUM_CATEGORIES:
            raise DataError(
                f"label_vector must have {NUM_CATEGORIES} entries, got {len(self.counts)}"
            )
        for i, c in enumerate(self.counts):
            if not isinstance(c, int) or isinstance(c, bool) or not 0 <= c <= MAX_ANNOTATORS:
                raise DataError(
                    f"label_vector entry {i} out of range 0..{MAX_ANNOTATORS}: {c!r}"
                )


def binarize_labels(vector: LabelVector) -> set[ImageCategory]:
    """Categories counted relevant by a majority (>= 2 of 3) of annotators."""
    return {ImageCategory(i) for i, c in enumerate(vector.counts) if c >= 2}


def is_conflicted(vector: LabelVector) -> bool:
    """No category reached a majority; such images are excluded from training."""
    return len(binarize_labels(vector)) == 0


@dataclass(frozen=True)
class AnnotationSet:
    """One annotator's category picks for one image. Empty picks are valid."""

    image_id: str
    annotator_id: str
    categories: frozenset[ImageCategory]


def aggregate_annotations(sets: Iterable[AnnotationSet]) -> tuple[LabelVector, bool]:
    """Combine exactly three annotation sets for one image into a count vector.

    Returns the per-category counts and a conflict flag: True when no
    category was picked by at least two annotators.
    """
    sets = list(sets)
    if len(sets) != MAX_ANNOTATORS:
        raise DataError(f"expected exactly {MAX_ANNOTATORS} annotation sets, got {len(sets)}")
    image_ids = {s.image_id for s in sets}
    if len(image_ids) != 1:
        raise DataError(f"annotation sets span multiple images: {sorted(image_ids)}")
    annotators = {s.annotator_id for s in sets}
    if len(annotators) != MAX_ANNOTATORS:
        raise DataError("annotator ids must be pairwise distinct")
    counts = [0] * NUM_CATEGORIES
    for s in sets:
        for cat in s.categories:
            counts[int(cat)] += 1
    vector = LabelVector(tuple(counts))
    return vector, is_conflicted(vector)


@dataclass(frozen=True)
class IssueReport:
    """One Bugzilla-style issue. Optional fields are None when absent."""

    id: str
    summary: str
    description: str
    product: str | None = None
    component: str | None = None
    platform: str | None = None
    op_sys: str | None = None
    severity: str | None = None
    priority: str | None = None
    status: str | None = None
    keywords: tuple[str, ...] = ()
    created_at: datetime | None = None
    first_reply_at: datetime | None = None
    initial_comment_count: int | None = None
    attachment_mimes: tuple[str, ...] = ()
    has_image: bool | None = None
    label_vector: LabelVector | None = None

    def __post_init__(self):
        if not self.id:
            raise DataError("report id must be non-empty")
        if self.label_vector is not None and self.has_image is None:
            raise DataError(f"report {self.id}: label_vector present without has_image")
        if (
            self.first_reply_at is not None
            and self.created_at is not None
            and self.first_reply_at < self.created_at
        ):
            raise DataError(f"report {self.id}: first_reply_at precedes created_at")
        if self.initial_comment_count is not None and self.initial_comment_count < 0:
            raise DataError(f"report {self.id}: initial_comment_count negative")


@dataclass(frozen=True)
class Corpus:
    """Ordered collection of reports. Iteration order is construction order."""

    reports: tuple[IssueReport, ...]
    provenance: str = ""

    def __post_init__(self):
        seen: set[str] = set()
        for r in self.reports:
            if r.id in seen:
                raise DataError(f"duplicate report id in corpus: {r.id}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.reports)

    def __iter__(self) -> Iterator[IssueReport]:
        return iter(self.reports)

    def by_id(self, report_id: str) -> IssueReport:
        for r in self.reports:
            if r.id == report_id:
                return r
        raise DataError(f"no report with id {report_id!r}")


# --- JSONL serialization ---------------------------------------------------

_REQUIRED_FIELDS = ("id", "summary", "description")
_CATEGORICAL_FIELDS = ("product", "component", "platform", "op_sys", "severity", "priority", "status")


def parse_rfc3339(value: str, field_name: str, line_number: int | None = None) -> datetime:
    """Parse an RFC 3339 timestamp into a UTC-aware datetime."""
    text = value.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(text)
    except ValueError:
        raise DataError(_at_line(f"invalid timestamp in {field_name!r}: {value!r}", line_number)) from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    dt = dt.astimezone(timezone.utc)
    return dt.isoformat().replace("+00:00", "Z")


def _at_line(message: str, line_number: int | None) -> str:
    return message if line_number is None else f"line {line_number}: {message}"


def _expect_str(record: dict, key: str, line_number: int | None) -> str | None:
    value = record.get(key)
    if value is None:
        return None
    if not isinstance(value, str):
        raise DataError(_at_line(f"field {key!r} must be a string", line_number))
    return value


def _expect_str_list(record: dict, key: str, line_number: int | None) -> tuple[str, ...]:
    value = record.get(key)
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise DataError(_at_line(f"field {key!r} must be a list of strings", line_number))
    return tuple(value)


def parse_issue_record(line: str, line_number: int | None = None) -> IssueReport:
    """Parse one JSON object into an IssueReport.

    Unknown keys are ignored; missing optional fields stay absent rather
    than defaulting.
    """
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DataError(_at_line(f"malformed JSON: {exc.msg}", line_number)) from None
    if not isinstance(record, dict):
        raise DataError(_at_line("record must be a JSON object", line_number))

    for key in _REQUIRED_FIELDS:
        if key not in record:
            raise DataError(_at_line(f"missing required field {key!r}", line_number))

    raw_id = record["id"]
    if isinstance(raw_id, int) and not isinstance(raw_id, bool):
        raw_id = str(raw_id)
    if not isinstance(raw_id, str) or not raw_id:
        raise DataError(_at_line("field 'id' must be a non-empty string", line_number))

    summary = record["summary"]
    description = record["description"]
    if not isinstance(summary, str):
        raise DataError(_at_line("field 'summary' must be a string", line_number))
    if not isinstance(description, str):
        raise DataError(_at_line("field 'description' must be a string", line_number))

    categorical = {key: _expect_str(record, key, line_number) for key in _CATEGORICAL_FIELDS}

    created_at = None
    if "created_at" in record:
        if not isinstance(record["created_at"], str):
            raise DataError(_at_line("field 'created_at' must be a string", line_number))
        created_at = parse_rfc3339(record["created_at"], "created_at", line_number)
    first_reply_at = None
    if "first_reply_at" in record:
        if not isinstance(record["first_reply_at"], str):
            raise DataError(_at_line("field 'first_reply_at' must be a string", line_number))
        first_reply_at = parse_rfc3339(record["first_reply_at"], "first_reply_at", line_number)

    initial_comment_count = record.get("initial_comment_count")
    if initial_comment_count is not None:
        if not isinstance(initial_comment_count, int) or isinstance(initial_comment_count, bool):
            raise DataError(_at_line("field 'initial_comment_count' must be an integer", line_number))

    has_image = record.get("has_image")
    if has_image is not None and not isinstance(has_image, bool):
        raise DataError(_at_line("field 'has_image' must be a boolean", line_number))

    label_vector = None
    if "label_vector" in record and record["label_vector"] is not None:
        raw = record["label_vector"]
        if not isinstance(raw, list):
            raise DataError(_at_line("field 'label_vector' must be an array", line_number))
        try:
            label_vector = LabelVector(tuple(raw))
        except DataError as exc:
            raise DataError(_at_line(str(exc), line_number)) from None

    try:
        return IssueReport(
            id=raw_id,
            summary=summary,
            description=description,
            keywords=_expect_str_list(record, "keywords", line_number),
            created_at=created_at,
            first_reply_at=first_reply_at,
            initial_comment_count=initial_comment_count,
            attachment_mimes=_expect_str_list(record, "attachment_mimes", line_number),
            has_image=has_image,
            label_vector=label_vector,
            **categorical,
        )
    except DataError as exc:
        raise DataError(_at_line(str(exc), line_number)) from None


def report_to_record(report: IssueReport) -> dict:
    """The JSON-object form of a report; absent optionals are omitted."""
    record: dict = {"id": report.id}
    for key in _CATEGORICAL_FIELDS:
        value = getattr(report, key)
        if value is not None:
            record[key] = value
    if report.keywords:
        record["keywords"] = list(report.keywords)
    record["summary"] = report.summary
    record["description"] = report.description
    if report.created_at is not None:
        record["created_at"] = format_rfc3339(report.created_at)
    if report.first_reply_at is not None:
        record["first_reply_at"] = format_rfc3339(report.first_reply_at)
    if report.initial_comment_count is not None:
        record["initial_comment_count"] = report.initial_comment_count
    if report.attachment_mimes:
        record["attachment_mimes"] = list(report.attachment_mimes)
    if report.has_image is not None:
        record["has_image"] = report.has_image
    if report.label_vector is not None:
        record["label_vector"] = list(report.label_vector.counts)
    return record


def load_corpus(path: str | Path) -> Corpus:
    """Read a UTF-8 JSONL corpus file. Blank lines are skipped."""
    path = Path(path)
    reports: list[IssueReport] = []
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            reports.append(parse_issue_record(line, line_number))
    corpus = Corpus(tuple(reports), provenance=str(path))
    return corpus


def write_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus as JSONL, atomically (temp file + rename)."""
    path = Path(path)
    payload = "".join(
        json.dumps(report_to_record(r), ensure_ascii=False) + "\n" for r in corpus
    )
    atomic_write_text(path, payload)


def atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    try:
        with tmp.open("w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except OSError:
        tmp.unlink(missing_ok=True)
        raise


# --- Labeling and sampling -------------------------------------------------


def apply_label_overrides(corpus: Corpus, overrides: Mapping[str, LabelVector]) -> Corpus:
    """Replace label vectors on the named reports; everything else unchanged."""
    known = {r.id for r in corpus}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise DataError(f"label overrides name unknown report ids: {', '.join(unknown)}")
    if not overrides:
        return corpus
    updated = []
    for report in corpus:
        if report.id in overrides:
            has_image = report.has_image if report.has_image is not None else True
            report = replace(report, label_vector=overrides[report.id], has_image=has_image)
        updated.append(report)
    return Corpus(tuple(updated), provenance=corpus.provenance)


def load_label_overrides(path: str | Path) -> dict[str, LabelVector]:
    """Read an overrides JSONL file of {"image_id":..., "label_vector":[...]}."""
    overrides: dict[str, LabelVector] = {}
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(_at_line(f"malformed JSON: {exc.msg}", line_number)) from None
            if not isinstance(record, dict) or "image_id" not in record or "label_vector" not in record:
                raise DataError(_at_line("override needs 'image_id' and 'label_vector'", line_number))
            image_id = record["image_id"]
            if not isinstance(image_id, str) or not image_id:
                raise DataError(_at_line("field 'image_id' must be a non-empty string", line_number))
            raw = record["label_vector"]
            if not isinstance(raw, list):
                raise DataError(_at_line("field 'label_vector' must be an array", line_number))
            try:
                overrides[image_id] = LabelVector(tuple(raw))
            except DataError as exc:
                raise DataError(_at_line(str(exc), line_number)) from None
    return overrides


def load_annotations(path: str | Path) -> list[AnnotationSet]:
    """Read annotation JSONL: {"image_id", "annotator_id", "categories": [...]}.

    Categories may be canonical names or integer indices.
    """
    sets: list[AnnotationSet] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(_at_line(f"malformed JSON: {exc.msg}", line_number)) from None
            if not isinstance(record, dict):
                raise DataError(_at_line("annotation must be a JSON object", line_number))
            for key in ("image_id", "annotator_id", "categories"):
                if key not in record:
                    raise DataError(_at_line(f"annotation missing '{key}'", line_number))
            image_id = record["image_id"]
            annotator_id = record["annotator_id"]
            if not isinstance(image_id, str) or not image_id:
                raise DataError(_at_line("field 'image_id' must be a non-empty string", line_number))
            if not isinstance(annotator_id, str) or not annotator_id:
                raise DataError(_at_line("field 'annotator_id' must be a non-empty string", line_number))
            raw = record["categories"]
            if not isinstance(raw, list):
                raise DataError(_at_line("field 'categories' must be an array", line_number))
            categories = set()
            for item in raw:
                try:
                    if isinstance(item, bool):
                        raise DataError(f"not a category: {item!r}")
                    if isinstance(item, int):
                        if not 0 <= item < NUM_CATEGORIES:
                            raise DataError(f"category index out of range 0..{NUM_CATEGORIES - 1}: {item}")
                        categories.add(ImageCategory(item))
                    elif isinstance(item, str):
                        categories.add(category_from_name(item))
                    else:
                        raise DataError(f"not a category: {item!r}")
                except DataError as exc:
                    raise DataError(_at_line(str(exc), line_number)) from None
            sets.append(
                AnnotationSet(image_id=image_id, annotator_id=annotator_id, categories=frozenset(categories))
            )
    return sets


def label_corpus(corpus: Corpus, annotations: Iterable[AnnotationSet]) -> Corpus:
    """Attach aggregated three-annotator label vectors to the named reports.

    Each annotated image id must match a report id and carry exactly three
    annotation sets; reports without annotations are left unlabeled.
    """
    grouped: dict[str, list[AnnotationSet]] = {}
    for annotation in annotations:
        grouped.setdefault(annotation.image_id, []).append(annotation)
    known = {r.id for r in corpus}
    unknown = sorted(set(grouped) - known)
    if unknown:
        raise DataError(f"annotations name unknown report ids: {', '.join(unknown)}")
    vectors: dict[str, LabelVector] = {}
    for image_id, sets in grouped.items():
        try:
            vector, _ = aggregate_annotations(sets)
        except DataError as exc:
            raise DataError(f"image {image_id}: {exc}") from None
        vectors[image_id] = vector
    return apply_label_overrides(corpus, vectors)


def balanced_sample(corpus: Corpus, seed: int) -> Corpus:
    """Down-sample the majority has_image class to the minority count.

    Sampling is uniform without replacement, deterministic for a fixed
    seed; output preserves the original corpus order.
    """
    positives: list[int] = []
    negatives: list[int] = []
    for i, report in enumerate(corpus):
        if report.has_image is None:
            raise DataError(f"report {report.id}: has_image missing; cannot balance")
        (positives if report.has_image else negatives).append(i)
    if not positives or not negatives:
        raise DataError(
            "degenerate corpus: both has_image classes must be non-empty "
            f"(got {len(positives)} positive, {len(negatives)} negative)"
        )
    target = min(len(positives), len(negatives))
    rng = random.Random(seed)
    keep = set(positives if len(positives) <= len(negatives) else negatives)
    majority = negatives if len(positives) <= len(negatives) else positives
    keep.update(rng.sample(majority, target))
    selected = tuple(corpus.reports[i] for i in sorted(keep))
    return Corpus(selected, provenance=corpus.provenance)
