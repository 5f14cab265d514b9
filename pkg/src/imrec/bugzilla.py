"""Bugzilla 5.x REST ingestion with a verbatim raw-response cache.

Every HTTP body is persisted to the cache directory before parsing, so a
recorded run can be replayed offline byte-for-byte. Rate limits and server
errors are retried with capped exponential backoff (4 retries, 0.5 s
doubling) and then surfaced as transport errors.
"""

from __future__ import annotations

import json
import time
from datetime import date, datetime
from pathlib import Path
from typing import Protocol
from urllib.parse import urlencode

import requests

from imrec.corpus import Corpus, IssueReport, classify_attachment_mime, parse_rfc3339
from imrec.errors import DataError, TransportError

MAX_RETRIES = 4
BACKOFF_INITIAL_S = 0.5
_RETRY_STATUSES = frozenset({429, 500, 502, 503, 504})

_BUG_FIELDS = (
    "id",
    "product",
    "component",
    "platform",
    "op_sys",
    "severity",
    "priority",
    "status",
    "keywords",
    "summary",
    "creation_time",
)


class Transport(Protocol):
    def get(self, url: str) -> tuple[int, bytes]: ...


class RequestsTransport:
    """Live HTTP via requests."""

    def __init__(self, timeout: float = 30.0):
        self.timeout = timeout

    def get(self, url: str) -> tuple[int, bytes]:
        try:
            response = requests.get(url, timeout=self.timeout, headers={"Accept": "application/json"})
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        return response.status_code, response.content


class CachingTransport:
    """Wrap a transport; persist every successful body before returning it.

    Cache layout: numbered body files plus index.json mapping URL -> file.
    """

    def __init__(self, inner: Transport, cache_dir: str | Path):
        self.inner = inner
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._index_path = self.cache_dir / "index.json"
        self._index: dict[str, str] = {}
        if self._index_path.exists():
            self._index = json.loads(self._index_path.read_text(encoding="utf-8"))

    def get(self, url: str) -> tuple[int, bytes]:
        if url in self._index:
            return 200, (self.cache_dir / self._index[url]).read_bytes()
        status, body = self.inner.get(url)
        if status == 200:
            name = f"{len(self._index):06d}.body"
            (self.cache_dir / name).write_bytes(body)
            self._index[url] = name
            self._index_path.write_text(
                json.dumps(self._index, sort_keys=True, indent=1) + "\n", encoding="utf-8"
            )
        return status, body


class ReplayTransport:
    """Offline replay from a recorded cache; any miss is a transport error."""

    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        index_path = self.cache_dir / "index.json"
        if not index_path.exists():
            raise TransportError(f"no cache index at {index_path}")
        self._index: dict[str, str] = json.loads(index_path.read_text(encoding="utf-8"))

    def get(self, url: str) -> tuple[int, bytes]:
        name = self._index.get(url)
        if name is None:
            raise TransportError(f"cache miss for {url}")
        return 200, (self.cache_dir / name).read_bytes()


def _get_with_retries(transport: Transport, url: str, sleep=time.sleep) -> bytes:
    """GET with up to MAX_RETRIES retries on 429/5xx; other statuses fail fast."""
    delay = BACKOFF_INITIAL_S
    attempts = 0
    while True:
        status, body = transport.get(url)
        if status == 200:
            return body
        if status in _RETRY_STATUSES and attempts < MAX_RETRIES:
            attempts += 1
            sleep(delay)
            delay *= 2.0
            continue
        raise TransportError(f"HTTP {status} fetching {url}", status=status)


def _parse_json(body: bytes, url: str) -> dict:
    try:
        parsed = json.loads(body)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON from {url}: {exc.msg}") from None
    if not isinstance(parsed, dict):
        raise DataError(f"unexpected JSON shape from {url}")
    return parsed


def _bug_list_url(base: str, product: str, since: date, until: date, limit: int, offset: int) -> str:
    params = [
        ("product", product),
        ("f1", "creation_ts"),
        ("o1", "greaterthaneq"),
        ("v1", since.isoformat()),
        ("f2", "creation_ts"),
        ("o2", "lessthaneq"),
        ("v2", until.isoformat()),
        ("order", "bug_id"),
        ("include_fields", ",".join(_BUG_FIELDS)),
        ("limit", str(limit)),
        ("offset", str(offset)),
    ]
    return f"{base.rstrip('/')}/rest/bug?{urlencode(params)}"


def _optional_str(record: dict, key: str) -> str | None:
    value = record.get(key)
    if value is None or value == "":
        return None
    return str(value)


def fetch_bugzilla(
    base_url: str,
    product: str,
    since: date,
    until: date,
    page_size: int = 100,
    transport: Transport | None = None,
    cache_dir: str | Path | None = None,
    sleep=time.sleep,
) -> Corpus:
    """Fetch issues created in [since, until] for a product, in page order.

    For each bug, the comment endpoint supplies the description (comment 0),
    reply count, and first-reply time; the attachment endpoint supplies MIME
    types, from which has_image is derived.
    """
    if since > until:
        raise DataError("since must be <= until")
    if page_size < 1:
        raise DataError("page_size must be >= 1")
    if transport is None:
        transport = RequestsTransport()
    if cache_dir is not None:
        transport = CachingTransport(transport, cache_dir)

    reports: list[IssueReport] = []
    seen: set[str] = set()
    offset = 0
    while True:
        url = _bug_list_url(base_url, product, since, until, page_size, offset)
        page = _parse_json(_get_with_retries(transport, url, sleep=sleep), url)
        bugs = page.get("bugs")
        if not isinstance(bugs, list):
            raise DataError(f"response from {url} lacks a 'bugs' array")
        if len(bugs) > page_size:
            raise TransportError(f"pagination integrity: page at offset {offset} oversized")
        for bug in bugs:
            report = _build_report(base_url, bug, transport, sleep)
            if report.id in seen:
                raise TransportError(f"pagination integrity: bug {report.id} repeated across pages")
            seen.add(report.id)
            reports.append(report)
        if len(bugs) < page_size:
            break
        offset += page_size
    return Corpus(tuple(reports), provenance=f"bugzilla:{base_url} product={product} {since}..{until}")


def _build_report(base: str, bug: dict, transport: Transport, sleep) -> IssueReport:
    if "id" not in bug:
        raise DataError("bug record lacks an id")
    bug_id = str(bug["id"])
    root = base.rstrip("/")

    comment_url = f"{root}/rest/bug/{bug_id}/comment"
    comment_doc = _parse_json(_get_with_retries(transport, comment_url, sleep=sleep), comment_url)
    comments = comment_doc.get("bugs", {}).get(bug_id, {}).get("comments", [])
    description = ""
    initial_comment_count = 0
    first_reply_at = None
    if comments:
        description = str(comments[0].get("text", ""))
        initial_comment_count = len(comments) - 1
        if len(comments) > 1:
            first_reply_at = parse_rfc3339(str(comments[1]["creation_time"]), "creation_time")

    attachment_url = f"{root}/rest/bug/{bug_id}/attachment"
    attachment_doc = _parse_json(_get_with_retries(transport, attachment_url, sleep=sleep), attachment_url)
    attachments = attachment_doc.get("bugs", {}).get(bug_id, [])
    mimes = tuple(str(a["content_type"]) for a in attachments if "content_type" in a)

    created_at = None
    if bug.get("creation_time"):
        created_at = parse_rfc3339(str(bug["creation_time"]), "creation_time")
    keywords = bug.get("keywords", [])
    if not isinstance(keywords, list):
        raise DataError(f"bug {bug_id}: keywords must be a list")

    return IssueReport(
        id=bug_id,
        summary=str(bug.get("summary", "")),
        description=description,
        product=_optional_str(bug, "product"),
        component=_optional_str(bug, "component"),
        platform=_optional_str(bug, "platform"),
        op_sys=_optional_str(bug, "op_sys"),
        severity=_optional_str(bug, "severity"),
        priority=_optional_str(bug, "priority"),
        status=_optional_str(bug, "status"),
        keywords=tuple(str(k) for k in keywords),
        created_at=created_at,
        first_reply_at=first_reply_at,
        initial_comment_count=initial_comment_count,
        attachment_mimes=mimes,
        has_image=any(classify_attachment_mime(m) for m in mimes),
    )
