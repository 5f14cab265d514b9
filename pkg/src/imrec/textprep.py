"""Deterministic text normalization: tokenize, stopwords, Porter stemming.

All operations are pure. The stemmer implements the original 1980 Porter
rules (steps 1a through 5b) with the standard length <= 2 guard; within a
step only the longest matching suffix rule is attempted.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from imrec.corpus import IssueReport
from imrec.errors import DataError

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Split text into lowercase ASCII alphanumeric tokens.

    The text is NFC-normalized and casefolded; tokens are maximal
    [a-z0-9]+ runs (anything else separates tokens). Tokens shorter than
    two characters or consisting only of digits are dropped.
    """
    normalized = unicodedata.normalize("NFC", text).casefold()
    out = []
    for match in _TOKEN_RE.finditer(normalized):
        token = match.group()
        if len(token) < 2 or token.isdigit():
            continue
        out.append(token)
    return out


def remove_stopwords(tokens: Iterable[str], stopwords: frozenset[str] | set[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords]


def load_stopword_file(path: str | Path) -> frozenset[str]:
    """Read a stopword file: one lowercase word per line, '#' comments allowed."""
    words = set()
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            words.add(line)
    return frozenset(words)


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    """The bundled 179-entry English list."""
    text = resources.files("imrec").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    words = set()
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            words.add(line)
    return frozenset(words)


# --- Porter stemmer (1980 rules) --------------------------------------------

_VOWELS = "aeiou"


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y is a vowel when preceded by a consonant, a consonant otherwise
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """m in the [C](VC)^m[V] decomposition: count of vowel->consonant runs."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        consonant = _is_consonant(stem, i)
        if prev_vowel and consonant:
            m += 1
        prev_vowel = not consonant
    return m


def _contains_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return len(word) >= 2 and word[-1] == word[-2] and _is_consonant(word, len(word) - 1)


def _ends_cvc(word: str) -> bool:
    # *o condition: ends consonant-vowel-consonant, final consonant not w/x/y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


def _apply_step(word: str, rules) -> str:
    # rules ordered so any nested suffixes come longest-first; the first
    # matching suffix is the only one attempted, even if its condition fails
    for suffix, replacement, min_measure in rules:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if _measure(stem) > min_measure:
                return stem + replacement
            return word
    return word


_STEP2_RULES = (
    ("ational", "ate", 0),
    ("tional", "tion", 0),
    ("enci", "ence", 0),
    ("anci", "ance", 0),
    ("izer", "ize", 0),
    ("abli", "able", 0),
    ("alli", "al", 0),
    ("entli", "ent", 0),
    ("eli", "e", 0),
    ("ousli", "ous", 0),
    ("ization", "ize", 0),
    ("ation", "ate", 0),
    ("ator", "ate", 0),
    ("alism", "al", 0),
    ("iveness", "ive", 0),
    ("fulness", "ful", 0),
    ("ousness", "ous", 0),
    ("aliti", "al", 0),
    ("iviti", "ive", 0),
    ("biliti", "ble", 0),
)

_STEP3_RULES = (
    ("icate", "ic", 0),
    ("ative", "", 0),
    ("alize", "al", 0),
    ("iciti", "ic", 0),
    ("ical", "ic", 0),
    ("ful", "", 0),
    ("ness", "", 0),
)

_STEP4_SUFFIXES = (
    "ement",
    "ance",
    "ence",
    "able",
    "ible",
    "ment",
    "ion",
    "ent",
    "ism",
    "ate",
    "iti",
    "ous",
    "ive",
    "ize",
    "ant",
    "al",
    "er",
    "ic",
    "ou",
)


def _step1a(word: str) -> str:
    if word.endswith("sses"):
        return word[:-2]
    if word.endswith("ies"):
        return word[:-2]
    if word.endswith("ss"):
        return word
    if word.endswith("s"):
        return word[:-1]
    return word


def _step1b(word: str) -> str:
    if word.endswith("eed"):
        stem = word[:-3]
        return stem + "ee" if _measure(stem) > 0 else word
    if word.endswith("ed"):
        stem = word[:-2]
        return _step1b_cleanup(stem) if _contains_vowel(stem) else word
    if word.endswith("ing"):
        stem = word[:-3]
        return _step1b_cleanup(stem) if _contains_vowel(stem) else word
    return word


def _step1b_cleanup(stem: str) -> str:
    if stem.endswith(("at", "bl", "iz")):
        return stem + "e"
    if _ends_double_consonant(stem) and stem[-1] not in "lsz":
        return stem[:-1]
    if _measure(stem) == 1 and _ends_cvc(stem):
        return stem + "e"
    return stem


def _step1c(word: str) -> str:
    if word.endswith("y") and _contains_vowel(word[:-1]):
        return word[:-1] + "i"
    return word


def _step4(word: str) -> str:
    for suffix in _STEP4_SUFFIXES:
        if word.endswith(suffix):
            stem = word[: len(word) - len(suffix)]
            if _measure(stem) > 1:
                if suffix == "ion" and not stem.endswith(("s", "t")):
                    return word
                return stem
            return word
    return word


def _step5a(word: str) -> str:
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            return stem
    return word


def _step5b(word: str) -> str:
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        return word[:-1]
    return word


def stem(token: str) -> str:
    """Porter-stem one token. Tokens of length <= 2 pass through unchanged."""
    if len(token) < 3:
        return token
    word = _step1a(token)
    word = _step1b(word)
    word = _step1c(word)
    word = _apply_step(word, _STEP2_RULES)
    word = _apply_step(word, _STEP3_RULES)
    word = _step4(word)
    word = _step5a(word)
    word = _step5b(word)
    return word


def preprocess(text: str, stopwords: frozenset[str] | set[str]) -> list[str]:
    """tokenize -> remove stopwords -> stem, preserving order.

    Stems are re-filtered against the stopword list and the minimum-length
    rule so the output always satisfies the token invariants (a stem such
    as "doe" -> "do" would otherwise reintroduce a stopword).
    """
    out = []
    for token in remove_stopwords(tokenize(text), stopwords):
        stemmed = stem(token)
        if len(stemmed) >= 2 and stemmed not in stopwords:
            out.append(stemmed)
    return out


# --- Derived metrics ---------------------------------------------------------


@dataclass(frozen=True)
class DerivedFeatures:
    """Report-level numeric signals; None marks an absent optional."""

    description_length_words: int
    initial_comment_count: int | None = None
    time_to_first_reply_hours: float | None = None


def derived_metrics(report: IssueReport) -> DerivedFeatures:
    """Word count of the raw description plus optional post-submission signals.

    The word count deliberately uses whitespace splitting of the raw text,
    not the preprocessed tokens: it measures report verbosity, not model
    vocabulary. Reply latency is present only when both timestamps are.
    """
    words = len(report.description.split())
    hours = None
    if report.first_reply_at is not None and report.created_at is not None:
        delta = (report.first_reply_at - report.created_at).total_seconds() / 3600.0
        if delta < 0:
            raise DataError(f"report {report.id}: first_reply_at precedes created_at")
        hours = delta
    return DerivedFeatures(
        description_length_words=words,
        initial_comment_count=report.initial_comment_count,
        time_to_first_reply_hours=hours,
    )
