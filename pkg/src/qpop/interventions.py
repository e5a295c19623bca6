"""Rule-template question edits with re-scored deltas: the rephrase-and-
rescore workflow behind the suggestion and what-if endpoints.

Every candidate edit is re-scored against the bundle; deltas are never
estimated from coefficients. Only strictly positive-delta suggestions are
returned. The templates are mechanical; a human picks and polishes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Optional

from .bundle import ScoreBundle
from .corpus import Question
from .calibration import GREETING_PREFIXES, SUMMARY_CHAR_LIMIT
from .textfeat import capitalization_flags, first_word

_SENTENCE_RE = re.compile(r"(?<=[.?!])\s+")

# first-word groups whose questions underperform; rewrite candidates lead
# with the historically strong question words
LOW_FIRST_WORDS = {"why", "i", "my", "we", "it", "in", "the", "on", "if", "need"}
QUESTION_WORD_CANDIDATES = ("how", "does", "where", "what", "can", "is")

SUGGESTION_KINDS = (
    "move_sentence_to_details",
    "start_with_question_word",
    "add_question_mark",
    "fix_capitalization",
    "shorten_summary",
)


@dataclass(frozen=True)
class Suggestion:
    kind: str
    summary: str
    details: Optional[str]
    score: float
    delta: float
    description: str


@dataclass(frozen=True)
class WhatIf:
    score_before: float
    score_after: float
    delta: float
    feature_diff: dict[str, tuple]
    bundle_version: str


def split_sentences(text: str) -> list[str]:
    """Sentences split on ./?/! followed by whitespace."""
    parts = [p.strip() for p in _SENTENCE_RE.split(text.strip())]
    return [p for p in parts if p]


def _with_edit(question: Question, summary: str, details: Optional[str]) -> Optional[Question]:
    summary = summary.strip()
    if not summary or len(summary) > SUMMARY_CHAR_LIMIT:
        return None
    if details is not None:
        details = details.strip() or None
    try:
        return replace(question, summary=summary, details=details)
    except ValueError:
        return None


def _candidate_edits(question: Question):
    summary = question.summary
    details = question.details
    sentences = split_sentences(summary)

    if len(sentences) >= 2:
        for pick, label in ((0, "first"), (len(sentences) - 1, "last")):
            moved = sentences[pick]
            kept = [s for i, s in enumerate(sentences) if i != pick]
            new_details = moved if not details else f"{moved} {details}"
            yield (
                "move_sentence_to_details",
                " ".join(kept),
                new_details,
                f"move the {label} sentence into details",
            )

    word = first_word(summary)
    if word in LOW_FIRST_WORDS:
        rest = summary.split(None, 1)
        tail = rest[1] if len(rest) > 1 else ""
        for candidate in QUESTION_WORD_CANDIDATES:
            if candidate == word:
                continue
            yield (
                "start_with_question_word",
                f"{candidate.capitalize()} {tail}".strip(),
                details,
                f'lead with "{candidate}" instead of "{word}"',
            )

    if "?" not in summary:
        trimmed = summary.rstrip(". ")
        if trimmed and len(trimmed) + 1 <= SUMMARY_CHAR_LIMIT:
            yield ("add_question_mark", trimmed + "?", details, "end with a question mark")

    proper, excessive = capitalization_flags(summary)
    if excessive:
        lowered = summary.lower()
        fixed = lowered[0].upper() + lowered[1:]
        yield ("fix_capitalization", fixed, details, "drop the all-caps styling")
    elif not proper and summary and summary[0].isalpha():
        yield ("fix_capitalization", summary[0].upper() + summary[1:], details, "capitalize the first word")

    stripped = summary
    for prefix in GREETING_PREFIXES:
        pattern = re.compile(rf"^\s*{re.escape(prefix)}[\s,!.:-]+", re.IGNORECASE)
        stripped = pattern.sub("", stripped)
    stripped = re.sub(r"\s{2,}", " ", stripped).strip()
    if stripped and stripped != summary:
        yield ("shorten_summary", stripped, details, "drop the greeting filler")


def suggest(question: Question, bundle: ScoreBundle, max_n: int = 5) -> list[Suggestion]:
    """Positive-delta rule-template edits, best first."""
    base = bundle.score_question(question).probability
    out = []
    seen: set[tuple] = set()
    for kind, summary, details, description in _candidate_edits(question):
        edited = _with_edit(question, summary, details)
        if edited is None:
            continue
        key = (edited.summary, edited.details)
        if key == (question.summary, question.details) or key in seen:
            continue
        seen.add(key)
        score = bundle.score_question(edited).probability
        delta = score - base
        if delta > 0:
            out.append(
                Suggestion(kind=kind, summary=edited.summary, details=edited.details,
                           score=score, delta=delta, description=description)
            )
    out.sort(key=lambda s: -s.delta)
    return out[:max_n]


_EXCLUDED_DIFF_FIELDS = {"text_bag", "week", "platform", "product_version"}


def whatif(original: Question, edited: Question, bundle: ScoreBundle) -> WhatIf:
    """Score two variants and list the writing-style features that changed."""
    before_fv, _ = bundle.features_for(original)
    after_fv, _ = bundle.features_for(edited)
    before = bundle.score_question(original).probability
    after = bundle.score_question(edited).probability
    diff = {}
    for name in before_fv.__dataclass_fields__:
        if name in _EXCLUDED_DIFF_FIELDS:
            continue
        b, a = getattr(before_fv, name), getattr(after_fv, name)
        if isinstance(b, float):
            changed = abs(b - a) > 1e-12
        else:
            changed = b != a
        if changed:
            diff[name] = (b, a)
    return WhatIf(
        score_before=before,
        score_after=after,
        delta=after - before,
        feature_diff=diff,
        bundle_version=bundle.version,
    )
