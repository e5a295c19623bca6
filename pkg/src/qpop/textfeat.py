"""Tokenization and question-writing-style feature extraction.

Features never look at views, votes, or the answered flag: everything here
is computable at the moment the question is written.
"""

from __future__ import annotations

import math
import re
import zlib
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np
from scipy import sparse

from .calibration import FIRST_WORD_VOCABULARY

if TYPE_CHECKING:
    from .corpus import Question
    from .topics import TopicModel

_WORD_RE = re.compile(r"\S+")
_EDGE_PUNCT = ".,;:!?\"'()[]{}<>/\\|@#$%^&*~`+=_-"


def tokenize(text: str) -> list[str]:
    """Lower-cased token stream with contraction splitting and brand merging.

    Apostrophe contractions are split ("i'm" -> "i", "m"), adjacent
    "turbo" + "tax" merge into "turbotax", and punctuation is stripped
    from token edges. Empty text yields an empty stream.
    """
    raw = _WORD_RE.findall(text.casefold())
    tokens: list[str] = []
    for piece in raw:
        piece = piece.strip(_EDGE_PUNCT)
        if not piece:
            continue
        for part in piece.replace("’", "'").split("'"):
            part = part.strip(_EDGE_PUNCT)
            if part:
                tokens.append(part)
    merged: list[str] = []
    for tok in tokens:
        if merged and merged[-1] == "turbo" and tok == "tax":
            merged[-1] = "turbotax"
        else:
            merged.append(tok)
    return merged


def first_word(text: str) -> Optional[str]:
    """First token of the tokenized text, or None for an empty stream."""
    tokens = tokenize(text)
    return tokens[0] if tokens else None


def first_word_group(text: str) -> str:
    """First word mapped into the categorical vocabulary (top-20 + OTHER/NONE)."""
    word = first_word(text)
    if word is None:
        return "NONE"
    return word if word in FIRST_WORD_VOCABULARY else "OTHER"


def capitalization_flags(summary: str) -> tuple[bool, bool]:
    """(proper, excessive) capitalization flags for a summary.

    Excessive means more than half of at least 10 alphabetic characters are
    upper case; proper means the first alphabetic character is upper case
    and the text is not excessive. No alphabetic characters -> (False, False).
    """
    alpha = [c for c in summary if c.isalpha()]
    if not alpha:
        return False, False
    upper_frac = sum(1 for c in alpha if c.isupper()) / len(alpha)
    excessive = len(alpha) >= 10 and upper_frac > 0.5
    proper = alpha[0].isupper() and not excessive
    return proper, excessive


@dataclass
class FeatureVector:
    """Grouped model attributes for one question.

    Group I is context the asker cannot change (week, platform, product
    version, topic); Group II is writing style; Group III is the optional
    hashed text bag. ``coherency`` is the normalized topic entropy of the
    question's inferred topic distribution.
    """

    # Group I
    week: int
    platform: str
    product_version: str
    topic: Optional[int] = None
    # Group II
    log_question_len: float = 0.0
    log_details_len_plus1: float = 0.0
    log_summary_len: float = 0.0
    first_word_summary: str = "NONE"
    first_word_details: str = "NONE"
    coherency: float = 0.0
    details_flag: bool = False
    proper_capitalization: bool = False
    question_mark: bool = False
    excessive_capitalization: bool = False
    # Group III
    text_bag: Optional[sparse.csr_matrix] = field(default=None, repr=False)

    GROUP1_FIELDS = ("week", "platform", "product_version", "topic")
    GROUP2_NUMERIC = ("log_question_len", "log_details_len_plus1", "log_summary_len", "coherency")
    GROUP2_CATEGORICAL = ("first_word_summary", "first_word_details")
    GROUP2_BOOLEAN = ("details_flag", "proper_capitalization", "question_mark", "excessive_capitalization")


def extract_features(
    question: "Question",
    topic_model: Optional["TopicModel"] = None,
    topic_distribution: Optional[np.ndarray] = None,
    bag_dim: Optional[int] = None,
) -> FeatureVector:
    """Extract all Group I + II attributes (and optionally the Group III bag).

    Lengths are in characters and logs are natural. ``topic_model`` is only
    required when the topic / coherency attributes are wanted; a
    precomputed ``topic_distribution`` short-circuits inference. Absent
    details give log_details_len_plus1 = 0 and first_word_details = NONE.
    """
    summary_len = len(question.summary)
    details = question.details
    details_len = len(details) if details is not None else 0
    proper, excessive = capitalization_flags(question.summary)

    topic = None
    coherency = 0.0
    if topic_distribution is None and topic_model is not None:
        from .topics import infer_topic_distribution

        topic_distribution = infer_topic_distribution(topic_model, question).probs
    if topic_distribution is not None:
        from .topics import topic_entropy

        topic = int(np.argmax(topic_distribution))
        coherency = topic_entropy(topic_distribution, len(topic_distribution))

    fv = FeatureVector(
        week=question.week,
        platform=question.platform,
        product_version=question.product_version,
        topic=topic,
        log_question_len=math.log(summary_len + details_len),
        log_details_len_plus1=math.log(details_len + 1),
        log_summary_len=math.log(summary_len),
        first_word_summary=first_word_group(question.summary),
        first_word_details=first_word_group(details) if details is not None else "NONE",
        coherency=coherency,
        details_flag=details is not None,
        proper_capitalization=proper,
        question_mark="?" in question.summary,
        excessive_capitalization=excessive,
    )
    if bag_dim is not None:
        fv.text_bag = text_bag(question, bag_dim)
    return fv


def _hash_token(namespace: str, token: str, dim: int) -> int:
    # crc32 keyed by namespace: stable across processes, unlike hash().
    return zlib.crc32(f"{namespace}\x00{token}".encode("utf-8")) % dim


def text_bag(question: "Question", dim: int) -> sparse.csr_matrix:
    """Hashed unigram+bigram counts of summary and details (Group III).

    Summary and details use separate hashing namespaces inside a single
    ``dim``-wide vector; absent details contribute nothing.
    """
    if dim < 2**10:
        raise ValueError(f"text bag dimension must be >= 1024, got {dim}")
    counts: dict[int, int] = {}
    for namespace, text in (("s", question.summary), ("d", question.details or "")):
        tokens = tokenize(text)
        grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        for gram in grams:
            idx = _hash_token(namespace, gram, dim)
            counts[idx] = counts.get(idx, 0) + 1
    if not counts:
        return sparse.csr_matrix((1, dim), dtype=np.float64)
    cols = np.fromiter(counts.keys(), dtype=np.int64)
    data = np.fromiter(counts.values(), dtype=np.float64)
    order = np.argsort(cols)
    return sparse.csr_matrix(
        (data[order], cols[order], np.array([0, len(cols)])), shape=(1, dim)
    )


def text_bag_matrix(questions: list["Question"], dim: int) -> sparse.csr_matrix:
    """Stacked text bags for a list of questions (one row each)."""
    return sparse.vstack([text_bag(q, dim) for q in questions], format="csr")
