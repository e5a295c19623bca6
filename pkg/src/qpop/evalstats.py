"""Reusable statistics (Pearson/Spearman), the first-word analysis table,
question-length profiles, and assembly of the full evaluation report.

The reference first-word table from :mod:`qpop.calibration` doubles as a
correlation fixture: its Views/Top-10%/Answer-Rate columns carry the
published headline correlations that the toolkit reproduces.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import calibration as cal
from .calibration import FIRST_WORD_TABLE
from .corpus import CorpusSummary, QuestionCorpus, corpus_stats, label_top_decile
from .textfeat import first_word_group

REPORT_FORMAT = "qpop.evaluation_report"
REPORT_VERSION = 1


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation; raises on unequal lengths or zero variance."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if len(xa) != len(ya):
        raise ValueError("inputs must have equal length")
    if len(xa) < 3:
        raise ValueError("need at least 3 points")
    if np.ptp(xa) == 0.0 or np.ptp(ya) == 0.0:
        raise ValueError("zero variance input")
    xd = xa - xa.mean()
    yd = ya - ya.mean()
    num = float((xd * yd).sum())
    den_sq = float((xd * xd).sum()) * float((yd * yd).sum())
    if den_sq == 0.0:
        raise ValueError("zero variance input")
    # Cauchy-Schwarz bounds |num| by sqrt(den_sq); equality within float
    # rounding means the inputs are exactly (anti-)collinear.
    if num * num >= den_sq:
        return 1.0 if num > 0 else -1.0
    return num / math.sqrt(den_sq)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if len(xa) != len(ya):
        raise ValueError("inputs must have equal length")
    if len(xa) < 3:
        raise ValueError("need at least 3 points")
    return pearson(_average_ranks(xa), _average_ranks(ya))


def reference_first_word_correlations() -> dict[str, float]:
    """Headline correlations over the 20-row reference table (unweighted)."""
    views = [r.views for r in FIRST_WORD_TABLE]
    top10 = [r.top_decile for r in FIRST_WORD_TABLE]
    answer = [r.answer_rate for r in FIRST_WORD_TABLE]
    return {
        "pearson_views_top10": pearson(views, top10),
        "spearman_views_top10": spearman(views, top10),
        "pearson_top10_answer": pearson(top10, answer),
        "spearman_top10_answer": spearman(top10, answer),
    }


@dataclass(frozen=True)
class FirstWordRowStats:
    word: str
    share: float           # percentage of questions
    mean_views: float
    top_decile_pct: float  # percentage of the group in the global top 10%
    answer_rate_pct: float
    count: int


@dataclass
class FirstWordTable:
    rows: list[FirstWordRowStats]  # sorted by top-decile percentage desc
    other_share: float

    def row(self, word: str) -> FirstWordRowStats:
        for r in self.rows:
            if r.word == word:
                return r
        raise KeyError(word)

    def to_rows(self) -> list[dict]:
        return [r.__dict__ for r in self.rows]


def first_word_table(corpus: QuestionCorpus, labels: Optional[np.ndarray] = None) -> FirstWordTable:
    """Per-first-word shares, views, top-decile and answer percentages.

    Groups are the reference vocabulary plus OTHER/NONE; rows are sorted
    by top-decile percentage descending.
    """
    questions = corpus.questions
    if not questions:
        raise ValueError("empty corpus")
    if labels is None:
        labels = label_top_decile(corpus)
    groups: dict[str, list[int]] = {}
    for i, q in enumerate(questions):
        groups.setdefault(first_word_group(q.summary), []).append(i)
    views = corpus.views().astype(float)
    answered = np.array([q.answered for q in questions])
    labels = np.asarray(labels)
    rows = []
    n = len(questions)
    for word, idx in groups.items():
        idx = np.asarray(idx)
        rows.append(
            FirstWordRowStats(
                word=word,
                share=100.0 * len(idx) / n,
                mean_views=float(views[idx].mean()),
                top_decile_pct=100.0 * float(labels[idx].mean()),
                answer_rate_pct=100.0 * float(answered[idx].mean()),
                count=len(idx),
            )
        )
    rows.sort(key=lambda r: -r.top_decile_pct)
    other = next((r.share for r in rows if r.word == "OTHER"), 0.0)
    return FirstWordTable(rows=rows, other_share=other)


@dataclass(frozen=True)
class LengthBucketStats:
    bucket_low: int
    bucket_high: int       # exclusive; the tail bucket pools the rest
    has_details: bool
    question_count: int
    total_views: int
    mean_views: float
    mean_coherency: Optional[float]


@dataclass
class LengthProfile:
    buckets: list[LengthBucketStats]
    bucket_width: int

    def stratum(self, has_details: bool) -> list[LengthBucketStats]:
        return [b for b in self.buckets if b.has_details == has_details]

    def mean_views_in(self, has_details: bool, low: int, high: int) -> float:
        total_v = 0
        total_n = 0
        for b in self.stratum(has_details):
            if b.bucket_low >= low and b.bucket_high <= high:
                total_v += b.total_views
                total_n += b.question_count
        if total_n == 0:
            raise ValueError(f"no questions in [{low},{high}) with details={has_details}")
        return total_v / total_n


def length_profiles(
    corpus: QuestionCorpus,
    bucket_width: int = 25,
    max_length: int = 1000,
    coherency: Optional[np.ndarray] = None,
) -> LengthProfile:
    """Counts, views, and coherency per length bucket and details stratum.

    Length is summary plus details characters. Buckets cover [0,
    max_length) with the tail pooled; empty strata simply have no entry.
    """
    if bucket_width < 10:
        raise ValueError("bucket_width must be >= 10 characters")
    lengths = np.array([len(q.summary) + len(q.details or "") for q in corpus.questions])
    views = corpus.views()
    has_details = np.array([q.details is not None for q in corpus.questions])
    edges = list(range(0, max_length, bucket_width)) + [max_length]
    buckets: list[LengthBucketStats] = []
    for flag in (False, True):
        stratum = has_details == flag
        for lo, hi in zip(edges[:-1], edges[1:]):
            upper = hi if hi < max_length else 10**9
            mask = stratum & (lengths >= lo) & (lengths < upper)
            count = int(mask.sum())
            if count == 0:
                continue  # absent entries, not zeros
            buckets.append(
                LengthBucketStats(
                    bucket_low=lo,
                    bucket_high=hi,
                    has_details=flag,
                    question_count=count,
                    total_views=int(views[mask].sum()),
                    mean_views=float(views[mask].mean()),
                    mean_coherency=(float(np.mean(coherency[mask])) if coherency is not None else None),
                )
            )
    assert sum(b.question_count for b in buckets) == len(corpus.questions)
    return LengthProfile(buckets=buckets, bucket_width=bucket_width)


@dataclass
class EvaluationReport:
    """Single document aggregating every evaluation surface.

    Sections for models that were not supplied are marked absent rather
    than dropped, so consumers can tell "not computed" from "empty".
    """

    sections: dict = field(default_factory=dict)

    REQUIRED_SECTIONS = (
        "corpus_stats", "topic_aggregates", "first_word_table", "length_profiles",
        "auc_table", "boruta", "gains_curve", "correlations",
    )

    def to_json(self) -> dict:
        return {"format": REPORT_FORMAT, "version": REPORT_VERSION, "sections": self.sections}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True), encoding="utf-8")

    def render_text(self) -> str:
        lines = ["evaluation report", "================="]
        for name in self.REQUIRED_SECTIONS:
            section = self.sections.get(name)
            lines.append(f"\n[{name}]")
            if section is None or section == {"absent": True}:
                lines.append("  (absent)")
                continue
            if name == "corpus_stats":
                for k, v in section.items():
                    lines.append(f"  {k}: {v}")
            elif name == "correlations":
                for k, v in section.items():
                    lines.append(f"  {k}: {round(v, 4) if isinstance(v, float) else v}")
            elif name == "auc_table":
                for group, auc in section.items():
                    lines.append(f"  AUC({group}) = {auc:.4f}")
            elif name == "first_word_table":
                for row in section[:8]:
                    lines.append(
                        f"  {row['word']:10s} share={row['share']:5.1f}% views={row['mean_views']:6.1f} "
                        f"top10={row['top_decile_pct']:5.1f}% answered={row['answer_rate_pct']:5.1f}%"
                    )
                if len(section) > 8:
                    lines.append(f"  ... {len(section) - 8} more rows")
            else:
                lines.append(f"  ({len(section) if hasattr(section, '__len__') else 1} entries)")
        return "\n".join(lines) + "\n"


def evaluation_report(
    corpus: QuestionCorpus,
    topic_aggregates=None,
    auc_table: Optional[dict[str, float]] = None,
    boruta_report=None,
    gains_curve=None,
    first_word: Optional[FirstWordTable] = None,
    profiles: Optional[LengthProfile] = None,
    content_type_by_topic: Optional[dict] = None,
) -> EvaluationReport:
    """Assemble the full machine-readable evaluation document."""
    stats: CorpusSummary = corpus_stats(corpus)
    first_word = first_word or first_word_table(corpus)
    profiles = profiles or length_profiles(corpus)

    correlations: dict[str, float] = dict(reference_first_word_correlations())
    # corpus-level analogs over the measured first-word table
    measured = [r for r in first_word.rows if r.word not in ("OTHER", "NONE") and r.count >= 30]
    if len(measured) >= 3:
        correlations["corpus_pearson_views_top10"] = pearson(
            [r.mean_views for r in measured], [r.top_decile_pct for r in measured])
        correlations["corpus_spearman_views_top10"] = spearman(
            [r.mean_views for r in measured], [r.top_decile_pct for r in measured])
        correlations["corpus_pearson_top10_answer"] = pearson(
            [r.top_decile_pct for r in measured], [r.answer_rate_pct for r in measured])
    if topic_aggregates is not None:
        mean_views, up_frac, content = topic_aggregates.as_arrays()
        ok = ~np.isnan(up_frac) & ~np.isnan(content)
        if ok.sum() >= 3:
            correlations["topic_pearson_upvote_content_type"] = pearson(up_frac[ok], content[ok])
            correlations["topic_pearson_upvote_views"] = pearson(up_frac[ok], mean_views[ok])

    sections = {
        "corpus_stats": stats.__dict__,
        "topic_aggregates": (
            [r.__dict__ for r in topic_aggregates.rows] if topic_aggregates is not None else {"absent": True}
        ),
        "first_word_table": first_word.to_rows(),
        "length_profiles": [b.__dict__ for b in profiles.buckets],
        "auc_table": auc_table if auc_table is not None else {"absent": True},
        "boruta": (boruta_report.to_rows() if boruta_report is not None else {"absent": True}),
        "gains_curve": (gains_curve.to_rows() if gains_curve is not None else {"absent": True}),
        "correlations": correlations,
    }
    return EvaluationReport(sections=sections)


def reference_targets() -> dict[str, float]:
    """The published statistics the synthetic corpus is calibrated against."""
    return {
        "answer_rate": cal.ANSWER_RATE,
        "mean_views": cal.MEAN_VIEWS,
        "top1_view_share": cal.TOP1_VIEW_SHARE,
        "top10_view_share": cal.TOP10_VIEW_SHARE,
        "details_fraction": cal.DETAILS_FRACTION,
        "details_fraction_top_decile": cal.DETAILS_FRACTION_TOP_DECILE,
        "auc_group_I": cal.REFERENCE_AUC["I"],
        "auc_group_I+II": cal.REFERENCE_AUC["I+II"],
        "auc_group_I+III": cal.REFERENCE_AUC["I+III"],
        "persuadable_fraction": cal.PERSUADABLE_FRACTION,
    }
