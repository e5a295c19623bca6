"""Question data model, corpus I/O, popularity labeling, and the seeded
synthetic-corpus generator.

The generator plants an explicit causal structure: latent log-views are a
sum of week, first-word, length/details, topic, keyword, and style effects
plus Gaussian noise, and realized views are a shifted rounded log-normal.
Every planted latent (topic mixture, per-component effects, true
add-details treatment effect) is retained in a ground-truth sidecar so
models trained downstream can be checked against what was actually
planted. Default effect sizes are calibrated so a 50k corpus reproduces
the reference statistics in :mod:`qpop.calibration`.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from . import calibration as cal
from .calibration import (
    FIRST_WORD_TABLE,
    GREETING_PREFIXES,
    HOT_KEYWORDS,
    OTHER_ANSWER_RATE,
    OTHER_FIRST_WORD_SHARE,
    OTHER_MEAN_VIEWS,
    OTHER_STARTERS,
    COMMON_WORDS,
    SUMMARY_CHAR_LIMIT,
    TopicSpec,
    default_topic_specs,
)


class ConfigurationError(ValueError):
    """Invalid generator configuration."""


class CorpusFormatError(ValueError):
    """A corpus file record failed validation."""

    def __init__(self, message: str, line: Optional[int] = None, fields: Optional[str] = None):
        self.line = line
        self.field = fields
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Question:
    """One Q&A post.

    The summary is mandatory and limited to 170 characters; details are
    optional and unbounded. ``asker_vote`` is "up", "down", or None;
    ``google_view_fraction`` is synthetic bookkeeping for the share of
    views arriving from external search.
    """

    id: str
    summary: str
    details: Optional[str]
    week: int
    platform: str
    product_version: str
    answered: bool
    views: int
    asker_vote: Optional[str] = None
    google_view_fraction: float = 0.0
    user_id: Optional[str] = None

    def __post_init__(self):
        validate_question(self)


def validate_question(q: Question) -> None:
    if not q.summary:
        raise ValueError(f"question {q.id}: summary must be non-empty")
    if len(q.summary) > SUMMARY_CHAR_LIMIT:
        raise ValueError(
            f"question {q.id}: summary exceeds {SUMMARY_CHAR_LIMIT} characters ({len(q.summary)})"
        )
    if q.views < 0:
        raise ValueError(f"question {q.id}: views must be >= 0")
    if not 1 <= q.week <= 53:
        raise ValueError(f"question {q.id}: week {q.week} outside 1..53")
    if q.asker_vote not in (None, "up", "down"):
        raise ValueError(f"question {q.id}: asker_vote must be up/down/absent")
    if not 0.0 <= q.google_view_fraction <= 1.0:
        raise ValueError(f"question {q.id}: google_view_fraction outside [0,1]")


@dataclass(frozen=True)
class GroundTruth:
    """Planted latents for one synthetic question."""

    id: str
    theta: tuple[float, ...]          # true topic mixture
    dominant_topic: int
    content_type: float               # tax(0)..product(1)
    mu: float                         # latent mean log-views
    mu_parts: dict[str, float]
    uplift: float                     # true add-details effect on mu
    is_first_question: bool
    intended_length: int
    hot_keyword_count: int


@dataclass
class QuestionCorpus:
    questions: list[Question]
    season_weeks: int = 15
    provenance: dict = field(default_factory=dict)
    ground_truth: Optional[dict[str, GroundTruth]] = None

    def __post_init__(self):
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise ValueError("corpus ids must be unique")

    def __len__(self) -> int:
        return len(self.questions)

    def views(self) -> np.ndarray:
        return np.array([q.views for q in self.questions], dtype=np.int64)


@dataclass(frozen=True)
class CorpusSummary:
    n_questions: int
    answer_rate: float
    mean_views: float
    mean_views_answered: float
    top1_view_share: float
    top10_view_share: float
    zero_view_fraction: float
    top_decile_view_threshold: int
    details_fraction: float
    details_fraction_top_decile: float
    mean_details_len: float
    mean_details_len_top_decile: float
    mean_summary_len_no_details: float
    mean_summary_len_top_decile: float


@dataclass
class GeneratorConfig:
    """Knobs for the synthetic generator. Defaults are the calibrated ones.

    All effects are additive contributions to the latent mean log-views.
    ``seed`` fully determines the output corpus.
    """

    n_questions: int = 50_000
    seed: int = 42
    season_weeks: int = 15
    topics: tuple[TopicSpec, ...] = field(default_factory=default_topic_specs)

    # Corpus shape
    mean_questions_per_user: float = 1.0 / cal.FIRST_QUESTION_FRACTION
    week_weights: tuple[float, ...] = (4.0, 6.0, 7.5, 8.5, 8.5, 8.0, 7.5, 7.0, 6.5, 6.0, 5.5, 5.5, 6.0, 7.0, 6.5)

    # Content length model: intended characters before any summary/details split.
    intent_len_mean: float = 100.0
    intent_len_sd: float = 40.0
    intent_len_min: int = 25
    long_content_prob: float = 0.15
    long_content_tail_mean: float = 115.0

    # Details adoption: p = lo + (hi - lo) * sigmoid((L - center) / width),
    # separate lo/hi for a user's first question vs. later ones.
    details_center: float = 180.0
    details_width: float = 45.0
    details_first_lo: float = 0.105
    details_first_hi: float = 0.47
    details_repeat_lo: float = 0.82
    details_repeat_hi: float = 0.995
    details_split_beta: tuple[float, float] = (2.2, 2.8)
    details_extra_mean: float = 120.0
    details_min_len: int = 12

    # Latent view model: views = max(0, round(exp(N(mu, sigma))) - 1).
    base_log_views: float = 0.531
    noise_sigma: float = 1.42
    week_amp: float = 1.0
    week_tau: float = 4.5
    first_word_scale: float = 1.0
    no_details_base: float = 0.18
    no_details_len_slope: float = 0.50
    # True add-details effect: amp * tanh((min(L, cap) - center) / width)
    # plus per-topic / week / first-word interaction shifts.
    uplift_amp: float = 1.55
    uplift_center: float = 110.0
    uplift_width: float = 40.0
    uplift_len_cap: float = 400.0
    uplift_week_slope: float = -0.10
    uplift_first_word_scale: float = 0.10
    hot_keyword_prob: float = 0.14
    hot_keyword_effect: float = 1.5
    # Rare externally-boosted questions (front-page / search pickups):
    # adds the extreme-tail mass that a plain log-normal lacks.
    search_burst_prob: float = 0.010
    search_burst_effect: float = 2.9
    # Rank-feedback tail reshape: a continuous piecewise-linear map on the
    # latent log-views that compresses the upper-middle tail and amplifies
    # the extreme tail (search ranking concentrates attention on the very
    # top). Monotone, so popularity ranks and labels are unaffected.
    tail_shrink_start: float = 3.4
    tail_shrink_slope: float = 0.80
    tail_amp_start: float = 5.0
    tail_amp_slope: float = 1.075
    max_log_views: float = 10.5
    question_mark_effect: float = 0.10
    proper_cap_effect: float = 0.06
    excessive_cap_effect: float = -0.20

    # Rendering
    common_word_prob: float = 0.35
    zipf_exponent: float = 1.0
    greeting_prob: float = 0.15
    two_sentence_min_len: int = 90
    three_sentence_min_len: int = 150
    caps_probs: tuple[float, float, float] = (0.55, 0.36, 0.055)  # proper, lower, allcaps; rest mixed

    # Platform / product version context
    platforms: tuple[str, ...] = ("online", "desktop", "mobile", "free_edition")
    platform_probs: tuple[float, ...] = (0.52, 0.28, 0.12, 0.08)
    platform_effects: tuple[float, ...] = (0.04, -0.03, -0.06, 0.02)
    versions: tuple[str, ...] = ("basic", "deluxe", "premier", "home_business", "free")
    version_probs: tuple[float, ...] = (0.18, 0.34, 0.18, 0.12, 0.18)
    version_effects: tuple[float, ...] = (-0.02, 0.03, 0.04, 0.0, -0.04)

    # Votes and external-search bookkeeping
    vote_prob_answered: float = 0.45
    upvote_base: float = 0.92
    upvote_content_slope: float = 0.58
    google_noise_sd: float = 0.06

    def validate(self) -> None:
        if self.n_questions < 0:
            raise ConfigurationError("n_questions must be >= 0")
        if not self.topics:
            raise ConfigurationError("at least one planted topic is required")
        for t in self.topics:
            if not t.words:
                raise ConfigurationError(f"topic {t.name} has an empty vocabulary")
        if len(self.week_weights) != self.season_weeks:
            raise ConfigurationError("week_weights must have one entry per season week")
        if min(self.week_weights) <= 0:
            raise ConfigurationError("week weights must be positive")
        if self.noise_sigma <= 0:
            raise ConfigurationError("noise_sigma must be positive")
        if self.mean_questions_per_user < 1.0:
            raise ConfigurationError("mean_questions_per_user must be >= 1")
        if not 0 < cal.FIRST_QUESTION_DETAILS_FRACTION < 1:
            raise ConfigurationError("details fractions must be in (0,1)")

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# --- first-word rendering -------------------------------------------------

_FW_SHARES = [r.share for r in FIRST_WORD_TABLE] + [OTHER_FIRST_WORD_SHARE]
_FW_WORDS = [r.word for r in FIRST_WORD_TABLE] + ["OTHER"]
_FW_ANSWER = {r.word: r.answer_rate / 100.0 for r in FIRST_WORD_TABLE}
_FW_ANSWER["OTHER"] = OTHER_ANSWER_RATE / 100.0
_FW_EFFECT = {r.word: math.log(r.views / cal.MEAN_VIEWS) for r in FIRST_WORD_TABLE}
_FW_EFFECT["OTHER"] = math.log(OTHER_MEAN_VIEWS / cal.MEAN_VIEWS)

_QUESTION_WORDS = {"how", "why", "where", "what", "when", "does", "can", "is", "are", "do", "if"}


def _question_mark_prob(group: str) -> float:
    if group in _QUESTION_WORDS:
        return 0.65
    if group == "OTHER":
        return 0.30
    return 0.25


def _render_first_token(group: str, rng: np.random.Generator) -> str:
    if group == "i":
        u = rng.random()
        if u < 0.30:
            return "i'm"
        if u < 0.42:
            return "i've"
        return "i"
    if group == "turbotax":
        return "turbo tax" if rng.random() < 0.5 else "turbotax"
    if group == "OTHER":
        return OTHER_STARTERS[rng.integers(len(OTHER_STARTERS))]
    return group


# --- generation -----------------------------------------------------------

def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _details_probability(cfg: GeneratorConfig, length: float, is_first: bool) -> float:
    lo, hi = (
        (cfg.details_first_lo, cfg.details_first_hi)
        if is_first
        else (cfg.details_repeat_lo, cfg.details_repeat_hi)
    )
    return lo + (hi - lo) * _sigmoid((length - cfg.details_center) / cfg.details_width)


def true_uplift_mu(cfg: GeneratorConfig, length: float, week: int, topic_idx: int, fw_group: str) -> float:
    """Planted add-details effect on mean log-views for a question profile."""
    capped = min(length, cfg.uplift_len_cap)
    base = cfg.uplift_amp * math.tanh((capped - cfg.uplift_center) / cfg.uplift_width)
    mid_week = (cfg.season_weeks + 1) / 2.0
    return (
        base
        + cfg.topics[topic_idx].uplift_shift
        + cfg.uplift_week_slope * (week - mid_week) / mid_week
        + cfg.uplift_first_word_scale * cfg.first_word_scale * _FW_EFFECT[fw_group]
    )


def _no_details_effect(cfg: GeneratorConfig, summary_len: float) -> float:
    return cfg.no_details_base - cfg.no_details_len_slope * (summary_len - 100.0) / 70.0


def _reshape_tail(cfg: GeneratorConfig, z: float) -> float:
    s0, m0 = cfg.tail_shrink_start, cfg.tail_shrink_slope
    s1, m1 = cfg.tail_amp_start, cfg.tail_amp_slope
    if z <= s0:
        return z
    if z <= s1:
        return s0 + (z - s0) * m0
    return s0 + (s1 - s0) * m0 + (z - s1) * m1


def _draw_words(
    cfg: GeneratorConfig,
    rng: np.random.Generator,
    theta: np.ndarray,
    active: np.ndarray,
    char_budget: int,
    zipf: np.ndarray,
) -> list[str]:
    words: list[str] = []
    used = 0
    while used < char_budget:
        if rng.random() < cfg.common_word_prob:
            word = COMMON_WORDS[rng.integers(len(COMMON_WORDS))]
        else:
            t = active[rng.choice(len(active), p=theta)]
            topic_words = cfg.topics[t].words
            word = topic_words[rng.choice(len(topic_words), p=zipf[: len(topic_words)])]
        words.append(word)
        used += len(word) + 1
    return words


def _render_sentences(cfg: GeneratorConfig, rng: np.random.Generator, words: list[str], target_len: int) -> list[list[str]]:
    if target_len >= cfg.three_sentence_min_len and rng.random() < 0.5:
        n_sentences = 3
    elif target_len >= cfg.two_sentence_min_len:
        n_sentences = 2
    else:
        n_sentences = 1
    n_sentences = min(n_sentences, max(1, len(words) // 3))
    bounds = np.linspace(0, len(words), n_sentences + 1).astype(int)
    return [words[bounds[i]: bounds[i + 1]] for i in range(n_sentences) if bounds[i] < bounds[i + 1]]


def _apply_caps(text: str, style: int) -> str:
    if style == 0:  # proper: capitalize sentence starts
        out = []
        cap_next = True
        for ch in text:
            out.append(ch.upper() if cap_next and ch.isalpha() else ch)
            if ch.isalpha() and cap_next:
                cap_next = False
            elif ch in ".?!":
                cap_next = True
        return "".join(out)
    if style == 2:
        return text.upper()
    return text  # lower or mixed handled upstream


def generate_corpus(config: GeneratorConfig) -> QuestionCorpus:
    """Generate a synthetic corpus. Deterministic for a fixed config+seed."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    n = config.n_questions
    if n == 0:
        return QuestionCorpus(
            questions=[],
            season_weeks=config.season_weeks,
            provenance={"kind": "synthetic", "seed": config.seed, "config_digest": config.digest()},
            ground_truth={},
        )

    week_p = np.asarray(config.week_weights, dtype=float)
    week_p = week_p / week_p.sum()
    zipf = _zipf_weights(max(len(t.words) for t in config.topics), config.zipf_exponent)
    n_topics = len(config.topics)
    mid_week = (config.season_weeks + 1) / 2.0
    # Normalizing constant so the week effect is zero-mean under week_p.
    week_decay = np.exp(-(np.arange(1, config.season_weeks + 1) - 1) / config.week_tau)
    week_effects = config.week_amp * (week_decay - float(week_decay @ week_p))

    # Users: sizes drawn first so "first question" is well defined per user.
    extra_p = 1.0 / config.mean_questions_per_user
    user_sizes: list[int] = []
    total = 0
    while total < n:
        k = 1 + rng.geometric(extra_p) - 1  # geometric(extra_p) >= 1, so extras = draw - 1
        k = min(k, n - total)
        user_sizes.append(k)
        total += k

    questions: list[Question] = []
    truths: dict[str, GroundTruth] = {}
    qi = 0
    for ui, size in enumerate(user_sizes):
        user_id = f"u{ui:06d}"
        weeks = rng.choice(config.season_weeks, size=size, p=week_p) + 1
        first_pos = int(np.argmin(weeks))  # earliest week; ties -> first drawn
        for j in range(size):
            week = int(weeks[j])
            is_first = j == first_pos

            # Intended content length.
            if rng.random() < config.long_content_prob:
                length = SUMMARY_CHAR_LIMIT + rng.exponential(config.long_content_tail_mean)
            else:
                length = rng.normal(config.intent_len_mean, config.intent_len_sd)
            length = float(np.clip(length, config.intent_len_min, 1400))

            has_details = rng.random() < _details_probability(config, length, is_first)
            if has_details:
                # The details box invites extra content beyond the intended
                # summary text; realized length grows accordingly.
                length = length + rng.exponential(config.details_extra_mean)
                frac = rng.beta(*config.details_split_beta)
                summary_target = int(np.clip(round(frac * length), 15, SUMMARY_CHAR_LIMIT))
                details_target = max(int(round(length)) - summary_target, config.details_min_len)
            else:
                summary_target = int(min(round(length), SUMMARY_CHAR_LIMIT))
                details_target = 0

            # Topic mixture: longer questions blend more topics (the
            # added text wanders); the count is deterministic in length so
            # the entropy-length trend is planted, not left to chance.
            n_active = 1 + min(8, int(length / 85.0))
            active = rng.choice(n_topics, size=n_active, replace=False)
            theta_active = rng.dirichlet(np.full(n_active, 3.5))
            order = np.argsort(-theta_active)
            active, theta_active = active[order], theta_active[order]
            dominant = int(active[0])
            theta = np.zeros(n_topics)
            theta[active] = theta_active

            # First word and greeting.
            fw_draw = _FW_WORDS[rng.choice(len(_FW_WORDS), p=np.asarray(_FW_SHARES) / 100.0)]
            greeting = fw_draw == "OTHER" and rng.random() < config.greeting_prob
            first_token = _render_first_token(fw_draw, rng)
            fw_group = "OTHER" if greeting else fw_draw

            # Body text.
            words = _draw_words(config, rng, theta_active, active, max(summary_target - len(first_token) - 1, 0), zipf)
            hot_count = 0
            if rng.random() < config.hot_keyword_prob:
                hot_count = 1 if rng.random() < 0.8 else 2
                for _ in range(hot_count):
                    kw = HOT_KEYWORDS[rng.integers(len(HOT_KEYWORDS))]
                    pos = rng.integers(len(words) + 1)
                    words.insert(int(pos), kw)
            lead = ([GREETING_PREFIXES[rng.integers(len(GREETING_PREFIXES))] + ","] if greeting else []) + [first_token]
            sentences = _render_sentences(config, rng, lead + words, summary_target)

            qmark = rng.random() < _question_mark_prob(fw_group)
            parts = [" ".join(s) for s in sentences]
            summary = ". ".join(parts)
            summary += "?" if qmark else ("." if rng.random() < 0.4 else "")
            caps_u = rng.random()
            probs = config.caps_probs
            if caps_u < probs[0]:
                style = 0
            elif caps_u < probs[0] + probs[1]:
                style = 1
            elif caps_u < probs[0] + probs[1] + probs[2]:
                style = 2
            else:
                style = 3
            summary = _apply_caps(summary, style)
            if len(summary) > SUMMARY_CHAR_LIMIT:
                summary = summary[:SUMMARY_CHAR_LIMIT]
                cut = summary.rfind(" ")
                if cut > 20:
                    summary = summary[:cut]
                summary = summary.rstrip(" .") or summary

            details: Optional[str] = None
            if has_details:
                d_words = _draw_words(config, rng, theta_active, active, details_target, zipf)
                d_sentences = _render_sentences(config, rng, d_words, details_target)
                details = _apply_caps(". ".join(" ".join(s) for s in d_sentences) + ".", 0)

            summary_len = len(summary)
            details_len = len(details) if details else 0
            total_len = summary_len + details_len

            # Latent mean log-views.
            platform_i = int(rng.choice(len(config.platforms), p=np.asarray(config.platform_probs)))
            version_i = int(rng.choice(len(config.versions), p=np.asarray(config.version_probs)))
            uplift = true_uplift_mu(config, total_len, week, dominant, fw_group)
            nd_effect = _no_details_effect(config, min(total_len, SUMMARY_CHAR_LIMIT))
            length_details = nd_effect + (uplift if has_details else 0.0)
            proper_flag = style == 0
            excessive_flag = style == 2 and sum(c.isalpha() for c in summary) >= 10
            style_effect = (
                (config.question_mark_effect if qmark else 0.0)
                + (config.proper_cap_effect if proper_flag else 0.0)
                + (config.excessive_cap_effect if excessive_flag else 0.0)
            )
            mu_parts = {
                "base": config.base_log_views,
                "week": float(week_effects[week - 1]),
                "first_word": config.first_word_scale * _FW_EFFECT[fw_group],
                "length_details": length_details,
                "topic": config.topics[dominant].view_effect,
                "keywords": config.hot_keyword_effect * hot_count,
                "style": style_effect,
                "platform": config.platform_effects[platform_i] + config.version_effects[version_i],
                "search_burst": config.search_burst_effect if rng.random() < config.search_burst_prob else 0.0,
            }
            mu = sum(mu_parts.values())
            z = rng.normal(mu, config.noise_sigma)
            z = _reshape_tail(config, z)
            views = max(0, int(round(math.exp(min(z, config.max_log_views)))) - 1)

            answered = rng.random() < _FW_ANSWER[fw_group]
            asker_vote = None
            if answered and rng.random() < config.vote_prob_answered:
                content_type = float(np.clip(config.topics[dominant].content_type + rng.normal(0, 0.05), 0, 1))
                p_up = float(np.clip(config.upvote_base - config.upvote_content_slope * content_type, 0.05, 0.97))
                asker_vote = "up" if rng.random() < p_up else "down"
            else:
                content_type = float(np.clip(config.topics[dominant].content_type + rng.normal(0, 0.05), 0, 1))
            google = float(np.clip(config.topics[dominant].google_fraction + rng.normal(0, config.google_noise_sd), 0, 0.95))

            qid = f"q{qi:07d}"
            questions.append(
                Question(
                    id=qid,
                    summary=summary,
                    details=details,
                    week=week,
                    platform=config.platforms[platform_i],
                    product_version=config.versions[version_i],
                    answered=answered,
                    views=views,
                    asker_vote=asker_vote,
                    google_view_fraction=round(google, 6),
                    user_id=user_id,
                )
            )
            truths[qid] = GroundTruth(
                id=qid,
                theta=tuple(round(float(x), 6) for x in theta),
                dominant_topic=dominant,
                content_type=round(content_type, 6),
                mu=round(float(mu), 6),
                mu_parts={k: round(float(v), 6) for k, v in mu_parts.items()},
                uplift=round(float(uplift), 6),
                is_first_question=is_first,
                intended_length=int(round(length)),
                hot_keyword_count=hot_count,
            )
            qi += 1

    # Stable corpus order: by week then id, so "earliest question" is
    # unambiguous downstream.
    order = sorted(range(len(questions)), key=lambda i: (questions[i].week, questions[i].id))
    questions = [questions[i] for i in order]
    return QuestionCorpus(
        questions=questions,
        season_weeks=config.season_weeks,
        provenance={"kind": "synthetic", "seed": config.seed, "config_digest": config.digest()},
        ground_truth=truths,
    )


# --- persistence ----------------------------------------------------------

_RECORD_FIELDS = (
    "id", "summary", "details", "week", "platform", "product_version",
    "answered", "views", "asker_vote", "google_view_fraction", "user_id",
)


def question_to_record(q: Question) -> dict:
    rec = {
        "id": q.id,
        "summary": q.summary,
        "week": q.week,
        "platform": q.platform,
        "product_version": q.product_version,
        "answered": q.answered,
        "views": q.views,
        "google_view_fraction": q.google_view_fraction,
    }
    # Absent optionals are absent fields, never empty strings.
    if q.details is not None:
        rec["details"] = q.details
    if q.asker_vote is not None:
        rec["asker_vote"] = q.asker_vote
    if q.user_id is not None:
        rec["user_id"] = q.user_id
    return rec


def save_corpus(corpus: QuestionCorpus, path: str | Path, ground_truth_path: str | Path | None = None) -> None:
    """Write one JSON record per line; optionally the ground-truth sidecar."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for q in corpus.questions:
            fh.write(json.dumps(question_to_record(q), sort_keys=True, ensure_ascii=False))
            fh.write("\n")
    if ground_truth_path is None and corpus.ground_truth is not None:
        ground_truth_path = path.with_suffix(path.suffix + ".truth")
    if ground_truth_path is not None and corpus.ground_truth is not None:
        with Path(ground_truth_path).open("w", encoding="utf-8") as fh:
            for q in corpus.questions:
                gt = corpus.ground_truth[q.id]
                fh.write(json.dumps(asdict(gt), sort_keys=True, ensure_ascii=False))
                fh.write("\n")


def load_ground_truth(path: str | Path) -> dict[str, GroundTruth]:
    truths: dict[str, GroundTruth] = {}
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            raw["theta"] = tuple(raw["theta"])
            truths[raw["id"]] = GroundTruth(**raw)
    return truths


_REQUIRED = {"id": str, "summary": str, "week": int, "platform": str,
             "product_version": str, "answered": bool, "views": int}


def load_corpus(path: str | Path, max_week: int = 15) -> QuestionCorpus:
    """Load a line-delimited corpus, rejecting malformed records by line.

    Over-long summaries are rejected (naming the field and line), never
    silently truncated. Duplicate ids are an error.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    questions: list[Question] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if not isinstance(raw, dict):
                raise CorpusFormatError("record must be an object", line=lineno)
            for name, typ in _REQUIRED.items():
                if name not in raw:
                    raise CorpusFormatError(f"missing field '{name}'", line=lineno, fields=name)
                if not isinstance(raw[name], typ) or (typ is int and isinstance(raw[name], bool)):
                    raise CorpusFormatError(f"field '{name}' has wrong type", line=lineno, fields=name)
            if len(raw["summary"]) > SUMMARY_CHAR_LIMIT:
                raise CorpusFormatError(
                    f"field 'summary' exceeds {SUMMARY_CHAR_LIMIT} characters", line=lineno, fields="summary",
                )
            if not raw["summary"]:
                raise CorpusFormatError("field 'summary' must be non-empty", line=lineno, fields="summary")
            if raw["id"] in seen:
                raise CorpusFormatError(f"duplicate id '{raw['id']}'", line=lineno, fields="id")
            if not 1 <= raw["week"] <= max_week:
                raise CorpusFormatError(f"field 'week' outside 1..{max_week}", line=lineno, fields="week")
            if raw["views"] < 0:
                raise CorpusFormatError("field 'views' must be >= 0", line=lineno, fields="views")
            details = raw.get("details")
            if details is not None and not isinstance(details, str):
                raise CorpusFormatError("field 'details' has wrong type", line=lineno, fields="details")
            vote = raw.get("asker_vote")
            if vote not in (None, "up", "down"):
                raise CorpusFormatError("field 'asker_vote' must be 'up' or 'down'", line=lineno, fields="asker_vote")
            seen.add(raw["id"])
            questions.append(
                Question(
                    id=raw["id"],
                    summary=raw["summary"],
                    details=details,
                    week=raw["week"],
                    platform=raw["platform"],
                    product_version=raw["product_version"],
                    answered=raw["answered"],
                    views=raw["views"],
                    asker_vote=vote,
                    google_view_fraction=float(raw.get("google_view_fraction", 0.0)),
                    user_id=raw.get("user_id"),
                )
            )
    truth_path = path.with_suffix(path.suffix + ".truth")
    ground_truth = load_ground_truth(truth_path) if truth_path.exists() else None
    return QuestionCorpus(
        questions=questions,
        season_weeks=max_week,
        provenance={"kind": "loaded", "path": str(path)},
        ground_truth=ground_truth,
    )


# --- statistics and labels ------------------------------------------------

def top_decile_threshold(views: np.ndarray) -> int:
    """Minimal v such that strictly-more-than-v selects <= 10% of questions."""
    if len(views) == 0:
        raise ValueError("cannot compute a view threshold on an empty corpus")
    desc = np.sort(np.asarray(views))[::-1]
    k_max = int(math.floor(0.10 * len(desc)))
    return int(desc[k_max]) if k_max < len(desc) else int(desc[-1])


def label_top_decile(corpus: QuestionCorpus | Iterable[int]) -> np.ndarray:
    """Binary top-decile labels: views strictly above the decile threshold.

    Ties sitting on the threshold are labeled 0, keeping the positive rate
    at or below 10% regardless of tie-block size. Pure function of the
    view multiset: question order never changes a label.
    """
    views = corpus.views() if isinstance(corpus, QuestionCorpus) else np.asarray(list(corpus), dtype=np.int64)
    threshold = top_decile_threshold(views)
    return (views > threshold).astype(np.int8)


def corpus_stats(corpus: QuestionCorpus) -> CorpusSummary:
    """Exact summary statistics; raises on an empty corpus."""
    n = len(corpus.questions)
    if n == 0:
        raise ValueError("corpus_stats requires a non-empty corpus")
    views = corpus.views().astype(np.float64)
    answered = np.array([q.answered for q in corpus.questions])
    has_details = np.array([q.details is not None for q in corpus.questions])
    summary_lens = np.array([len(q.summary) for q in corpus.questions], dtype=np.float64)
    details_lens = np.array([len(q.details) if q.details else 0 for q in corpus.questions], dtype=np.float64)

    total_views = float(views.sum())
    desc = np.sort(views)[::-1]
    k1, k10 = int(math.floor(0.01 * n)), int(math.floor(0.10 * n))
    top1_share = float(desc[:k1].sum() / total_views) if total_views > 0 else 0.0
    top10_share = float(desc[:k10].sum() / total_views) if total_views > 0 else 0.0
    labels = label_top_decile(corpus).astype(bool)
    in_top = labels
    details_top = has_details[in_top]

    def _mean(x: np.ndarray) -> float:
        return float(x.mean()) if len(x) else 0.0

    return CorpusSummary(
        n_questions=n,
        answer_rate=float(answered.mean()),
        mean_views=float(views.mean()),
        mean_views_answered=_mean(views[answered]),
        top1_view_share=top1_share,
        top10_view_share=top10_share,
        zero_view_fraction=float((views == 0).mean()),
        top_decile_view_threshold=top_decile_threshold(views.astype(np.int64)),
        details_fraction=float(has_details.mean()),
        details_fraction_top_decile=_mean(details_top.astype(float)),
        mean_details_len=_mean(details_lens[has_details]),
        mean_details_len_top_decile=_mean(details_lens[in_top & has_details]),
        mean_summary_len_no_details=_mean(summary_lens[~has_details]),
        mean_summary_len_top_decile=_mean(summary_lens[in_top]),
    )
