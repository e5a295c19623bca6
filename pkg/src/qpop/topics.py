"""LDA topic model (collapsed Gibbs sampling), posterior inference, and the
normalized topic-entropy ("coherency") measure.

The sampler is a standard collapsed Gibbs chain over token-topic
assignments; documents are the concatenation of question summary and
details. Per-document posteriors are averaged over a window of retained
samples rather than taken from a single draw.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .corpus import Question, QuestionCorpus
from .textfeat import tokenize

TOPIC_MODEL_FORMAT = "qpop.topic_model"
TOPIC_MODEL_VERSION = 1


@dataclass
class TopicDistribution:
    """Posterior topic probabilities for one question."""

    probs: np.ndarray
    uniform_fallback: bool = False  # True when no token was in vocabulary

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if (self.probs < 0).any():
            raise ValueError("topic probabilities must be non-negative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("topic probabilities must sum to 1")


@dataclass
class TopicModel:
    n_topics: int
    vocabulary: list[str]
    topic_word_counts: np.ndarray  # (M, V) assignment counts
    alpha: float
    beta: float
    seed: int
    iterations: int
    burn_in: int
    # averaged posterior for each training document, keyed by question id
    doc_ids: list[str] = field(default_factory=list)
    doc_topic_posterior: Optional[np.ndarray] = None

    def __post_init__(self):
        self.topic_word_counts = np.asarray(self.topic_word_counts, dtype=np.float64)
        self._vocab_index = {w: i for i, w in enumerate(self.vocabulary)}
        self._doc_index = {d: i for i, d in enumerate(self.doc_ids)}

    @property
    def topic_totals(self) -> np.ndarray:
        return self.topic_word_counts.sum(axis=1)

    def top_keywords(self, k: int = 5) -> list[list[str]]:
        """Per topic, the k highest-count vocabulary words."""
        out = []
        for t in range(self.n_topics):
            order = np.argsort(-self.topic_word_counts[t])[:k]
            out.append([self.vocabulary[i] for i in order])
        return out

    def training_posterior(self, question_id: str) -> Optional[np.ndarray]:
        idx = self._doc_index.get(question_id)
        if idx is None or self.doc_topic_posterior is None:
            return None
        return self.doc_topic_posterior[idx]

    def encode(self, text_tokens: Sequence[str]) -> np.ndarray:
        ids = [self._vocab_index[t] for t in text_tokens if t in self._vocab_index]
        return np.asarray(ids, dtype=np.int64)

    def to_json(self) -> dict:
        return {
            "format": TOPIC_MODEL_FORMAT,
            "version": TOPIC_MODEL_VERSION,
            "n_topics": self.n_topics,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "burn_in": self.burn_in,
            "vocabulary": self.vocabulary,
            "topic_word_counts": self.topic_word_counts.astype(int).tolist(),
            "doc_ids": self.doc_ids,
            "doc_topic_posterior": (
                None if self.doc_topic_posterior is None
                else np.round(self.doc_topic_posterior, 8).tolist()
            ),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "TopicModel":
        if doc.get("format") != TOPIC_MODEL_FORMAT:
            raise ValueError(f"not a topic model document: {doc.get('format')!r}")
        if doc.get("version") != TOPIC_MODEL_VERSION:
            raise ValueError(f"unsupported topic model version {doc.get('version')!r}")
        posterior = doc.get("doc_topic_posterior")
        if posterior is not None:
            posterior = np.asarray(posterior, dtype=np.float64)
            posterior /= posterior.sum(axis=1, keepdims=True)  # undo storage rounding
        model = cls(
            n_topics=doc["n_topics"],
            vocabulary=list(doc["vocabulary"]),
            topic_word_counts=np.asarray(doc["topic_word_counts"], dtype=np.float64),
            alpha=doc["alpha"],
            beta=doc["beta"],
            seed=doc["seed"],
            iterations=doc["iterations"],
            burn_in=doc["burn_in"],
            doc_ids=list(doc.get("doc_ids", [])),
            doc_topic_posterior=posterior,
        )
        return model

    @classmethod
    def load(cls, path: str | Path) -> "TopicModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def question_tokens(question: Question) -> list[str]:
    """The LDA document: summary and details concatenated, tokenized."""
    text = question.summary if question.details is None else f"{question.summary} {question.details}"
    return tokenize(text)


@njit(cache=True)
def _splitmix64(state: np.uint64) -> np.uint64:
    state = np.uint64(state + np.uint64(0x9E3779B97F4A7C15))
    z = state
    z = np.uint64((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9))
    z = np.uint64((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB))
    return np.uint64(z ^ (z >> np.uint64(31)))


@njit(cache=True)
def _gibbs_train(tokens, doc_starts, n_topics, alpha, beta, sweeps, burn_in,
                 avg_window, seed, vocab_size):
    n_tokens = tokens.shape[0]
    n_docs = doc_starts.shape[0] - 1
    topic_word = np.zeros((n_topics, vocab_size), dtype=np.float64)
    topic_totals = np.zeros(n_topics, dtype=np.float64)
    doc_topic = np.zeros((n_docs, n_topics), dtype=np.float64)
    doc_avg = np.zeros((n_docs, n_topics), dtype=np.float64)
    z = np.zeros(n_tokens, dtype=np.int64)

    np.random.seed(seed)
    for d in range(n_docs):
        for i in range(doc_starts[d], doc_starts[d + 1]):
            t = np.random.randint(0, n_topics)
            z[i] = t
            topic_word[t, tokens[i]] += 1.0
            topic_totals[t] += 1.0
            doc_topic[d, t] += 1.0

    v_beta = vocab_size * beta
    probs = np.empty(n_topics, dtype=np.float64)
    total_sweeps = burn_in + sweeps
    avg_start = total_sweeps - min(avg_window, sweeps)
    n_avg = 0
    for sweep in range(total_sweeps):
        for d in range(n_docs):
            for i in range(doc_starts[d], doc_starts[d + 1]):
                w = tokens[i]
                t_old = z[i]
                topic_word[t_old, w] -= 1.0
                topic_totals[t_old] -= 1.0
                doc_topic[d, t_old] -= 1.0
                acc = 0.0
                for t in range(n_topics):
                    p = (topic_word[t, w] + beta) / (topic_totals[t] + v_beta) * (doc_topic[d, t] + alpha)
                    acc += p
                    probs[t] = acc
                u = np.random.random() * acc
                t_new = 0
                while probs[t_new] < u:
                    t_new += 1
                z[i] = t_new
                topic_word[t_new, w] += 1.0
                topic_totals[t_new] += 1.0
                doc_topic[d, t_new] += 1.0
        if sweep >= avg_start:
            doc_avg += doc_topic
            n_avg += 1
    if n_avg > 0:
        doc_avg /= n_avg
    return topic_word, doc_avg


@njit(cache=True)
def _gibbs_fold_in(tokens, doc_starts, topic_word, topic_totals, n_topics,
                   alpha, beta, sweeps, burn_in, seed):
    """Per-document inference with frozen topic-word counts."""
    n_docs = doc_starts.shape[0] - 1
    vocab_size = topic_word.shape[1]
    v_beta = vocab_size * beta
    out = np.zeros((n_docs, n_topics), dtype=np.float64)
    probs = np.empty(n_topics, dtype=np.float64)
    for d in range(n_docs):
        # independent, reproducible chain per document
        np.random.seed(int(_splitmix64(np.uint64(seed) + np.uint64(d)) % np.uint64(2**31 - 1)))
        start, end = doc_starts[d], doc_starts[d + 1]
        length = end - start
        if length == 0:
            for t in range(n_topics):
                out[d, t] = 1.0 / n_topics
            continue
        doc_topic = np.zeros(n_topics, dtype=np.float64)
        z = np.zeros(length, dtype=np.int64)
        for i in range(length):
            t = np.random.randint(0, n_topics)
            z[i] = t
            doc_topic[t] += 1.0
        acc_counts = np.zeros(n_topics, dtype=np.float64)
        n_kept = 0
        for sweep in range(burn_in + sweeps):
            for i in range(length):
                w = tokens[start + i]
                t_old = z[i]
                doc_topic[t_old] -= 1.0
                acc = 0.0
                for t in range(n_topics):
                    p = (topic_word[t, w] + beta) / (topic_totals[t] + v_beta) * (doc_topic[t] + alpha)
                    acc += p
                    probs[t] = acc
                u = np.random.random() * acc
                t_new = 0
                while probs[t_new] < u:
                    t_new += 1
                z[i] = t_new
                doc_topic[t_new] += 1.0
            if sweep >= burn_in:
                acc_counts += doc_topic
                n_kept += 1
        total = 0.0
        for t in range(n_topics):
            acc_counts[t] = acc_counts[t] / n_kept + alpha
            total += acc_counts[t]
        for t in range(n_topics):
            out[d, t] = acc_counts[t] / total
    return out


def fit_lda(
    corpus: QuestionCorpus | Sequence[Question],
    n_topics: int = 30,
    alpha: Optional[float] = None,
    beta: float = 0.01,
    iterations: int = 500,
    burn_in: int = 200,
    seed: int = 0,
    min_count: int = 1,
    avg_window: int = 50,
) -> TopicModel:
    """Fit LDA by collapsed Gibbs sampling; deterministic for a fixed seed.

    ``alpha`` defaults to 50 / n_topics and ``beta`` to 0.01 (the
    conventions of the reference Gibbs implementation). The per-document
    posterior is the average over the last ``avg_window`` retained sweeps.
    """
    questions = corpus.questions if isinstance(corpus, QuestionCorpus) else list(corpus)
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if alpha is None:
        alpha = 50.0 / n_topics
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    docs = [question_tokens(q) for q in questions]
    counts: dict[str, int] = {}
    for doc in docs:
        for tok in doc:
            counts[tok] = counts.get(tok, 0) + 1
    vocabulary = sorted((w for w, c in counts.items() if c >= min_count),
                        key=lambda w: (-counts[w], w))
    if not vocabulary:
        raise ValueError("corpus has an empty vocabulary after tokenization")
    if n_topics > len(docs):
        raise ValueError(f"n_topics={n_topics} exceeds document count {len(docs)}")
    index = {w: i for i, w in enumerate(vocabulary)}

    token_ids: list[int] = []
    doc_starts = [0]
    kept_ids: list[str] = []
    for q, doc in zip(questions, docs):
        ids = [index[t] for t in doc if t in index]
        token_ids.extend(ids)
        doc_starts.append(len(token_ids))
        kept_ids.append(q.id)

    tokens = np.asarray(token_ids, dtype=np.int64)
    starts = np.asarray(doc_starts, dtype=np.int64)
    topic_word, doc_avg = _gibbs_train(
        tokens, starts, n_topics, alpha, beta, iterations, burn_in,
        avg_window, seed % (2**31 - 1), len(vocabulary),
    )
    # averaged counts -> smoothed posterior per training document
    posterior = doc_avg + alpha
    posterior /= posterior.sum(axis=1, keepdims=True)
    return TopicModel(
        n_topics=n_topics,
        vocabulary=vocabulary,
        topic_word_counts=topic_word,
        alpha=alpha,
        beta=beta,
        seed=seed,
        iterations=iterations,
        burn_in=burn_in,
        doc_ids=kept_ids,
        doc_topic_posterior=posterior,
    )


def infer_topic_matrix(
    model: TopicModel,
    questions: Sequence[Question],
    sweeps: int = 30,
    burn_in: int = 10,
    seed: int = 0,
) -> np.ndarray:
    """Fold-in posterior inference for many questions at once."""
    token_ids: list[int] = []
    doc_starts = [0]
    for q in questions:
        ids = model.encode(question_tokens(q))
        token_ids.extend(int(i) for i in ids)
        doc_starts.append(len(token_ids))
    tokens = np.asarray(token_ids, dtype=np.int64)
    starts = np.asarray(doc_starts, dtype=np.int64)
    return _gibbs_fold_in(
        tokens, starts, model.topic_word_counts, model.topic_totals,
        model.n_topics, model.alpha, model.beta, sweeps, burn_in,
        seed % (2**31 - 1),
    )


def infer_topic_distribution(
    model: TopicModel,
    question: Question,
    sweeps: int = 30,
    burn_in: int = 10,
    seed: int = 0,
) -> TopicDistribution:
    """Posterior for one question; uniform (with a flag) when no token is known."""
    ids = model.encode(question_tokens(question))
    if len(ids) == 0:
        return TopicDistribution(
            probs=np.full(model.n_topics, 1.0 / model.n_topics), uniform_fallback=True
        )
    probs = infer_topic_matrix(model, [question], sweeps=sweeps, burn_in=burn_in, seed=seed)[0]
    return TopicDistribution(probs=probs)


def topic_entropy(dist: TopicDistribution | np.ndarray | Sequence[float], n_topics: Optional[int] = None) -> float:
    """Normalized Shannon entropy of a topic distribution, in [0, 1].

    0 for a one-hot posterior, 1 for the uniform one; 0 * log(0) counts as
    zero. The normalization by log(M) makes the log base irrelevant.
    """
    probs = dist.probs if isinstance(dist, TopicDistribution) else np.asarray(dist, dtype=np.float64)
    if n_topics is None:
        n_topics = len(probs)
    if len(probs) != n_topics:
        raise ValueError(f"distribution has {len(probs)} entries, expected {n_topics}")
    if (probs < 0).any():
        raise ValueError("probabilities must be non-negative")
    if abs(float(probs.sum()) - 1.0) > 1e-9:
        raise ValueError("distribution must be normalized")
    if n_topics == 1:
        return 0.0
    nz = probs[probs > 0]
    raw = -float(np.sum(nz * np.log(nz))) / math.log(n_topics)
    return min(max(raw, 0.0), 1.0) + 0.0  # normalize -0.0


@dataclass(frozen=True)
class TopicAggregate:
    topic: int
    question_count: int
    mean_views: Optional[float]
    up_vote_fraction: Optional[float]
    mean_content_type: Optional[float]
    top_keywords: list[str]


@dataclass
class TopicAggregates:
    """Per-topic roll-up over argmax-assigned questions."""

    rows: list[TopicAggregate]

    def as_arrays(self):
        present = [r for r in self.rows if r.question_count > 0]
        return (
            np.array([r.mean_views for r in present], dtype=float),
            np.array([r.up_vote_fraction if r.up_vote_fraction is not None else np.nan for r in present]),
            np.array([r.mean_content_type if r.mean_content_type is not None else np.nan for r in present]),
        )


def topic_aggregates(
    model: TopicModel,
    corpus: QuestionCorpus,
    posteriors: Optional[np.ndarray] = None,
    keywords_per_topic: int = 5,
) -> TopicAggregates:
    """Aggregate views, votes, and content type per argmax-assigned topic.

    ``posteriors`` may carry a precomputed (n_questions, M) matrix; the
    fitted model's stored training posteriors are used when available.
    Content type comes from the corpus ground truth when present. Topics
    with no assigned question get absent (None) aggregates, not zeros.
    """
    questions = corpus.questions
    if posteriors is None:
        stored = [model.training_posterior(q.id) for q in questions]
        if all(p is not None for p in stored):
            posteriors = np.vstack(stored)
        else:
            posteriors = infer_topic_matrix(model, questions, seed=model.seed)
    assignment = np.argmax(posteriors, axis=1)
    views = corpus.views().astype(float)
    voted = np.array([q.asker_vote is not None for q in questions])
    up = np.array([q.asker_vote == "up" for q in questions])
    truth = corpus.ground_truth
    content = (
        np.array([truth[q.id].content_type for q in questions])
        if truth else None
    )
    keywords = model.top_keywords(keywords_per_topic)
    rows = []
    for t in range(model.n_topics):
        mask = assignment == t
        count = int(mask.sum())
        if count == 0:
            rows.append(TopicAggregate(t, 0, None, None, None, keywords[t]))
            continue
        votes_here = voted & mask
        rows.append(
            TopicAggregate(
                topic=t,
                question_count=count,
                mean_views=float(views[mask].mean()),
                up_vote_fraction=(
                    float(up[votes_here].sum() / votes_here.sum()) if votes_here.any() else None
                ),
                mean_content_type=float(content[mask].mean()) if content is not None else None,
                top_keywords=keywords[t],
            )
        )
    assert sum(r.question_count for r in rows) == len(questions)
    return TopicAggregates(rows=rows)
