"""The deployable scoring bundle: topic model, popularity model, optional
uplift forest, and the training-score quantiles used for percentiles.

A bundle is a directory of versioned JSON documents. Loaded bundles are
immutable; live services swap whole bundle objects atomically.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .corpus import Question, QuestionCorpus, label_top_decile
from .ensemble import Forest, ForestParams
from .popmodel import PopularityModel, fit_logistic, score_batch, score_breakdown
from .textfeat import extract_features, text_bag
from .topics import TopicModel, fit_lda, infer_topic_distribution, topic_entropy
from .uplift import DEFAULT_UPLIFT_PARAMS, build_uplift_dataset, fit_uplift

BUNDLE_FORMAT = "qpop.bundle"
BUNDLE_VERSION = 1
N_QUANTILES = 1001


@dataclass
class ScoreResult:
    probability: float
    percentile: float
    top_decile: bool
    feature_breakdown: dict[str, float]
    topic: int
    topic_keywords: list[str]
    coherency: float
    bundle_version: str


@dataclass
class ScoreBundle:
    topic_model: TopicModel
    pop_model: PopularityModel
    score_quantiles: np.ndarray
    uplift_forest: Optional[Forest] = None
    percentile_low: float = 20.0
    percentile_high: float = 80.0
    version: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.score_quantiles = np.asarray(self.score_quantiles, dtype=np.float64)
        if len(self.score_quantiles) < 3:
            raise ValueError("score quantiles must have at least 3 points")
        if not self.version:
            digest = hashlib.sha256(self.score_quantiles.tobytes()).hexdigest()[:8]
            fingerprint = self.pop_model.metadata.get("fingerprint", "")
            self.version = f"{fingerprint}-{digest}" if fingerprint else digest

    def percentile_of(self, probability: float) -> float:
        """Empirical percentile of a score against the training distribution."""
        qs = self.score_quantiles
        pos = np.searchsorted(qs, probability, side="right")
        if pos <= 0:
            return 0.0
        if pos >= len(qs):
            return 100.0
        lo, hi = qs[pos - 1], qs[pos]
        frac = 0.0 if hi == lo else (probability - lo) / (hi - lo)
        return 100.0 * (pos - 1 + frac) / (len(qs) - 1)

    def features_for(self, question: Question):
        dist = infer_topic_distribution(self.topic_model, question, seed=self.topic_model.seed)
        fv = extract_features(question, topic_distribution=dist.probs)
        if self.pop_model.bag_dim:
            fv.text_bag = text_bag(question, self.pop_model.bag_dim)
        return fv, dist

    def score_question(self, question: Question) -> ScoreResult:
        fv, dist = self.features_for(question)
        probability = float(score_batch(self.pop_model, [fv])[0])
        topic = int(np.argmax(dist.probs))
        return ScoreResult(
            probability=probability,
            percentile=self.percentile_of(probability),
            top_decile=probability > self.pop_model.threshold,
            feature_breakdown=score_breakdown(self.pop_model, fv),
            topic=topic,
            topic_keywords=self.topic_model.top_keywords(5)[topic],
            coherency=topic_entropy(dist.probs, self.topic_model.n_topics),
            bundle_version=self.version,
        )

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.topic_model.save(directory / "topic_model.json")
        self.pop_model.save(directory / "popularity_model.json")
        if self.uplift_forest is not None:
            self.uplift_forest.save(directory / "uplift_forest.json")
        manifest = {
            "format": BUNDLE_FORMAT,
            "version": BUNDLE_VERSION,
            "bundle_version": self.version,
            "score_quantiles": np.round(self.score_quantiles, 12).tolist(),
            "percentile_low": self.percentile_low,
            "percentile_high": self.percentile_high,
            "has_uplift": self.uplift_forest is not None,
            "metadata": self.metadata,
        }
        (directory / "bundle.json").write_text(json.dumps(manifest), encoding="utf-8")

    @classmethod
    def load(cls, directory: str | Path) -> "ScoreBundle":
        directory = Path(directory)
        manifest_path = directory / "bundle.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no bundle manifest at {manifest_path}")
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if manifest.get("format") != BUNDLE_FORMAT:
            raise ValueError(f"not a bundle manifest: {manifest.get('format')!r}")
        uplift = None
        if manifest.get("has_uplift") and (directory / "uplift_forest.json").exists():
            uplift = Forest.load(directory / "uplift_forest.json")
        return cls(
            topic_model=TopicModel.load(directory / "topic_model.json"),
            pop_model=PopularityModel.load(directory / "popularity_model.json"),
            score_quantiles=np.asarray(manifest["score_quantiles"]),
            uplift_forest=uplift,
            percentile_low=manifest.get("percentile_low", 20.0),
            percentile_high=manifest.get("percentile_high", 80.0),
            version=manifest["bundle_version"],
            metadata=manifest.get("metadata", {}),
        )


def build_bundle(
    corpus: QuestionCorpus,
    group: str = "I+II",
    seed: int = 0,
    n_topics: int = 30,
    lda_alpha: float = 0.05,
    lda_iterations: int = 60,
    lda_burn_in: int = 30,
    include_uplift: bool = True,
    uplift_params: Optional[ForestParams] = None,
) -> ScoreBundle:
    """Train every bundle component on the corpus.

    The LDA profile here (sparse alpha=0.05, 60 + 30 burn-in sweeps) is
    tuned for the planted-vocabulary corpora this toolkit targets: the
    sparse document prior keeps short pure-topic questions at low entropy,
    which the coherency feature relies on. Raise the sweep counts (and
    alpha) for messier text.
    """
    labels = label_top_decile(corpus)
    topic_model = fit_lda(
        corpus, n_topics=n_topics, alpha=lda_alpha, iterations=lda_iterations,
        burn_in=lda_burn_in, seed=seed, avg_window=min(30, lda_iterations),
    )
    posteriors = topic_model.doc_topic_posterior
    fvs = []
    bag_dim = None
    from .popmodel import DEFAULT_BAG_DIM

    if "III" in group:
        bag_dim = DEFAULT_BAG_DIM
    for i, q in enumerate(corpus.questions):
        fv = extract_features(q, topic_distribution=posteriors[i])
        if bag_dim:
            fv.text_bag = text_bag(q, bag_dim)
        fvs.append(fv)
    pop_model = fit_logistic(
        fvs, labels, group=group, seed=seed, tol=3e-5, max_iter=4000,
        metadata={"n_topics": n_topics},
    )
    train_scores = score_batch(pop_model, fvs)
    quantiles = np.quantile(train_scores, np.linspace(0, 1, N_QUANTILES))

    uplift_forest = None
    if include_uplift:
        uplift_data = build_uplift_dataset(corpus, topic_model, labels=labels, posteriors=posteriors)
        params = uplift_params or ForestParams(**{**DEFAULT_UPLIFT_PARAMS.__dict__, "seed": seed})
        uplift_forest = fit_uplift(uplift_data, params)

    return ScoreBundle(
        topic_model=topic_model,
        pop_model=pop_model,
        score_quantiles=quantiles,
        uplift_forest=uplift_forest,
        metadata={"seed": seed, "n_questions": len(corpus.questions), "group": group},
    )
