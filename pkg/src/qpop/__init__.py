"""Question-popularity modeling toolkit.

Predicts social-Q&A question popularity from question-writing features,
explains which features matter, and drives a rephrase-and-rescore
intervention loop. Ships with a seeded synthetic-corpus generator
calibrated to published tax-season Q&A statistics.
"""

__version__ = "0.1.0"

from .boruta import BorutaParams, BorutaReport, run_boruta
from .bundle import ScoreBundle, build_bundle
from .corpus import (
    CorpusSummary,
    GeneratorConfig,
    Question,
    QuestionCorpus,
    corpus_stats,
    generate_corpus,
    label_top_decile,
    load_corpus,
    save_corpus,
)
from .ensemble import Dataset, FeatureSpec, Forest, ForestParams, fit_forest, permutation_importance
from .evalstats import evaluation_report, first_word_table, length_profiles, pearson, spearman
from .interventions import Suggestion, suggest, whatif
from .popmodel import PopularityModel, fit_binning, fit_logistic, roc_auc, score, score_batch
from .textfeat import FeatureVector, extract_features, first_word, text_bag, tokenize
from .topics import TopicModel, fit_lda, infer_topic_distribution, topic_aggregates, topic_entropy
from .uplift import (
    build_uplift_dataset,
    fit_uplift,
    incremental_gains,
    persuadable_fraction,
    uplift_importance,
)

__all__ = [
    "__version__",
    "BorutaParams",
    "BorutaReport",
    "run_boruta",
    "ScoreBundle",
    "build_bundle",
    "CorpusSummary",
    "GeneratorConfig",
    "Question",
    "QuestionCorpus",
    "corpus_stats",
    "generate_corpus",
    "label_top_decile",
    "load_corpus",
    "save_corpus",
    "Dataset",
    "FeatureSpec",
    "Forest",
    "ForestParams",
    "fit_forest",
    "permutation_importance",
    "evaluation_report",
    "first_word_table",
    "length_profiles",
    "pearson",
    "spearman",
    "Suggestion",
    "suggest",
    "whatif",
    "PopularityModel",
    "fit_binning",
    "fit_logistic",
    "roc_auc",
    "score",
    "score_batch",
    "FeatureVector",
    "extract_features",
    "first_word",
    "text_bag",
    "tokenize",
    "TopicModel",
    "fit_lda",
    "infer_topic_distribution",
    "topic_aggregates",
    "topic_entropy",
    "build_uplift_dataset",
    "fit_uplift",
    "incremental_gains",
    "persuadable_fraction",
    "uplift_importance",
]
