"""The qpop command line: corpus generation, model training, evaluation,
reporting, one-shot scoring, and the HTTP service."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import fields as dataclass_fields
from pathlib import Path

import click
import numpy as np

from .boruta import BorutaParams, run_boruta
from .bundle import ScoreBundle, build_bundle
from .corpus import (
    GeneratorConfig,
    Question,
    corpus_stats,
    generate_corpus,
    label_top_decile,
    load_corpus,
    save_corpus,
)
from .ensemble import Dataset, FeatureSpec
from .evalstats import evaluation_report, first_word_table, length_profiles
from .popmodel import GROUPS, PopularityModel, roc_auc, score_batch, split_by_id
from .textfeat import FeatureVector, extract_features, text_bag
from .topics import TopicModel, fit_lda, topic_aggregates
from .uplift import (
    build_uplift_dataset,
    incremental_gains,
    persuadable_fraction,
    score_histogram,
    uplift_scores,
)

BUNDLE_ENV = "QPOP_BUNDLE"


@click.group()
def main():
    """Question-popularity modeling toolkit."""


def _load_generator_config(path: str | None, n: int | None, seed: int | None) -> GeneratorConfig:
    if path:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in dataclass_fields(GeneratorConfig)}
        unknown = set(raw) - known
        if unknown:
            raise click.ClickException(f"unknown config fields: {sorted(unknown)}")
        cfg = GeneratorConfig(**raw)
    else:
        cfg = GeneratorConfig()
    if n is not None:
        cfg.n_questions = n
    if seed is not None:
        cfg.seed = seed
    return cfg


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), help="generator config JSON")
@click.option("--n", type=int, default=None, help="number of questions")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def generate(config_path, n, seed, out):
    """Generate a calibrated synthetic corpus (plus ground-truth sidecar)."""
    cfg = _load_generator_config(config_path, n, seed)
    corpus = generate_corpus(cfg)
    save_corpus(corpus, out)
    stats = corpus_stats(corpus) if len(corpus) else None
    click.echo(f"wrote {len(corpus)} questions to {out}")
    if stats:
        click.echo(
            f"answer_rate={stats.answer_rate:.3f} mean_views={stats.mean_views:.1f} "
            f"top10_share={stats.top10_view_share:.3f} details={stats.details_fraction:.3f}"
        )


@main.command("train-topics")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topics", "n_topics", type=int, default=30, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True,
              help="document-topic prior (library default is 50/topics)")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iterations", type=int, default=60, show_default=True)
@click.option("--burn-in", type=int, default=30, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_topics(corpus_path, n_topics, alpha, seed, iterations, burn_in, out):
    """Fit the LDA topic model."""
    corpus = load_corpus(corpus_path)
    model = fit_lda(corpus, n_topics=n_topics, alpha=alpha, iterations=iterations,
                    burn_in=burn_in, seed=seed, avg_window=min(30, iterations))
    model.save(out)
    click.echo(f"fitted {n_topics} topics on {len(corpus)} questions -> {out}")
    for i, words in enumerate(model.top_keywords(5)[: min(6, n_topics)]):
        click.echo(f"  topic {i}: {', '.join(words)}")


def _featurize(corpus, topic_model, group):
    posteriors = []
    stored = [topic_model.training_posterior(q.id) for q in corpus.questions]
    if all(p is not None for p in stored):
        posteriors = np.vstack(stored)
    else:
        from .topics import infer_topic_matrix

        posteriors = infer_topic_matrix(topic_model, corpus.questions, seed=topic_model.seed)
    fvs = []
    bag = "III" in group
    from .popmodel import DEFAULT_BAG_DIM

    for i, q in enumerate(corpus.questions):
        fv = extract_features(q, topic_distribution=posteriors[i])
        if bag:
            fv.text_bag = text_bag(q, DEFAULT_BAG_DIM)
        fvs.append(fv)
    return fvs, posteriors


@main.command("train-pop")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topic-model", "topic_path", required=True, type=click.Path(exists=True))
@click.option("--groups", "group", type=click.Choice(GROUPS), default="I+II", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_pop(corpus_path, topic_path, group, seed, out):
    """Fit the popularity classifier for an attribute group."""
    from .popmodel import fit_logistic

    corpus = load_corpus(corpus_path)
    topic_model = TopicModel.load(topic_path)
    labels = label_top_decile(corpus)
    fvs, _ = _featurize(corpus, topic_model, group)
    model = fit_logistic(fvs, labels, group=group, seed=seed, tol=3e-5, max_iter=4000)
    model.save(out)
    click.echo(f"fitted group {group} model on {len(corpus)} questions -> {out}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topic-model", "topic_path", required=True, type=click.Path(exists=True))
@click.option("--holdout", type=float, default=0.3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--roc-out", type=click.Path(), default=None, help="write ROC points CSV")
def evaluate(model_path, corpus_path, topic_path, holdout, seed, roc_out):
    """Holdout AUC for a trained popularity model."""
    corpus = load_corpus(corpus_path)
    topic_model = TopicModel.load(topic_path)
    model = PopularityModel.load(model_path)
    labels = np.asarray(label_top_decile(corpus))
    fvs, _ = _featurize(corpus, topic_model, model.group)
    mask = split_by_id([q.id for q in corpus.questions], holdout, seed)
    held_fvs = [fv for fv, m in zip(fvs, mask) if m]
    scores = score_batch(model, held_fvs)
    auc, curve = roc_auc(scores, labels[mask])
    click.echo(f"group {model.group}: holdout AUC = {auc:.4f} over {mask.sum()} questions")
    if roc_out:
        with open(roc_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fpr", "tpr"])
            writer.writerows(curve)
        click.echo(f"wrote ROC points -> {roc_out}")


@main.command("train-uplift")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topic-model", "topic_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_uplift(corpus_path, topic_path, seed, out):
    """Fit the add-details uplift forest on first questions per user."""
    from .ensemble import ForestParams
    from .uplift import DEFAULT_UPLIFT_PARAMS, fit_uplift

    corpus = load_corpus(corpus_path)
    topic_model = TopicModel.load(topic_path)
    data = build_uplift_dataset(corpus, topic_model)
    params = ForestParams(**{**DEFAULT_UPLIFT_PARAMS.__dict__, "seed": seed})
    forest = fit_uplift(data, params)
    forest.save(out)
    scores = uplift_scores(forest, data)
    click.echo(
        f"fitted uplift forest on {data.n_rows} first questions "
        f"(treated {data.treatment.mean():.1%}) -> {out}"
    )
    click.echo(f"persuadable fraction: {persuadable_fraction(scores):.3f}")


@main.command()
@click.option("--model", "forest_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topic-model", "topic_path", required=True, type=click.Path(exists=True))
@click.option("--out", "gains_out", required=True, type=click.Path())
@click.option("--histogram-out", type=click.Path(), default=None)
def gains(forest_path, corpus_path, topic_path, gains_out, histogram_out):
    """Incremental-gains curve (phi, gains, diagonal) for an uplift forest."""
    from .ensemble import Forest

    corpus = load_corpus(corpus_path)
    topic_model = TopicModel.load(topic_path)
    data = build_uplift_dataset(corpus, topic_model)
    forest = Forest.load(forest_path)
    scores = uplift_scores(forest, data)
    curve = incremental_gains(scores, data.treatment, data.outcome)
    with open(gains_out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["phi", "gains", "diagonal"])
        for row in curve.to_rows():
            writer.writerow([row["phi"], row["gains"], row["diagonal"]])
    click.echo(f"wrote gains curve -> {gains_out} (endpoint {curve.overall_gain:.1f})")
    if histogram_out:
        with open(histogram_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_center", "count"])
            writer.writerows(score_histogram(scores))
        click.echo(f"wrote score histogram -> {histogram_out}")


@main.command("boruta")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--topic-model", "topic_path", required=True, type=click.Path(exists=True))
@click.option("--features", type=str, default="group1,group2", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "report_out", type=click.Path(), default=None)
def boruta_cmd(corpus_path, topic_path, features, seed, report_out):
    """All-relevant feature selection over the popularity attributes."""
    corpus = load_corpus(corpus_path)
    topic_model = TopicModel.load(topic_path)
    labels = label_top_decile(corpus)
    fvs, _ = _featurize(corpus, topic_model, "I+II")
    wanted = {part.strip() for part in features.split(",")}
    schema, columns, groups = [], {}, {}
    if "group1" in wanted:
        for name in FeatureVector.GROUP1_FIELDS:
            kind = "categorical"
            schema.append(FeatureSpec(name, kind))
            columns[name] = [str(getattr(fv, name)) for fv in fvs]
            groups[name] = "I"
    if "group2" in wanted:
        for name in FeatureVector.GROUP2_NUMERIC:
            schema.append(FeatureSpec(name, "numeric"))
            columns[name] = [getattr(fv, name) for fv in fvs]
            groups[name] = "II"
        for name in FeatureVector.GROUP2_CATEGORICAL:
            schema.append(FeatureSpec(name, "categorical"))
            columns[name] = [getattr(fv, name) for fv in fvs]
            groups[name] = "II"
        for name in FeatureVector.GROUP2_BOOLEAN:
            schema.append(FeatureSpec(name, "boolean"))
            columns[name] = [getattr(fv, name) for fv in fvs]
            groups[name] = "II"
    if not schema:
        raise click.ClickException("no feature groups selected (use group1,group2)")
    dataset = Dataset.from_columns(schema, columns, np.asarray(labels).astype(int))
    report = run_boruta(dataset, BorutaParams(seed=seed), groups=groups)
    kinds = {s.name: s.kind for s in schema}
    click.echo(f"{'Attribute':28s} {'Type':12s} {'Mean Z':>8s} {'Group':>5s}  Status")
    for row in report.to_rows():
        click.echo(
            f"{row['attribute']:28s} {kinds[row['attribute']]:12s} "
            f"{row['mean_z']:8.2f} {row['group'] or '':>5s}  {row['status']}"
        )
    if report_out:
        rows = [dict(r, type=kinds[r["attribute"]]) for r in report.to_rows()]
        Path(report_out).write_text(json.dumps(rows, indent=2), encoding="utf-8")
        click.echo(f"wrote report -> {report_out}")


@main.command("build-bundle")
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--groups", "group", type=click.Choice(GROUPS), default="I+II", show_default=True)
@click.option("--topics", "n_topics", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--no-uplift", is_flag=True, default=False)
def build_bundle_cmd(corpus_path, out_dir, group, n_topics, seed, no_uplift):
    """Train topic + popularity (+ uplift) models and write a bundle."""
    corpus = load_corpus(corpus_path)
    bundle = build_bundle(corpus, group=group, seed=seed, n_topics=n_topics,
                          include_uplift=not no_uplift)
    bundle.save(out_dir)
    click.echo(f"bundle {bundle.version} -> {out_dir}")


@main.command()
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_dir", type=click.Path(exists=True), default=None,
              help="bundle directory for model-backed sections")
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(corpus_path, models_dir, out_dir):
    """Full evaluation report plus per-figure CSV files."""
    corpus = load_corpus(corpus_path)
    labels = np.asarray(label_top_decile(corpus))
    aggregates = None
    auc_table = None
    gains_curve = None
    if models_dir:
        bundle = ScoreBundle.load(models_dir)
        fvs, posteriors = _featurize(corpus, bundle.topic_model, bundle.pop_model.group)
        aggregates = topic_aggregates(bundle.topic_model, corpus, posteriors=posteriors)
        mask = split_by_id([q.id for q in corpus.questions], 0.3, 0)
        scores = score_batch(bundle.pop_model, [fv for fv, m in zip(fvs, mask) if m])
        auc, _ = roc_auc(scores, labels[mask])
        auc_table = {bundle.pop_model.group: auc}
        if bundle.uplift_forest is not None:
            data = build_uplift_dataset(corpus, bundle.topic_model, labels=labels,
                                        posteriors=posteriors)
            u_scores = uplift_scores(bundle.uplift_forest, data)
            gains_curve = incremental_gains(u_scores, data.treatment, data.outcome)

    table = first_word_table(corpus, labels=labels)
    profiles = length_profiles(corpus)
    doc = evaluation_report(
        corpus, topic_aggregates=aggregates, auc_table=auc_table,
        gains_curve=gains_curve, first_word=table, profiles=profiles,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc.save(out / "report.json")
    (out / "report.txt").write_text(doc.render_text(), encoding="utf-8")

    weeks = np.array([q.week for q in corpus.questions])
    with open(out / "week_profile.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["week", "questions", "top_decile_fraction"])
        for w in range(1, int(weeks.max()) + 1):
            mask = weeks == w
            writer.writerow([w, int(mask.sum()), float(labels[mask].mean()) if mask.any() else ""])
    with open(out / "first_words.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["word", "share_pct", "mean_views", "top_decile_pct", "answer_rate_pct"])
        for r in table.rows:
            writer.writerow([r.word, r.share, r.mean_views, r.top_decile_pct, r.answer_rate_pct])
    with open(out / "length_profiles.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket_low", "bucket_high", "has_details", "questions", "total_views", "mean_views"])
        for b in profiles.buckets:
            writer.writerow([b.bucket_low, b.bucket_high, b.has_details,
                             b.question_count, b.total_views, b.mean_views])
    if aggregates is not None:
        with open(out / "topic_scatter.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["topic", "questions", "mean_views", "up_vote_fraction", "mean_content_type"])
            for r in aggregates.rows:
                writer.writerow([r.topic, r.question_count, r.mean_views,
                                 r.up_vote_fraction, r.mean_content_type])
    if gains_curve is not None:
        with open(out / "gains_curve.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "gains", "diagonal"])
            for row in gains_curve.to_rows():
                writer.writerow([row["phi"], row["gains"], row["diagonal"]])
    click.echo(f"wrote report + figure CSVs -> {out}")


def _bundle_from(bundle_dir: str | None) -> ScoreBundle:
    path = bundle_dir or os.environ.get(BUNDLE_ENV)
    if not path:
        raise click.ClickException(f"no bundle directory given (flag --bundle or ${BUNDLE_ENV})")
    return ScoreBundle.load(path)


@main.command()
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True), default=None)
@click.option("--summary", required=True, type=str)
@click.option("--details", type=str, default=None)
@click.option("--week", type=int, default=1, show_default=True)
@click.option("--platform", type=str, default="online", show_default=True)
@click.option("--product-version", type=str, default="deluxe", show_default=True)
@click.option("--suggestions/--no-suggestions", default=True, show_default=True)
def score(bundle_dir, summary, details, week, platform, product_version, suggestions):
    """One-shot scoring (and suggestions) for a question."""
    from .interventions import suggest as make_suggestions

    bundle = _bundle_from(bundle_dir)
    question = Question(
        id="cli", summary=summary, details=details, week=week,
        platform=platform, product_version=product_version,
        answered=False, views=0,
    )
    result = bundle.score_question(question)
    click.echo(f"probability: {result.probability:.4f} (percentile {result.percentile:.1f})")
    click.echo(f"topic {result.topic}: {', '.join(result.topic_keywords)}")
    click.echo(f"coherency: {result.coherency:.3f}  top-decile: {result.top_decile}")
    if suggestions:
        for s in make_suggestions(question, bundle, max_n=3):
            click.echo(f"  +{s.delta:.4f} [{s.kind}] {s.description}: {s.summary!r}")


@main.command()
@click.option("--bundle", "bundle_dir", type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", type=str, default="127.0.0.1", show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="static editor assets to serve at /")
def serve(bundle_dir, port, host, ui_dir):
    """Run the scoring service."""
    import uvicorn

    from .service import create_app

    bundle = _bundle_from(bundle_dir)
    app = create_app(bundle, ui_dir=ui_dir)
    click.echo(f"serving bundle {bundle.version} on {host}:{port}")
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
