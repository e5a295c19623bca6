import json

import pytest
from click.testing import CliRunner

from qpop.cli import main


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, runner):
    """End-to-end CLI pipeline artifacts shared by the tests below."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    result = runner.invoke(main, ["generate", "--n", "2500", "--seed", "11", "--out", str(corpus)])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, [
        "train-topics", "--corpus", str(corpus), "--topics", "6", "--seed", "2",
        "--iterations", "25", "--burn-in", "10", "--out", str(root / "topics.json"),
    ])
    assert result.exit_code == 0, result.output
    return root


class TestGenerate:
    def test_writes_corpus_and_truth(self, workdir):
        assert (workdir / "corpus.jsonl").exists()
        assert (workdir / "corpus.jsonl.truth").exists()

    def test_config_file_roundtrip(self, runner, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"n_questions": 40, "seed": 9}))
        out = tmp_path / "tiny.jsonl"
        result = runner.invoke(main, ["generate", "--config", str(cfg), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert sum(1 for _ in out.open()) == 40

    def test_unknown_config_field_fails(self, runner, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"n_questions": 10, "bogus": 1}))
        result = runner.invoke(main, ["generate", "--config", str(cfg), "--out", str(tmp_path / "x.jsonl")])
        assert result.exit_code != 0
        assert "bogus" in result.output


class TestTrainAndEvaluate:
    def test_train_pop_and_evaluate(self, runner, workdir):
        model = workdir / "pop.json"
        result = runner.invoke(main, [
            "train-pop", "--corpus", str(workdir / "corpus.jsonl"),
            "--topic-model", str(workdir / "topics.json"),
            "--groups", "I+II", "--seed", "1", "--out", str(model),
        ])
        assert result.exit_code == 0, result.output
        roc = workdir / "roc.csv"
        result = runner.invoke(main, [
            "evaluate", "--model", str(model), "--corpus", str(workdir / "corpus.jsonl"),
            "--topic-model", str(workdir / "topics.json"), "--roc-out", str(roc),
        ])
        assert result.exit_code == 0, result.output
        assert "AUC" in result.output
        assert roc.read_text().startswith("fpr,tpr")

    def test_train_uplift_and_gains(self, runner, workdir):
        forest = workdir / "uplift.json"
        result = runner.invoke(main, [
            "train-uplift", "--corpus", str(workdir / "corpus.jsonl"),
            "--topic-model", str(workdir / "topics.json"),
            "--seed", "4", "--out", str(forest),
        ])
        assert result.exit_code == 0, result.output
        assert "persuadable" in result.output
        gains_csv = workdir / "gains.csv"
        hist_csv = workdir / "hist.csv"
        result = runner.invoke(main, [
            "gains", "--model", str(forest), "--corpus", str(workdir / "corpus.jsonl"),
            "--topic-model", str(workdir / "topics.json"),
            "--out", str(gains_csv), "--histogram-out", str(hist_csv),
        ])
        assert result.exit_code == 0, result.output
        assert gains_csv.read_text().startswith("phi,gains,diagonal")
        assert hist_csv.read_text().startswith("bin_center,count")


class TestBoruta:
    def test_boruta_table(self, runner, workdir):
        report = workdir / "boruta.json"
        result = runner.invoke(main, [
            "boruta", "--corpus", str(workdir / "corpus.jsonl"),
            "--topic-model", str(workdir / "topics.json"),
            "--features", "group1,group2", "--seed", "6", "--out", str(report),
        ])
        assert result.exit_code == 0, result.output
        assert "Attribute" in result.output and "Mean Z" in result.output
        rows = json.loads(report.read_text())
        names = {r["attribute"] for r in rows}
        assert "week" in names and "log_question_len" in names
        assert all(r["group"] in ("I", "II") for r in rows)


class TestBundleAndScore:
    def test_build_bundle_then_score(self, runner, workdir):
        bundle_dir = workdir / "bundle"
        result = runner.invoke(main, [
            "build-bundle", "--corpus", str(workdir / "corpus.jsonl"),
            "--out-dir", str(bundle_dir), "--topics", "6", "--seed", "1",
        ])
        assert result.exit_code == 0, result.output
        result = runner.invoke(main, [
            "score", "--bundle", str(bundle_dir),
            "--summary", "why is my refund still processing. i filed six weeks ago through turbotax",
        ])
        assert result.exit_code == 0, result.output
        assert "probability:" in result.output

    def test_env_var_bundle(self, runner, workdir, monkeypatch):
        monkeypatch.setenv("QPOP_BUNDLE", str(workdir / "bundle"))
        result = runner.invoke(main, ["score", "--summary", "Where is my refund?", "--no-suggestions"])
        assert result.exit_code == 0, result.output

    def test_missing_bundle_message(self, runner, monkeypatch):
        monkeypatch.delenv("QPOP_BUNDLE", raising=False)
        result = runner.invoke(main, ["score", "--summary", "hello"])
        assert result.exit_code != 0
        assert "QPOP_BUNDLE" in result.output


class TestReport:
    def test_report_outputs(self, runner, workdir):
        out_dir = workdir / "report"
        result = runner.invoke(main, [
            "report", "--corpus", str(workdir / "corpus.jsonl"),
            "--models", str(workdir / "bundle"), "--out", str(out_dir),
        ])
        assert result.exit_code == 0, result.output
        for name in ("report.json", "report.txt", "week_profile.csv",
                     "first_words.csv", "length_profiles.csv", "topic_scatter.csv",
                     "gains_curve.csv"):
            assert (out_dir / name).exists(), name
        doc = json.loads((out_dir / "report.json").read_text())
        assert set(doc["sections"]) >= {
            "corpus_stats", "topic_aggregates", "first_word_table", "length_profiles",
            "auc_table", "boruta", "gains_curve", "correlations",
        }
