import warnings

import numpy as np
import pytest

from qpop.ensemble import (
    Dataset,
    FeatureSpec,
    Forest,
    ForestParams,
    fit_forest,
    permutation_importance,
    predict,
    predict_matrix,
    splitmix64,
)


@pytest.fixture(scope="module")
def xor_dataset():
    rng = np.random.default_rng(0)
    n = 200
    a = rng.integers(0, 2, n)
    b = rng.integers(0, 2, n)
    return Dataset.from_columns(
        [FeatureSpec("a", "boolean"), FeatureSpec("b", "boolean")],
        {"a": a.astype(bool), "b": b.astype(bool)},
        (a ^ b).astype(int),
    )


@pytest.fixture(scope="module")
def planted_uplift():
    """Two-segment treatment effect: +0.10 on seg=1, -0.05 on seg=0."""
    rng = np.random.default_rng(1)
    n = 10_000
    seg = rng.integers(0, 2, n)
    treat = rng.integers(0, 2, n)
    uplift = np.where(seg == 1, 0.10, -0.05)
    y = (rng.random(n) < 0.30 + uplift * treat).astype(int)
    ds = Dataset.from_columns(
        [FeatureSpec("seg", "boolean"), FeatureSpec("x1", "numeric"),
         FeatureSpec("x2", "categorical")],
        {"seg": seg.astype(bool), "x1": rng.normal(size=n),
         "x2": [f"l{v}" for v in rng.integers(0, 5, n)]},
        y, treatment=treat,
    )
    return ds, seg


class TestFitClassify:
    def test_xor_truth_table(self, xor_dataset):
        # oracle: XOR is exactly learnable with depth >= 2
        forest = fit_forest(xor_dataset, ForestParams(n_trees=30, max_depth=4, min_leaf=5, mtry=2, seed=1))
        pred = predict_matrix(forest, xor_dataset.codes).argmax(axis=1)
        assert (pred == xor_dataset.y).mean() >= 0.95

    def test_constant_target_single_leaf(self):
        rng = np.random.default_rng(2)
        ds = Dataset.from_columns(
            [FeatureSpec("a", "numeric")], {"a": rng.normal(size=120)},
            np.ones(120, dtype=int),
        )
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            forest = fit_forest(ds, ForestParams(n_trees=4, min_leaf=5, seed=0))
        assert any("single-class" in str(w.message) for w in caught)
        pred = predict_matrix(forest, ds.codes)
        assert np.allclose(pred[:, 1], 1.0)

    def test_distributions_sum_to_one(self, xor_dataset):
        forest = fit_forest(xor_dataset, ForestParams(n_trees=10, min_leaf=5, seed=3))
        pred = predict_matrix(forest, xor_dataset.codes)
        assert np.allclose(pred.sum(axis=1), 1.0)

    def test_determinism(self, xor_dataset):
        p = ForestParams(n_trees=8, min_leaf=5, seed=11)
        f1, f2 = fit_forest(xor_dataset, p), fit_forest(xor_dataset, p)
        for t1, t2 in zip(f1.trees, f2.trees):
            assert np.array_equal(t1.feature, t2.feature)
            assert np.array_equal(t1.threshold, t2.threshold)
            assert np.array_equal(t1.payload, t2.payload)

    def test_bootstrap_row_count_and_oob_disjoint(self, xor_dataset):
        forest = fit_forest(xor_dataset, ForestParams(n_trees=5, min_leaf=5, seed=4))
        n = xor_dataset.n_rows
        for tree in forest.trees:
            rng = np.random.default_rng(tree.seed)
            rows = np.sort(rng.integers(0, n, size=n))
            assert len(rows) == n  # bootstrap preserves row count
            assert not set(tree.oob_rows) & set(rows.tolist())

    def test_too_few_rows(self, xor_dataset):
        small = Dataset.from_columns(
            [FeatureSpec("a", "boolean")], {"a": [True, False] * 3}, [0, 1] * 3
        )
        with pytest.raises(ValueError, match="min_leaf"):
            fit_forest(small, ForestParams(min_leaf=50))


class TestFitUplift:
    def test_segment_means_recovered(self, planted_uplift):
        ds, seg = planted_uplift
        forest = fit_forest(ds, ForestParams(n_trees=60, max_depth=6, min_leaf=50, mode="uplift", seed=2))
        scores = predict_matrix(forest, ds.codes)
        # oracle: empirical arm-rate difference per planted segment
        assert scores[seg == 1].mean() == pytest.approx(0.10, abs=0.03)
        assert scores[seg == 0].mean() == pytest.approx(-0.05, abs=0.03)

    def test_first_split_recovers_segment(self, planted_uplift):
        ds, _ = planted_uplift
        hits = 0
        for s in range(20):
            f = fit_forest(ds, ForestParams(n_trees=1, max_depth=4, min_leaf=50, mtry=3, mode="uplift", seed=s))
            hits += f.trees[0].feature[0] == 0
        assert hits >= 18

    def test_missing_arm_rejected(self, planted_uplift):
        ds, _ = planted_uplift
        broken = Dataset(
            schema=ds.schema, codes=ds.codes, y=ds.y, encoders=ds.encoders,
            treatment=np.ones(ds.n_rows, dtype=np.int8),
        )
        with pytest.raises(ValueError, match="both treatment arms"):
            fit_forest(broken, ForestParams(mode="uplift"))

    def test_treatment_required(self, xor_dataset):
        with pytest.raises(ValueError, match="treatment"):
            fit_forest(xor_dataset, ForestParams(mode="uplift", min_leaf=5))


class TestPredict:
    def test_single_leaf_payload_unchanged(self):
        ds = Dataset.from_columns(
            [FeatureSpec("a", "boolean")], {"a": [True] * 60 + [False] * 60},
            [1] * 90 + [0] * 30,
        )
        forest = fit_forest(ds, ForestParams(n_trees=1, max_depth=0, min_leaf=5, seed=0, bootstrap=False))
        out = predict(forest, {"a": True})
        assert out.tolist() == [30 / 120, 90 / 120]

    def test_duplicate_rows_identical(self, planted_uplift):
        ds, _ = planted_uplift
        forest = fit_forest(ds, ForestParams(n_trees=10, min_leaf=50, mode="uplift", seed=5))
        row = {"seg": True, "x1": 0.3, "x2": "l1"}
        assert predict(forest, row) == predict(forest, row)

    def test_schema_mismatch_names_field(self, xor_dataset):
        forest = fit_forest(xor_dataset, ForestParams(n_trees=2, min_leaf=5, seed=0))
        with pytest.raises(ValueError, match="'b'"):
            predict(forest, {"a": True})

    def test_unseen_categorical_level(self, planted_uplift):
        ds, _ = planted_uplift
        forest = fit_forest(ds, ForestParams(n_trees=5, min_leaf=50, mode="uplift", seed=5))
        value = predict(forest, {"seg": True, "x1": 0.0, "x2": "never-seen-level"})
        assert np.isfinite(value)


class TestImportance:
    def test_perfect_predictor_ranks_first(self):
        rng = np.random.default_rng(3)
        n = 2000
        leak = rng.integers(0, 2, n)
        ds = Dataset.from_columns(
            [FeatureSpec("leak", "boolean"), FeatureSpec("noise", "numeric")],
            {"leak": leak.astype(bool), "noise": rng.normal(size=n)}, leak,
        )
        forest = fit_forest(ds, ForestParams(n_trees=20, min_leaf=20, seed=3))
        report = permutation_importance(forest, ds, repetitions=5, seed=4)
        assert report.ranked()[0].name == "leak"

    def test_pure_noise_z_below_threshold(self):
        # 20-seed simulation: a noise feature must stay under the z=2 bar
        rng = np.random.default_rng(5)
        n = 1500
        x = rng.normal(size=n)
        y = (x + 0.5 * rng.normal(size=n) > 0).astype(int)
        noise = rng.normal(size=n)
        ds = Dataset.from_columns(
            [FeatureSpec("signal", "numeric"), FeatureSpec("noise", "numeric")],
            {"signal": x, "noise": noise}, y,
        )
        ok = 0
        for seed in range(20):
            forest = fit_forest(ds, ForestParams(n_trees=15, max_depth=5, min_leaf=60, seed=seed))
            report = permutation_importance(forest, ds, repetitions=8, seed=seed)
            z = report.by_name()["noise"].z_score
            ok += z is None or abs(z) < 2.0
        assert ok >= 19

    def test_never_split_feature_exact_invariance(self, xor_dataset):
        forest = fit_forest(xor_dataset, ForestParams(n_trees=10, min_leaf=5, mtry=2, seed=7))
        # add a constant extra column the forest has never seen a split on
        rng = np.random.default_rng(0)
        base = predict_matrix(forest, xor_dataset.codes)
        shuffled = xor_dataset.codes.copy()
        never_split = [
            j for j in range(len(xor_dataset.schema))
            if all((t.feature != j).all() for t in forest.trees)
        ]
        for j in never_split:
            shuffled[:, j] = shuffled[rng.permutation(len(shuffled)), j]
            assert np.array_equal(predict_matrix(forest, shuffled), base)

    def test_repetitions_floor(self, xor_dataset):
        forest = fit_forest(xor_dataset, ForestParams(n_trees=2, min_leaf=5, seed=0))
        with pytest.raises(ValueError):
            permutation_importance(forest, xor_dataset, repetitions=1)


class TestSerialization:
    def test_round_trip(self, planted_uplift, tmp_path):
        ds, _ = planted_uplift
        forest = fit_forest(ds, ForestParams(n_trees=5, min_leaf=50, mode="uplift", seed=6))
        path = tmp_path / "forest.json"
        forest.save(path)
        loaded = Forest.load(path)
        assert np.array_equal(predict_matrix(loaded, ds.codes), predict_matrix(forest, ds.codes))

    def test_splitmix_spread(self):
        seeds = {splitmix64(42, i) for i in range(1000)}
        assert len(seeds) == 1000
