import math

import numpy as np
import pytest

from qpop.boruta import BorutaParams, run_boruta, shadow_codes
from qpop.ensemble import Dataset, FeatureSpec


def planted_dataset(seed, n=5000, weights=(0.50, 0.55, 0.60, 0.65, 0.70)):
    rng = np.random.default_rng(seed)
    relevant = {f"rel{i}": rng.normal(size=n) for i in range(len(weights))}
    noise = {f"noise{i}": rng.normal(size=n) for i in range(5)}
    logit = sum(w * v for w, v in zip(weights, relevant.values()))
    y = (logit + rng.normal(scale=1.0, size=n) > 0).astype(int)
    cols = {**relevant, **noise}
    return Dataset.from_columns([FeatureSpec(k, "numeric") for k in cols], cols, y)


class TestRunBoruta:
    def test_planted_relevance_quick(self):
        # three-seed spot check; the full 20-seed version is an acceptance test
        for seed in (0, 1, 2):
            report = run_boruta(planted_dataset(seed), BorutaParams(seed=seed + 50))
            confirmed = set(report.confirmed())
            rejected = set(report.rejected())
            assert all(f"rel{i}" in confirmed for i in range(5))
            assert sum(f"noise{i}" in rejected for i in range(5)) >= 4

    def test_constant_feature_rejected(self):
        rng = np.random.default_rng(3)
        n = 2000
        x = rng.normal(size=n)
        y = (x + 0.5 * rng.normal(size=n) > 0).astype(int)
        ds = Dataset.from_columns(
            [FeatureSpec("signal", "numeric"), FeatureSpec("flat", "numeric")],
            {"signal": x, "flat": np.zeros(n)}, y,
        )
        report = run_boruta(ds, BorutaParams(seed=4))
        assert report.by_name()["flat"].status == "rejected"
        assert report.by_name()["signal"].status == "confirmed"

    def test_target_leak_confirmed_fast(self):
        rng = np.random.default_rng(5)
        n = 3000
        y = rng.integers(0, 2, n)
        ds = Dataset.from_columns(
            [FeatureSpec("leak", "boolean"), FeatureSpec("noise", "numeric")],
            {"leak": y.astype(bool), "noise": rng.normal(size=n)}, y.astype(int),
        )
        params = BorutaParams(seed=6)
        report = run_boruta(ds, params)
        leak = report.by_name()["leak"]
        assert leak.status == "confirmed"
        alpha = params.significance / 2  # Bonferroni over 2 features
        bound = math.ceil(math.log2(1.0 / alpha)) + 3
        assert leak.decided_iteration is not None and leak.decided_iteration <= bound

    def test_statuses_invariant_to_column_order(self):
        ds = planted_dataset(7, n=3000, weights=(0.6, 0.7))
        rep_a = run_boruta(ds, BorutaParams(seed=8))
        reordered = Dataset(
            schema=list(reversed(ds.schema)),
            codes=ds.codes[:, ::-1].copy(),
            y=ds.y,
            encoders=list(reversed(ds.encoders)),
        )
        rep_b = run_boruta(reordered, BorutaParams(seed=8))
        for name, feat in rep_a.by_name().items():
            assert rep_b.by_name()[name].status == feat.status

    def test_mean_z_finite(self):
        report = run_boruta(planted_dataset(9, n=2500), BorutaParams(seed=10))
        for f in report.features:
            assert math.isfinite(f.mean_z)

    def test_needs_two_features(self):
        rng = np.random.default_rng(0)
        ds = Dataset.from_columns(
            [FeatureSpec("only", "numeric")], {"only": rng.normal(size=500)},
            rng.integers(0, 2, 500),
        )
        with pytest.raises(ValueError, match="2 features"):
            run_boruta(ds)

    def test_single_class_target_rejected(self):
        rng = np.random.default_rng(0)
        ds = Dataset.from_columns(
            [FeatureSpec("a", "numeric"), FeatureSpec("b", "numeric")],
            {"a": rng.normal(size=500), "b": rng.normal(size=500)},
            np.ones(500, dtype=int),
        )
        with pytest.raises(ValueError, match="two-class"):
            run_boruta(ds)


class TestShadows:
    def test_shadow_columns_are_permutations(self):
        rng = np.random.default_rng(11)
        codes = rng.integers(0, 8, size=(200, 4)).astype(np.int16)
        shadows = shadow_codes(codes, rng)
        for j in range(4):
            assert sorted(shadows[:, j]) == sorted(codes[:, j])
        # and at least one column actually moved
        assert any(not np.array_equal(shadows[:, j], codes[:, j]) for j in range(4))
