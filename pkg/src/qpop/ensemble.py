"""Decision-tree / random-forest engine with classification and uplift
splitting, plus permutation importance with Z-scores.

Features are pre-binned to small integer codes: numerics by quantile bins
(ordered, threshold splits), categoricals by level (one-vs-rest splits on
a single level), booleans as 0/1. Uplift splits maximize the squared
difference of treated-vs-control response rates between children and are
accepted only when a two-proportion z statistic clears the configured
significance, with a minimum number of treated and control rows per child.

Per-tree seeds derive from the master seed by a splitmix64 expansion, so
trees could be fit concurrently and still reproduce the sequential result.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from scipy.stats import norm

FOREST_FORMAT = "qpop.forest"
FOREST_VERSION = 1

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BOOLEAN = "boolean"


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str  # numeric | categorical | boolean

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL, BOOLEAN):
            raise ValueError(f"unknown feature kind {self.kind!r} for {self.name!r}")


@dataclass
class FeatureEncoder:
    """Binning/level map taking raw values to small integer codes."""

    spec: FeatureSpec
    bin_edges: Optional[np.ndarray] = None   # numeric: ascending interior cut points
    levels: Optional[list[str]] = None       # categorical: level order

    def n_codes(self) -> int:
        if self.spec.kind == NUMERIC:
            return len(self.bin_edges) + 1
        if self.spec.kind == BOOLEAN:
            return 2
        return len(self.levels) + 1  # last code: unseen level

    def encode(self, values) -> np.ndarray:
        if self.spec.kind == NUMERIC:
            arr = np.asarray(values, dtype=np.float64)
            if np.isnan(arr).any():
                raise ValueError(f"feature {self.spec.name!r} contains NaN")
            return np.searchsorted(self.bin_edges, arr, side="right").astype(np.int16)
        if self.spec.kind == BOOLEAN:
            return np.asarray([1 if v else 0 for v in values], dtype=np.int16)
        lookup = {lv: i for i, lv in enumerate(self.levels)}
        unseen = len(self.levels)
        return np.asarray(
            [lookup.get("NONE" if v is None else str(v), unseen) for v in values],
            dtype=np.int16,
        )


@dataclass
class Dataset:
    """Encoded feature matrix with a binary target and optional treatment."""

    schema: list[FeatureSpec]
    codes: np.ndarray                      # (n, p) int16
    y: np.ndarray                          # (n,) int8 in {0,1}
    encoders: list[FeatureEncoder]
    treatment: Optional[np.ndarray] = None  # (n,) int8 in {0,1}

    def __post_init__(self):
        if self.codes.shape[1] != len(self.schema):
            raise ValueError("codes width does not match schema")
        if len(self.y) != self.codes.shape[0]:
            raise ValueError("target length does not match rows")
        if self.treatment is not None and len(self.treatment) != len(self.y):
            raise ValueError("treatment length does not match rows")

    @property
    def n_rows(self) -> int:
        return self.codes.shape[0]

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.schema]

    @classmethod
    def from_columns(
        cls,
        schema: Sequence[FeatureSpec],
        columns: dict[str, Sequence],
        target: Sequence,
        treatment: Optional[Sequence] = None,
        max_bins: int = 32,
    ) -> "Dataset":
        schema = list(schema)
        encoders = []
        encoded = []
        for spec in schema:
            if spec.name not in columns:
                raise ValueError(f"missing column {spec.name!r}")
            values = columns[spec.name]
            if spec.kind == NUMERIC:
                arr = np.asarray(values, dtype=np.float64)
                qs = np.linspace(0, 1, max_bins + 1)[1:-1]
                edges = np.unique(np.quantile(arr, qs))
                enc = FeatureEncoder(spec, bin_edges=edges)
            elif spec.kind == BOOLEAN:
                enc = FeatureEncoder(spec)
            else:
                levels = sorted({("NONE" if v is None else str(v)) for v in values})
                enc = FeatureEncoder(spec, levels=levels)
            encoders.append(enc)
            encoded.append(enc.encode(values))
        codes = np.column_stack(encoded).astype(np.int16)
        y = np.asarray(target, dtype=np.int8)
        if set(np.unique(y)) - {0, 1}:
            raise ValueError("target must be binary 0/1")
        t = None
        if treatment is not None:
            t = np.asarray(treatment, dtype=np.int8)
            if set(np.unique(t)) - {0, 1}:
                raise ValueError("treatment must be binary 0/1")
        return cls(schema=schema, codes=codes, y=y, encoders=encoders, treatment=t)

    def encode_rows(self, rows: Sequence[dict]) -> np.ndarray:
        cols = {}
        for spec in self.schema:
            vals = []
            for row in rows:
                if spec.name not in row:
                    raise ValueError(f"row is missing feature {spec.name!r}")
                vals.append(row[spec.name])
            cols[spec.name] = vals
        return np.column_stack(
            [enc.encode(cols[spec.name]) for spec, enc in zip(self.schema, self.encoders)]
        ).astype(np.int16)


@dataclass
class ForestParams:
    n_trees: int = 100
    max_depth: int = 14
    min_leaf: int = 50
    mtry: Optional[int] = None           # default ceil(sqrt(p))
    mode: str = "classify"               # classify | uplift
    seed: int = 0
    uplift_significance: float = 0.05    # two-sided gate for uplift splits
    min_arm: int = 20                    # min treated and control per child
    bootstrap: bool = True


# Flat node arrays: feature == -1 marks a leaf. For ordered features the
# split is code <= threshold -> left; for categoricals code == threshold
# (a single level) -> left.
@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    is_equal_split: np.ndarray
    left: np.ndarray
    right: np.ndarray
    payload: np.ndarray  # classify: (n_nodes, 2) class counts; uplift: (n_nodes, 4) n_t, r_t, n_c, r_c
    seed: int
    oob_rows: np.ndarray


@dataclass
class Forest:
    params: ForestParams
    schema: list[FeatureSpec]
    encoders: list[FeatureEncoder]
    trees: list[Tree] = field(default_factory=list)

    @property
    def mode(self) -> str:
        return self.params.mode

    def feature_index(self, name: str) -> int:
        for i, s in enumerate(self.schema):
            if s.name == name:
                return i
        raise ValueError(f"unknown feature {name!r}")

    def split_feature_counts(self) -> dict[str, int]:
        counts = {s.name: 0 for s in self.schema}
        for tree in self.trees:
            for f in tree.feature:
                if f >= 0:
                    counts[self.schema[f].name] += 1
        return counts

    def to_json(self) -> dict:
        return {
            "format": FOREST_FORMAT,
            "version": FOREST_VERSION,
            "mode": self.params.mode,
            "params": {
                "n_trees": self.params.n_trees,
                "max_depth": self.params.max_depth,
                "min_leaf": self.params.min_leaf,
                "mtry": self.params.mtry,
                "seed": self.params.seed,
                "uplift_significance": self.params.uplift_significance,
                "min_arm": self.params.min_arm,
                "bootstrap": self.params.bootstrap,
            },
            "schema": [{"name": s.name, "kind": s.kind} for s in self.schema],
            "encoders": [
                {
                    "bin_edges": None if e.bin_edges is None else e.bin_edges.tolist(),
                    "levels": e.levels,
                }
                for e in self.encoders
            ],
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "is_equal_split": t.is_equal_split.astype(int).tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "payload": t.payload.tolist(),
                    "seed": t.seed,
                }
                for t in self.trees
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "Forest":
        if doc.get("format") != FOREST_FORMAT:
            raise ValueError(f"not a forest document: {doc.get('format')!r}")
        if doc.get("version") != FOREST_VERSION:
            raise ValueError(f"unsupported forest version {doc.get('version')!r}")
        schema = [FeatureSpec(s["name"], s["kind"]) for s in doc["schema"]]
        encoders = []
        for spec, e in zip(schema, doc["encoders"]):
            encoders.append(
                FeatureEncoder(
                    spec,
                    bin_edges=None if e["bin_edges"] is None else np.asarray(e["bin_edges"]),
                    levels=e["levels"],
                )
            )
        params = ForestParams(mode=doc["mode"], **doc["params"])
        forest = cls(params=params, schema=schema, encoders=encoders)
        for t in doc["trees"]:
            forest.trees.append(
                Tree(
                    feature=np.asarray(t["feature"], dtype=np.int32),
                    threshold=np.asarray(t["threshold"], dtype=np.int32),
                    is_equal_split=np.asarray(t["is_equal_split"], dtype=bool),
                    left=np.asarray(t["left"], dtype=np.int32),
                    right=np.asarray(t["right"], dtype=np.int32),
                    payload=np.asarray(t["payload"], dtype=np.float64),
                    seed=t["seed"],
                    oob_rows=np.empty(0, dtype=np.int64),
                )
            )
        return forest

    @classmethod
    def load(cls, path: str | Path) -> "Forest":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def splitmix64(seed: int, index: int) -> int:
    """Deterministic per-tree seed expansion."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return (z ^ (z >> 31)) & 0x7FFFFFFF


@njit(cache=True)
def _split_scores_classify(codes, rows, feats, y, n_codes_max, min_leaf):
    """Best split per candidate feature: (gain, threshold, is_equal)."""
    n_feats = feats.shape[0]
    gains = np.full(n_feats, -1.0)
    thresholds = np.full(n_feats, -1, dtype=np.int32)
    equal_flags = np.zeros(n_feats, dtype=np.bool_)
    n = rows.shape[0]
    total1 = 0.0
    for i in range(n):
        total1 += y[rows[i]]
    total0 = n - total1
    parent_gini = 1.0 - ((total0 / n) ** 2 + (total1 / n) ** 2)
    hist = np.zeros((n_codes_max, 2), dtype=np.float64)
    for fi in range(n_feats):
        f = feats[fi]
        hist[:, :] = 0.0
        max_code = 0
        for i in range(n):
            c = codes[rows[i], f]
            hist[c, y[rows[i]]] += 1.0
            if c > max_code:
                max_code = c
        # ordered threshold scan (also valid for booleans)
        left0 = 0.0
        left1 = 0.0
        for thr in range(max_code):
            left0 += hist[thr, 0]
            left1 += hist[thr, 1]
            nl = left0 + left1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            r0 = total0 - left0
            r1 = total1 - left1
            gini_l = 1.0 - ((left0 / nl) ** 2 + (left1 / nl) ** 2)
            gini_r = 1.0 - ((r0 / nr) ** 2 + (r1 / nr) ** 2)
            gain = parent_gini - (nl / n) * gini_l - (nr / n) * gini_r
            if gain > gains[fi] + 1e-15:
                gains[fi] = gain
                thresholds[fi] = thr
                equal_flags[fi] = False
    return gains, thresholds, equal_flags


@njit(cache=True)
def _split_scores_classify_categorical(codes, rows, feats, y, n_codes_max, min_leaf):
    """One-vs-rest single-level splits for categorical features."""
    n_feats = feats.shape[0]
    gains = np.full(n_feats, -1.0)
    thresholds = np.full(n_feats, -1, dtype=np.int32)
    n = rows.shape[0]
    total1 = 0.0
    for i in range(n):
        total1 += y[rows[i]]
    total0 = n - total1
    parent_gini = 1.0 - ((total0 / n) ** 2 + (total1 / n) ** 2)
    hist = np.zeros((n_codes_max, 2), dtype=np.float64)
    for fi in range(n_feats):
        f = feats[fi]
        hist[:, :] = 0.0
        max_code = 0
        for i in range(n):
            c = codes[rows[i], f]
            hist[c, y[rows[i]]] += 1.0
            if c > max_code:
                max_code = c
        for level in range(max_code + 1):
            l0 = hist[level, 0]
            l1 = hist[level, 1]
            nl = l0 + l1
            nr = n - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            r0 = total0 - l0
            r1 = total1 - l1
            gini_l = 1.0 - ((l0 / nl) ** 2 + (l1 / nl) ** 2)
            gini_r = 1.0 - ((r0 / nr) ** 2 + (r1 / nr) ** 2)
            gain = parent_gini - (nl / n) * gini_l - (nr / n) * gini_r
            if gain > gains[fi] + 1e-15:
                gains[fi] = gain
                thresholds[fi] = level
    return gains, thresholds


@njit(cache=True)
def _split_scores_uplift(codes, rows, feats, y, treat, n_codes_max, min_leaf,
                         min_arm, z_crit, categorical_mask):
    """Uplift splits: maximize (delta_L - delta_R)^2, gated by a two-
    proportion z statistic and per-child arm minimums."""
    n_feats = feats.shape[0]
    gains = np.full(n_feats, -1.0)
    thresholds = np.full(n_feats, -1, dtype=np.int32)
    equal_flags = np.zeros(n_feats, dtype=np.bool_)
    n = rows.shape[0]
    tot = np.zeros(4, dtype=np.float64)  # n_t, r_t, n_c, r_c
    for i in range(n):
        r = rows[i]
        if treat[r] == 1:
            tot[0] += 1.0
            tot[1] += y[r]
        else:
            tot[2] += 1.0
            tot[3] += y[r]
    hist = np.zeros((n_codes_max, 4), dtype=np.float64)
    for fi in range(n_feats):
        f = feats[fi]
        hist[:, :] = 0.0
        max_code = 0
        for i in range(n):
            r = rows[i]
            c = codes[r, f]
            if treat[r] == 1:
                hist[c, 0] += 1.0
                hist[c, 1] += y[r]
            else:
                hist[c, 2] += 1.0
                hist[c, 3] += y[r]
            if c > max_code:
                max_code = c
        is_cat = categorical_mask[f]
        n_options = max_code + 1 if is_cat else max_code
        acc = np.zeros(4, dtype=np.float64)
        for opt in range(n_options):
            if is_cat:
                lnt, lrt, lnc, lrc = hist[opt, 0], hist[opt, 1], hist[opt, 2], hist[opt, 3]
            else:
                acc[0] += hist[opt, 0]
                acc[1] += hist[opt, 1]
                acc[2] += hist[opt, 2]
                acc[3] += hist[opt, 3]
                lnt, lrt, lnc, lrc = acc[0], acc[1], acc[2], acc[3]
            rnt = tot[0] - lnt
            rrt = tot[1] - lrt
            rnc = tot[2] - lnc
            rrc = tot[3] - lrc
            if lnt < min_arm or lnc < min_arm or rnt < min_arm or rnc < min_arm:
                continue
            if lnt + lnc < min_leaf or rnt + rnc < min_leaf:
                continue
            ptl = lrt / lnt
            pcl = lrc / lnc
            ptr = rrt / rnt
            pcr = rrc / rnc
            delta = (ptl - pcl) - (ptr - pcr)
            se2 = (
                ptl * (1 - ptl) / lnt
                + pcl * (1 - pcl) / lnc
                + ptr * (1 - ptr) / rnt
                + pcr * (1 - pcr) / rnc
            )
            if se2 <= 0.0:
                continue
            if abs(delta) / math.sqrt(se2) <= z_crit:
                continue
            gain = delta * delta
            if gain > gains[fi] + 1e-15:
                gains[fi] = gain
                thresholds[fi] = opt
                equal_flags[fi] = is_cat
    return gains, thresholds, equal_flags


@njit(cache=True)
def _predict_rows(feature, threshold, is_equal, left, right, payload, codes, out):
    n = codes.shape[0]
    width = payload.shape[1]
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            c = codes[i, feature[node]]
            if is_equal[node]:
                node = left[node] if c == threshold[node] else right[node]
            else:
                node = left[node] if c <= threshold[node] else right[node]
        for j in range(width):
            out[i, j] += payload[node, j]


class _TreeBuilder:
    def __init__(self, dataset: Dataset, params: ForestParams, z_crit: float):
        self.ds = dataset
        self.params = params
        self.z_crit = z_crit
        self.categorical_mask = np.array(
            [s.kind == CATEGORICAL for s in dataset.schema], dtype=np.bool_
        )
        self.n_codes_max = int(max(e.n_codes() for e in dataset.encoders)) + 1
        self.p = len(dataset.schema)
        self.mtry = params.mtry or math.ceil(math.sqrt(self.p))
        self.feature: list[int] = []
        self.threshold: list[int] = []
        self.is_equal: list[bool] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.payload: list[np.ndarray] = []

    def _leaf_payload(self, rows: np.ndarray) -> np.ndarray:
        y = self.ds.y[rows]
        if self.params.mode == "classify":
            return np.array([float((y == 0).sum()), float((y == 1).sum())])
        t = self.ds.treatment[rows]
        return np.array([
            float((t == 1).sum()), float(y[t == 1].sum()),
            float((t == 0).sum()), float(y[t == 0].sum()),
        ])

    def _add_leaf(self, rows: np.ndarray) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(-1)
        self.is_equal.append(False)
        self.left.append(-1)
        self.right.append(-1)
        self.payload.append(self._leaf_payload(rows))
        return idx

    def _best_split(self, rows: np.ndarray, rng: np.random.Generator):
        feats = np.sort(rng.choice(self.p, size=min(self.mtry, self.p), replace=False)).astype(np.int64)
        if self.params.mode == "classify":
            ordered = feats[~self.categorical_mask[feats]]
            cats = feats[self.categorical_mask[feats]]
            best = (-1.0, -1, -1, False)
            if len(ordered):
                gains, thrs, eqs = _split_scores_classify(
                    self.ds.codes, rows, ordered, self.ds.y, self.n_codes_max,
                    self.params.min_leaf)
                for fi in range(len(ordered)):
                    if gains[fi] > best[0] + 1e-15:
                        best = (gains[fi], int(ordered[fi]), int(thrs[fi]), False)
            if len(cats):
                gains, thrs = _split_scores_classify_categorical(
                    self.ds.codes, rows, cats, self.ds.y, self.n_codes_max,
                    self.params.min_leaf)
                for fi in range(len(cats)):
                    if gains[fi] > best[0] + 1e-15:
                        best = (gains[fi], int(cats[fi]), int(thrs[fi]), True)
            return best if best[0] > 1e-12 else None
        gains, thrs, eqs = _split_scores_uplift(
            self.ds.codes, rows, feats, self.ds.y, self.ds.treatment,
            self.n_codes_max, self.params.min_leaf, self.params.min_arm,
            self.z_crit, self.categorical_mask)
        best = (-1.0, -1, -1, False)
        for fi in range(len(feats)):
            if gains[fi] > best[0] + 1e-15:
                best = (gains[fi], int(feats[fi]), int(thrs[fi]), bool(eqs[fi]))
        return best if best[0] > 0.0 else None

    def build(self, rows: np.ndarray, rng: np.random.Generator, depth: int = 0) -> int:
        y = self.ds.y[rows]
        stop = (
            depth >= self.params.max_depth
            or len(rows) < 2 * self.params.min_leaf
            or (self.params.mode == "classify" and (y == y[0]).all())
        )
        split = None if stop else self._best_split(rows, rng)
        if split is None:
            return self._add_leaf(rows)
        _, feat, thr, is_eq = split
        col = self.ds.codes[rows, feat]
        mask = (col == thr) if is_eq else (col <= thr)
        if not mask.any() or mask.all():
            return self._add_leaf(rows)
        idx = len(self.feature)
        self.feature.append(feat)
        self.threshold.append(thr)
        self.is_equal.append(is_eq)
        self.left.append(-1)
        self.right.append(-1)
        self.payload.append(np.zeros_like(self._leaf_payload(rows[:1])))
        left_idx = self.build(rows[mask], rng, depth + 1)
        right_idx = self.build(rows[~mask], rng, depth + 1)
        self.left[idx] = left_idx
        self.right[idx] = right_idx
        return idx

    def finish(self, seed: int, oob: np.ndarray) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.int32),
            is_equal_split=np.asarray(self.is_equal, dtype=bool),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            payload=np.vstack(self.payload),
            seed=seed,
            oob_rows=oob,
        )


def fit_forest(dataset: Dataset, params: ForestParams) -> Forest:
    """Fit a bagged forest; deterministic for fixed params.seed."""
    if params.mode not in ("classify", "uplift"):
        raise ValueError(f"unknown mode {params.mode!r}")
    n = dataset.n_rows
    if n < 2 * params.min_leaf:
        raise ValueError(
            f"need at least {2 * params.min_leaf} rows (min_leaf={params.min_leaf}), got {n}"
        )
    if params.mode == "uplift":
        if dataset.treatment is None:
            raise ValueError("uplift mode requires a treatment column")
        n_treated = int(dataset.treatment.sum())
        if n_treated == 0 or n_treated == n:
            raise ValueError("uplift mode requires both treatment arms present")
    degenerate = params.mode == "classify" and len(np.unique(dataset.y)) == 1
    if degenerate:
        warnings.warn("single-class target: fitting a degenerate single-leaf forest")

    z_crit = float(norm.ppf(1.0 - params.uplift_significance / 2.0))
    forest = Forest(params=params, schema=dataset.schema, encoders=dataset.encoders)
    all_rows = np.arange(n, dtype=np.int64)
    for t in range(params.n_trees):
        tree_seed = splitmix64(params.seed, t)
        rng = np.random.default_rng(tree_seed)
        if params.bootstrap:
            rows = np.sort(rng.integers(0, n, size=n).astype(np.int64))
            oob = np.setdiff1d(all_rows, rows, assume_unique=False)
        else:
            rows, oob = all_rows, np.empty(0, dtype=np.int64)
        builder = _TreeBuilder(dataset, params, z_crit)
        if degenerate:
            builder._add_leaf(rows)
        else:
            builder.build(rows, rng)
        forest.trees.append(builder.finish(tree_seed, oob))
    return forest


def predict_matrix(forest: Forest, codes: np.ndarray) -> np.ndarray:
    """Forest predictions for pre-encoded rows.

    classify: (n, 2) class distribution averaged over trees (sums to 1).
    uplift: (n,) averaged treated-minus-control response rate.
    """
    n = codes.shape[0]
    if forest.mode == "classify":
        acc = np.zeros((n, 2), dtype=np.float64)
        for tree in forest.trees:
            dist = np.zeros((n, 2), dtype=np.float64)
            _predict_rows(tree.feature, tree.threshold, tree.is_equal_split,
                          tree.left, tree.right, _normalized_payload(tree), codes, dist)
            acc += dist
        return acc / len(forest.trees)
    acc = np.zeros((n, 1), dtype=np.float64)
    for tree in forest.trees:
        est = np.zeros((n, 1), dtype=np.float64)
        _predict_rows(tree.feature, tree.threshold, tree.is_equal_split,
                      tree.left, tree.right, _uplift_payload(tree), codes, est)
        acc += est
    return (acc / len(forest.trees))[:, 0]


def _normalized_payload(tree: Tree) -> np.ndarray:
    pay = tree.payload
    totals = pay.sum(axis=1, keepdims=True)
    totals[totals == 0] = 1.0
    return pay / totals


def _uplift_payload(tree: Tree) -> np.ndarray:
    n_t, r_t, n_c, r_c = tree.payload.T
    p_t = np.divide(r_t, n_t, out=np.zeros_like(r_t), where=n_t > 0)
    p_c = np.divide(r_c, n_c, out=np.zeros_like(r_c), where=n_c > 0)
    return (p_t - p_c)[:, None]


def predict(forest: Forest, row: dict):
    """Single-row prediction from raw feature values."""
    codes = _encode_with(forest, [row])
    out = predict_matrix(forest, codes)
    if forest.mode == "classify":
        return out[0]
    return float(out[0])


def _encode_with(forest: Forest, rows: Sequence[dict]) -> np.ndarray:
    cols = {}
    for spec in forest.schema:
        vals = []
        for row in rows:
            if spec.name not in row:
                raise ValueError(f"row is missing feature {spec.name!r}")
            vals.append(row[spec.name])
        cols[spec.name] = vals
    return np.column_stack(
        [enc.encode(cols[spec.name]) for spec, enc in zip(forest.schema, forest.encoders)]
    ).astype(np.int16)


# --- permutation importance -------------------------------------------------

@dataclass(frozen=True)
class FeatureImportance:
    name: str
    mean_drop: float
    z_score: Optional[float]  # None when the drop has zero variance


@dataclass
class ImportanceReport:
    features: list[FeatureImportance]
    repetitions: int
    baseline: float

    def ranked(self) -> list[FeatureImportance]:
        return sorted(self.features, key=lambda f: -f.mean_drop)

    def by_name(self) -> dict[str, FeatureImportance]:
        return {f.name: f for f in self.features}


def _quality(forest: Forest, codes: np.ndarray, y: np.ndarray,
             treatment: Optional[np.ndarray]) -> float:
    if forest.mode == "classify":
        pred = predict_matrix(forest, codes)
        return float((np.argmax(pred, axis=1) == y).mean())
    scores = predict_matrix(forest, codes)
    return _qini_area(scores, treatment, y)


def _qini_area(scores: np.ndarray, treatment: np.ndarray, outcome: np.ndarray) -> float:
    """Area between the incremental-gains curve and its diagonal, per row."""
    order = np.argsort(-scores, kind="stable")
    t = treatment[order].astype(np.float64)
    y = outcome[order].astype(np.float64)
    n_t = np.cumsum(t)
    n_c = np.cumsum(1 - t)
    r_t = np.cumsum(y * t)
    r_c = np.cumsum(y * (1 - t))
    n = len(scores)
    k = np.arange(1, n + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        gains = np.where(
            (n_t > 0) & (n_c > 0), (r_t / np.maximum(n_t, 1) - r_c / np.maximum(n_c, 1)) * k, np.nan
        )
    total = gains[-1] if np.isfinite(gains[-1]) else 0.0
    diag = total * k / n
    valid = np.isfinite(gains)
    if not valid.any():
        return 0.0
    return float(np.mean((gains - diag)[valid]) / max(n, 1))


@njit(cache=True)
def _lcg(state: np.uint64) -> np.uint64:
    return np.uint64(state * np.uint64(6364136223846793005) + np.uint64(1442695040888963407))


@njit(cache=True)
def _oob_drops_classify(feat, thr, eq, left, right, leaf_class, node_off,
                        oob_rows, oob_off, codes, y, n_features, reps, seed):
    """Per-feature, per-repetition OOB accuracy drops for a whole forest.

    Trees are flattened; child indices are local to each tree. Every
    (feature, repetition, tree) triple gets its own deterministic shuffle.
    """
    n_trees = node_off.shape[0] - 1
    base = np.zeros(n_trees, dtype=np.float64)
    for t in range(n_trees):
        o = node_off[t]
        m = oob_off[t + 1] - oob_off[t]
        correct = 0
        for i in range(oob_off[t], oob_off[t + 1]):
            row = oob_rows[i]
            node = 0
            while feat[o + node] >= 0:
                f = feat[o + node]
                c = codes[row, f]
                if eq[o + node]:
                    node = left[o + node] if c == thr[o + node] else right[o + node]
                else:
                    node = left[o + node] if c <= thr[o + node] else right[o + node]
            if leaf_class[o + node] == y[row]:
                correct += 1
        base[t] = correct / m if m > 0 else 0.0

    drops = np.zeros((n_features, reps), dtype=np.float64)
    max_m = 0
    for t in range(n_trees):
        m = oob_off[t + 1] - oob_off[t]
        if m > max_m:
            max_m = m
    vals = np.empty(max_m, dtype=np.int16)
    for j in range(n_features):
        for r in range(reps):
            acc = 0.0
            for t in range(n_trees):
                o = node_off[t]
                start = oob_off[t]
                m = oob_off[t + 1] - start
                if m == 0:
                    continue
                for i in range(m):
                    vals[i] = codes[oob_rows[start + i], j]
                state = np.uint64(seed) ^ np.uint64(j * 2654435761 + r * 40503 + t * 69069 + 1)
                for i in range(m - 1, 0, -1):
                    state = _lcg(state)
                    k = int(state % np.uint64(i + 1))
                    tmp = vals[i]
                    vals[i] = vals[k]
                    vals[k] = tmp
                correct = 0
                for i in range(m):
                    row = oob_rows[start + i]
                    node = 0
                    while feat[o + node] >= 0:
                        f = feat[o + node]
                        c = vals[i] if f == j else codes[row, f]
                        if eq[o + node]:
                            node = left[o + node] if c == thr[o + node] else right[o + node]
                        else:
                            node = left[o + node] if c <= thr[o + node] else right[o + node]
                    if leaf_class[o + node] == y[row]:
                        correct += 1
                acc += base[t] - correct / m
            drops[j, r] = acc / n_trees
    return base, drops


def _flatten_forest(forest: Forest):
    feat = np.concatenate([t.feature for t in forest.trees])
    thr = np.concatenate([t.threshold for t in forest.trees])
    eq = np.concatenate([t.is_equal_split for t in forest.trees])
    left = np.concatenate([t.left for t in forest.trees])
    right = np.concatenate([t.right for t in forest.trees])
    sizes = [len(t.feature) for t in forest.trees]
    node_off = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    return feat, thr, eq, left, right, node_off


def _tree_quality(tree: Tree, forest: Forest, codes: np.ndarray, y: np.ndarray,
                  treatment: Optional[np.ndarray]) -> float:
    out = np.zeros((codes.shape[0], 2 if forest.mode == "classify" else 1))
    payload = _normalized_payload(tree) if forest.mode == "classify" else _uplift_payload(tree)
    _predict_rows(tree.feature, tree.threshold, tree.is_equal_split,
                  tree.left, tree.right, payload, codes, out)
    if forest.mode == "classify":
        return float((np.argmax(out, axis=1) == y).mean())
    return _qini_area(out[:, 0], treatment, y)


def permutation_importance(
    forest: Forest,
    dataset: Dataset,
    repetitions: int = 10,
    seed: int = 0,
    eval_rows: Optional[int] = None,
    use_oob: bool = True,
) -> ImportanceReport:
    """Quality drop per feature when its values are shuffled.

    classify quality is accuracy; uplift quality is the incremental-gains
    area. Z = mean / stddev of the drop across repetitions (absent when
    the drop never varies). Deterministic per seed.

    With ``use_oob`` (the default) each tree is scored only on its
    out-of-bag rows, so memorized noise splits earn no importance; this
    requires ``dataset`` to be the forest's training set. Pass
    ``use_oob=False`` to score the whole forest on an independent dataset.
    """
    if repetitions < 2:
        raise ValueError("repetitions must be >= 2")
    rng = np.random.default_rng(seed)
    codes = dataset.codes
    y = dataset.y
    treatment = dataset.treatment
    oob_ok = use_oob and all(len(t.oob_rows) > 0 for t in forest.trees)

    if oob_ok:
        max_rows = eval_rows if eval_rows is not None else None
        tree_rows = []
        for tree in forest.trees:
            rows = tree.oob_rows
            if max_rows is not None and len(rows) > max_rows:
                rows = rng.choice(rows, size=max_rows, replace=False)
            tree_rows.append(np.sort(rows))

        if forest.mode == "classify":
            feat, thr, eq, left, right, node_off = _flatten_forest(forest)
            leaf_class = np.concatenate(
                [np.argmax(t.payload, axis=1).astype(np.int8) for t in forest.trees]
            )
            oob_off = np.concatenate([[0], np.cumsum([len(r) for r in tree_rows])]).astype(np.int64)
            oob_flat = np.concatenate(tree_rows).astype(np.int64)
            base, drops = _oob_drops_classify(
                feat, thr, eq, left, right, leaf_class, node_off,
                oob_flat, oob_off, codes, y,
                len(dataset.schema), repetitions, int(rng.integers(2**31 - 1)),
            )
            baseline = float(base.mean())
            features = []
            for j, spec in enumerate(dataset.schema):
                std = float(drops[j].std(ddof=1))
                z = float(drops[j].mean() / std) if std > 1e-12 else None
                features.append(FeatureImportance(spec.name, float(drops[j].mean()), z))
            return ImportanceReport(features=features, repetitions=repetitions, baseline=baseline)

        base = [
            _tree_quality(tree, forest, codes[rows], y[rows],
                          treatment[rows] if treatment is not None else None)
            for tree, rows in zip(forest.trees, tree_rows)
        ]
        baseline = float(np.mean(base))
        features = []
        for j, spec in enumerate(dataset.schema):
            drops = np.empty(repetitions)
            for rep in range(repetitions):
                per_tree = np.empty(len(forest.trees))
                for ti, (tree, rows) in enumerate(zip(forest.trees, tree_rows)):
                    sub = codes[rows].copy()
                    sub[:, j] = sub[rng.permutation(len(rows)), j]
                    per_tree[ti] = base[ti] - _tree_quality(
                        tree, forest, sub, y[rows],
                        treatment[rows] if treatment is not None else None)
                drops[rep] = per_tree.mean()
            std = float(drops.std(ddof=1))
            z = float(drops.mean() / std) if std > 1e-12 else None
            features.append(FeatureImportance(spec.name, float(drops.mean()), z))
        return ImportanceReport(features=features, repetitions=repetitions, baseline=baseline)

    if eval_rows is not None and eval_rows < dataset.n_rows:
        pick = rng.choice(dataset.n_rows, size=eval_rows, replace=False)
        codes, y = codes[pick], y[pick]
        treatment = treatment[pick] if treatment is not None else None
    baseline = _quality(forest, codes, y, treatment)
    features = []
    for j, spec in enumerate(dataset.schema):
        drops = np.empty(repetitions)
        for rep in range(repetitions):
            shuffled = codes.copy()
            shuffled[:, j] = shuffled[rng.permutation(shuffled.shape[0]), j]
            drops[rep] = baseline - _quality(forest, shuffled, y, treatment)
        std = float(drops.std(ddof=1))
        z = float(drops.mean() / std) if std > 1e-12 else None
        features.append(FeatureImportance(spec.name, float(drops.mean()), z))
    return ImportanceReport(features=features, repetitions=repetitions, baseline=baseline)
