"""The popularity classifier: quantile binning, one-hot encoding over
attribute groups, L2-regularized logistic regression, threshold
classification, and ROC/AUC evaluation.

Numeric attributes are replaced entirely by their bin one-hots (20
quantile bins by default). The decision threshold is chosen so the
predicted-positive rate on the training set equals the label prevalence.
Scores rank questions by expected views; the model itself stays on the
probability scale.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .textfeat import FeatureVector
from .calibration import FIRST_WORD_VOCABULARY

POP_MODEL_FORMAT = "qpop.popularity_model"
POP_MODEL_VERSION = 1

GROUPS = ("I", "I+II", "I+III", "I+II+III")
DEFAULT_BAG_DIM = 2**14


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, grad_norm: float, iterations: int, loss: float):
        super().__init__(f"{message} (grad_norm={grad_norm:.3e}, iterations={iterations}, loss={loss:.6f})")
        self.grad_norm = grad_norm
        self.iterations = iterations
        self.loss = loss


@dataclass
class BinningMap:
    """Quantile cut points for one numeric feature.

    ``cut_points`` are strictly increasing interior boundaries; a value v
    maps to bin = number of cut points <= v, so every real value lands in
    exactly one of n_bins = len(cut_points) + 1 bins.
    """

    cut_points: np.ndarray

    def __post_init__(self):
        self.cut_points = np.asarray(self.cut_points, dtype=np.float64)
        if len(self.cut_points) > 1 and not (np.diff(self.cut_points) > 0).all():
            raise ValueError("cut points must be strictly increasing")

    @property
    def n_bins(self) -> int:
        return len(self.cut_points) + 1

    def bin_index(self, values) -> np.ndarray:
        return np.searchsorted(self.cut_points, np.asarray(values, dtype=np.float64), side="right")


def fit_binning(values: Sequence[float], n_bins: int = 20) -> BinningMap:
    """Quantile cut points; duplicate quantiles collapse to fewer bins."""
    arr = np.asarray(list(values), dtype=np.float64)
    if len(arr) == 0:
        raise ValueError("need at least one value to fit binning")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    qs = np.linspace(0, 1, n_bins + 1)[1:-1]
    cuts = np.unique(np.quantile(arr, qs))
    # cuts at or outside the value range would leave unreachable bins
    cuts = cuts[(cuts > arr.min()) & (cuts < arr.max())]
    return BinningMap(cut_points=cuts)


@dataclass
class CategoricalEncoder:
    levels: list[str]

    def __post_init__(self):
        self._index = {lv: i for i, lv in enumerate(self.levels)}
        self._other = self._index.get("OTHER")

    @property
    def width(self) -> int:
        return len(self.levels)

    def index(self, value) -> Optional[int]:
        value = "NONE" if value is None else str(value)
        idx = self._index.get(value)
        if idx is None:
            return self._other
        return idx


@dataclass
class PopularityModel:
    group: str
    binning: dict[str, BinningMap]
    encoders: dict[str, CategoricalEncoder]
    column_names: list[str]
    weights: np.ndarray
    intercept: float
    l2: float
    l2_text: float
    threshold: float
    bag_dim: Optional[int]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.isfinite(self.weights).all() or not math.isfinite(self.intercept):
            raise ValueError("model weights must be finite")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0,1)")

    def to_json(self) -> dict:
        return {
            "format": POP_MODEL_FORMAT,
            "version": POP_MODEL_VERSION,
            "group": self.group,
            "binning": {k: v.cut_points.tolist() for k, v in self.binning.items()},
            "encoders": {k: v.levels for k, v in self.encoders.items()},
            "column_names": self.column_names,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "l2": self.l2,
            "l2_text": self.l2_text,
            "threshold": self.threshold,
            "bag_dim": self.bag_dim,
            "metadata": self.metadata,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "PopularityModel":
        if doc.get("format") != POP_MODEL_FORMAT:
            raise ValueError(f"not a popularity model document: {doc.get('format')!r}")
        if doc.get("version") != POP_MODEL_VERSION:
            raise ValueError(f"unsupported popularity model version {doc.get('version')!r}")
        return cls(
            group=doc["group"],
            binning={k: BinningMap(np.asarray(v)) for k, v in doc["binning"].items()},
            encoders={k: CategoricalEncoder(v) for k, v in doc["encoders"].items()},
            column_names=doc["column_names"],
            weights=np.asarray(doc["weights"]),
            intercept=doc["intercept"],
            l2=doc["l2"],
            l2_text=doc["l2_text"],
            threshold=doc["threshold"],
            bag_dim=doc["bag_dim"],
            metadata=doc.get("metadata", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "PopularityModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


_GROUP1_CATEGORICALS = ("week", "platform", "product_version", "topic")
_GROUP2_NUMERICS = FeatureVector.GROUP2_NUMERIC
_GROUP2_CATEGORICALS = FeatureVector.GROUP2_CATEGORICAL
_GROUP2_BOOLEANS = FeatureVector.GROUP2_BOOLEAN


def _group_parts(group: str) -> tuple[bool, bool]:
    if group not in GROUPS:
        raise ValueError(f"unknown attribute group {group!r}; expected one of {GROUPS}")
    return "II" in group.split("+"), "III" in group.split("+")


def _require(fv: FeatureVector, name: str):
    value = getattr(fv, name)
    if value is None:
        raise ValueError(f"feature vector is missing required feature {name!r}")
    return value


class _DesignBuilder:
    """Maps FeatureVectors onto the model's sparse design matrix."""

    def __init__(self, group: str, binning, encoders, bag_dim):
        self.has_g2, self.has_g3 = _group_parts(group)
        self.binning = binning
        self.encoders = encoders
        self.bag_dim = bag_dim
        self.column_names: list[str] = []
        self.offsets: dict[str, int] = {}
        for name in _GROUP1_CATEGORICALS:
            self._add_categorical(name)
        if self.has_g2:
            for name in _GROUP2_NUMERICS:
                self._add_binned(name)
            for name in _GROUP2_CATEGORICALS:
                self._add_categorical(name)
            for name in _GROUP2_BOOLEANS:
                self.offsets[name] = len(self.column_names)
                self.column_names.append(name)
        self.text_offset = len(self.column_names)
        if self.has_g3:
            self.column_names.extend(f"text_{i}" for i in range(self.bag_dim))

    def _add_categorical(self, name: str):
        enc = self.encoders[name]
        self.offsets[name] = len(self.column_names)
        self.column_names.extend(f"{name}={lv}" for lv in enc.levels)

    def _add_binned(self, name: str):
        bm = self.binning[name]
        self.offsets[name] = len(self.column_names)
        self.column_names.extend(f"{name}#bin{i}" for i in range(bm.n_bins))

    @property
    def width(self) -> int:
        return len(self.column_names)

    def encode(self, fvs: Sequence[FeatureVector]) -> sparse.csr_matrix:
        rows, cols, data = [], [], []
        for i, fv in enumerate(fvs):
            for name in _GROUP1_CATEGORICALS:
                value = _require(fv, name) if name == "topic" else getattr(fv, name)
                idx = self.encoders[name].index(value)
                if idx is not None:
                    rows.append(i)
                    cols.append(self.offsets[name] + idx)
                    data.append(1.0)
            if self.has_g2:
                for name in _GROUP2_NUMERICS:
                    b = int(self.binning[name].bin_index(getattr(fv, name)))
                    rows.append(i)
                    cols.append(self.offsets[name] + b)
                    data.append(1.0)
                for name in _GROUP2_CATEGORICALS:
                    idx = self.encoders[name].index(getattr(fv, name))
                    if idx is not None:
                        rows.append(i)
                        cols.append(self.offsets[name] + idx)
                        data.append(1.0)
                for name in _GROUP2_BOOLEANS:
                    if getattr(fv, name):
                        rows.append(i)
                        cols.append(self.offsets[name])
                        data.append(1.0)
        mat = sparse.csr_matrix(
            (data, (rows, cols)), shape=(len(fvs), self.width - (self.bag_dim if self.has_g3 else 0))
        )
        if self.has_g3:
            bags = []
            for fv in fvs:
                if fv.text_bag is None:
                    raise ValueError("feature vector is missing required feature 'text_bag'")
                bags.append(fv.text_bag)
            mat = sparse.hstack([mat, sparse.vstack(bags, format="csr")], format="csr")
        return mat.tocsr()


def build_design(
    fvs: Sequence[FeatureVector],
    group: str,
    n_bins: int = 20,
    bag_dim: int = DEFAULT_BAG_DIM,
):
    """Fit binning/encoders on the given vectors and return the design parts."""
    has_g2, has_g3 = _group_parts(group)
    binning: dict[str, BinningMap] = {}
    encoders: dict[str, CategoricalEncoder] = {}

    def levels_of(name, values, extra=("OTHER",)):
        base = sorted({("NONE" if v is None else str(v)) for v in values})
        for token in extra:
            if token not in base:
                base.append(token)
        return CategoricalEncoder(levels=base)

    encoders["week"] = levels_of("week", [fv.week for fv in fvs])
    encoders["platform"] = levels_of("platform", [fv.platform for fv in fvs])
    encoders["product_version"] = levels_of("product_version", [fv.product_version for fv in fvs])
    encoders["topic"] = levels_of("topic", [_require(fv, "topic") for fv in fvs])
    if has_g2:
        for name in _GROUP2_NUMERICS:
            binning[name] = fit_binning([getattr(fv, name) for fv in fvs], n_bins)
        for name in _GROUP2_CATEGORICALS:
            levels = sorted(set(FIRST_WORD_VOCABULARY) | {"OTHER", "NONE"})
            encoders[name] = CategoricalEncoder(levels=levels)
    builder = _DesignBuilder(group, binning, encoders, bag_dim if has_g3 else None)
    return builder, binning, encoders


def _log_loss_grad(X, y, w, b, reg):
    z = X @ w + b
    # mean logistic loss, stable via logaddexp
    margins = np.where(y > 0.5, -z, z)
    loss = float(np.logaddexp(0.0, margins).mean() + 0.5 * (reg * w * w).sum())
    p = 1.0 / (1.0 + np.exp(-z))
    diff = (p - y) / len(y)
    grad_w = X.T @ diff + reg * w
    grad_b = float(diff.sum())
    return loss, np.asarray(grad_w).ravel(), grad_b


def minimize_logistic(
    X,
    y: np.ndarray,
    reg: np.ndarray,
    tol: float = 1e-6,
    max_iter: int = 5000,
) -> tuple[np.ndarray, float, dict]:
    """Nesterov-accelerated full-batch descent with backtracking line search.

    Deterministic (zero init, no randomness). Raises ConvergenceError when
    the gradient norm has not reached ``tol`` within ``max_iter`` steps.
    """
    n_features = X.shape[1]
    w = np.zeros(n_features)
    b = 0.0
    vw, vb = w.copy(), b
    step = 1.0
    momentum = 0.0
    loss, gw, gb = _log_loss_grad(X, y, w, b, reg)
    for iteration in range(1, max_iter + 1):
        loss_v, gw_v, gb_v = _log_loss_grad(X, y, vw, vb, reg)
        grad_norm = math.sqrt(float(gw_v @ gw_v) + gb_v * gb_v)
        if grad_norm <= tol:
            return vw, vb, {"iterations": iteration, "grad_norm": grad_norm, "loss": loss_v, "converged": True}
        # backtracking Armijo on the look-ahead point
        g2 = grad_norm * grad_norm
        while True:
            cand_w = vw - step * gw_v
            cand_b = vb - step * gb_v
            cand_loss, _, _ = _log_loss_grad(X, y, cand_w, cand_b, reg)
            if cand_loss <= loss_v - 0.5 * step * g2 or step < 1e-14:
                break
            step *= 0.5
        new_momentum = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        gamma = (momentum - 1.0) / new_momentum
        next_w = cand_w + gamma * (cand_w - w)
        next_b = cand_b + gamma * (cand_b - b)
        w, b = cand_w, cand_b
        if cand_loss > loss:  # restart momentum when progress stalls
            vw, vb = w, b
            momentum = 0.0
        else:
            vw, vb = next_w, next_b
            momentum = new_momentum
        loss = cand_loss
        step *= 1.3
    _, gw, gb = _log_loss_grad(X, y, w, b, reg)
    grad_norm = math.sqrt(float(gw @ gw) + gb * gb)
    if grad_norm <= tol:
        return w, b, {"iterations": max_iter, "grad_norm": grad_norm, "loss": loss, "converged": True}
    raise ConvergenceError("logistic fit did not converge", grad_norm, max_iter, loss)


def fit_logistic(
    fvs: Sequence[FeatureVector],
    labels: Sequence[int],
    group: str = "I+II",
    l2: float = 1e-3,
    l2_text: float = 0.002,
    n_bins: int = 20,
    bag_dim: int = DEFAULT_BAG_DIM,
    tol: float = 1e-6,
    max_iter: int = 5000,
    seed: int = 0,
    metadata: Optional[dict] = None,
) -> PopularityModel:
    """Fit the popularity classifier for one attribute group."""
    y = np.asarray(labels, dtype=np.float64)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be binary 0/1")
    if len(np.unique(y)) < 2:
        raise ValueError("both classes must be present to fit the classifier")
    builder, binning, encoders = build_design(fvs, group, n_bins=n_bins, bag_dim=bag_dim)
    X = builder.encode(fvs)
    if not np.isfinite(X.data).all():
        raise ValueError("design matrix contains non-finite values")
    reg = np.full(X.shape[1], l2)
    if builder.has_g3:
        reg[builder.text_offset:] = l2_text
    w, b, diag = minimize_logistic(X, y, reg, tol=tol, max_iter=max_iter)
    scores = score_design(X, w, b)
    prevalence = float(y.mean())
    threshold = float(np.quantile(scores, 1.0 - prevalence))
    threshold = min(max(threshold, 1e-9), 1.0 - 1e-9)
    meta = {
        "seed": seed,
        "n_rows": len(y),
        "prevalence": prevalence,
        "optimizer": diag,
        "fingerprint": hashlib.sha256(np.ascontiguousarray(w).tobytes()).hexdigest()[:12],
    }
    meta.update(metadata or {})
    return PopularityModel(
        group=group,
        binning=binning,
        encoders=encoders,
        column_names=builder.column_names,
        weights=w,
        intercept=b,
        l2=l2,
        l2_text=l2_text,
        threshold=threshold,
        bag_dim=bag_dim if builder.has_g3 else None,
        metadata=meta,
    )


def _builder_for(model: PopularityModel) -> _DesignBuilder:
    return _DesignBuilder(model.group, model.binning, model.encoders, model.bag_dim)


def score_design(X, w: np.ndarray, b: float) -> np.ndarray:
    z = np.asarray(X @ w).ravel() + b
    return 1.0 / (1.0 + np.exp(-z))


def score_batch(model: PopularityModel, fvs: Sequence[FeatureVector]) -> np.ndarray:
    X = _builder_for(model).encode(fvs)
    return score_design(X, model.weights, model.intercept)


def score(model: PopularityModel, fv: FeatureVector) -> float:
    """Probability that the question lands in the top popularity decile."""
    return float(score_batch(model, [fv])[0])


def classify(model: PopularityModel, fv: FeatureVector) -> bool:
    return score(model, fv) > model.threshold


def score_breakdown(model: PopularityModel, fv: FeatureVector) -> dict[str, float]:
    """Per-feature contribution to the pre-sigmoid affine score.

    Contributions sum to (logit - intercept). Text-bag columns are pooled
    into a single "text" entry.
    """
    X = _builder_for(model).encode([fv]).tocoo()
    contributions: dict[str, float] = {}
    text_offset = _builder_for(model).text_offset if model.bag_dim else None
    for col, val in zip(X.col, X.data):
        name = model.column_names[col]
        if text_offset is not None and col >= text_offset:
            key = "text"
        else:
            key = name.split("=")[0].split("#")[0]
        contributions[key] = contributions.get(key, 0.0) + float(val * model.weights[col])
    return contributions


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> tuple[float, list[tuple[float, float]]]:
    """AUC via the Mann-Whitney statistic (ties count 0.5) plus ROC points."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int8)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes are required to compute AUC")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i: j + 1]] = 0.5 * (i + j) + 1.0  # average rank, 1-based
        i = j + 1
    auc = (ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)

    desc = np.argsort(-s, kind="mergesort")
    tps = np.cumsum(y[desc] == 1)
    fps = np.cumsum(y[desc] == 0)
    distinct = np.nonzero(np.diff(s[desc]))[0]
    idx = np.concatenate([distinct, [len(s) - 1]])
    curve = [(0.0, 0.0)] + [(float(fps[i] / n_neg), float(tps[i] / n_pos)) for i in idx]
    return float(auc), curve


def split_by_id(ids: Sequence[str], holdout: float = 0.3, seed: int = 0) -> np.ndarray:
    """Deterministic holdout mask by seeded hash of the id (True = holdout)."""
    mask = np.empty(len(ids), dtype=bool)
    for i, qid in enumerate(ids):
        digest = hashlib.sha256(f"{seed}:{qid}".encode("utf-8")).digest()
        mask[i] = int.from_bytes(digest[:8], "big") / 2**64 < holdout
    return mask
