"""All-relevant feature selection with shadow attributes.

Each iteration appends one shuffled copy ("shadow") of every real feature,
fits a classification forest, and counts a hit for each real feature whose
permutation-importance Z-score beats the best shadow. A two-sided binomial
test on the hit count (Bonferroni-corrected across features) decides
confirmed / rejected; features still undecided after the iteration budget
are tentative, optionally resolved by a median-shadow comparison pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import binom

from .ensemble import (
    Dataset,
    FeatureSpec,
    ForestParams,
    fit_forest,
    permutation_importance,
)

CONFIRMED = "confirmed"
TENTATIVE = "tentative"
REJECTED = "rejected"


@dataclass
class BorutaParams:
    max_iterations: int = 22
    sample_fraction: float = 0.1
    sample_floor: int = 5000        # desk-scale floor on the row sample
    significance: float = 0.01      # two-sided, Bonferroni-corrected
    seed: int = 0
    rough_fix: bool = True
    n_trees: int = 32
    max_depth: int = 6
    min_leaf: int = 25
    importance_repetitions: int = 4
    importance_rows: Optional[int] = 800


@dataclass
class BorutaFeature:
    name: str
    status: str
    mean_z: float
    hits: int
    tested_iterations: int
    decided_iteration: Optional[int] = None
    rough_fix_applied: bool = False
    group: Optional[str] = None


@dataclass
class BorutaReport:
    features: list[BorutaFeature]
    iterations: int
    sample_fraction: float
    n_rows_used: int
    shadow_max_history: list[float] = field(default_factory=list)

    def by_name(self) -> dict[str, BorutaFeature]:
        return {f.name: f for f in self.features}

    def confirmed(self) -> list[str]:
        return [f.name for f in self.features if f.status == CONFIRMED]

    def rejected(self) -> list[str]:
        return [f.name for f in self.features if f.status == REJECTED]

    def to_rows(self) -> list[dict]:
        """Rows with the selection-table columns (Attribute, Type, Mean Z, Group)."""
        return [
            {
                "attribute": f.name,
                "type": f.group_type if hasattr(f, "group_type") else None,
                "mean_z": round(f.mean_z, 3),
                "group": f.group,
                "status": f.status,
                "hits": f.hits,
                "iterations": f.tested_iterations,
            }
            for f in sorted(self.features, key=lambda x: -x.mean_z)
        ]


def shadow_codes(codes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent per-column shuffles of the encoded feature matrix."""
    out = np.empty_like(codes)
    n = codes.shape[0]
    for j in range(codes.shape[1]):
        out[:, j] = codes[rng.permutation(n), j]
    return out


def run_boruta(
    dataset: Dataset,
    params: Optional[BorutaParams] = None,
    groups: Optional[dict[str, str]] = None,
) -> BorutaReport:
    """Decide all-relevant features for the dataset's binary target."""
    params = params or BorutaParams()
    p = len(dataset.schema)
    if p < 2:
        raise ValueError("boruta needs at least 2 features")
    classes = np.unique(dataset.y)
    if len(classes) < 2:
        raise ValueError("boruta needs a two-class target")
    rng = np.random.default_rng(params.seed)

    n = dataset.n_rows
    n_sample = min(n, max(params.sample_floor, int(round(params.sample_fraction * n))))
    if n_sample < 2 * params.min_leaf:
        raise ValueError(f"sample of {n_sample} rows is below 2*min_leaf={2 * params.min_leaf}")
    row_pick = np.sort(rng.choice(n, size=n_sample, replace=False)) if n_sample < n else np.arange(n)
    codes = dataset.codes[row_pick]
    y = dataset.y[row_pick]
    if len(np.unique(y)) < 2:
        raise ValueError("sampled rows contain a single class; increase sample_fraction")

    alpha = params.significance / p  # Bonferroni across features
    names = dataset.feature_names
    hits = dict.fromkeys(names, 0)
    z_history: dict[str, list[float]] = {name: [] for name in names}
    status: dict[str, str] = dict.fromkeys(names, TENTATIVE)
    decided_at: dict[str, Optional[int]] = dict.fromkeys(names, None)
    shadow_max_history: list[float] = []
    shadow_schema = [FeatureSpec(f"shadow_{s.name}", s.kind) for s in dataset.schema]

    iterations_run = 0
    for iteration in range(1, params.max_iterations + 1):
        iterations_run = iteration
        shadows = shadow_codes(codes, rng)
        aug = Dataset(
            schema=dataset.schema + shadow_schema,
            codes=np.hstack([codes, shadows]),
            y=y,
            encoders=dataset.encoders * 2,
        )
        forest = fit_forest(
            aug,
            ForestParams(
                n_trees=params.n_trees,
                max_depth=params.max_depth,
                min_leaf=params.min_leaf,
                seed=int(rng.integers(2**31 - 1)),
            ),
        )
        report = permutation_importance(
            forest, aug,
            repetitions=params.importance_repetitions,
            seed=int(rng.integers(2**31 - 1)),
            eval_rows=params.importance_rows,
        )
        by_name = report.by_name()
        z_of = {name: (by_name[name].z_score or 0.0) for name in by_name}
        shadow_max = max(z_of[f"shadow_{name}"] for name in names)
        shadow_max_history.append(shadow_max)

        tested = 0
        for name in names:
            if status[name] != TENTATIVE:
                continue
            tested += 1
            z_history[name].append(z_of[name])
            if z_of[name] > shadow_max:
                hits[name] += 1
            k = len(z_history[name])
            h = hits[name]
            if binom.sf(h - 1, k, 0.5) < alpha:
                status[name] = CONFIRMED
                decided_at[name] = iteration
            elif binom.cdf(h, k, 0.5) < alpha:
                status[name] = REJECTED
                decided_at[name] = iteration
        if tested == 0:
            break

    median_shadow = float(np.median(shadow_max_history)) if shadow_max_history else 0.0
    features = []
    for name in names:
        zs = z_history[name]
        mean_z = float(np.mean(zs)) if zs else 0.0
        st = status[name]
        rough = False
        if st == TENTATIVE and params.rough_fix:
            st = CONFIRMED if mean_z > median_shadow else REJECTED
            rough = True
        features.append(
            BorutaFeature(
                name=name,
                status=st,
                mean_z=mean_z,
                hits=hits[name],
                tested_iterations=len(zs),
                decided_iteration=decided_at[name],
                rough_fix_applied=rough,
                group=(groups or {}).get(name),
            )
        )
    return BorutaReport(
        features=features,
        iterations=iterations_run,
        sample_fraction=params.sample_fraction,
        n_rows_used=n_sample,
        shadow_max_history=shadow_max_history,
    )
