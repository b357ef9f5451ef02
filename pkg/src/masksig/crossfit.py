"""Bonferroni adjustment and cross-fitting aggregation across folds.

Two schemes combine per-fold sign tests of the same feature:

* min-p: realize each fold's randomized p-value with a seeded per-fold
  uniform, then Bonferroni-combine as min(1, K * min_k p_k). Conservative.
* pooled: concatenate all fold effects and run one test. The validity of
  pooling across folds is an open question, so the result is flagged
  heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from masksig import rng
from masksig.effects import EffectVector
from masksig.sign_test import TestConfig, TestResult, decide, realize_p

__all__ = ["FoldResult", "CrossfitResult", "bonferroni", "crossfit_minp", "crossfit_pooled"]


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    effects: EffectVector
    test: TestResult

    def __post_init__(self) -> None:
        if self.fold_index < 1:
            raise ValueError("fold indices are 1-based")


@dataclass(frozen=True)
class CrossfitResult:
    scheme: str
    feature: str
    k: int
    decision: str
    alpha: float
    heuristic: bool
    realized_p: tuple[float, ...] | None = None
    aggregate_p: float | None = None
    pooled: TestResult | None = None


def bonferroni(p: tuple[float, float], d: int) -> tuple[float, float]:
    """Scale a p-interval for d tests and clip at 1; decisions then use level alpha/d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    a, b = p
    return min(d * a, 1.0), min(d * b, 1.0)


def _checked_folds(folds: Sequence[FoldResult]) -> list[FoldResult]:
    if len(folds) < 2:
        raise ValueError("cross-fitting needs at least 2 folds")
    ordered = sorted(folds, key=lambda f: f.fold_index)
    indices = [f.fold_index for f in ordered]
    if len(set(indices)) != len(indices):
        raise ValueError(f"duplicate fold indices {indices}")
    features = {f.effects.feature for f in ordered}
    if len(features) != 1:
        raise ValueError(f"folds mix features {sorted(features)}")
    return ordered


def crossfit_minp(folds: Sequence[FoldResult], alpha: float, seed: int) -> CrossfitResult:
    """Bonferroni-combined minimum of per-fold realized randomized p-values."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    ordered = _checked_folds(folds)
    feature = ordered[0].effects.feature
    realized = tuple(
        realize_p(f.test, u=rng.uniform(seed, feature, "crossfit-p", str(f.fold_index)))
        for f in ordered
    )
    aggregate = min(1.0, len(ordered) * min(realized))
    return CrossfitResult(
        scheme="minp",
        feature=feature,
        k=len(ordered),
        decision="reject" if aggregate <= alpha else "retain",
        alpha=alpha,
        heuristic=False,
        realized_p=realized,
        aggregate_p=aggregate,
    )


def crossfit_pooled(folds: Sequence[FoldResult], config: TestConfig) -> CrossfitResult:
    """Single test on the concatenated fold effects; flagged heuristic."""
    ordered = _checked_folds(folds)
    feature = ordered[0].effects.feature
    pooled_effects = EffectVector(
        feature=feature,
        effects=np.concatenate([f.effects.effects for f in ordered]),
        sample_ids=tuple(
            f"{f.fold_index}:{sid}" for f in ordered for sid in f.effects.sample_ids
        ),
        n_excluded_missing=sum(f.effects.n_excluded_missing for f in ordered),
    )
    result = decide(pooled_effects, config)
    return CrossfitResult(
        scheme="pooled",
        feature=feature,
        k=len(ordered),
        decision=result.decision,
        alpha=config.alpha,
        heuristic=True,
        pooled=result,
    )
