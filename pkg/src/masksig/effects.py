"""Per-sample feature effects: losses, masking semantics, reference values.

A feature effect is the incremental loss caused by replacing one feature
with a neutral reference value: delta_i = L(masked_pred_i, y_i) -
L(unmasked_pred_i, y_i). Positive effects mean the feature was helping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from masksig.bundle import PredictionBundle

__all__ = [
    "FeatureSpec",
    "MaskPlan",
    "LossKind",
    "EffectVector",
    "loss",
    "reference_value",
    "apply_mask",
    "compute_effects",
]

_PROB_FLOOR = 1e-12  # probabilities clamped to [floor, 1-floor] before logs

FEATURE_KINDS = ("continuous", "discrete", "categorical")
MASK_MODES = ("conditional", "unconditional")
REFERENCE_RULES = ("training_mean", "adjusted_mode", "fixed")


@dataclass(frozen=True)
class FeatureSpec:
    """Name, kind, and (for discrete/categorical kinds) the admissible support."""

    name: str
    kind: str = "continuous"
    support: tuple | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("feature name must be nonempty")
        if self.kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if self.kind in ("discrete", "categorical"):
            if not self.support:
                raise ValueError(f"feature {self.name!r}: {self.kind} kind requires a nonempty support")
            object.__setattr__(self, "support", tuple(self.support))
        elif self.support is not None:
            object.__setattr__(self, "support", tuple(self.support))


@dataclass(frozen=True)
class MaskPlan:
    """How masking is performed: mode plus a per-feature reference rule.

    mode:
        conditional    - only the tested feature is replaced by its reference
        unconditional  - all features replaced; unmasking restores the tested one
    reference:
        mapping feature name -> rule in {training_mean, adjusted_mode, fixed}
    fixed_values:
        values for features under the fixed rule
    """

    mode: str = "conditional"
    reference: Mapping[str, str] = field(default_factory=dict)
    fixed_values: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode {self.mode!r}")
        for name, rule in self.reference.items():
            if rule not in REFERENCE_RULES:
                raise ValueError(f"feature {name!r}: unknown reference rule {rule!r}")
            if rule == "fixed" and name not in self.fixed_values:
                raise ValueError(f"feature {name!r}: fixed rule without a fixed value")

    @classmethod
    def default_for(cls, features: Sequence[FeatureSpec], mode: str = "conditional") -> "MaskPlan":
        rules = {
            f.name: ("training_mean" if f.kind == "continuous" else "adjusted_mode")
            for f in features
        }
        return cls(mode=mode, reference=rules)

    def validate_for(self, features: Sequence[FeatureSpec]) -> None:
        """Check rule/kind compatibility for every feature with a declared rule."""
        for f in features:
            rule = self.reference.get(f.name)
            if rule is None:
                continue
            if f.kind == "continuous" and rule == "adjusted_mode":
                raise ValueError(f"feature {f.name!r}: adjusted_mode is not defined for continuous kind")
            if f.kind in ("discrete", "categorical") and rule == "training_mean":
                raise ValueError(f"feature {f.name!r}: training_mean is not defined for {f.kind} kind")


@dataclass(frozen=True)
class LossKind:
    """One of squared / absolute / binary_cross_entropy / multiclass_cross_entropy / pinball.

    Pinball carries its quantile level tau.
    """

    name: str
    tau: float | None = None

    _NAMES = ("squared", "absolute", "binary_cross_entropy", "multiclass_cross_entropy", "pinball")

    def __post_init__(self) -> None:
        if self.name not in self._NAMES:
            raise ValueError(f"unknown loss kind {self.name!r}")
        if self.name == "pinball":
            if self.tau is None or not 0.0 < float(self.tau) < 1.0:
                raise ValueError("pinball loss requires tau strictly in (0, 1)")
        elif self.tau is not None:
            raise ValueError(f"loss {self.name!r} does not take tau")

    @classmethod
    def parse(cls, text: str) -> "LossKind":
        """Parse 'squared', 'pinball:0.25', etc. (CLI / manifest syntax)."""
        if text.startswith("pinball:"):
            return cls("pinball", float(text.split(":", 1)[1]))
        if text == "pinball":
            raise ValueError("pinball loss must be written as pinball:<tau>")
        return cls(text)

    def spelled(self) -> str:
        return f"pinball:{self.tau!r}" if self.name == "pinball" else self.name


SQUARED = LossKind("squared")
ABSOLUTE = LossKind("absolute")
BINARY_CROSS_ENTROPY = LossKind("binary_cross_entropy")
MULTICLASS_CROSS_ENTROPY = LossKind("multiclass_cross_entropy")


@dataclass(frozen=True, eq=False)
class EffectVector:
    """Feature effects for one feature over the retained test samples."""

    feature: str
    effects: np.ndarray
    sample_ids: tuple
    n_excluded_missing: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.effects, dtype=float)
        object.__setattr__(self, "effects", arr)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError(f"feature {self.feature!r}: effects must be a nonempty 1-d array")
        if len(self.sample_ids) != arr.size:
            raise ValueError(f"feature {self.feature!r}: sample_ids length differs from effects")
        if not np.isfinite(arr).all():
            raise ValueError(f"feature {self.feature!r}: effects contain non-finite values")
        if self.n_excluded_missing < 0:
            raise ValueError("n_excluded_missing must be nonnegative")

    def __len__(self) -> int:
        return int(self.effects.size)


def _clamp_prob(p: np.ndarray) -> np.ndarray:
    return np.clip(p, _PROB_FLOOR, 1.0 - _PROB_FLOOR)


def loss(kind: LossKind, prediction, response):
    """Evaluate the loss; scalar in, scalar out; arrays broadcast elementwise.

    multiclass_cross_entropy expects probability rows (last axis over classes,
    summing to 1 within 1e-6) and integer class indices as responses.
    """
    if kind.name == "multiclass_cross_entropy":
        probs = np.asarray(prediction, dtype=float)
        if probs.ndim == 0 or probs.shape[-1] < 2:
            raise ValueError("multiclass loss requires a probability vector per sample")
        sums = probs.sum(axis=-1)
        bad = np.abs(sums - 1.0) > 1e-6
        if np.any(bad):
            raise ValueError(
                f"probability rows must sum to 1 within 1e-6; worst deviation {np.max(np.abs(sums - 1.0)):.3g}"
            )
        idx = np.asarray(response)
        if not np.issubdtype(idx.dtype, np.integer):
            idx_f = np.asarray(response, dtype=float)
            if not np.all(idx_f == np.floor(idx_f)):
                raise ValueError("multiclass responses must be integer class indices")
            idx = idx_f.astype(int)
        if np.any(idx < 0) or np.any(idx >= probs.shape[-1]):
            raise ValueError("class index outside the probability vector")
        picked = np.take_along_axis(probs, idx[..., None], axis=-1)[..., 0]
        out = -np.log(_clamp_prob(picked))
        return float(out) if out.ndim == 0 else out

    m = np.asarray(prediction, dtype=float)
    y = np.asarray(response, dtype=float)
    if kind.name == "squared":
        out = (m - y) ** 2
    elif kind.name == "absolute":
        out = np.abs(m - y)
    elif kind.name == "binary_cross_entropy":
        p = _clamp_prob(m)
        out = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    elif kind.name == "pinball":
        tau = float(kind.tau)
        resid = y - m
        out = tau * np.maximum(resid, 0.0) + (1.0 - tau) * np.maximum(-resid, 0.0)
    else:  # pragma: no cover - LossKind validates names
        raise ValueError(f"unknown loss kind {kind.name!r}")
    return float(out) if out.ndim == 0 else out


def reference_value(feature: FeatureSpec, training_values, current_value=None):
    """Reference value for masking one feature.

    Continuous features use the training mean. Discrete/categorical features
    use the adjusted mode: the most frequent training value excluding the
    sample's own value (so the reference is per-sample); ties break to the
    earliest candidate in the declared support order.
    """
    values = list(training_values)
    if len(values) == 0:
        raise ValueError(f"feature {feature.name!r}: empty training values")
    if feature.kind == "continuous":
        return float(np.mean(np.asarray(values, dtype=float)))
    if current_value is None:
        raise ValueError(f"feature {feature.name!r}: adjusted mode requires the current value")
    candidates = [v for v in feature.support if v != current_value]
    if not candidates:
        raise ValueError(f"feature {feature.name!r}: degenerate support")
    counts = {c: 0 for c in candidates}
    for v in values:
        if v in counts:
            counts[v] += 1
    return max(candidates, key=lambda c: (counts[c], -candidates.index(c)))


def apply_mask(x, plan: MaskPlan, target: int, refs):
    """Return (masked, unmasked) input vectors for the target feature.

    target is 1-based (feature j lives at x[j - 1]), matching how features
    are numbered everywhere else in reports.

    conditional: masked = x with the target component replaced by its
    reference; unmasked = x. unconditional: masked = refs everywhere;
    unmasked = refs with the target component restored from x.

    refs must supply a finite value for every component the mode touches.
    """
    x = np.asarray(x, dtype=float)
    refs = np.asarray(refs, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a 1-d feature vector")
    if not 1 <= target <= x.size:
        raise ValueError(f"target index {target} outside [1, {x.size}]")
    if refs.shape != x.shape:
        raise ValueError("refs must have the same shape as x")
    i = target - 1
    if plan.mode == "conditional":
        if not np.isfinite(refs[i]):
            raise ValueError(f"missing reference for feature {target}")
        masked = x.copy()
        masked[i] = refs[i]
        return masked, x.copy()
    if not np.isfinite(refs).all():
        raise ValueError("unconditional masking requires a reference for every feature")
    masked = refs.copy()
    unmasked = refs.copy()
    unmasked[i] = x[i]
    return masked, unmasked


def compute_effects(bundle: "PredictionBundle", feature: str, loss_kind: LossKind | None = None) -> EffectVector:
    """Feature effects for one feature from a parsed prediction bundle.

    The effect is always loss(prediction without the feature) minus
    loss(prediction with the feature), so positive means the feature helps.
    Under conditional masking the bundle's per-feature table is the
    feature-removed stream and the shared table the full-model stream; under
    unconditional masking the roles invert (shared = all-masked baseline,
    per-feature = feature restored) and the subtraction flips accordingly.

    Samples flagged missing for this feature are excluded (feature-wise rule:
    missingness of other features is irrelevant); the exclusion count is
    recorded on the result.
    """
    kind = loss_kind if loss_kind is not None else bundle.manifest.loss
    rows, per_feature_pred = bundle.masked_rows(feature)
    if rows.size == 0:
        raise ValueError(f"feature {feature!r}: empty test set after missing-data exclusion")
    y = bundle.responses[rows]
    shared_pred = bundle.unmasked[rows]
    per_feature_loss = np.asarray(loss(kind, per_feature_pred, y))
    shared_loss = np.asarray(loss(kind, shared_pred, y))
    if bundle.manifest.mask_mode == "unconditional":
        deltas = shared_loss - per_feature_loss
    else:
        deltas = per_feature_loss - shared_loss
    ids = tuple(bundle.sample_ids[i] for i in rows)
    return EffectVector(
        feature=feature,
        effects=deltas,
        sample_ids=ids,
        n_excluded_missing=bundle.n_samples - rows.size,
    )
