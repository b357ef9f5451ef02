"""Panel-data support and feature-wise missing-data exclusion.

Panel bundles carry a (unit, time) key per sample. Three extensions over the
cross-sectional path:

  * conditioning: run the test on a declarative subset of samples,
  * unit grouping: aggregate per-period losses into one effect per unit,
  * two-step references: aggregate training values per unit before the
    cross-unit reference so each unit gets equal weight.

Missing data is handled feature-wise: a sample (or period) is dropped only
when the tested feature itself is missing there.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from masksig.bundle import PredictionBundle
from masksig.effects import EffectVector, FeatureSpec, LossKind, loss

__all__ = [
    "PanelKey",
    "TrajectoryLossSpec",
    "condition_subset",
    "group_effects",
    "two_step_reference",
    "exclude_missing",
]

TRAJECTORY_AGGREGATORS = ("mean", "max")


@dataclass(frozen=True, order=True)
class PanelKey:
    """Identifies one panel observation: unit i at time t."""

    unit: str
    time: str


@dataclass(frozen=True)
class TrajectoryLossSpec:
    """Per-period loss plus the aggregator collapsing a trajectory to one number."""

    per_period: LossKind
    aggregator: str = "mean"

    def __post_init__(self) -> None:
        if self.aggregator not in TRAJECTORY_AGGREGATORS:
            raise ValueError(f"unknown trajectory aggregator {self.aggregator!r}")

    def collapse(self, per_period_losses: np.ndarray) -> float:
        vals = np.asarray(per_period_losses, dtype=float)
        if vals.size == 0:
            raise ValueError("trajectory aggregator needs at least one retained period")
        return float(vals.mean() if self.aggregator == "mean" else vals.max())


def _row_view(bundle: PredictionBundle, i: int) -> dict:
    """The dict a conditioning predicate sees for sample i."""
    row: dict = {"sample_id": bundle.sample_ids[i]}
    if bundle.units is not None:
        row["unit"] = bundle.units[i]
        row["time"] = bundle.times[i]
        row["key"] = PanelKey(unit=str(bundle.units[i]), time=str(bundle.times[i]))
    if bundle.features_raw is not None:
        for col, vals in bundle.features_raw.items():
            raw = vals[i]
            try:
                row[col] = float(raw)
            except (TypeError, ValueError):
                row[col] = raw
    return row


def condition_subset(bundle: PredictionBundle, predicate: Callable[[dict], bool]) -> PredictionBundle:
    """Filtered bundle view of the samples where predicate(row) is true.

    The predicate receives one dict per sample with sample_id, unit/time/key
    for panels, and any raw feature columns (numeric strings pre-parsed to
    float). All downstream operations act on the returned view unchanged.
    """
    keep = np.fromiter(
        (bool(predicate(_row_view(bundle, i))) for i in range(bundle.n_samples)),
        dtype=bool,
        count=bundle.n_samples,
    )
    if not keep.any():
        raise ValueError("empty selection: conditioning predicate retained no samples")
    return bundle.subset(keep)


def group_effects(
    bundle: PredictionBundle, feature: str, spec: TrajectoryLossSpec | None = None
) -> EffectVector:
    """One effect per unit: aggregated masked minus aggregated unmasked loss.

    Periods where the tested feature is missing are dropped at the prediction
    level, so a unit keeps contributing through its retained periods. Units
    with no retained period are excluded and counted, not fatal.
    """
    if not bundle.manifest.panel or bundle.units is None:
        raise ValueError("group_effects requires a panel bundle with unit/time keys")
    if spec is None:
        spec = TrajectoryLossSpec(per_period=bundle.manifest.loss)

    rows, masked_pred = bundle.masked_rows(feature)
    y = bundle.responses[rows]
    loss_masked = np.asarray(loss(spec.per_period, masked_pred, y), dtype=float)
    loss_unmasked = np.asarray(loss(spec.per_period, bundle.unmasked[rows], y), dtype=float)

    unit_order: list = []
    unit_pos: dict = {}
    for u in bundle.units:
        if u not in unit_pos:
            unit_pos[u] = len(unit_order)
            unit_order.append(u)
    row_unit = np.fromiter((unit_pos[bundle.units[i]] for i in rows), dtype=int, count=rows.size)

    deltas: list[float] = []
    ids: list[str] = []
    n_excluded = 0
    for j, u in enumerate(unit_order):
        sel = row_unit == j
        if not sel.any():
            n_excluded += 1
            continue
        deltas.append(spec.collapse(loss_masked[sel]) - spec.collapse(loss_unmasked[sel]))
        ids.append(str(u))
    if not deltas:
        raise ValueError(f"feature {feature!r}: every unit excluded after missing-data handling")
    return EffectVector(
        feature=feature,
        effects=np.array(deltas),
        sample_ids=tuple(ids),
        n_excluded_missing=n_excluded,
    )


def two_step_reference(unit_ids: Sequence, values: Sequence, feature: FeatureSpec) -> list:
    """Collapse per-period training values to one value per unit.

    Continuous features use the unit mean, discrete/categorical the unit mode
    (ties break to the value seen earliest in the unit's own periods). The
    returned cross-unit list weights every unit equally regardless of how
    many periods it has; feed it to reference_value().
    """
    if len(unit_ids) != len(values):
        raise ValueError("unit_ids and values must align")
    if len(values) == 0:
        raise ValueError("empty training panel")
    per_unit: dict = {}
    order: list = []
    for u, v in zip(unit_ids, values):
        if u not in per_unit:
            per_unit[u] = []
            order.append(u)
        per_unit[u].append(v)
    out = []
    for u in order:
        vals = per_unit[u]
        if feature.kind == "continuous":
            out.append(float(np.mean(np.asarray(vals, dtype=float))))
        else:
            counts: dict = {}
            for v in vals:
                counts[v] = counts.get(v, 0) + 1
            first_seen = {v: k for k, v in reversed(list(enumerate(vals)))}
            out.append(max(counts, key=lambda v: (counts[v], -first_seen[v])))
    return out


def exclude_missing(sample_ids: Sequence, missing_mask) -> tuple[np.ndarray, int]:
    """Indices retained for one feature plus the exclusion count.

    Only the tested feature's own missingness matters; callers pass that
    feature's mask and intersect nothing else.
    """
    mask = np.asarray(missing_mask, dtype=bool)
    if mask.shape != (len(sample_ids),):
        raise ValueError("missing mask must align with sample ids")
    retained = np.flatnonzero(~mask)
    return retained, int(mask.sum())
