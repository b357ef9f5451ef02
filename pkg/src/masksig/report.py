"""The end-to-end per-feature pipeline and ranked report emission.

run_test drives effects -> sign test -> median -> both confidence intervals
for each requested feature and assembles FeatureReport rows. Rejected
features are ranked by descending median; retained ones follow alphabetically
with no rank. Reports serialize to json, csv, or a text table; the machine
formats round-trip floats bit-exactly (shortest-repr serialization).
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Sequence

from masksig import rng
from masksig.bundle import PredictionBundle
from masksig.effects import LossKind, compute_effects
from masksig.intervals import median_score, randomized_ci, two_sided_ci
from masksig.panel import TrajectoryLossSpec, group_effects
from masksig.sign_test import TestConfig, decide

__all__ = ["FeatureReport", "run_test", "emit_report", "reports_from_json", "reports_from_csv"]

REPORT_SCHEMA = "masksig-report/1"
REPORT_FORMATS = ("json", "csv", "text")
ADJUSTMENTS = ("none", "bonferroni")
UNRANKED = "-"


@dataclass(frozen=True)
class FeatureReport:
    """One feature's full test outcome; None fields mean not available."""

    feature: str
    rank: int | None = None
    decision: str | None = None
    median: float | None = None
    reject_prob: float | None = None
    n_plus: int | None = None
    n_effective: int | None = None
    n_excluded: int | None = None
    missing_rate: float | None = None
    p_lower: float | None = None
    p_upper: float | None = None
    ci_lower1: float | None = None
    ci_lower2: float | None = None
    ci_prob_lower1: float | None = None
    ci_selected_lower: float | None = None
    two_sided_lower: float | None = None
    two_sided_upper: float | None = None
    two_sided_coverage: float | None = None
    alpha: float | None = None
    alpha_feature: float | None = None
    adjust: str = "none"
    error: str | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["warnings"] = list(self.warnings)
        return out


def _test_one(
    bundle: PredictionBundle,
    feature: str,
    config: TestConfig,
    alpha_feature: float,
    d: int,
    adjust: str,
    loss_kind: LossKind | None,
    panel_grouping: TrajectoryLossSpec | None,
) -> FeatureReport:
    """The per-feature pipeline; exceptions become an error row, not a crash."""
    try:
        if panel_grouping is not None:
            effects = group_effects(bundle, feature, panel_grouping)
        else:
            effects = compute_effects(bundle, feature, loss_kind)
        feature_config = TestConfig(
            alpha=alpha_feature, m0=config.m0, tie_mode=config.tie_mode, seed=config.seed
        )
        result = decide(effects, feature_config)
        med = median_score(effects)
        ci = randomized_ci(effects, alpha_feature, rng.uniform(config.seed, feature, "ci"))
        warnings: list[str] = []
        two = None
        try:
            two = two_sided_ci(effects, alpha_feature)
        except ValueError as exc:
            warnings.append(str(exc))
        scale = float(d) if adjust == "bonferroni" else 1.0
        n_total = len(effects) + effects.n_excluded_missing
        return FeatureReport(
            feature=feature,
            decision=result.decision,
            median=med.value,
            reject_prob=result.reject_prob,
            n_plus=result.n_plus,
            n_effective=result.n_effective,
            n_excluded=effects.n_excluded_missing,
            missing_rate=effects.n_excluded_missing / n_total,
            p_lower=min(1.0, scale * result.p_lower),
            p_upper=min(1.0, scale * result.p_upper),
            ci_lower1=ci.lower1,
            ci_lower2=ci.lower2,
            ci_prob_lower1=ci.prob_lower1,
            ci_selected_lower=ci.selected_lower,
            two_sided_lower=two.two_sided_lower if two else None,
            two_sided_upper=two.two_sided_upper if two else None,
            two_sided_coverage=two.two_sided_coverage if two else None,
            alpha=config.alpha,
            alpha_feature=alpha_feature,
            adjust=adjust,
            warnings=tuple(warnings),
        )
    except Exception as exc:
        return FeatureReport(
            feature=feature, alpha=config.alpha, alpha_feature=alpha_feature, adjust=adjust, error=str(exc)
        )


def run_test(
    bundle: PredictionBundle,
    features: Sequence[str] | None = None,
    config: TestConfig | None = None,
    adjust: str = "none",
    loss_kind: LossKind | None = None,
    panel_grouping: TrajectoryLossSpec | None = None,
) -> list[FeatureReport]:
    """Test every requested feature and return ranked FeatureReport rows.

    Multiplicity: under adjust="bonferroni" each feature is tested at
    alpha/d (d = number of requested features) and reported p-interval
    endpoints are multiplied by d, clipped at 1.

    A failure in one feature's pipeline is recorded on its row and does not
    disturb the others. Randomness is drawn from per-feature substreams, so
    the output is identical however the per-feature work is scheduled.
    """
    if config is None:
        config = TestConfig()
    if adjust not in ADJUSTMENTS:
        raise ValueError(f"unknown adjustment {adjust!r}")
    wanted = list(features) if features is not None else list(bundle.feature_names)
    if not wanted:
        return []
    unknown = [f for f in wanted if f not in bundle.feature_names]
    if unknown:
        raise ValueError(f"features not in bundle: {unknown}")
    if len(set(wanted)) != len(wanted):
        raise ValueError("duplicate feature requested")
    d = len(wanted)
    alpha_feature = config.alpha / d if adjust == "bonferroni" else config.alpha

    with ThreadPoolExecutor(max_workers=min(8, d)) as pool:
        rows = list(
            pool.map(
                lambda f: _test_one(
                    bundle, f, config, alpha_feature, d, adjust, loss_kind, panel_grouping
                ),
                wanted,
            )
        )

    ranked = sorted(
        (r for r in rows if r.decision == "reject"),
        key=lambda r: (-r.median, r.feature),
    )
    unranked = sorted((r for r in rows if r.decision != "reject"), key=lambda r: r.feature)
    out = [replace(r, rank=i + 1) for i, r in enumerate(ranked)]
    out.extend(unranked)
    return out


_INT_FIELDS = ("rank", "n_plus", "n_effective", "n_excluded")
_STR_FIELDS = ("feature", "decision", "adjust", "error")


def _csv_cell(name: str, value) -> str:
    if value is None:
        return ""
    if name == "warnings":
        return json.dumps(list(value))
    if name in _STR_FIELDS:
        return str(value)
    if name in _INT_FIELDS:
        return str(int(value))
    return repr(float(value))


def _csv_value(name: str, cell: str):
    if name == "warnings":
        return tuple(json.loads(cell)) if cell else ()
    if cell == "":
        return None
    if name in _STR_FIELDS:
        return cell
    if name in _INT_FIELDS:
        return int(cell)
    return float(cell)


def _fmt_num(value, digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{digits}g}"


def _text_table(reports: Sequence[FeatureReport]) -> str:
    headers = [
        "rank",
        "feature",
        "median",
        "P(reject)",
        "p-interval",
        "lower1|lower2 (P sel 1)",
        "two-sided CI",
        "coverage",
        "N_eff",
        "miss%",
    ]
    body: list[list[str]] = []
    for r in reports:
        if r.error is not None:
            body.append([UNRANKED, r.feature, "ERROR: " + r.error] + [""] * 7)
            continue
        body.append(
            [
                str(r.rank) if r.rank is not None else UNRANKED,
                r.feature,
                _fmt_num(r.median),
                _fmt_num(r.reject_prob, 4),
                f"[{_fmt_num(r.p_lower, 4)}, {_fmt_num(r.p_upper, 4)}]",
                f"{_fmt_num(r.ci_lower1)}|{_fmt_num(r.ci_lower2)} ({_fmt_num(r.ci_prob_lower1, 4)})",
                (
                    f"[{_fmt_num(r.two_sided_lower)}, {_fmt_num(r.two_sided_upper)}]"
                    if r.two_sided_lower is not None
                    else "-"
                ),
                _fmt_num(r.two_sided_coverage, 6),
                str(r.n_effective),
                _fmt_num(100.0 * r.missing_rate, 3),
            ]
        )
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[FeatureReport], format: str = "text") -> str:
    """Serialize reports; json and csv round-trip all numbers bit-exactly."""
    if format not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {format!r}")
    if format == "json":
        payload = {"schema": REPORT_SCHEMA, "features": [r.to_dict() for r in reports]}
        return json.dumps(payload, indent=2) + "\n"
    if format == "csv":
        names = [f.name for f in fields(FeatureReport)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["schema:" + REPORT_SCHEMA])
        writer.writerow(names)
        for r in reports:
            writer.writerow([_csv_cell(n, getattr(r, n)) for n in names])
        return buf.getvalue()
    return _text_table(reports)


def reports_from_json(text: str) -> list[FeatureReport]:
    payload = json.loads(text)
    if payload.get("schema") != REPORT_SCHEMA:
        raise ValueError(f"unknown report schema {payload.get('schema')!r}")
    out = []
    for row in payload["features"]:
        row = dict(row)
        row["warnings"] = tuple(row.get("warnings", ()))
        out.append(FeatureReport(**row))
    return out


def reports_from_csv(text: str) -> list[FeatureReport]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0] != "schema:" + REPORT_SCHEMA:
        raise ValueError("not a recognized csv report")
    names = rows[1]
    out = []
    for row in rows[2:]:
        if not row:
            continue
        out.append(FeatureReport(**{n: _csv_value(n, c) for n, c in zip(names, row)}))
    return out
