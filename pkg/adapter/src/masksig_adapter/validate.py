"""Independent re-validation of bundle directories.

This module rechecks every structural invariant of the bundle format with
its own csv/json reading code, so a bundle that passes here also parses on
the consuming side and vice versa. Problems are collected into a report
rather than raised, which suits pre-flight checks in export pipelines.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

SCHEMA_ID = "masksig-bundle/1"
_FEATURE_KINDS = ("continuous", "discrete", "categorical")
_MASK_MODES = ("conditional", "unconditional")
_LOSS_NAMES = ("squared", "absolute", "binary_cross_entropy", "multiclass_cross_entropy")


@dataclass
class ValidationReport:
    """Everything found while checking one bundle directory."""

    path: str
    problems: list[str] = field(default_factory=list)
    checked_files: int = 0

    @property
    def valid(self) -> bool:
        return not self.problems

    def add(self, problem: str) -> None:
        self.problems.append(problem)

    def lines(self) -> list[str]:
        if self.valid:
            return [f"valid: {self.path} ({self.checked_files} files checked)"]
        return [f"invalid: {self.path}"] + [f"  {p}" for p in self.problems]


def _read_table(report: ValidationReport, path: str) -> tuple[list[str], list[list[str]]] | None:
    if not os.path.exists(path):
        report.add(f"{path}: table not found")
        return None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            report.add(f"{path}: empty file")
            return None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                report.add(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
                return None
            rows.append(row)
    report.checked_files += 1
    return header, rows


def _check_manifest(report: ValidationReport, path: str) -> dict | None:
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        report.add(f"{manifest_path}: manifest not found")
        return None
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            report.add(f"{manifest_path}:{exc.lineno}: invalid JSON: {exc.msg}")
            return None
    report.checked_files += 1
    where = manifest_path
    if raw.get("schema") != SCHEMA_ID:
        report.add(f"{where}: unsupported bundle schema {raw.get('schema')!r}")
    features = raw.get("features")
    if not isinstance(features, list) or not features:
        report.add(f"{where}: manifest declares no features")
        return None
    names = []
    for f in features:
        if not isinstance(f, dict) or not f.get("name"):
            report.add(f"{where}: malformed feature entry {f!r}")
            return None
        name = f["name"]
        names.append(name)
        if not all(c.isalnum() or c in "_.-" for c in name):
            report.add(f"{where}: feature name {name!r} is not filesystem-safe")
        kind = f.get("kind", "continuous")
        if kind not in _FEATURE_KINDS:
            report.add(f"{where}: feature {name!r}: unknown kind {kind!r}")
        if kind in ("discrete", "categorical") and not f.get("support"):
            report.add(f"{where}: feature {name!r}: {kind} kind requires a nonempty support")
    if len(set(names)) != len(names):
        report.add(f"{where}: duplicate feature names in manifest")

    loss = raw.get("loss", "")
    if loss.startswith("pinball:"):
        try:
            tau = float(loss.split(":", 1)[1])
            if not 0.0 < tau < 1.0:
                report.add(f"{where}: pinball level must lie strictly in (0, 1)")
        except ValueError:
            report.add(f"{where}: bad pinball level in {loss!r}")
    elif loss not in _LOSS_NAMES:
        report.add(f"{where}: unknown loss {loss!r}")
    if loss == "multiclass_cross_entropy":
        classes = raw.get("classes")
        if not isinstance(classes, list) or len(classes) < 2:
            report.add(f"{where}: multiclass loss requires >= 2 class labels")
    if raw.get("mask_mode", "conditional") not in _MASK_MODES:
        report.add(f"{where}: unknown mask mode {raw.get('mask_mode')!r}")
    try:
        alpha = float(raw.get("alpha", 0.05))
        if not 0.0 < alpha < 1.0:
            report.add(f"{where}: manifest alpha must lie strictly in (0, 1)")
    except (TypeError, ValueError):
        report.add(f"{where}: alpha is not a number")
    return raw


def _is_float(cell: str) -> bool:
    try:
        v = float(cell)
    except ValueError:
        return False
    return v == v and v not in (float("inf"), float("-inf"))


def _check_prediction_table(
    report: ValidationReport,
    tbl_path: str,
    pred_columns: list[str],
    required_ids: set[str],
    known_ids: set[str],
    multiclass: bool,
) -> None:
    table = _read_table(report, tbl_path)
    if table is None:
        return
    header, rows = table
    want = ["sample_id"] + pred_columns
    if header != want:
        report.add(f"{tbl_path}:1: header {header} != expected {want}")
        return
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        sid = row[0]
        if sid in seen:
            report.add(f"{tbl_path}:{lineno}: duplicate sample id {sid!r}")
            continue
        seen.add(sid)
        if sid not in known_ids:
            report.add(f"{tbl_path}:{lineno}: unknown sample id {sid!r}")
            continue
        bad = [c for c in row[1:] if not _is_float(c)]
        if bad:
            report.add(f"{tbl_path}:{lineno}: not a finite number: {bad[0]!r}")
            continue
        if multiclass:
            total = sum(float(c) for c in row[1:])
            if abs(total - 1.0) > 1e-6:
                report.add(
                    f"{tbl_path}:{lineno}: probability row for sample {sid!r} sums to "
                    f"{total:.8f}, not 1 within 1e-6"
                )
    for sid in sorted(required_ids - seen):
        report.add(f"{tbl_path}: sample id {sid!r} present in unmasked but absent here")


def validate_bundle(path: str) -> ValidationReport:
    """Check one bundle directory; returns a report instead of raising."""
    report = ValidationReport(path=path)
    manifest = _check_manifest(report, path)
    if manifest is None or report.problems:
        return report

    feature_names = [f["name"] for f in manifest["features"]]
    multiclass = manifest.get("loss") == "multiclass_cross_entropy"
    binary = manifest.get("loss") == "binary_cross_entropy"
    classes = [str(c) for c in manifest.get("classes", [])] if multiclass else []
    panel = bool(manifest.get("panel", False))

    resp_path = os.path.join(path, "responses.csv")
    table = _read_table(report, resp_path)
    if table is None:
        return report
    header, rows = table
    want = ["sample_id"] + (["unit", "time"] if panel else []) + ["response"]
    if header != want:
        report.add(f"{resp_path}:1: header {header} != expected {want}")
        return report
    ids: list[str] = []
    pairs = set()
    for lineno, row in enumerate(rows, start=2):
        sid = row[0]
        if not sid:
            report.add(f"{resp_path}:{lineno}: empty sample id")
            continue
        ids.append(sid)
        resp = row[-1]
        if multiclass:
            if resp not in classes:
                report.add(f"{resp_path}:{lineno}: unknown class label {resp!r}")
        elif not _is_float(resp):
            report.add(f"{resp_path}:{lineno}: not a finite number: {resp!r}")
        elif binary and float(resp) not in (0.0, 1.0):
            report.add(f"{resp_path}:{lineno}: binary response must be 0 or 1, got {resp!r}")
        if panel:
            pair = (row[1], row[2])
            if pair in pairs:
                report.add(f"{resp_path}:{lineno}: duplicate (unit, time) pair {pair!r}")
            pairs.add(pair)
    if len(set(ids)) != len(ids):
        dup = sorted({s for s in ids if ids.count(s) > 1})[0]
        report.add(f"{resp_path}: duplicate sample id {dup!r}")
        return report
    known = set(ids)
    if not known:
        report.add(f"{resp_path}: no data rows")
        return report

    # optional missing flags, needed before masked tables
    flagged: dict[str, set[str]] = {}
    miss_path = os.path.join(path, "missing.csv")
    if os.path.exists(miss_path):
        table = _read_table(report, miss_path)
        if table is not None:
            mheader, mrows = table
            if mheader[:1] != ["sample_id"]:
                report.add(f"{miss_path}:1: first column must be sample_id")
            else:
                for col in mheader[1:]:
                    if col not in feature_names:
                        report.add(f"{miss_path}:1: column {col!r} is not a declared feature")
                    flagged.setdefault(col, set())
                for lineno, row in enumerate(mrows, start=2):
                    if row[0] not in known:
                        report.add(f"{miss_path}:{lineno}: unknown sample id {row[0]!r}")
                        continue
                    for col, cell in zip(mheader[1:], row[1:]):
                        if cell not in ("0", "1"):
                            report.add(f"{miss_path}:{lineno}: flags must be 0 or 1, got {cell!r}")
                        elif cell == "1":
                            flagged.setdefault(col, set()).add(row[0])

    pred_columns = [f"p{i}" for i in range(len(classes))] if multiclass else ["prediction"]
    _check_prediction_table(
        report, os.path.join(path, "unmasked.csv"), pred_columns, known, known, multiclass
    )
    for feature in feature_names:
        _check_prediction_table(
            report,
            os.path.join(path, "masked", f"{feature}.csv"),
            pred_columns,
            known - flagged.get(feature, set()),
            known,
            multiclass,
        )

    feat_path = os.path.join(path, "features.csv")
    if os.path.exists(feat_path):
        table = _read_table(report, feat_path)
        if table is not None:
            fheader, frows = table
            if fheader[:1] != ["sample_id"]:
                report.add(f"{feat_path}:1: first column must be sample_id")
            else:
                seen = set()
                for lineno, row in enumerate(frows, start=2):
                    if row[0] not in known:
                        report.add(f"{feat_path}:{lineno}: unknown sample id {row[0]!r}")
                    seen.add(row[0])
                for sid in sorted(known - seen):
                    report.add(f"{feat_path}: lacks a row for id {sid!r}")
                    break
    return report
