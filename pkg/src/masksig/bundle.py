"""The prediction-bundle directory format: parsing, validation, writing.

A bundle is the on-disk interface between any fitted model and the testing
engine. Layout:

    bundle/
      manifest.json          schema id, features, loss, mask mode, defaults
      responses.csv          sample_id[,unit,time],response
      unmasked.csv           sample_id,prediction   (or p0..p{C-1} multiclass)
      masked/<feature>.csv   same columns as unmasked, one file per feature
      missing.csv            optional: sample_id,<feature...> with 0/1 flags
      features.csv           optional: raw feature columns for conditioning

Tables are comma-separated with a header row, UTF-8, LF endings, sample ids
in the first column. Masked tables must cover exactly the unmasked id set
minus the ids declared missing for that feature (rows for missing ids are
tolerated and ignored). All alignment and probability invariants are checked
eagerly at parse time with file/line context in error messages.

Table roles depend on the manifest's mask_mode. Conditional: unmasked.csv
holds full-model predictions, masked/<f>.csv predictions with feature f at
its reference. Unconditional: unmasked.csv holds the all-masked baseline and
masked/<f>.csv predictions with only feature f restored; either way the
shared table is the stream that does not depend on the tested feature.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from masksig.effects import FeatureSpec, LossKind

__all__ = ["BundleError", "Manifest", "PredictionBundle", "parse_bundle", "write_bundle"]

SCHEMA_ID = "masksig-bundle/1"


class BundleError(ValueError):
    """A malformed or inconsistent bundle; message carries file/line context."""


@dataclass(frozen=True)
class Manifest:
    features: tuple[FeatureSpec, ...]
    loss: LossKind
    mask_mode: str = "conditional"
    alpha: float = 0.05
    m0: float = 0.0
    panel: bool = False
    classes: tuple[str, ...] | None = None
    schema: str = SCHEMA_ID

    def __post_init__(self) -> None:
        if self.schema != SCHEMA_ID:
            raise BundleError(f"unsupported bundle schema {self.schema!r} (expected {SCHEMA_ID!r})")
        if not self.features:
            raise BundleError("manifest declares no features")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise BundleError("duplicate feature names in manifest")
        for name in names:
            if not all(c.isalnum() or c in "_.-" for c in name):
                raise BundleError(f"feature name {name!r} is not filesystem-safe")
        if self.mask_mode not in ("conditional", "unconditional"):
            raise BundleError(f"unknown mask mode {self.mask_mode!r}")
        if self.loss.name == "multiclass_cross_entropy":
            if not self.classes or len(self.classes) < 2:
                raise BundleError("multiclass loss requires >= 2 class labels in the manifest")
        if not 0.0 < self.alpha < 1.0:
            raise BundleError("manifest alpha must lie strictly in (0, 1)")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @property
    def n_classes(self) -> int:
        return len(self.classes) if self.classes else 0

    def to_dict(self) -> dict:
        out: dict = {
            "schema": self.schema,
            "loss": self.loss.spelled(),
            "mask_mode": self.mask_mode,
            "alpha": self.alpha,
            "m0": self.m0,
            "panel": self.panel,
            "features": [
                {"name": f.name, "kind": f.kind}
                | ({"support": list(f.support)} if f.support is not None else {})
                for f in self.features
            ],
        }
        if self.classes is not None:
            out["classes"] = list(self.classes)
        return out

    @classmethod
    def from_dict(cls, raw: Mapping, where: str = "manifest.json") -> "Manifest":
        try:
            features = tuple(
                FeatureSpec(
                    name=f["name"],
                    kind=f.get("kind", "continuous"),
                    support=tuple(f["support"]) if "support" in f else None,
                )
                for f in raw["features"]
            )
            return cls(
                features=features,
                loss=LossKind.parse(raw["loss"]),
                mask_mode=raw.get("mask_mode", "conditional"),
                alpha=float(raw.get("alpha", 0.05)),
                m0=float(raw.get("m0", 0.0)),
                panel=bool(raw.get("panel", False)),
                classes=tuple(raw["classes"]) if "classes" in raw else None,
                schema=raw.get("schema", "<absent>"),
            )
        except BundleError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise BundleError(f"{where}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class PredictionBundle:
    """A validated in-memory bundle; arrays are aligned to sample_ids order."""

    manifest: Manifest
    sample_ids: tuple[str, ...]
    responses: np.ndarray
    unmasked: np.ndarray
    masked: Mapping[str, np.ndarray]
    missing: Mapping[str, np.ndarray] = field(default_factory=dict)
    units: tuple | None = None
    times: tuple | None = None
    features_raw: Mapping[str, tuple] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "sample_ids", tuple(str(s) for s in self.sample_ids))
        object.__setattr__(self, "responses", np.asarray(self.responses))
        object.__setattr__(self, "unmasked", np.asarray(self.unmasked, dtype=float))
        object.__setattr__(self, "masked", dict(self.masked))
        object.__setattr__(self, "missing", dict(self.missing))
        validate_bundle_invariants(self)

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.manifest.feature_names

    def missing_mask(self, feature: str) -> np.ndarray:
        mask = self.missing.get(feature)
        if mask is None:
            return np.zeros(self.n_samples, dtype=bool)
        return mask

    def masked_rows(self, feature: str) -> tuple[np.ndarray, np.ndarray]:
        """Row indices retained for this feature and the masked predictions there."""
        if feature not in self.masked:
            raise BundleError(f"feature {feature!r} not present in bundle")
        rows = np.flatnonzero(~self.missing_mask(feature))
        return rows, self.masked[feature][rows]

    def subset(self, keep: np.ndarray) -> "PredictionBundle":
        """A filtered copy retaining rows where keep is True."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.n_samples,):
            raise ValueError("keep mask must be one boolean per sample")
        if not keep.any():
            raise ValueError("empty selection")
        idx = np.flatnonzero(keep)
        return PredictionBundle(
            manifest=self.manifest,
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            responses=self.responses[idx],
            unmasked=self.unmasked[idx],
            masked={k: v[idx] for k, v in self.masked.items()},
            missing={k: v[idx] for k, v in self.missing.items()},
            units=tuple(self.units[i] for i in idx) if self.units is not None else None,
            times=tuple(self.times[i] for i in idx) if self.times is not None else None,
            features_raw=(
                {k: tuple(v[i] for i in idx) for k, v in self.features_raw.items()}
                if self.features_raw is not None
                else None
            ),
        )


def validate_bundle_invariants(bundle: PredictionBundle) -> None:
    """Alignment, shape, finiteness, and probability invariants; raises BundleError."""
    man = bundle.manifest
    n = bundle.n_samples
    if n < 1:
        raise BundleError("bundle has no samples")
    if len(set(bundle.sample_ids)) != n:
        raise BundleError("duplicate sample ids")
    if bundle.responses.shape[0] != n:
        raise BundleError("responses misaligned with sample ids")

    multiclass = man.loss.name == "multiclass_cross_entropy"
    want_shape = (n, man.n_classes) if multiclass else (n,)

    def check_preds(name: str, arr: np.ndarray, rows: np.ndarray) -> None:
        if arr.shape != want_shape:
            raise BundleError(f"{name}: prediction shape {arr.shape} != expected {want_shape}")
        vals = arr[rows]
        if not np.isfinite(vals).all():
            raise BundleError(f"{name}: non-finite prediction values")
        if multiclass:
            sums = vals.sum(axis=-1)
            off = np.abs(sums - 1.0)
            if off.size and off.max() > 1e-6:
                i = rows[int(off.argmax())]
                raise BundleError(
                    f"{name}: probability row for sample {bundle.sample_ids[i]!r} sums to "
                    f"{sums[int(off.argmax())]:.8f}, not 1 within 1e-6"
                )

    all_rows = np.arange(n)
    check_preds("unmasked", bundle.unmasked, all_rows)

    if set(bundle.masked) != set(man.feature_names):
        missing_tables = sorted(set(man.feature_names) - set(bundle.masked))
        extra = sorted(set(bundle.masked) - set(man.feature_names))
        raise BundleError(f"masked tables mismatch: missing {missing_tables}, unexpected {extra}")
    for feature in man.feature_names:
        mask = bundle.missing_mask(feature)
        if mask.shape != (n,):
            raise BundleError(f"missing flags for {feature!r} misaligned")
        rows = np.flatnonzero(~mask)
        check_preds(f"masked/{feature}", np.asarray(bundle.masked[feature], dtype=float), rows)

    for feature in bundle.missing:
        if feature not in man.feature_names:
            raise BundleError(f"missing.csv column {feature!r} is not a declared feature")

    if multiclass:
        resp = bundle.responses
        if not np.issubdtype(resp.dtype, np.integer):
            raise BundleError("multiclass responses must be integer class indices")
        if resp.min() < 0 or resp.max() >= man.n_classes:
            raise BundleError("class index outside the declared class list")

    if man.panel:
        if bundle.units is None or bundle.times is None:
            raise BundleError("panel bundle without unit/time columns")
        if len(bundle.units) != n or len(bundle.times) != n:
            raise BundleError("unit/time columns misaligned")
        pairs = set(zip(bundle.units, bundle.times))
        if len(pairs) != n:
            raise BundleError("duplicate (unit, time) pairs in panel")
    if bundle.features_raw is not None:
        for col, vals in bundle.features_raw.items():
            if len(vals) != n:
                raise BundleError(f"features.csv column {col!r} misaligned")


def _read_table(path: str) -> tuple[list[str], list[list[str]]]:
    if not os.path.exists(path):
        raise BundleError(f"{path}: table not found")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise BundleError(f"{path}:1: empty table") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise BundleError(f"{path}:{lineno}: {len(row)} cells, header has {len(header)}")
            rows.append(row)
    return header, rows


def _parse_float(path: str, lineno: int, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise BundleError(f"{path}:{lineno}: not a number: {text!r}") from None


def _pred_columns(manifest: Manifest) -> list[str]:
    if manifest.loss.name == "multiclass_cross_entropy":
        return [f"p{i}" for i in range(manifest.n_classes)]
    return ["prediction"]


def _read_predictions(path: str, manifest: Manifest) -> dict[str, np.ndarray]:
    header, rows = _read_table(path)
    want = ["sample_id"] + _pred_columns(manifest)
    if header != want:
        raise BundleError(f"{path}:1: header {header} != expected {want}")
    out: dict[str, np.ndarray] = {}
    for lineno, row in enumerate(rows, start=2):
        sid = row[0]
        if sid in out:
            raise BundleError(f"{path}:{lineno}: duplicate sample id {sid!r}")
        vals = [_parse_float(path, lineno, c) for c in row[1:]]
        out[sid] = np.array(vals[0] if len(vals) == 1 else vals)
    return out


def _align(
    path: str, table: dict[str, np.ndarray], sample_ids: Sequence[str], skip: np.ndarray, manifest: Manifest
) -> np.ndarray:
    """Order table rows by sample_ids; rows flagged in skip may be absent (NaN-filled)."""
    extra = set(table) - set(sample_ids)
    if extra:
        raise BundleError(f"{path}: unknown sample id {sorted(extra)[0]!r}")
    multiclass = manifest.loss.name == "multiclass_cross_entropy"
    width = manifest.n_classes
    out = np.full((len(sample_ids), width) if multiclass else (len(sample_ids),), np.nan)
    for i, sid in enumerate(sample_ids):
        if sid in table:
            out[i] = table[sid]
        elif not skip[i]:
            raise BundleError(f"{path}: sample id {sid!r} present in unmasked but absent here")
    return out


def parse_bundle(path: str) -> PredictionBundle:
    """Read and eagerly validate a bundle directory."""
    manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise BundleError(f"{manifest_path}: manifest not found")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BundleError(f"{manifest_path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    manifest = Manifest.from_dict(raw, where=manifest_path)

    # responses
    resp_path = os.path.join(path, "responses.csv")
    header, rows = _read_table(resp_path)
    want = ["sample_id"] + (["unit", "time"] if manifest.panel else []) + ["response"]
    if header != want:
        raise BundleError(f"{resp_path}:1: header {header} != expected {want}")
    sample_ids: list[str] = []
    units: list[str] = []
    times: list[str] = []
    resp_vals: list = []
    multiclass = manifest.loss.name == "multiclass_cross_entropy"
    class_index = {c: i for i, c in enumerate(manifest.classes)} if multiclass else {}
    seen = set()
    for lineno, row in enumerate(rows, start=2):
        sid = row[0]
        if sid in seen:
            raise BundleError(f"{resp_path}:{lineno}: duplicate sample id {sid!r}")
        seen.add(sid)
        sample_ids.append(sid)
        if manifest.panel:
            units.append(row[1])
            times.append(row[2])
        raw_resp = row[-1]
        if multiclass:
            if raw_resp not in class_index:
                raise BundleError(f"{resp_path}:{lineno}: unknown class label {raw_resp!r}")
            resp_vals.append(class_index[raw_resp])
        else:
            resp_vals.append(_parse_float(resp_path, lineno, raw_resp))
    if not sample_ids:
        raise BundleError(f"{resp_path}: no samples")
    responses = np.array(resp_vals, dtype=int if multiclass else float)
    id_pos = {sid: i for i, sid in enumerate(sample_ids)}

    # missing flags (parsed before masked tables, which may omit flagged ids)
    missing: dict[str, np.ndarray] = {}
    miss_path = os.path.join(path, "missing.csv")
    if os.path.exists(miss_path):
        header, rows = _read_table(miss_path)
        if header[0] != "sample_id":
            raise BundleError(f"{miss_path}:1: first column must be sample_id")
        for col in header[1:]:
            if col not in manifest.feature_names:
                raise BundleError(f"{miss_path}:1: column {col!r} is not a declared feature")
            missing[col] = np.zeros(len(sample_ids), dtype=bool)
        for lineno, row in enumerate(rows, start=2):
            sid = row[0]
            if sid not in id_pos:
                raise BundleError(f"{miss_path}:{lineno}: unknown sample id {sid!r}")
            for col, cell in zip(header[1:], row[1:]):
                if cell not in ("0", "1"):
                    raise BundleError(f"{miss_path}:{lineno}: flags must be 0 or 1, got {cell!r}")
                missing[col][id_pos[sid]] = cell == "1"

    # predictions
    no_skip = np.zeros(len(sample_ids), dtype=bool)
    unmasked_tbl = _read_predictions(os.path.join(path, "unmasked.csv"), manifest)
    unmasked = _align(os.path.join(path, "unmasked.csv"), unmasked_tbl, sample_ids, no_skip, manifest)
    masked: dict[str, np.ndarray] = {}
    for feature in manifest.feature_names:
        fpath = os.path.join(path, "masked", f"{feature}.csv")
        table = _read_predictions(fpath, manifest)
        skip = missing.get(feature, no_skip)
        masked[feature] = _align(fpath, table, sample_ids, skip, manifest)

    # optional raw feature columns
    features_raw = None
    feat_path = os.path.join(path, "features.csv")
    if os.path.exists(feat_path):
        header, rows = _read_table(feat_path)
        if header[0] != "sample_id":
            raise BundleError(f"{feat_path}:1: first column must be sample_id")
        cols: dict[str, list] = {c: [None] * len(sample_ids) for c in header[1:]}
        for lineno, row in enumerate(rows, start=2):
            sid = row[0]
            if sid not in id_pos:
                raise BundleError(f"{feat_path}:{lineno}: unknown sample id {sid!r}")
            for col, cell in zip(header[1:], row[1:]):
                cols[col][id_pos[sid]] = cell
        for col, vals in cols.items():
            holes = [sample_ids[i] for i, v in enumerate(vals) if v is None]
            if holes:
                raise BundleError(f"{feat_path}: column {col!r} lacks a value for id {holes[0]!r}")
        features_raw = {c: tuple(v) for c, v in cols.items()}

    return PredictionBundle(
        manifest=manifest,
        sample_ids=tuple(sample_ids),
        responses=responses,
        unmasked=unmasked,
        masked=masked,
        missing=missing,
        units=tuple(units) if manifest.panel else None,
        times=tuple(times) if manifest.panel else None,
        features_raw=features_raw,
    )


def _fmt(value) -> str:
    return repr(float(value))


def _write_predictions(path: str, manifest: Manifest, sample_ids, arr: np.ndarray, skip: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["sample_id"] + _pred_columns(manifest)) + "\n")
        multiclass = manifest.loss.name == "multiclass_cross_entropy"
        for i, sid in enumerate(sample_ids):
            if skip[i]:
                continue
            cells = [_fmt(v) for v in (arr[i] if multiclass else [arr[i]])]
            fh.write(",".join([sid] + cells) + "\n")


def write_bundle(bundle: PredictionBundle, path: str) -> str:
    """Materialize a validated bundle to a directory; returns the path."""
    man = bundle.manifest
    os.makedirs(os.path.join(path, "masked"), exist_ok=True)
    with open(os.path.join(path, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(man.to_dict(), fh, indent=2)
        fh.write("\n")

    with open(os.path.join(path, "responses.csv"), "w", encoding="utf-8", newline="\n") as fh:
        head = ["sample_id"] + (["unit", "time"] if man.panel else []) + ["response"]
        fh.write(",".join(head) + "\n")
        multiclass = man.loss.name == "multiclass_cross_entropy"
        for i, sid in enumerate(bundle.sample_ids):
            cells = [sid]
            if man.panel:
                cells += [str(bundle.units[i]), str(bundle.times[i])]
            if multiclass:
                cells.append(str(man.classes[int(bundle.responses[i])]))
            else:
                cells.append(_fmt(bundle.responses[i]))
            fh.write(",".join(cells) + "\n")

    no_skip = np.zeros(bundle.n_samples, dtype=bool)
    _write_predictions(os.path.join(path, "unmasked.csv"), man, bundle.sample_ids, bundle.unmasked, no_skip)
    for feature in man.feature_names:
        _write_predictions(
            os.path.join(path, "masked", f"{feature}.csv"),
            man,
            bundle.sample_ids,
            bundle.masked[feature],
            bundle.missing_mask(feature),
        )

    if bundle.missing:
        cols = sorted(bundle.missing)
        with open(os.path.join(path, "missing.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["sample_id"] + cols) + "\n")
            for i, sid in enumerate(bundle.sample_ids):
                flags = ["1" if bundle.missing[c][i] else "0" for c in cols]
                fh.write(",".join([sid] + flags) + "\n")

    if bundle.features_raw is not None:
        cols = list(bundle.features_raw)
        with open(os.path.join(path, "features.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(["sample_id"] + cols) + "\n")
            for i, sid in enumerate(bundle.sample_ids):
                fh.write(",".join([sid] + [str(bundle.features_raw[c][i]) for c in cols]) + "\n")
    return path
