"""Export a fitted model as a bundle directory.

The exporter reads the train and test csv files, computes one reference
value per feature from the training split (per sample for adjusted-mode
features, since the reference excludes the sample's own value), evaluates
the model on the unmasked and per-feature masked inputs for the chosen mask
mode, and writes the bundle files. Only predictions cross this boundary;
every statistic is computed downstream from the files.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from masksig_adapter.config import AdapterConfig, FeatureConfig, parse_loss
from masksig_adapter.models import batch_predict, load_model

SCHEMA_ID = "masksig-bundle/1"


class ExportError(ValueError):
    """A dataset, model, or plan problem discovered during export."""


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    if not os.path.exists(path):
        raise ExportError(f"{path}: file not found")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ExportError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ExportError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            rows.append(row)
    if not rows:
        raise ExportError(f"{path}: no data rows")
    return header, rows


def _column(path: str, header: list[str], rows: list[list[str]], name: str) -> list[str]:
    try:
        idx = header.index(name)
    except ValueError:
        raise ExportError(f"{path}: lacks column {name!r}") from None
    return [row[idx] for row in rows]


def _float_column(path: str, header: list[str], rows: list[list[str]], name: str) -> np.ndarray:
    idx = header.index(name)
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        try:
            out[i] = float(row[idx])
        except ValueError:
            raise ExportError(f"{path}:{i + 2}: column {name!r}: not a number: {row[idx]!r}") from None
    if not np.isfinite(out).all():
        raise ExportError(f"{path}: column {name!r} has non-finite values")
    return out


def _feature_matrix(path: str, features: tuple[FeatureConfig, ...]) -> tuple[np.ndarray, list[str], list[list[str]]]:
    header, rows = _read_csv(path)
    cols = []
    for f in features:
        if f.name not in header:
            raise ExportError(f"{path}: lacks column {f.name!r}")
        cols.append(_float_column(path, header, rows, f.name))
    return np.column_stack(cols), header, rows


def reference_values(feature: FeatureConfig, training_values, current_values=None) -> np.ndarray:
    """Per-sample reference values for one feature.

    training_mean and fixed rules give a constant; adjusted_mode picks, for
    each current value, the most frequent training value among the support
    excluding that value, breaking ties toward the earliest support entry.
    The result always has one entry per test sample.
    """
    train = np.asarray(training_values, dtype=float)
    if train.size == 0:
        raise ExportError(f"feature {feature.name!r}: empty training values")
    rule = feature.rule
    if rule == "fixed":
        n = 1 if current_values is None else len(current_values)
        return np.full(n, float(feature.fixed_value))
    if rule == "training_mean":
        n = 1 if current_values is None else len(current_values)
        return np.full(n, float(np.mean(train)))
    if current_values is None:
        raise ExportError(f"feature {feature.name!r}: adjusted mode requires the current values")
    support = feature.support
    counts = {v: 0 for v in support}
    for v in train:
        if v in counts:
            counts[v] += 1
    out = np.empty(len(current_values))
    for i, cur in enumerate(np.asarray(current_values, dtype=float)):
        best = None
        best_count = -1
        for v in support:
            if v != cur and counts[v] > best_count:
                best, best_count = v, counts[v]
        if best is None:
            raise ExportError(f"feature {feature.name!r}: degenerate support")
        out[i] = best
    return out


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_predictions(path: str, sample_ids: list[str], preds: np.ndarray, pred_columns: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(["sample_id"] + pred_columns) + "\n")
        multi = preds.ndim == 2
        for i, sid in enumerate(sample_ids):
            cells = [_fmt(v) for v in (preds[i] if multi else [preds[i]])]
            fh.write(",".join([sid] + cells) + "\n")


def export_bundle(config: AdapterConfig) -> str:
    """Evaluate the configured model and write a bundle; returns its directory."""
    loss_name, _ = parse_loss(config.loss)
    n_classes = len(config.classes) if config.classes else 0
    model = load_model(config.model)

    train_X, train_header, train_rows = _feature_matrix(config.train_data, config.features)
    test_X, test_header, test_rows = _feature_matrix(config.test_data, config.features)
    n = test_X.shape[0]

    responses = _column(config.test_data, test_header, test_rows, config.response_column)
    if loss_name == "multiclass_cross_entropy":
        for i, label in enumerate(responses):
            if label not in config.classes:
                raise ExportError(
                    f"{config.test_data}:{i + 2}: unknown class label {label!r}"
                )
    elif loss_name == "binary_cross_entropy":
        vals = _float_column(config.test_data, test_header, test_rows, config.response_column)
        if not np.isin(vals, (0.0, 1.0)).all():
            raise ExportError(f"{config.test_data}: binary responses must be 0 or 1")
        responses = [_fmt(v) for v in vals]
    else:
        vals = _float_column(config.test_data, test_header, test_rows, config.response_column)
        responses = [_fmt(v) for v in vals]

    if config.sample_id_column is not None:
        sample_ids = _column(config.test_data, test_header, test_rows, config.sample_id_column)
        if len(set(sample_ids)) != n or any(not s for s in sample_ids):
            raise ExportError(f"{config.test_data}: sample ids must be unique and nonempty")
    else:
        sample_ids = [f"r{i:06d}" for i in range(n)]

    # one reference column per feature, per test sample
    refs = np.empty_like(test_X)
    for j, f in enumerate(config.features):
        refs[:, j] = reference_values(f, train_X[:, j], test_X[:, j])

    def predict(X: np.ndarray) -> np.ndarray:
        return batch_predict(model, X, loss_name, n_classes)

    if config.mask_mode == "conditional":
        shared = predict(test_X)  # full model, the stream without masking
        per_feature = {}
        for j, f in enumerate(config.features):
            masked_X = test_X.copy()
            masked_X[:, j] = refs[:, j]
            per_feature[f.name] = predict(masked_X)
    else:
        shared = predict(refs)  # all-masked baseline
        per_feature = {}
        for j, f in enumerate(config.features):
            restored = refs.copy()
            restored[:, j] = test_X[:, j]
            per_feature[f.name] = predict(restored)

    out = config.out_dir
    os.makedirs(os.path.join(out, "masked"), exist_ok=True)
    manifest: dict = {
        "schema": SCHEMA_ID,
        "loss": config.loss,
        "mask_mode": config.mask_mode,
        "alpha": config.alpha,
        "m0": config.m0,
        "panel": False,
        "features": [
            {"name": f.name, "kind": f.kind}
            | ({"support": list(f.support)} if f.support is not None else {})
            for f in config.features
        ],
    }
    if config.classes is not None:
        manifest["classes"] = list(config.classes)
    with open(os.path.join(out, "manifest.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    with open(os.path.join(out, "responses.csv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_id,response\n")
        for sid, resp in zip(sample_ids, responses):
            fh.write(f"{sid},{resp}\n")

    pred_columns = [f"p{i}" for i in range(n_classes)] if loss_name == "multiclass_cross_entropy" else ["prediction"]
    _write_predictions(os.path.join(out, "unmasked.csv"), sample_ids, shared, pred_columns)
    for f in config.features:
        _write_predictions(
            os.path.join(out, "masked", f"{f.name}.csv"), sample_ids, per_feature[f.name], pred_columns
        )
    return out
