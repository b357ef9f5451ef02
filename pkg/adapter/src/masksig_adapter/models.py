"""Model loading and batch prediction.

Three entry-point forms are understood:

    path/to/model.json       linear or logistic coefficient file
    path/to/model.pkl        pickled fitted model (predict / predict_proba)
    package.module:attr      importable object with a batch predict method

Whatever the form, the loaded object must expose predict(X) on a 2-d float
array, and for classification losses predict_proba(X) is preferred when it
exists. The adapter never inspects model internals beyond these methods.
"""

from __future__ import annotations

import importlib
import json
import os
import pickle
from dataclasses import dataclass

import numpy as np


class ModelError(ValueError):
    """A model that cannot be loaded or returns unusable predictions."""


@dataclass(frozen=True)
class LinearModel:
    """y = X @ coefficients + intercept."""

    coefficients: tuple[float, ...]
    intercept: float = 0.0

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return X @ np.asarray(self.coefficients, dtype=float) + self.intercept


@dataclass(frozen=True)
class LogisticModel:
    """P(y = 1 | x) through a sigmoid over a linear score."""

    coefficients: tuple[float, ...]
    intercept: float = 0.0

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        score = X @ np.asarray(self.coefficients, dtype=float) + self.intercept
        return 1.0 / (1.0 + np.exp(-score))

    predict_proba = predict


def _load_json_model(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    kind = raw.get("kind")
    if kind not in ("linear", "logistic"):
        raise ModelError(f"{path}: unknown model kind {kind!r} (expected linear or logistic)")
    try:
        coefs = tuple(float(c) for c in raw["coefficients"])
        intercept = float(raw.get("intercept", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"{path}: {exc}") from exc
    cls = LinearModel if kind == "linear" else LogisticModel
    return cls(coefficients=coefs, intercept=intercept)


def load_model(entry: str):
    """Resolve a model entry point to an object with a predict method."""
    if os.path.exists(entry):
        if entry.endswith(".json"):
            model = _load_json_model(entry)
        elif entry.endswith((".pkl", ".pickle")):
            try:
                with open(entry, "rb") as fh:
                    model = pickle.load(fh)
            except Exception as exc:
                raise ModelError(f"{entry}: cannot unpickle model: {exc}") from exc
        else:
            raise ModelError(f"{entry}: unrecognized model file type (expected .json, .pkl, .pickle)")
    elif ":" in entry:
        module_name, _, attr_path = entry.partition(":")
        try:
            obj = importlib.import_module(module_name)
        except ImportError as exc:
            raise ModelError(f"cannot import module {module_name!r}: {exc}") from exc
        for attr in attr_path.split("."):
            try:
                obj = getattr(obj, attr)
            except AttributeError:
                raise ModelError(f"module {module_name!r} has no attribute path {attr_path!r}") from None
        model = obj
    else:
        raise ModelError(
            f"model entry {entry!r} is neither an existing file nor an import path of the form module:attr"
        )
    if not callable(getattr(model, "predict", None)):
        raise ModelError(f"model from {entry!r} has no callable predict method")
    return model


def batch_predict(model, X: np.ndarray, loss_name: str, n_classes: int) -> np.ndarray:
    """Evaluate the model and coerce its output to the bundle's prediction shape.

    Regression losses expect one value per row. binary_cross_entropy expects
    a probability per row; a two-column probability matrix is accepted and
    its second column taken. multiclass_cross_entropy expects one probability
    row per sample over the declared classes.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    classification = loss_name in ("binary_cross_entropy", "multiclass_cross_entropy")
    fn = model.predict
    if classification and callable(getattr(model, "predict_proba", None)):
        fn = model.predict_proba
    out = np.asarray(fn(X), dtype=float)

    if loss_name == "multiclass_cross_entropy":
        if out.shape != (n, n_classes):
            raise ModelError(
                f"model returned shape {out.shape} for {n} samples; expected ({n}, {n_classes})"
            )
        if not np.isfinite(out).all():
            raise ModelError("model returned non-finite class probabilities")
        if out.min() < 0.0 or np.abs(out.sum(axis=1) - 1.0).max() > 1e-6:
            raise ModelError("multiclass predictions are not probability rows summing to 1")
        return out

    if out.ndim == 2 and out.shape == (n, 1):
        out = out[:, 0]
    if loss_name == "binary_cross_entropy" and out.ndim == 2 and out.shape == (n, 2):
        sums = out.sum(axis=1)
        if out.min() >= 0.0 and np.abs(sums - 1.0).max() <= 1e-6:
            out = out[:, 1]
        else:
            raise ModelError("two-column binary output is not a probability matrix")
    if out.shape != (n,):
        raise ModelError(f"model returned shape {out.shape} for {n} samples; expected ({n},)")
    if not np.isfinite(out).all():
        raise ModelError("model returned non-finite predictions")
    if loss_name == "binary_cross_entropy" and (out.min() < 0.0 or out.max() > 1.0):
        raise ModelError("binary predictions must be probabilities in [0, 1]")
    return out
