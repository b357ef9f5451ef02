"""Export configuration: model entry point, datasets, feature kinds, mask plan.

A configuration is usually loaded from a json file. It names the model, the
train and test datasets (csv with a header row), the features the model
consumes in order, how each feature is masked, the loss the downstream test
should use, and the output directory for the bundle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

FEATURE_KINDS = ("continuous", "discrete", "categorical")
MASK_MODES = ("conditional", "unconditional")
REFERENCE_RULES = ("training_mean", "adjusted_mode", "fixed")
LOSS_NAMES = ("squared", "absolute", "binary_cross_entropy", "multiclass_cross_entropy", "pinball")


class ConfigError(ValueError):
    """A malformed adapter configuration."""


def parse_loss(spelled: str) -> tuple[str, float | None]:
    """Split a loss spelling into (name, tau); tau is set only for pinball."""
    if spelled.startswith("pinball:"):
        try:
            tau = float(spelled.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"bad pinball level in {spelled!r}") from None
        if not 0.0 < tau < 1.0:
            raise ConfigError("pinball level must lie strictly in (0, 1)")
        return "pinball", tau
    if spelled not in LOSS_NAMES or spelled == "pinball":
        raise ConfigError(f"unknown loss {spelled!r}")
    return spelled, None


@dataclass(frozen=True)
class FeatureConfig:
    """One model input: name, kind, and how its reference value is formed.

    reference defaults by kind: training_mean for continuous features,
    adjusted_mode for discrete and categorical ones. Supports must be
    numeric; categorical data has to be encoded as numbers before export.
    """

    name: str
    kind: str = "continuous"
    support: tuple[float, ...] | None = None
    reference: str | None = None
    fixed_value: float | None = None

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("feature name must be nonempty")
        if self.kind not in FEATURE_KINDS:
            raise ConfigError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind in ("discrete", "categorical"):
            if not self.support:
                raise ConfigError(f"feature {self.name!r}: {self.kind} kind requires a nonempty support")
            try:
                object.__setattr__(self, "support", tuple(float(v) for v in self.support))
            except (TypeError, ValueError):
                raise ConfigError(
                    f"feature {self.name!r}: support values must be numeric "
                    "(encode categories as numbers)"
                ) from None
        elif self.support is not None:
            raise ConfigError(f"feature {self.name!r}: continuous kind takes no support")
        rule = self.rule
        if rule not in REFERENCE_RULES:
            raise ConfigError(f"feature {self.name!r}: unknown reference rule {rule!r}")
        if rule == "fixed" and self.fixed_value is None:
            raise ConfigError(f"feature {self.name!r}: fixed rule without a fixed value")
        if self.kind == "continuous" and rule == "adjusted_mode":
            raise ConfigError(f"feature {self.name!r}: adjusted_mode is not defined for continuous kind")
        if self.kind in ("discrete", "categorical") and rule == "training_mean":
            raise ConfigError(f"feature {self.name!r}: training_mean is not defined for {self.kind} kind")

    @property
    def rule(self) -> str:
        if self.reference is not None:
            return self.reference
        return "training_mean" if self.kind == "continuous" else "adjusted_mode"


@dataclass(frozen=True)
class AdapterConfig:
    """Everything export_bundle needs, in one place."""

    model: str
    train_data: str
    test_data: str
    out_dir: str
    features: tuple[FeatureConfig, ...]
    response_column: str = "response"
    sample_id_column: str | None = None
    mask_mode: str = "conditional"
    loss: str = "squared"
    classes: tuple[str, ...] | None = None
    alpha: float = 0.05
    m0: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ConfigError("configuration declares no features")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate feature names")
        for name in names:
            if not all(c.isalnum() or c in "_.-" for c in name):
                raise ConfigError(f"feature name {name!r} is not filesystem-safe")
        if self.mask_mode not in MASK_MODES:
            raise ConfigError(f"unknown mask mode {self.mask_mode!r}")
        loss_name, _ = parse_loss(self.loss)
        if loss_name == "multiclass_cross_entropy":
            if not self.classes or len(self.classes) < 2:
                raise ConfigError("multiclass loss requires >= 2 class labels")
            object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly in (0, 1)")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    @classmethod
    def from_dict(cls, raw: dict, where: str = "config") -> "AdapterConfig":
        try:
            features = tuple(
                FeatureConfig(
                    name=f["name"],
                    kind=f.get("kind", "continuous"),
                    support=tuple(f["support"]) if "support" in f else None,
                    reference=f.get("reference"),
                    fixed_value=f.get("fixed_value"),
                )
                for f in raw["features"]
            )
            return cls(
                model=raw["model"],
                train_data=raw["train_data"],
                test_data=raw["test_data"],
                out_dir=raw["out_dir"],
                features=features,
                response_column=raw.get("response_column", "response"),
                sample_id_column=raw.get("sample_id_column"),
                mask_mode=raw.get("mask_mode", "conditional"),
                loss=raw.get("loss", "squared"),
                classes=tuple(raw["classes"]) if "classes" in raw else None,
                alpha=float(raw.get("alpha", 0.05)),
                m0=float(raw.get("m0", 0.0)),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from exc

    @classmethod
    def from_json(cls, path: str) -> "AdapterConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
        return cls.from_dict(raw, where=path)
