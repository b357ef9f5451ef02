"""Known-truth synthetic designs paired with oracle models.

The design has d = 19 features. The conditional mean is

    mu(x) = 3 + 4 x1 + x1 x2 + 3 x3^2 + 2 x4 x5 + 6 x6 + 2 sin(x7)
            + exp(x8) + 5 x9 + 3 x10 + 4 x11 + 5 x12,

so features 1..12 are influential and 13..19 are pure noise. Feature laws:
x1..x7 and x13..x16 standard normal with corr(x1,x6) = corr(x15,x16) = 0.85,
x8 uniform on [-1,1], x9 = 1{x2 + W < 0} for an independent standard normal
W, x10 Poisson(3), and x11, x12, x17..x19 Student t with 5 degrees of
freedom. Regression responses are mu(x) plus standard normal noise;
classification responses are Bernoulli with success probability
g(mu(x)) for the decreasing link g(w) = 1/(1 + e^w), which makes roughly
10 percent of labels positive.

The oracle model is the true mu (regression) or g(mu) (classification), so
the full testing pipeline runs without fitting anything: influential
features produce positive median effects and noise features produce exactly
zero effects.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from masksig.bundle import Manifest, PredictionBundle
from masksig.effects import BINARY_CROSS_ENTROPY, SQUARED, FeatureSpec
from masksig.report import emit_report, run_test
from masksig.sign_test import TestConfig

__all__ = [
    "D",
    "SyntheticSpec",
    "SyntheticData",
    "mu",
    "link",
    "oracle_predict",
    "generate",
    "feature_specs",
    "oracle_bundle",
    "bench_run",
]

D = 19
TASKS = ("regression", "classification")
ACTIVE_FEATURES = tuple(f"x{j}" for j in range(1, 13))
NULL_FEATURES = tuple(f"x{j}" for j in range(13, 20))

# features drawn inside the jointly normal block; 0 stands for the latent W
_GAUSS = (0, 1, 2, 3, 4, 5, 6, 7, 13, 14, 15, 16)
_BASE_CORR = {(1, 6): 0.85, (15, 16): 0.85}


@dataclass(frozen=True)
class SyntheticSpec:
    """Sampling plan for one synthetic dataset; d = 19 is fixed."""

    n_samples: int
    seed: int = 0
    task: str = "regression"
    correlation_overrides: Mapping[tuple[int, int], float] = field(default_factory=dict)
    distribution_overrides: Mapping[int, Callable] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        normalized = {}
        for pair, rho in self.correlation_overrides.items():
            a, b = sorted(int(k) for k in pair)
            if a == b or a not in _GAUSS or b not in _GAUSS or a == 0 or b == 0:
                raise ValueError(f"correlation override {pair}: both features must be distinct members of the jointly normal block")
            if not 0.0 <= float(rho) <= 1.0:
                raise ValueError(f"correlation override {pair}: value must lie in [0, 1]")
            normalized[(a, b)] = float(rho)
        object.__setattr__(self, "correlation_overrides", normalized)
        for j in self.distribution_overrides:
            if not 1 <= int(j) <= D:
                raise ValueError(f"distribution override for feature {j}: index outside 1..{D}")
        correlated = set()
        for a, b in list(_BASE_CORR) + list(normalized):
            correlated.update((a, b))
        clash = correlated & {int(j) for j in self.distribution_overrides}
        if clash:
            raise ValueError(f"features {sorted(clash)} are in a correlated pair and cannot take a distribution override")


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """One generated dataset: features x (n, 19) and responses y (n,)."""

    x: np.ndarray
    y: np.ndarray
    task: str


def mu(x) -> np.ndarray | float:
    """The true conditional mean; accepts one 19-vector or an (n, 19) array."""
    x = np.asarray(x, dtype=float)
    c = lambda j: x[..., j - 1]
    out = (
        3.0
        + 4.0 * c(1)
        + c(1) * c(2)
        + 3.0 * c(3) ** 2
        + 2.0 * c(4) * c(5)
        + 6.0 * c(6)
        + 2.0 * np.sin(c(7))
        + np.exp(c(8))
        + 5.0 * c(9)
        + 3.0 * c(10)
        + 4.0 * c(11)
        + 5.0 * c(12)
    )
    return float(out) if out.ndim == 0 else out


def link(w):
    """The decreasing logistic link g(w) = 1 / (1 + e^w)."""
    return expit(-np.asarray(w, dtype=float))


def oracle_predict(x, task: str):
    """The oracle model: mu for regression, g(mu) for classification."""
    if task == "regression":
        return mu(x)
    if task == "classification":
        return link(mu(x))
    raise ValueError(f"unknown task {task!r}")


def _correlation_matrix(spec: SyntheticSpec, members: Sequence[int]) -> np.ndarray:
    pos = {j: i for i, j in enumerate(members)}
    corr = np.eye(len(members))
    pairs = dict(_BASE_CORR)
    pairs.update(spec.correlation_overrides)
    for (a, b), rho in pairs.items():
        if a in pos and b in pos:
            corr[pos[a], pos[b]] = corr[pos[b], pos[a]] = rho
    return corr


def generate(spec: SyntheticSpec) -> SyntheticData:
    """Draw one dataset; equal specs give bit-identical output (Philox stream)."""
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    n = spec.n_samples
    x = np.empty((n, D))

    overridden = {int(j) for j in spec.distribution_overrides}
    members = [j for j in _GAUSS if j == 0 or j not in overridden]
    corr = _correlation_matrix(spec, members)
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise ValueError("correlation overrides do not form a positive definite matrix") from exc
    block = gen.standard_normal((n, len(members))) @ chol.T
    w = block[:, 0]
    for i, j in enumerate(members):
        if j > 0:
            x[:, j - 1] = block[:, i]

    x[:, 7] = gen.uniform(-1.0, 1.0, n)
    x[:, 9] = gen.poisson(3.0, n).astype(float)
    t5 = gen.standard_t(5.0, (n, 5))
    for i, j in enumerate((11, 12, 17, 18, 19)):
        x[:, j - 1] = t5[:, i]

    for j in sorted(overridden):
        draws = np.asarray(spec.distribution_overrides[j](gen, n), dtype=float)
        if draws.shape != (n,):
            raise ValueError(f"distribution override for feature {j} returned shape {draws.shape}, wanted ({n},)")
        x[:, j - 1] = draws
    if 9 not in overridden:
        x[:, 8] = (x[:, 1] + w < 0).astype(float)

    if spec.task == "regression":
        y = mu(x) + gen.standard_normal(n)
    else:
        y = (gen.random(n) < link(mu(x))).astype(float)
    return SyntheticData(x=x, y=y, task=spec.task)


def feature_specs(train_x: np.ndarray) -> tuple[FeatureSpec, ...]:
    """Feature declarations: x9 and x10 discrete, everything else continuous."""
    specs = []
    for j in range(1, D + 1):
        name = f"x{j}"
        if j == 9:
            specs.append(FeatureSpec(name, "discrete", support=(0.0, 1.0)))
        elif j == 10:
            support = tuple(sorted(set(np.asarray(train_x[:, 9], dtype=float).tolist())))
            specs.append(FeatureSpec(name, "discrete", support=support))
        else:
            specs.append(FeatureSpec(name, "continuous"))
    return tuple(specs)


def _adjusted_mode_refs(spec: FeatureSpec, train_values: np.ndarray, current: np.ndarray) -> np.ndarray:
    """Vectorized per-sample adjusted mode, identical to reference_value()."""
    support = list(spec.support)
    if len(support) < 2:
        raise ValueError(f"feature {spec.name!r}: degenerate support")
    counts = {v: 0 for v in support}
    for v in train_values.tolist():
        if v in counts:
            counts[v] += 1
    top1 = max(support, key=lambda v: (counts[v], -support.index(v)))
    rest = [v for v in support if v != top1]
    top2 = max(rest, key=lambda v: (counts[v], -rest.index(v)))
    return np.where(current == top1, top2, top1).astype(float)


def _reference_columns(train_x: np.ndarray, specs: Sequence[FeatureSpec], test_x: np.ndarray) -> list[np.ndarray]:
    """Per-feature reference columns aligned with the test rows."""
    n = test_x.shape[0]
    cols = []
    for j, spec in enumerate(specs):
        if spec.kind == "continuous":
            cols.append(np.full(n, float(np.mean(train_x[:, j]))))
        else:
            cols.append(_adjusted_mode_refs(spec, train_x[:, j], test_x[:, j]))
    return cols


def oracle_bundle(
    test_data: SyntheticData,
    train_data: SyntheticData,
    mask_mode: str = "conditional",
    alpha: float = 0.05,
    m0: float = 0.0,
) -> PredictionBundle:
    """An in-memory bundle from oracle-model predictions on masked inputs.

    References come from the training partition only. Under conditional
    masking the shared table holds oracle predictions on the raw test inputs;
    under unconditional masking it holds the all-masked baseline and each
    per-feature table restores just that feature.
    """
    if test_data.task != train_data.task:
        raise ValueError("train and test partitions come from different tasks")
    task = test_data.task
    specs = feature_specs(train_data.x)
    refs = _reference_columns(train_data.x, specs, test_data.x)
    x = test_data.x

    masked: dict[str, np.ndarray] = {}
    if mask_mode == "conditional":
        shared = oracle_predict(x, task)
        for j, spec in enumerate(specs):
            xm = x.copy()
            xm[:, j] = refs[j]
            masked[spec.name] = oracle_predict(xm, task)
    elif mask_mode == "unconditional":
        base = np.column_stack(refs)
        shared = oracle_predict(base, task)
        for j, spec in enumerate(specs):
            xr = base.copy()
            xr[:, j] = x[:, j]
            masked[spec.name] = oracle_predict(xr, task)
    else:
        raise ValueError(f"unknown mask mode {mask_mode!r}")

    manifest = Manifest(
        features=specs,
        loss=SQUARED if task == "regression" else BINARY_CROSS_ENTROPY,
        mask_mode=mask_mode,
        alpha=alpha,
        m0=m0,
    )
    n = x.shape[0]
    return PredictionBundle(
        manifest=manifest,
        sample_ids=tuple(f"s{i:07d}" for i in range(n)),
        responses=test_data.y,
        unmasked=np.asarray(shared, dtype=float),
        masked=masked,
    )


def bench_run(
    task: str,
    n_test: int,
    trials: int,
    alpha: float,
    seed: int,
    out_dir: str | None = None,
    n_train: int = 20000,
    mask_mode: str = "conditional",
) -> dict:
    """Repeated known-truth experiments; returns a rejection-count summary.

    Each trial draws fresh independent train/test partitions (per-trial seeds
    split off the root seed), builds an oracle bundle, and runs the full
    pipeline at the given level. When out_dir is set, per-trial reports and
    the summary are written there as json.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    states = np.random.SeedSequence(seed).generate_state(3 * trials, np.uint64)
    feature_names = tuple(f"x{j}" for j in range(1, D + 1))
    counts = {name: 0 for name in feature_names}
    per_trial = []
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
    for k in range(trials):
        train = generate(SyntheticSpec(n_train, seed=int(states[3 * k]), task=task))
        test = generate(SyntheticSpec(n_test, seed=int(states[3 * k + 1]), task=task))
        bundle = oracle_bundle(test, train, mask_mode=mask_mode, alpha=alpha)
        config = TestConfig(alpha=alpha, seed=int(states[3 * k + 2]))
        reports = run_test(bundle, config=config)
        rejected = sorted(r.feature for r in reports if r.decision == "reject")
        for name in rejected:
            counts[name] += 1
        per_trial.append({"trial": k, "rejected": rejected})
        if out_dir is not None:
            with open(os.path.join(out_dir, f"trial_{k:02d}.report.json"), "w", encoding="utf-8") as fh:
                fh.write(emit_report(reports, "json"))
    summary = {
        "task": task,
        "n_test": n_test,
        "n_train": n_train,
        "trials": trials,
        "alpha": alpha,
        "seed": seed,
        "mask_mode": mask_mode,
        "rejections": counts,
        "false_rejections_null_total": sum(counts[name] for name in NULL_FEATURES),
        "per_trial": per_trial,
    }
    if out_dir is not None:
        with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2)
            fh.write("\n")
    return summary
