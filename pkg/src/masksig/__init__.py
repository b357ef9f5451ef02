"""Exact randomized sign tests for feature significance.

The package turns per-sample model predictions under masked and unmasked
inputs into feature effects, then delivers exact finite-sample inference on
the median effect: randomized sign tests, p-value intervals, confidence
intervals, power analysis, multiplicity adjustment, cross-fitting
aggregation, panel grouping, and a known-truth synthetic benchmark.
"""

from masksig.binom import BinomSpec
from masksig.effects import (
    EffectVector,
    FeatureSpec,
    LossKind,
    MaskPlan,
    apply_mask,
    compute_effects,
    loss,
    reference_value,
)
from masksig.sign_test import TestConfig, TestResult, decide, p_interval, realize_p
from masksig.intervals import CiResult, MedianScore, median_score, randomized_ci, two_sided_ci
from masksig.power import power, required_sample_size
from masksig.crossfit import FoldResult, bonferroni, crossfit_minp, crossfit_pooled
from masksig.panel import TrajectoryLossSpec, condition_subset, exclude_missing, group_effects
from masksig.bundle import BundleError, Manifest, PredictionBundle, parse_bundle, write_bundle
from masksig.report import FeatureReport, emit_report, run_test
from masksig.synth import SyntheticSpec, bench_run, generate, oracle_bundle

__version__ = "0.1.0"

__all__ = [
    "BinomSpec",
    "BundleError",
    "CiResult",
    "EffectVector",
    "FeatureReport",
    "FeatureSpec",
    "FoldResult",
    "LossKind",
    "Manifest",
    "MaskPlan",
    "MedianScore",
    "PredictionBundle",
    "SyntheticSpec",
    "TestConfig",
    "TestResult",
    "TrajectoryLossSpec",
    "apply_mask",
    "bench_run",
    "bonferroni",
    "compute_effects",
    "generate",
    "condition_subset",
    "crossfit_minp",
    "crossfit_pooled",
    "decide",
    "emit_report",
    "exclude_missing",
    "group_effects",
    "loss",
    "median_score",
    "oracle_bundle",
    "p_interval",
    "parse_bundle",
    "power",
    "randomized_ci",
    "realize_p",
    "reference_value",
    "required_sample_size",
    "run_test",
    "two_sided_ci",
    "write_bundle",
]
