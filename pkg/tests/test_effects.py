"""Losses, reference values, masking semantics, and effect construction."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from masksig.bundle import Manifest, PredictionBundle
from masksig.effects import (
    ABSOLUTE,
    BINARY_CROSS_ENTROPY,
    MULTICLASS_CROSS_ENTROPY,
    SQUARED,
    EffectVector,
    FeatureSpec,
    LossKind,
    MaskPlan,
    apply_mask,
    compute_effects,
    loss,
    reference_value,
)


def one_feature_bundle(masked, unmasked, y, kind=SQUARED, mask_mode="conditional", missing=None):
    n = len(y)
    manifest = Manifest(features=(FeatureSpec("f1"),), loss=kind, mask_mode=mask_mode)
    return PredictionBundle(
        manifest=manifest,
        sample_ids=tuple(f"s{i}" for i in range(n)),
        responses=np.asarray(y, dtype=float),
        unmasked=np.asarray(unmasked, dtype=float),
        masked={"f1": np.asarray(masked, dtype=float)},
        missing=missing or {},
    )


class TestLoss:
    def test_squared(self):
        assert loss(SQUARED, 2.0, 1.0) == 1.0

    def test_absolute(self):
        assert loss(ABSOLUTE, -1.5, 1.0) == 2.5

    def test_binary_cross_entropy_half(self):
        assert loss(BINARY_CROSS_ENTROPY, 0.5, 1.0) == pytest.approx(math.log(2.0), abs=1e-15)

    def test_binary_cross_entropy_is_nll(self):
        # -[y ln p + (1-y) ln(1-p)] at p=0.9
        assert loss(BINARY_CROSS_ENTROPY, 0.9, 0.0) == pytest.approx(-math.log(0.1), rel=1e-12)

    def test_binary_cross_entropy_clamps(self):
        val = loss(BINARY_CROSS_ENTROPY, 0.0, 1.0)
        assert math.isfinite(val) and val == pytest.approx(-math.log(1e-12), rel=1e-12)

    def test_pinball_zero_residual(self):
        assert loss(LossKind("pinball", 0.5), 3.0, 3.0) == 0.0

    def test_pinball_asymmetry(self):
        kind = LossKind("pinball", 0.25)
        assert loss(kind, 0.0, 1.0) == 0.25  # under-prediction weighted by tau
        assert loss(kind, 1.0, 0.0) == 0.75

    def test_multiclass_picks_true_class(self):
        probs = np.array([[0.2, 0.3, 0.5]])
        assert loss(MULTICLASS_CROSS_ENTROPY, probs, np.array([2]))[0] == pytest.approx(
            -math.log(0.5), rel=1e-12
        )

    def test_multiclass_rejects_bad_rows(self):
        with pytest.raises(ValueError, match="sum to 1"):
            loss(MULTICLASS_CROSS_ENTROPY, np.array([[0.5, 0.4]]), np.array([0]))

    def test_multiclass_rejects_bad_index(self):
        with pytest.raises(ValueError, match="class index"):
            loss(MULTICLASS_CROSS_ENTROPY, np.array([[0.5, 0.5]]), np.array([2]))

    def test_losses_nonnegative_vectorized(self):
        preds = np.linspace(-3, 3, 41)
        ys = np.linspace(3, -3, 41)
        for kind in (SQUARED, ABSOLUTE, LossKind("pinball", 0.1)):
            assert np.all(loss(kind, preds, ys) >= 0.0)

    def test_parse_and_spell(self):
        assert LossKind.parse("squared") == SQUARED
        assert LossKind.parse("pinball:0.25") == LossKind("pinball", 0.25)
        kind = LossKind.parse("pinball:0.25")
        assert LossKind.parse(kind.spelled()) == kind
        with pytest.raises(ValueError):
            LossKind.parse("pinball")
        with pytest.raises(ValueError):
            LossKind.parse("hinge")


class TestReferenceValue:
    def test_continuous_mean(self):
        assert reference_value(FeatureSpec("a"), [1.0, 2.0, 3.0]) == 2.0

    def test_binary_dummy_flips(self):
        spec = FeatureSpec("d", "discrete", support=(0, 1))
        train = [0, 1, 1, 0]
        assert reference_value(spec, train, current_value=1) == 0
        assert reference_value(spec, train, current_value=0) == 1

    def test_categorical_adjusted_mode(self):
        spec = FeatureSpec("c", "categorical", support=("A", "B", "C"))
        train = ["A"] * 5 + ["B"] * 3 + ["C"] * 2
        assert reference_value(spec, train, current_value="A") == "B"
        assert reference_value(spec, train, current_value="B") == "A"

    def test_tie_breaks_to_earliest_support(self):
        spec = FeatureSpec("c", "categorical", support=("A", "B", "C"))
        train = ["B", "C", "B", "C"]
        assert reference_value(spec, train, current_value="A") == "B"

    def test_unseen_current_value(self):
        spec = FeatureSpec("c", "categorical", support=("A", "B"))
        assert reference_value(spec, ["A", "A", "B"], current_value="Z") == "A"

    def test_empty_training_errors(self):
        with pytest.raises(ValueError, match="empty training"):
            reference_value(FeatureSpec("a"), [])

    def test_degenerate_support_errors(self):
        spec = FeatureSpec("d", "discrete", support=(1,))
        with pytest.raises(ValueError, match="degenerate support"):
            reference_value(spec, [1, 1], current_value=1)

    def test_adjusted_mode_needs_current(self):
        spec = FeatureSpec("d", "discrete", support=(0, 1))
        with pytest.raises(ValueError, match="current value"):
            reference_value(spec, [0, 1])


class TestApplyMask:
    def test_conditional_substitutes_target(self):
        plan = MaskPlan(mode="conditional")
        masked, unmasked = apply_mask([1.0, 2.0, 3.0], plan, 2, [np.nan, 9.0, np.nan])
        assert masked.tolist() == [1.0, 9.0, 3.0]
        assert unmasked.tolist() == [1.0, 2.0, 3.0]

    def test_unconditional_restores_target(self):
        plan = MaskPlan(mode="unconditional")
        masked, unmasked = apply_mask([1.0, 2.0, 3.0], plan, 2, [0.0, 0.0, 0.0])
        assert masked.tolist() == [0.0, 0.0, 0.0]
        assert unmasked.tolist() == [0.0, 2.0, 0.0]

    def test_reference_equal_to_value_is_identity(self):
        plan = MaskPlan(mode="conditional")
        masked, unmasked = apply_mask([1.0, 2.0], plan, 1, [1.0, np.nan])
        assert masked.tolist() == unmasked.tolist()

    def test_target_out_of_range(self):
        plan = MaskPlan(mode="conditional")
        with pytest.raises(ValueError, match="target index"):
            apply_mask([1.0, 2.0], plan, 0, [0.0, 0.0])
        with pytest.raises(ValueError, match="target index"):
            apply_mask([1.0, 2.0], plan, 3, [0.0, 0.0])

    def test_missing_reference_errors(self):
        with pytest.raises(ValueError, match="missing reference"):
            apply_mask([1.0, 2.0], MaskPlan(mode="conditional"), 1, [np.nan, 0.0])
        with pytest.raises(ValueError, match="reference for every feature"):
            apply_mask([1.0, 2.0], MaskPlan(mode="unconditional"), 1, [0.0, np.nan])


class TestMaskPlan:
    def test_default_rules_by_kind(self):
        plan = MaskPlan.default_for(
            [FeatureSpec("a"), FeatureSpec("d", "discrete", support=(0, 1))]
        )
        assert plan.reference == {"a": "training_mean", "d": "adjusted_mode"}

    def test_rule_kind_mismatch(self):
        plan = MaskPlan(reference={"a": "adjusted_mode"})
        with pytest.raises(ValueError, match="adjusted_mode"):
            plan.validate_for([FeatureSpec("a")])
        plan = MaskPlan(reference={"d": "training_mean"})
        with pytest.raises(ValueError, match="training_mean"):
            plan.validate_for([FeatureSpec("d", "discrete", support=(0, 1))])

    def test_fixed_rule_needs_value(self):
        with pytest.raises(ValueError, match="fixed"):
            MaskPlan(reference={"a": "fixed"})


class TestComputeEffects:
    def test_squared_example(self):
        bundle = one_feature_bundle(masked=[2.0], unmasked=[1.0], y=[1.0])
        assert compute_effects(bundle, "f1").effects.tolist() == [1.0]

    def test_cross_entropy_example(self):
        bundle = one_feature_bundle(
            masked=[0.5], unmasked=[0.9], y=[1.0], kind=BINARY_CROSS_ENTROPY
        )
        expected = -math.log(0.5) + math.log(0.9)
        assert compute_effects(bundle, "f1").effects[0] == pytest.approx(expected, rel=1e-12)

    def test_identical_streams_give_zero(self):
        preds = [0.3, 0.7, 0.9]
        bundle = one_feature_bundle(preds, preds, [1.0, 0.0, 1.0], kind=BINARY_CROSS_ENTROPY)
        assert np.all(compute_effects(bundle, "f1").effects == 0.0)

    def test_unconditional_mode_flips_subtraction(self):
        cond = one_feature_bundle([2.0], [1.0], [1.0], mask_mode="conditional")
        uncond = one_feature_bundle([2.0], [1.0], [1.0], mask_mode="unconditional")
        assert compute_effects(cond, "f1").effects[0] == 1.0
        assert compute_effects(uncond, "f1").effects[0] == -1.0

    def test_missing_rows_are_excluded_feature_wise(self):
        missing = {"f1": np.array([False, True, False])}
        bundle = one_feature_bundle(
            masked=[2.0, np.nan, 5.0], unmasked=[1.0, 1.0, 1.0], y=[1.0, 1.0, 1.0], missing=missing
        )
        vec = compute_effects(bundle, "f1")
        assert vec.n_excluded_missing == 1
        assert vec.sample_ids == ("s0", "s2")
        assert vec.effects.tolist() == [1.0, 16.0]

    def test_loss_override(self):
        bundle = one_feature_bundle([3.0], [1.0], [0.0])
        assert compute_effects(bundle, "f1", ABSOLUTE).effects[0] == 2.0

    def test_unknown_feature(self):
        bundle = one_feature_bundle([1.0], [1.0], [1.0])
        with pytest.raises(Exception, match="not present"):
            compute_effects(bundle, "nope")

    @given(
        st.lists(
            st.tuples(
                st.floats(-50, 50),
                st.floats(-50, 50),
                st.floats(-50, 50),
            ),
            min_size=1,
            max_size=40,
        )
    )
    @settings(max_examples=150, deadline=None)
    def test_antisymmetric_under_stream_swap(self, rows):
        a = [r[0] for r in rows]
        b = [r[1] for r in rows]
        y = [r[2] for r in rows]
        fwd = compute_effects(one_feature_bundle(a, b, y), "f1").effects
        rev = compute_effects(one_feature_bundle(b, a, y), "f1").effects
        assert np.array_equal(fwd, -rev)


class TestEffectVector:
    def test_validates_alignment(self):
        with pytest.raises(ValueError, match="sample_ids"):
            EffectVector("f", np.array([1.0, 2.0]), ("a",))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            EffectVector("f", np.array([1.0, np.inf]), ("a", "b"))

    def test_rejects_empty(self):
        with pytest.raises(ValueError, match="nonempty"):
            EffectVector("f", np.array([]), ())

    def test_len(self):
        assert len(EffectVector("f", np.array([1.0, 2.0]), ("a", "b"))) == 2


class TestFeatureSpec:
    def test_discrete_requires_support(self):
        with pytest.raises(ValueError, match="support"):
            FeatureSpec("d", "discrete")

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            FeatureSpec("x", "ordinal")
