"""Prediction bundle directory format: parsing, validation, round trips."""

import json
import math
import textwrap

import numpy as np
import pytest

from masksig.bundle import (
    SCHEMA_ID,
    BundleError,
    Manifest,
    PredictionBundle,
    parse_bundle,
    write_bundle,
)
from masksig.effects import (
    BINARY_CROSS_ENTROPY,
    MULTICLASS_CROSS_ENTROPY,
    SQUARED,
    FeatureSpec,
    LossKind,
)


def two_feature_manifest(**kwargs):
    return Manifest(
        features=(FeatureSpec("x1"), FeatureSpec("x2", "categorical", ("a", "b"))),
        loss=SQUARED,
        **kwargs,
    )


def tiny_bundle(**kwargs):
    defaults = dict(
        manifest=two_feature_manifest(),
        sample_ids=("s1", "s2", "s3"),
        responses=np.array([1.0, 2.0, 3.0]),
        unmasked=np.array([1.1, 1.9, 3.2]),
        masked={"x1": np.array([1.5, 2.5, 3.5]), "x2": np.array([1.0, 2.0, 3.0])},
    )
    defaults.update(kwargs)
    return PredictionBundle(**defaults)


def write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(textwrap.dedent(text), encoding="utf-8")


def write_minimal_files(root, shuffle_masked=False):
    write_text(
        root / "manifest.json",
        """\
        {"schema": "masksig-bundle/1",
         "loss": "squared",
         "features": [{"name": "x1"}, {"name": "x2", "kind": "categorical", "support": ["a", "b"]}]}
        """,
    )
    write_text(
        root / "responses.csv",
        """\
        sample_id,response
        s1,1.0
        s2,2.0
        s3,3.0
        """,
    )
    write_text(
        root / "unmasked.csv",
        """\
        sample_id,prediction
        s1,1.25
        s2,2.25
        s3,3.25
        """,
    )
    rows = ["s1,10.0", "s2,20.0", "s3,30.0"]
    if shuffle_masked:
        rows = [rows[2], rows[0], rows[1]]
    write_text(root / "masked" / "x1.csv", "sample_id,prediction\n" + "\n".join(rows) + "\n")
    write_text(
        root / "masked" / "x2.csv",
        """\
        sample_id,prediction
        s1,1.0
        s2,2.0
        s3,3.0
        """,
    )


class TestManifest:
    def test_rejects_unknown_schema(self):
        with pytest.raises(BundleError, match="schema"):
            two_feature_manifest(schema="masksig-bundle/99")

    def test_requires_features(self):
        with pytest.raises(BundleError, match="no features"):
            Manifest(features=(), loss=SQUARED)

    def test_duplicate_feature_names(self):
        with pytest.raises(BundleError, match="duplicate"):
            Manifest(features=(FeatureSpec("x"), FeatureSpec("x")), loss=SQUARED)

    def test_filesystem_unsafe_name(self):
        with pytest.raises(BundleError, match="filesystem-safe"):
            Manifest(features=(FeatureSpec("a/b"),), loss=SQUARED)

    def test_unknown_mask_mode(self):
        with pytest.raises(BundleError, match="mask mode"):
            two_feature_manifest(mask_mode="marginal")

    def test_multiclass_needs_classes(self):
        with pytest.raises(BundleError, match="class labels"):
            Manifest(features=(FeatureSpec("x"),), loss=MULTICLASS_CROSS_ENTROPY)

    def test_alpha_domain(self):
        with pytest.raises(BundleError, match="alpha"):
            two_feature_manifest(alpha=1.0)

    def test_dict_round_trip(self):
        man = Manifest(
            features=(FeatureSpec("x1"), FeatureSpec("x2", "discrete", (0, 1, 2))),
            loss=LossKind.parse("pinball:0.25"),
            mask_mode="unconditional",
            alpha=0.01,
            m0=0.5,
            panel=True,
        )
        again = Manifest.from_dict(json.loads(json.dumps(man.to_dict())))
        assert again.feature_names == man.feature_names
        assert again.loss == man.loss
        assert again.mask_mode == "unconditional"
        assert again.alpha == 0.01 and again.m0 == 0.5 and again.panel

    def test_from_dict_defaults(self):
        man = Manifest.from_dict(
            {"schema": SCHEMA_ID, "loss": "squared", "features": [{"name": "x"}]}
        )
        assert man.mask_mode == "conditional"
        assert man.alpha == 0.05 and man.m0 == 0.0 and not man.panel

    def test_from_dict_reports_location(self):
        with pytest.raises(BundleError, match="here.json"):
            Manifest.from_dict({"schema": SCHEMA_ID, "loss": "squared"}, where="here.json")


class TestParse:
    def test_minimal_bundle(self, tmp_path):
        write_minimal_files(tmp_path)
        bundle = parse_bundle(str(tmp_path))
        assert bundle.sample_ids == ("s1", "s2", "s3")
        assert np.array_equal(bundle.responses, [1.0, 2.0, 3.0])
        assert np.array_equal(bundle.unmasked, [1.25, 2.25, 3.25])
        assert np.array_equal(bundle.masked["x1"], [10.0, 20.0, 30.0])

    def test_rows_aligned_by_id_not_file_order(self, tmp_path):
        write_minimal_files(tmp_path, shuffle_masked=True)
        bundle = parse_bundle(str(tmp_path))
        assert np.array_equal(bundle.masked["x1"], [10.0, 20.0, 30.0])

    def test_missing_flags_allow_absent_rows(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(
            tmp_path / "missing.csv",
            """\
            sample_id,x1
            s2,1
            """,
        )
        write_text(
            tmp_path / "masked" / "x1.csv",
            """\
            sample_id,prediction
            s1,10.0
            s3,30.0
            """,
        )
        bundle = parse_bundle(str(tmp_path))
        assert bundle.missing_mask("x1").tolist() == [False, True, False]
        assert math.isnan(bundle.masked["x1"][1])
        rows, preds = bundle.masked_rows("x1")
        assert rows.tolist() == [0, 2]
        assert preds.tolist() == [10.0, 30.0]

    def test_missing_flagged_rows_may_still_be_present(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(
            tmp_path / "missing.csv",
            """\
            sample_id,x1
            s2,1
            """,
        )
        bundle = parse_bundle(str(tmp_path))
        rows, _ = bundle.masked_rows("x1")
        assert rows.tolist() == [0, 2]

    def test_features_csv_parsed(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(
            tmp_path / "features.csv",
            """\
            sample_id,region,x1
            s1,north,0.5
            s2,south,1.5
            s3,north,2.5
            """,
        )
        bundle = parse_bundle(str(tmp_path))
        assert bundle.features_raw["region"] == ("north", "south", "north")


class TestParseErrors:
    def test_absent_manifest(self, tmp_path):
        with pytest.raises(BundleError, match="manifest not found"):
            parse_bundle(str(tmp_path))

    def test_invalid_json_carries_line(self, tmp_path):
        write_text(tmp_path / "manifest.json", '{"schema": }\n')
        with pytest.raises(BundleError, match="manifest.json:1"):
            parse_bundle(str(tmp_path))

    def test_empty_table(self, tmp_path):
        write_minimal_files(tmp_path)
        (tmp_path / "responses.csv").write_text("", encoding="utf-8")
        with pytest.raises(BundleError, match="responses.csv:1: empty"):
            parse_bundle(str(tmp_path))

    def test_ragged_row_carries_line(self, tmp_path):
        write_minimal_files(tmp_path)
        with open(tmp_path / "responses.csv", "a", encoding="utf-8") as fh:
            fh.write("s4,1.0,extra\n")
        with pytest.raises(BundleError, match="responses.csv:5: 3 cells"):
            parse_bundle(str(tmp_path))

    def test_wrong_prediction_header(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "unmasked.csv", "sample_id,pred\ns1,1.0\ns2,2.0\ns3,3.0\n")
        with pytest.raises(BundleError, match="unmasked.csv:1: header"):
            parse_bundle(str(tmp_path))

    def test_duplicate_response_id(self, tmp_path):
        write_minimal_files(tmp_path)
        with open(tmp_path / "responses.csv", "a", encoding="utf-8") as fh:
            fh.write("s1,9.0\n")
        with pytest.raises(BundleError, match="responses.csv:5: duplicate sample id 's1'"):
            parse_bundle(str(tmp_path))

    def test_non_numeric_prediction(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "unmasked.csv", "sample_id,prediction\ns1,oops\ns2,2.0\ns3,3.0\n")
        with pytest.raises(BundleError, match="unmasked.csv:2: not a number: 'oops'"):
            parse_bundle(str(tmp_path))

    def test_unknown_id_in_masked_table(self, tmp_path):
        write_minimal_files(tmp_path)
        with open(tmp_path / "masked" / "x1.csv", "a", encoding="utf-8") as fh:
            fh.write("s9,1.0\n")
        with pytest.raises(BundleError, match="unknown sample id 's9'"):
            parse_bundle(str(tmp_path))

    def test_unflagged_absence_in_masked_table(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "masked" / "x1.csv", "sample_id,prediction\ns1,10.0\ns3,30.0\n")
        with pytest.raises(BundleError, match="'s2' present in unmasked but absent here"):
            parse_bundle(str(tmp_path))

    def test_missing_csv_unknown_column(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "missing.csv", "sample_id,zz\ns1,0\n")
        with pytest.raises(BundleError, match="'zz' is not a declared feature"):
            parse_bundle(str(tmp_path))

    def test_missing_csv_bad_flag(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "missing.csv", "sample_id,x1\ns1,yes\n")
        with pytest.raises(BundleError, match="flags must be 0 or 1"):
            parse_bundle(str(tmp_path))

    def test_missing_csv_unknown_id(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "missing.csv", "sample_id,x1\nzz,1\n")
        with pytest.raises(BundleError, match="missing.csv:2: unknown sample id"):
            parse_bundle(str(tmp_path))

    def test_features_csv_hole(self, tmp_path):
        write_minimal_files(tmp_path)
        write_text(tmp_path / "features.csv", "sample_id,region\ns1,north\n")
        with pytest.raises(BundleError, match="lacks a value for id 's2'"):
            parse_bundle(str(tmp_path))

    def test_absent_masked_table(self, tmp_path):
        write_minimal_files(tmp_path)
        (tmp_path / "masked" / "x2.csv").unlink()
        with pytest.raises(BundleError, match="x2.csv: table not found"):
            parse_bundle(str(tmp_path))


class TestInvariants:
    def test_duplicate_sample_ids(self):
        with pytest.raises(BundleError, match="duplicate sample ids"):
            tiny_bundle(sample_ids=("s1", "s1", "s3"))

    def test_misaligned_responses(self):
        with pytest.raises(BundleError, match="responses misaligned"):
            tiny_bundle(responses=np.array([1.0, 2.0]))

    def test_wrong_prediction_shape(self):
        with pytest.raises(BundleError, match="prediction shape"):
            tiny_bundle(unmasked=np.array([[1.0], [2.0], [3.0]]))

    def test_non_finite_unmasked(self):
        with pytest.raises(BundleError, match="non-finite"):
            tiny_bundle(unmasked=np.array([1.0, np.nan, 3.0]))

    def test_masked_table_set_must_match(self):
        with pytest.raises(BundleError, match="masked tables mismatch"):
            tiny_bundle(masked={"x1": np.zeros(3)})

    def test_nan_tolerated_only_on_missing_rows(self):
        bundle = tiny_bundle(
            masked={"x1": np.array([1.0, np.nan, 3.0]), "x2": np.zeros(3)},
            missing={"x1": np.array([False, True, False])},
        )
        rows, _ = bundle.masked_rows("x1")
        assert rows.tolist() == [0, 2]
        with pytest.raises(BundleError, match="non-finite"):
            tiny_bundle(masked={"x1": np.array([1.0, np.nan, 3.0]), "x2": np.zeros(3)})

    def test_undeclared_missing_column(self):
        with pytest.raises(BundleError, match="not a declared feature"):
            tiny_bundle(missing={"zz": np.zeros(3, dtype=bool)})

    def test_subset_filters_consistently(self):
        bundle = tiny_bundle(missing={"x1": np.array([False, True, False])})
        sub = bundle.subset(np.array([True, False, True]))
        assert sub.sample_ids == ("s1", "s3")
        assert np.array_equal(sub.responses, [1.0, 3.0])
        assert sub.missing["x1"].tolist() == [False, False]

    def test_subset_rejects_empty(self):
        with pytest.raises(ValueError, match="empty selection"):
            tiny_bundle().subset(np.zeros(3, dtype=bool))

    def test_subset_rejects_bad_shape(self):
        with pytest.raises(ValueError, match="one boolean per sample"):
            tiny_bundle().subset(np.zeros(2, dtype=bool))


class TestMulticlass:
    def manifest(self):
        return Manifest(
            features=(FeatureSpec("x1"),),
            loss=MULTICLASS_CROSS_ENTROPY,
            classes=("low", "mid", "high"),
        )

    def bundle(self, **kwargs):
        probs = np.array([[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]])
        defaults = dict(
            manifest=self.manifest(),
            sample_ids=("s1", "s2"),
            responses=np.array([0, 2]),
            unmasked=probs,
            masked={"x1": probs[::-1].copy()},
        )
        defaults.update(kwargs)
        return PredictionBundle(**defaults)

    def test_valid_bundle(self):
        assert self.bundle().manifest.n_classes == 3

    def test_rows_must_sum_to_one(self):
        bad = np.array([[0.7, 0.2, 0.1], [0.1, 0.7, 0.1]])
        with pytest.raises(BundleError, match="sums to"):
            self.bundle(unmasked=bad)

    def test_integer_responses_required(self):
        with pytest.raises(BundleError, match="integer class indices"):
            self.bundle(responses=np.array([0.0, 2.0]))

    def test_class_index_range(self):
        with pytest.raises(BundleError, match="outside the declared class list"):
            self.bundle(responses=np.array([0, 3]))

    def test_label_round_trip(self, tmp_path):
        out = write_bundle(self.bundle(), str(tmp_path / "b"))
        again = parse_bundle(out)
        assert np.array_equal(again.responses, [0, 2])
        text = (tmp_path / "b" / "responses.csv").read_text(encoding="utf-8")
        assert "low" in text and "high" in text
        assert (tmp_path / "b" / "unmasked.csv").read_text(encoding="utf-8").splitlines()[
            0
        ] == "sample_id,p0,p1,p2"


class TestPanel:
    def bundle(self):
        man = Manifest(features=(FeatureSpec("x1"),), loss=SQUARED, panel=True)
        return PredictionBundle(
            manifest=man,
            sample_ids=("s1", "s2", "s3", "s4"),
            responses=np.arange(4.0),
            unmasked=np.arange(4.0),
            masked={"x1": np.arange(4.0) + 1},
            units=("u1", "u1", "u2", "u2"),
            times=("t1", "t2", "t1", "t2"),
        )

    def test_round_trip(self, tmp_path):
        out = write_bundle(self.bundle(), str(tmp_path / "b"))
        again = parse_bundle(out)
        assert again.units == ("u1", "u1", "u2", "u2")
        assert again.times == ("t1", "t2", "t1", "t2")

    def test_duplicate_unit_time(self):
        man = Manifest(features=(FeatureSpec("x1"),), loss=SQUARED, panel=True)
        with pytest.raises(BundleError, match="duplicate \\(unit, time\\)"):
            PredictionBundle(
                manifest=man,
                sample_ids=("s1", "s2"),
                responses=np.zeros(2),
                unmasked=np.zeros(2),
                masked={"x1": np.zeros(2)},
                units=("u1", "u1"),
                times=("t1", "t1"),
            )

    def test_panel_requires_unit_time(self):
        man = Manifest(features=(FeatureSpec("x1"),), loss=SQUARED, panel=True)
        with pytest.raises(BundleError, match="without unit/time"):
            PredictionBundle(
                manifest=man,
                sample_ids=("s1",),
                responses=np.zeros(1),
                unmasked=np.zeros(1),
                masked={"x1": np.zeros(1)},
            )


class TestRoundTrip:
    def test_floats_bit_exact(self, tmp_path):
        values = np.array([0.1 + 0.2, 1.0 / 3.0, -2.5e-17, 1e300])
        man = Manifest(features=(FeatureSpec("x1"),), loss=BINARY_CROSS_ENTROPY)
        bundle = PredictionBundle(
            manifest=man,
            sample_ids=("a", "b", "c", "d"),
            responses=np.array([0.0, 1.0, 1.0, 0.0]),
            unmasked=np.array([0.5, 0.25, 0.125, 0.0625]),
            masked={"x1": values},
        )
        again = parse_bundle(write_bundle(bundle, str(tmp_path / "b")))
        assert np.array_equal(again.masked["x1"], values)
        assert np.array_equal(again.unmasked, bundle.unmasked)

    def test_missing_and_features_round_trip(self, tmp_path):
        bundle = tiny_bundle(
            missing={"x1": np.array([False, True, False])},
            features_raw={"region": ("n", "s", "n")},
        )
        again = parse_bundle(write_bundle(bundle, str(tmp_path / "b")))
        assert again.missing_mask("x1").tolist() == [False, True, False]
        assert again.features_raw == {"region": ("n", "s", "n")}
        assert math.isnan(again.masked["x1"][1])

    def test_lf_endings(self, tmp_path):
        write_bundle(tiny_bundle(), str(tmp_path / "b"))
        for name in ("manifest.json", "responses.csv", "unmasked.csv"):
            raw = (tmp_path / "b" / name).read_bytes()
            assert b"\r" not in raw
