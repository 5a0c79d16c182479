"""ROC, AUC, operating-point metrics, and report round-trip tests."""

import hashlib
import json

import numpy as np
import pytest

from conftest import make_blob_dataset
from memepop.ensemble import TrainConfig, fit_model
from memepop.errors import DataError
from memepop.evaluate import (
    EvalReport,
    auc,
    classification_metrics,
    dataset_fingerprint,
    emit_report,
    evaluate_model,
    load_report,
    load_scores,
    roc_points,
    tune_threshold,
)


def pairwise_auc(scores, labels):
    """Independent oracle: count correctly ranked (positive, negative)
    pairs directly, ties worth half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                total += 1.0
            elif sp == sn:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestRocPoints:
    def test_hand_example(self):
        points = roc_points([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0])
        assert points == [(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]

    def test_perfect_separation_hits_corner(self):
        points = roc_points([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert (0.0, 1.0) in points
        assert points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)

    def test_all_tied_scores(self):
        assert roc_points([0.5, 0.5, 0.5], [1, 0, 1]) == [(0.0, 0.0), (1.0, 1.0)]

    def test_tied_run_collapses_to_one_point(self):
        points = roc_points([0.5, 0.5, 0.3], [1, 0, 1])
        assert points == [(0.0, 0.0), (1.0, 0.5), (1.0, 1.0)]

    def test_monotone_on_random_fixtures(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            n = int(rng.integers(5, 60))
            scores = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            points = roc_points(scores, labels)
            for (fa, ta), (fb, tb) in zip(points, points[1:]):
                assert fb >= fa and tb >= ta
            assert points[0] == (0.0, 0.0)
            assert points[-1] == (1.0, 1.0)

    def test_errors(self):
        with pytest.raises(DataError):
            roc_points([], [])
        with pytest.raises(DataError):
            roc_points([0.5, 0.6], [1, 1])
        with pytest.raises(DataError):
            roc_points([0.5], [1, 0])


class TestAuc:
    def test_hand_example(self):
        assert auc([0.8, 0.6, 0.4, 0.2], [1, 0, 1, 0]) == 0.75

    def test_perfect_and_inverted(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
        assert auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_tied_is_half(self):
        assert auc([0.4] * 6, [1, 0, 0, 1, 0, 1]) == 0.5

    def test_matches_pair_counting_exactly(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            n = int(rng.integers(4, 50))
            # coarse score grid forces plenty of ties
            scores = rng.choice([0.0, 0.2, 0.4, 0.6, 0.8, 1.0], size=n)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            assert auc(scores, labels) == pairwise_auc(scores, labels)

    def test_equals_trapezoid_area(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(6, 80))
            scores = rng.random(n).round(2)
            labels = rng.integers(0, 2, size=n)
            if labels.min() == labels.max():
                labels[0] = 1 - labels[0]
            points = roc_points(scores, labels)
            fprs = [f for f, _ in points]
            tprs = [t for _, t in points]
            area = float(np.trapezoid(tprs, fprs))
            assert auc(scores, labels) == pytest.approx(area, abs=1e-12)

    def test_label_flip_complements(self):
        scores = [0.1, 0.5, 0.5, 0.8, 0.9]
        labels = np.array([0, 1, 0, 0, 1])
        assert auc(scores, labels) + auc(scores, 1 - labels) == pytest.approx(1.0)

    def test_monotone_transform_invariant(self):
        scores = np.array([0.1, 0.4, 0.4, 0.7, 0.9])
        labels = [0, 1, 0, 1, 1]
        base = auc(scores, labels)
        assert auc(scores * 100.0 - 3.0, labels) == base
        assert auc(np.exp(scores), labels) == base

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            auc([0.2, 0.8], [1, 1])


class TestClassificationMetrics:
    def test_hand_confusion(self):
        labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
        scores = [0.9, 0.7, 0.3, 0.6, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
        m = classification_metrics(scores, labels, 0.5)
        assert m["confusion"] == {"tp": 2, "fp": 1, "fn": 1, "tn": 6}
        assert m["precision"] == pytest.approx(2 / 3)
        assert m["recall"] == pytest.approx(2 / 3)
        assert m["accuracy"] == pytest.approx(0.8)
        assert m["f1"] == pytest.approx(2 / 3)
        assert m["precision_status"] == "ok"

    def test_f1_is_harmonic_mean(self):
        labels = [1, 0, 1, 1, 0, 0, 1, 0]
        scores = [0.9, 0.8, 0.7, 0.2, 0.6, 0.1, 0.55, 0.4]
        m = classification_metrics(scores, labels, 0.5)
        p, r = m["precision"], m["recall"]
        assert m["f1"] == pytest.approx(2 * p * r / (p + r), abs=1e-12)

    def test_zero_threshold_full_recall(self):
        labels = [1, 0, 1, 0]
        m = classification_metrics([0.9, 0.1, 0.2, 0.6], labels, 0.0)
        assert m["recall"] == 1.0
        assert m["confusion"]["tn"] == 0 and m["confusion"]["fn"] == 0
        assert m["precision"] == pytest.approx(0.5)

    def test_no_positive_predictions_undefined(self):
        m = classification_metrics([0.2, 0.4, 0.3], [1, 0, 1], 1.0)
        assert m["precision"] is None
        assert m["f1"] is None
        assert m["precision_status"] == "undefined"
        assert m["recall"] == 0.0

    def test_score_equal_to_threshold_is_positive(self):
        m = classification_metrics([0.5, 0.2], [1, 0], 0.5)
        assert m["confusion"]["tp"] == 1

    def test_zero_f1_when_nothing_right(self):
        m = classification_metrics([0.9, 0.1], [0, 1], 0.5)
        assert m["precision"] == 0.0
        assert m["recall"] == 0.0
        assert m["f1"] == 0.0

    @pytest.mark.parametrize("t", [-0.1, 1.5])
    def test_threshold_range_enforced(self, t):
        with pytest.raises(DataError):
            classification_metrics([0.5], [1], t)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            classification_metrics([], [], 0.5)


class TestTuneThreshold:
    def test_picks_f1_maximizer(self):
        # threshold 0.6 catches both positives with no false positives
        assert tune_threshold([0.9, 0.6, 0.2], [1, 1, 0]) == 0.6

    def test_tie_takes_highest_threshold(self):
        # 0.8 and 0.2 both give F1 = 2/3; the scan keeps the higher one
        scores = [0.8, 0.6, 0.4, 0.2]
        labels = [1, 0, 0, 1]
        assert tune_threshold(scores, labels) == 0.8

    def test_no_other_threshold_beats_it(self):
        rng = np.random.default_rng(5)
        scores = rng.random(40).round(2)
        labels = rng.integers(0, 2, size=40)
        labels[0], labels[1] = 0, 1
        best_t = tune_threshold(scores, labels)
        best_f1 = classification_metrics(scores, labels, best_t)["f1"]
        for t in np.unique(scores):
            f1 = classification_metrics(scores, labels, float(t))["f1"]
            assert f1 is None or f1 <= best_f1 + 1e-15

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            tune_threshold([0.5, 0.6], [1, 1])


class TestFingerprint:
    def test_checksum_is_sha256_of_joined_ids(self):
        fp = dataset_fingerprint(["a", "b", "c"], [1, 0, 1])
        assert fp["rows"] == 3
        assert fp["positives"] == 2
        assert fp["checksum"] == hashlib.sha256(b"a,b,c").hexdigest()

    def test_order_sensitive(self):
        a = dataset_fingerprint(["a", "b"], [0, 0])
        b = dataset_fingerprint(["b", "a"], [0, 0])
        assert a["checksum"] != b["checksum"]


@pytest.fixture(scope="module")
def fitted():
    ds = make_blob_dataset(n=150, seed=31)
    model = fit_model(ds, TrainConfig(seed=4, n_trees=15, max_depth=4))
    return ds, model


class TestEvaluateModel:
    def test_report_contents(self, fitted):
        ds, model = fitted
        report = evaluate_model(
            model, ds, threshold=0.5, experiment_id="unit", flags=("demo",)
        )
        assert report.experiment_id == "unit"
        assert report.model_kind == "forest"
        assert report.blocks == ["text", "image", "metadata"]
        assert set(report.metrics) == {"accuracy", "precision", "recall", "f1", "auc"}
        assert report.fingerprint["rows"] == ds.n_rows
        assert report.flags == ["demo"]
        assert sum(report.confusion.values()) == ds.n_rows

    def test_importances_ranked(self, fitted):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        ranking = report.importances
        assert len(ranking) == ds.n_features
        assert ranking == sorted(ranking, key=lambda kv: (-kv[1], kv[0]))

    def test_round_trip_dict(self, fitted):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        clone = EvalReport.from_dict(report.to_dict())
        assert clone == report

    def test_validate_catches_bad_metric(self, fitted):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        report.metrics["auc"] = 1.7
        with pytest.raises(DataError, match="auc"):
            report.validate()

    def test_validate_catches_confusion_mismatch(self, fitted):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        report.confusion["tn"] += 1
        with pytest.raises(DataError, match="confusion"):
            report.validate()

    def test_validate_catches_bad_roc(self, fitted):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        report.roc[0] = (0.1, 0.0)
        with pytest.raises(DataError, match="ROC"):
            report.validate()

    def test_from_dict_rejects_other_kinds(self):
        with pytest.raises(DataError):
            EvalReport.from_dict({"kind": "memepop-model", "version": 1})


class TestEmitReport:
    def test_files_written(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        written = emit_report(report, tmp_path)
        assert [p.name for p in written] == [
            "unit.report.json",
            "unit.roc.tsv",
            "unit.importances.tsv",
        ]
        payload = json.loads((tmp_path / "unit.report.json").read_text())
        assert payload["kind"] == "memepop-report"

    def test_roc_table_matches_report(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        emit_report(report, tmp_path)
        lines = (tmp_path / "unit.roc.tsv").read_text().splitlines()
        assert lines[0] == "fpr\ttpr"
        parsed = [tuple(float(x) for x in l.split("\t")) for l in lines[1:]]
        assert parsed == report.roc

    def test_importances_table_descending(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        emit_report(report, tmp_path)
        lines = (tmp_path / "unit.importances.tsv").read_text().splitlines()
        assert lines[0] == "feature\timportance"
        values = [float(l.split("\t")[1]) for l in lines[1:]]
        assert values == sorted(values, reverse=True)

    def test_color_table_optional(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        written = emit_report(
            report, tmp_path, color_means=[("pure-black", 0.25), ("gray", 0.1)]
        )
        color_path = tmp_path / "unit.colors.tsv"
        assert color_path in written
        assert color_path.read_text() == (
            "color\tmean_fraction\npure-black\t0.25\ngray\t0.1\n"
        )

    def test_rewrite_byte_identical(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        d1, d2 = tmp_path / "one", tmp_path / "two"
        emit_report(report, d1)
        emit_report(load_report(d1 / "unit.report.json"), d2)
        for name in ("unit.report.json", "unit.roc.tsv", "unit.importances.tsv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_load_report_round_trip(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        emit_report(report, tmp_path)
        assert load_report(tmp_path / "unit.report.json") == report

    def test_unwritable_target(self, fitted, tmp_path):
        ds, model = fitted
        report = evaluate_model(model, ds, experiment_id="unit")
        blocker = tmp_path / "blocker"
        blocker.write_text("file, not a directory")
        with pytest.raises(DataError):
            emit_report(report, blocker / "sub")

    def test_load_report_errors(self, tmp_path):
        with pytest.raises(DataError):
            load_report(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(DataError):
            load_report(bad)


class TestLoadScores:
    def test_tsv_with_header(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("post_id\tscore\naa\t0.25\nbb\t0.75\n")
        assert load_scores(path) == {"aa": 0.25, "bb": 0.75}

    def test_csv_without_header(self, tmp_path):
        path = tmp_path / "scores.csv"
        path.write_text("aa,0.5\nbb,1.0\n")
        assert load_scores(path) == {"aa": 0.5, "bb": 1.0}

    def test_comments_and_blanks_skipped(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("# external model outputs\n\naa\t0.5\n")
        assert load_scores(path) == {"aa": 0.5}

    def test_bad_arity(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("aa\t0.5\t0.6\n")
        with pytest.raises(DataError, match="post_id and score"):
            load_scores(path)

    def test_non_numeric_score(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("aa\thigh\n")
        with pytest.raises(DataError, match="bad score"):
            load_scores(path)

    def test_out_of_range_score(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("aa\t1.5\n")
        with pytest.raises(DataError, match="outside"):
            load_scores(path)

    def test_empty_table(self, tmp_path):
        path = tmp_path / "scores.tsv"
        path.write_text("# nothing here\n")
        with pytest.raises(DataError, match="no scores"):
            load_scores(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_scores(tmp_path / "absent.tsv")
