import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from telegraph.metrics import class_prf1, confusion_counts, ece, evaluate_probabilities, mcc


class TestClassPRF1:
    def test_perfect_predictions(self):
        report = class_prf1([1, 0, 1, 0], [1, 0, 1, 0])
        for scores in report.per_class.values():
            assert scores.precision == scores.recall == scores.f1 == 1.0
        assert report.mcc == 1.0

    def test_hand_computed_counts(self):
        # TP=2, FP=1, TN=3, FN=0 with factual positive
        preds = [1, 1, 1, 0, 0, 0]
        labels = [1, 1, 0, 0, 0, 0]
        report = class_prf1(preds, labels)
        assert (report.tp, report.fp, report.tn, report.fn) == (2, 1, 3, 0)
        factual = report.per_class["factual"]
        assert factual.precision == pytest.approx(2 / 3)
        assert factual.recall == 1.0
        assert factual.f1 == pytest.approx(0.8)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            class_prf1([1], [1, 0])

    def test_empty_input(self):
        with pytest.raises(ValueError):
            class_prf1([], [])

    def test_degenerate_flagged_not_raised(self):
        report = class_prf1([0, 0], [0, 0])
        assert report.per_class["factual"].precision == 0.0
        assert "factual_precision" in report.degenerate

    def test_f1_is_harmonic_mean_everywhere(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            preds = rng.integers(0, 2, size=n).tolist()
            labels = rng.integers(0, 2, size=n).tolist()
            report = class_prf1(preds, labels)
            for scores in report.per_class.values():
                p, r = scores.precision, scores.recall
                expected = 0.0 if p + r == 0 else 2 * p * r / (p + r)
                assert scores.f1 == pytest.approx(expected, abs=1e-12)

    def test_class_complement_symmetry(self):
        rng = np.random.default_rng(11)
        preds = rng.integers(0, 2, size=30).tolist()
        labels = rng.integers(0, 2, size=30).tolist()
        report = class_prf1(preds, labels)
        flipped = class_prf1([1 - p for p in preds], [1 - y for y in labels])
        assert report.per_class["misinformation"] == flipped.per_class["factual"]
        assert report.per_class["factual"] == flipped.per_class["misinformation"]

    def test_permutation_invariance(self):
        preds = [1, 0, 1, 1, 0]
        labels = [1, 1, 0, 1, 0]
        base = class_prf1(preds, labels)
        perm = [3, 0, 4, 2, 1]
        shuffled = class_prf1([preds[i] for i in perm], [labels[i] for i in perm])
        assert base.to_record() == shuffled.to_record()


class TestMCC:
    def test_perfect(self):
        assert mcc(5, 0, 7, 0) == 1.0

    def test_all_one_class_is_zero(self):
        assert mcc(12, 8, 0, 0) == 0.0

    def test_hand_computed(self):
        assert mcc(2, 1, 3, 0) == pytest.approx(6 / math.sqrt(72), abs=1e-9)
        assert mcc(2, 1, 3, 0) == pytest.approx(0.7071, abs=1e-4)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            mcc(-1, 0, 1, 0)

    def test_zero_total_rejected(self):
        with pytest.raises(ValueError):
            mcc(0, 0, 0, 0)

    def test_class_swap_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            tp, fp, tn, fn = (int(x) for x in rng.integers(0, 10, size=4))
            if tp + fp + tn + fn == 0:
                continue
            # swapping classes swaps tp<->tn and fp<->fn
            assert mcc(tp, fp, tn, fn) == pytest.approx(mcc(tn, fn, tp, fp), abs=1e-12)


class TestECE:
    def test_single_bin_hand_computed(self):
        # two predictions: 0.9 correct, 0.6 incorrect -> |0.5 - 0.75| = 0.25
        assert ece([0.9, 0.6], [True, False], num_bins=1) == pytest.approx(0.25, abs=1e-12)

    def test_perfectly_calibrated(self):
        # in each bin, confidence equals empirical accuracy
        confidences = [0.75, 0.75, 0.75, 0.75]
        correct = [True, True, True, False]
        assert ece(confidences, correct, num_bins=10) == pytest.approx(0.0, abs=1e-12)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            ece([], [], num_bins=10)

    def test_out_of_range_confidence(self):
        with pytest.raises(ValueError):
            ece([1.2], [True], num_bins=10)

    def test_edge_belongs_to_higher_bin(self):
        # 0.5 with B=2 lands in the upper bin alongside 0.75
        value = ece([0.5, 0.75], [True, False], num_bins=2)
        assert value == pytest.approx(abs(0.5 - 0.625), abs=1e-12)

    def test_top_edge_in_top_bin(self):
        assert ece([1.0], [True], num_bins=10) == pytest.approx(0.0, abs=1e-12)

    @settings(max_examples=80, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=50
        )
    )
    def test_single_bin_equals_accuracy_confidence_gap(self, rows):
        confidences = [c for c, _ in rows]
        correct = [ok for _, ok in rows]
        expected = abs(np.mean(correct) - np.mean(confidences))
        assert ece(confidences, correct, num_bins=1) == pytest.approx(expected, abs=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        st.lists(
            st.tuples(st.floats(0.0, 1.0), st.booleans()), min_size=1, max_size=50
        ),
        st.integers(min_value=1, max_value=20),
    )
    def test_bounded(self, rows, bins):
        value = ece([c for c, _ in rows], [ok for _, ok in rows], num_bins=bins)
        assert 0.0 <= value <= 1.0


class TestEvaluateProbabilities:
    def test_confidence_is_top_class_probability(self):
        # p=0.2 -> predicted misinformation with confidence 0.8
        report = evaluate_probabilities([0.2], [0], num_bins=1)
        assert report.ece == pytest.approx(abs(1.0 - 0.8), abs=1e-12)

    def test_threshold(self):
        report = evaluate_probabilities([0.6, 0.4], [1, 0])
        assert (report.tp, report.tn) == (1, 1)

    def test_record_keys_fixed(self):
        report = evaluate_probabilities([0.9, 0.1], [1, 0])
        record = report.to_record()
        for key in (
            "n",
            "accuracy",
            "mcc",
            "ece",
            "factual_precision",
            "factual_recall",
            "factual_f1",
            "misinformation_precision",
            "misinformation_recall",
            "misinformation_f1",
        ):
            assert key in record


def test_confusion_rejects_non_binary():
    with pytest.raises(ValueError):
        confusion_counts([2], [1])
