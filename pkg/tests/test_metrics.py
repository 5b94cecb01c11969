"""Confusion arithmetic, interpolated AP, and mAP aggregation."""

import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pod_sentry import (
    DEFAULT_INTERPOLATION_POINTS,
    DEFAULT_IOU_THRESHOLDS,
    ApResult,
    ConfusionCounts,
    PrCurvePoint,
    UndefinedMetricError,
    accuracy,
    average_precision,
    interpolation_levels,
    mean_ap,
    precision_recall,
)

from .oracles import interpolated_ap


class TestConfusionCounts:
    def test_total(self):
        assert ConfusionCounts(tp=1, tn=2, fp=3, fn=4).total == 10

    def test_negative_rejected(self):
        with pytest.raises(ValueError, match="fp"):
            ConfusionCounts(tp=0, tn=0, fp=-1, fn=0)

    def test_non_integer_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=0.5, tn=0, fp=0, fn=0)

    def test_accuracy(self):
        counts = ConfusionCounts(tp=3, tn=5, fp=1, fn=1)
        assert accuracy(counts) == 8 / 10

    def test_accuracy_undefined_for_empty_counts(self):
        with pytest.raises(UndefinedMetricError):
            accuracy(ConfusionCounts(tp=0, tn=0, fp=0, fn=0))

    def test_precision_recall(self):
        precision, recall = precision_recall(ConfusionCounts(tp=3, tn=0, fp=1, fn=2))
        assert precision == 3 / 4
        assert recall == 3 / 5

    def test_precision_none_when_no_predictions(self):
        precision, recall = precision_recall(ConfusionCounts(tp=0, tn=0, fp=0, fn=5))
        assert precision is None
        assert recall == 0.0

    def test_recall_none_when_no_ground_truth(self):
        precision, recall = precision_recall(ConfusionCounts(tp=0, tn=0, fp=5, fn=0))
        assert precision == 0.0
        assert recall is None


class TestCurveAndApValues:
    def test_pr_point_range_checked(self):
        with pytest.raises(ValueError, match="precision"):
            PrCurvePoint(recall=0.5, precision=1.5, score_threshold=0.5)

    def test_ap_result_threshold_range_checked(self):
        with pytest.raises(ValueError, match="iou_threshold"):
            ApResult(class_id=0, iou_threshold=0.0, ap=0.5)

    def test_ap_result_value_range_checked(self):
        with pytest.raises(ValueError, match="ap"):
            ApResult(class_id=0, iou_threshold=0.5, ap=1.5)

    def test_ap_result_accepts_undefined_sentinel(self):
        assert ApResult(class_id=0, iou_threshold=0.5, ap=None).ap is None


class TestInterpolationLevels:
    def test_default_ladder(self):
        assert DEFAULT_IOU_THRESHOLDS == (
            0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95,
        )
        assert DEFAULT_INTERPOLATION_POINTS == 101

    def test_endpoints_and_spacing(self):
        levels = interpolation_levels(101)
        assert levels[0] == 0.0
        assert levels[-1] == 1.0
        assert len(levels) == 101
        expected = np.array([i / 100 for i in range(101)])
        assert np.array_equal(levels, expected)

    def test_requires_two_points(self):
        with pytest.raises(ValueError):
            interpolation_levels(1)


class TestAveragePrecision:
    def test_empty_curve_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            average_precision([])

    def test_single_point_at_half_recall(self):
        # levels 0.00..0.50 inclusive see precision 1, the remaining 50 see 0
        curve = [PrCurvePoint(recall=0.5, precision=1.0, score_threshold=0.5)]
        assert average_precision(curve, 101) == 51 / 101
        assert average_precision(curve, 51) == 26 / 51

    def test_perfect_detector(self):
        curve = [PrCurvePoint(recall=1.0, precision=1.0, score_threshold=0.1)]
        assert average_precision(curve) == 1.0

    def test_envelope_uses_max_precision_at_higher_recall(self):
        # the dip at recall 0.4 is shadowed by the later (0.8, 0.9) point
        curve = [
            PrCurvePoint(recall=0.4, precision=0.5, score_threshold=0.9),
            PrCurvePoint(recall=0.8, precision=0.9, score_threshold=0.5),
        ]
        levels = interpolation_levels(101)
        expected = float(np.mean(np.where(levels <= 0.8, 0.9, 0.0)))
        assert average_precision(curve, 101) == expected

    def test_point_order_does_not_matter(self):
        points = [
            PrCurvePoint(recall=0.2, precision=1.0, score_threshold=0.9),
            PrCurvePoint(recall=0.5, precision=0.7, score_threshold=0.6),
            PrCurvePoint(recall=0.9, precision=0.4, score_threshold=0.3),
        ]
        shuffled = [points[2], points[0], points[1]]
        assert average_precision(points) == average_precision(shuffled)

    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=0, max_value=1, allow_nan=False),
                st.floats(min_value=0, max_value=1, allow_nan=False),
            ),
            min_size=1,
            max_size=40,
        ),
        st.sampled_from([11, 51, 101]),
    )
    def test_matches_explicit_loop_oracle(self, pairs, points):
        curve = [
            PrCurvePoint(recall=r, precision=p, score_threshold=0.5) for r, p in pairs
        ]
        expected = interpolated_ap([(r, p) for r, p in pairs], points=points)
        assert average_precision(curve, points) == pytest.approx(expected, abs=1e-12)

    def test_random_monotone_curves_match_oracle(self):
        rng = random.Random(11)
        for _ in range(200):
            n = rng.randint(1, 30)
            recalls = sorted(rng.random() for _ in range(n))
            pairs = [(r, rng.random()) for r in recalls]
            curve = [PrCurvePoint(r, p, 0.5) for r, p in pairs]
            assert average_precision(curve, 101) == pytest.approx(
                interpolated_ap(pairs, points=101), abs=1e-12
            )


def _ap_table(values_by_class: dict[int, list[float | None]], thresholds) -> dict:
    return {
        cid: [
            ApResult(class_id=cid, iou_threshold=t, ap=v)
            for t, v in zip(thresholds, values)
        ]
        for cid, values in values_by_class.items()
    }


class TestMeanAp:
    def test_hand_set_table_means_are_exact(self):
        thresholds = DEFAULT_IOU_THRESHOLDS
        table = {
            0: [0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0],
            1: [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            2: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
        }
        result = mean_ap(_ap_table(table, thresholds), thresholds)
        per_threshold = [
            (table[0][j] + table[1][j] + table[2][j]) / 3 for j in range(10)
        ]
        assert result.map_at_50 == per_threshold[0]
        assert result.map_50_95 == sum(per_threshold) / 10

    def test_undefined_class_excluded_from_mean(self):
        thresholds = (0.5,)
        table = _ap_table({0: [0.4], 1: [None], 2: [0.6]}, thresholds)
        result = mean_ap(table, thresholds)
        assert result.map_at_50 == (0.4 + 0.6) / 2

    def test_all_undefined_threshold_mean_is_none(self):
        thresholds = (0.5, 0.75)
        table = _ap_table({0: [0.4, None], 1: [0.2, None]}, thresholds)
        result = mean_ap(table, thresholds)
        assert result.map_at_50 == pytest.approx(0.3)
        assert result.map_50_95 is None

    def test_zero_ap_still_counts(self):
        thresholds = (0.5,)
        table = _ap_table({0: [0.0], 1: [1.0]}, thresholds)
        assert mean_ap(table, thresholds).map_at_50 == 0.5

    def test_missing_half_threshold_raises_when_required(self):
        thresholds = (0.75,)
        table = _ap_table({0: [0.4]}, thresholds)
        with pytest.raises(UndefinedMetricError, match="0.5"):
            mean_ap(table, thresholds)
        result = mean_ap(table, thresholds, require_map50=False)
        assert result.map_at_50 is None
        assert result.map_50_95 == 0.4

    def test_thresholds_must_increase(self):
        table = _ap_table({0: [0.4, 0.3]}, (0.5, 0.5))
        with pytest.raises(ValueError, match="increasing"):
            mean_ap(table, (0.5, 0.5))

    def test_entry_count_must_match_thresholds(self):
        table = _ap_table({0: [0.4]}, (0.5,))
        with pytest.raises(ValueError, match="expected 2"):
            mean_ap(table, (0.5, 0.75))

    def test_entry_thresholds_must_line_up(self):
        table = _ap_table({0: [0.4]}, (0.55,))
        with pytest.raises(ValueError, match="line up"):
            mean_ap(table, (0.5,))
