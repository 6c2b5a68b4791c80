import numpy as np
import pytest

from src.aggregation import aggregate
from src.exceptions import ConfigError, UnsortedPredictionsError
from src.fixtures import random_dataset
from src.matching import match_dataset
from src.metrics import (
    average_precision,
    build_report,
    default_thresholds,
    interpolated_curve,
    parse_threshold_grid,
    pr_curve,
    precision_recall,
    threshold_sweep,
)
from src.processing import labels_from_annotations
from src.schemas import BbaConfig, BbaMethod, MatchSequence, SchemeParams


def seq(outcomes, n, scores=None) -> MatchSequence:
    if scores is None:
        scores = [1.0 - 0.01 * i for i in range(len(outcomes))]
    return MatchSequence(outcomes=outcomes, scores=scores, n_ground_truth=n)


def rectangle_ap(m: MatchSequence) -> float:
    """Sum of rectangles under the best precision reachable at each recall level."""
    points = []
    for cutoff in sorted(set(m.scores), reverse=True):
        tp = sum(o for o, s in zip(m.outcomes, m.scores) if s >= cutoff)
        n_pred = sum(1 for s in m.scores if s >= cutoff)
        points.append((tp / m.n_ground_truth if m.n_ground_truth else 1.0, tp / n_pred))
    if not points:
        return 0.0
    levels = sorted({r for r, _ in points})
    total, previous = 0.0, 0.0
    for level in levels:
        best = max(p for r, p in points if r >= level)
        total += (level - previous) * best
        previous = level
    return total


class TestPrecisionRecall:
    def test_examples(self):
        assert precision_recall(seq([1, 1, 1, 1, 1], 5)) == (1.0, 1.0)
        assert precision_recall(seq([0], 5)) == (0.0, 0.0)
        precision, recall = precision_recall(seq([1, 0, 1], 4))
        assert precision == pytest.approx(2 / 3)
        assert recall == 0.5

    def test_empty_conventions(self):
        assert precision_recall(seq([], 0)) == (1.0, 1.0)
        assert precision_recall(seq([], 3)) == (1.0, 0.0)

    def test_report_counts(self):
        report = build_report(seq([1, 0, 1], 4), avg_time_per_image_s=0.5)
        assert (report.true_positives, report.false_positives, report.false_negatives) == (2, 1, 2)
        assert report.avg_time_per_image_s == 0.5


class TestPrCurve:
    def test_single_perfect_detection(self):
        (point,) = pr_curve(seq([1], 1, [0.8]))
        assert (point.recall, point.precision, point.score_cutoff) == (1.0, 1.0, 0.8)

    def test_two_cutoffs(self):
        curve = pr_curve(seq([1, 0], 1, [0.9, 0.8]))
        assert [(p.recall, p.precision, p.score_cutoff) for p in curve] == [
            (1.0, 1.0, 0.9),
            (1.0, 0.5, 0.8),
        ]

    def test_all_fp(self):
        assert all(p.precision == 0.0 for p in pr_curve(seq([0, 0, 0], 2)))

    def test_shared_score_enters_together(self):
        curve = pr_curve(seq([1, 1, 1, 0], 5, [0.7, 0.7, 0.7, 0.4]))
        assert [(p.recall, p.score_cutoff) for p in curve] == [(0.6, 0.7), (0.6, 0.4)]

    def test_empty(self):
        assert pr_curve(seq([], 4)) == []

    def test_unsorted(self):
        with pytest.raises(UnsortedPredictionsError):
            pr_curve(seq([1, 0], 1, [0.2, 0.9]))

    def test_last_point_matches_precision_recall(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 20))
            outcomes = rng.integers(0, 2, size=n).tolist()
            m = seq(outcomes, sum(outcomes) + int(rng.integers(0, 3)))
            last = pr_curve(m)[-1]
            assert (last.precision, last.recall) == precision_recall(m)


class TestAveragePrecision:
    def test_examples(self):
        assert average_precision(pr_curve(seq([1, 1, 1], 3))) == pytest.approx(1.0)
        assert average_precision(pr_curve(seq([1, 0], 1, [0.9, 0.8]))) == 1.0
        assert average_precision(pr_curve(seq([0, 1], 1, [0.9, 0.8]))) == 0.5
        assert average_precision([]) == 0.0

    def test_matches_rectangle_oracle(self, rng):
        for _ in range(2000):
            n = int(rng.integers(1, 7))
            outcomes = rng.integers(0, 2, size=n).tolist()
            scores = sorted(rng.choice([0.2, 0.4, 0.6, 0.8], size=n).tolist(), reverse=True)
            m = seq(outcomes, sum(outcomes) + int(rng.integers(0, 3)), scores)
            ap = average_precision(pr_curve(m))
            assert 0.0 <= ap <= 1.0
            assert ap == pytest.approx(rectangle_ap(m), abs=1e-12)

    def test_perfect_ranking_iff_ap_one(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 8))
            outcomes = rng.integers(0, 2, size=n).tolist()
            n_gt = sum(outcomes) + int(rng.integers(0, 2))
            m = seq(outcomes, n_gt)
            perfect = n_gt > 0 and sum(outcomes) == n_gt and outcomes == sorted(outcomes, reverse=True)
            assert (average_precision(pr_curve(m)) == pytest.approx(1.0)) == perfect

    def test_envelope_is_monotone(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 30))
            outcomes = rng.integers(0, 2, size=n).tolist()
            curve = interpolated_curve(pr_curve(seq(outcomes, max(1, sum(outcomes)))))
            precisions = np.array([p.precision for p in curve])
            assert np.all(np.diff(precisions) <= 0)
        assert interpolated_curve([]) == []

    def test_envelope_covers_equal_recall(self):
        curve = interpolated_curve(pr_curve(seq([1, 0], 1, [0.9, 0.8])))
        assert [(p.recall, p.precision) for p in curve] == [(1.0, 1.0), (1.0, 1.0)]

    def test_envelope_matches_pointwise_max(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 25))
            outcomes = rng.integers(0, 2, size=n).tolist()
            raw = pr_curve(seq(outcomes, sum(outcomes) + int(rng.integers(0, 3))))
            expected = [max(q.precision for q in raw if q.recall >= p.recall) for p in raw]
            assert [p.precision for p in interpolated_curve(raw)] == expected


class TestThresholdGrid:
    def test_default_grid(self):
        grid = default_thresholds()
        assert len(grid) == 10
        assert grid[0] == 0.05 and grid[-1] == 0.5
        assert parse_threshold_grid("0.05:0.50:0.05") == grid

    def test_single_value(self):
        assert parse_threshold_grid("0.3:0.3:0.1") == [0.3]

    @pytest.mark.parametrize("grid", ["", "0.1:0.2", "a:b:c", "0.5:0.1:0.1", "0:1:0", "-0.1:0.5:0.1", "0:1.5:0.5"])
    def test_invalid(self, grid):
        with pytest.raises(ConfigError):
            parse_threshold_grid(grid)


class TestThresholdSweep:
    @pytest.fixture(scope="class")
    def dataset(self):
        annotations, dets = random_dataset(seed=7, n_images=8, dets_per_image=12)
        return dets, labels_from_annotations(annotations)

    def test_default_grid_has_ten_rows(self, dataset):
        dets, labels = dataset
        rows = threshold_sweep(dets, labels, SchemeParams.sar_apd(), BbaConfig(method=BbaMethod.MOB))
        assert [r.score_threshold for r in rows] == default_thresholds()

    @pytest.mark.parametrize("method", list(BbaMethod))
    def test_single_threshold_equals_pipeline(self, dataset, method):
        dets, labels = dataset
        bba = BbaConfig(method=method)
        (row,) = threshold_sweep(dets, labels, SchemeParams.voc2012(), bba, [0.3])
        report = build_report(match_dataset(aggregate(dets, bba, 0.3), labels, SchemeParams.voc2012()))
        assert (row.precision, row.recall, row.average_precision) == (
            report.precision,
            report.recall,
            report.average_precision,
        )

    def test_none_at_zero_is_raw_matching(self, dataset):
        dets, labels = dataset
        (row,) = threshold_sweep(dets, labels, SchemeParams.sar_apd(), BbaConfig(), [0.0])
        assert row.recall == build_report(match_dataset(dets, labels, SchemeParams.sar_apd())).recall

    @pytest.mark.parametrize("method", [BbaMethod.NONE, BbaMethod.NMS])
    @pytest.mark.parametrize("scheme", [SchemeParams.voc2012(), SchemeParams.sar_apd()], ids=["voc2012", "sar-apd"])
    def test_recall_non_increasing(self, method, scheme):
        for seed in range(100):
            annotations, dets = random_dataset(seed=seed, n_images=3, dets_per_image=10)
            rows = threshold_sweep(dets, labels_from_annotations(annotations), scheme, BbaConfig(method=method))
            recalls = [r.recall for r in rows]
            assert all(a >= b for a, b in zip(recalls, recalls[1:]))

    def test_rejects_bad_grid(self, dataset):
        dets, labels = dataset
        with pytest.raises(ConfigError):
            threshold_sweep(dets, labels, SchemeParams.voc2012(), BbaConfig(), [])
        with pytest.raises(ConfigError):
            threshold_sweep(dets, labels, SchemeParams.voc2012(), BbaConfig(), [1.5])
