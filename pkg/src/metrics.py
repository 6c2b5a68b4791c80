"""Precision, recall, AP, PR curves and score-threshold sweeps."""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .aggregation import aggregate
from .exceptions import ConfigError, UnsortedPredictionsError
from .matching import match_dataset
from .schemas import (
    BbaConfig,
    Detection,
    GroundTruth,
    MatchSequence,
    MetricsReport,
    PrPoint,
    SchemeParams,
    SweepRow,
)

logger = logging.getLogger(__name__)


def _ratio(tp: int, fp: int, n_ground_truth: int) -> Tuple[float, float]:
    # 0/0 precision and recall with no labels are both defined as 1.
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / n_ground_truth if n_ground_truth > 0 else 1.0
    return precision, recall


def precision_recall(m: MatchSequence) -> Tuple[float, float]:
    return _ratio(m.true_positives, m.false_positives, m.n_ground_truth)


def pr_curve(m: MatchSequence) -> List[PrPoint]:
    """One point per distinct score, from the highest cutoff to the lowest.

    Outcomes sharing a score (e.g. several TPs from one prediction) enter the
    curve together.
    """
    outcomes, scores = m.outcomes, m.scores
    if any(b > a for a, b in zip(scores, scores[1:])):
        raise UnsortedPredictionsError("outcomes not score-sorted")

    curve: List[PrPoint] = []
    tp = fp = 0
    for i, (outcome, score) in enumerate(zip(outcomes, scores)):
        tp += outcome
        fp += 1 - outcome
        if i + 1 < len(scores) and scores[i + 1] == score:
            continue
        precision, recall = _ratio(tp, fp, m.n_ground_truth)
        curve.append(PrPoint(recall=recall, precision=precision, score_cutoff=score))
    return curve


def _envelope(recalls: np.ndarray, precisions: np.ndarray) -> np.ndarray:
    """Best precision at equal or greater recall, for each curve point.

    ``recalls`` must be non-decreasing; points sharing a recall share a value.
    """
    running = np.maximum.accumulate(precisions[::-1])[::-1]
    return running[np.searchsorted(recalls, recalls, side="left")]


def interpolated_curve(curve: Sequence[PrPoint]) -> List[PrPoint]:
    """The curve with every precision replaced by its monotone envelope value."""
    if not curve:
        return []
    env = _envelope(
        np.array([p.recall for p in curve], dtype=np.float64),
        np.array([p.precision for p in curve], dtype=np.float64),
    )
    return [
        PrPoint(recall=p.recall, precision=float(e), score_cutoff=p.score_cutoff)
        for p, e in zip(curve, env)
    ]


def average_precision(curve: Sequence[PrPoint]) -> float:
    """All-points interpolated AP: area under the precision envelope from recall 0."""
    if not curve:
        return 0.0
    recalls = np.array([p.recall for p in curve], dtype=np.float64)
    precisions = np.array([p.precision for p in curve], dtype=np.float64)
    widths = np.diff(np.concatenate(([0.0], recalls)))
    ap = float(np.sum(widths * _envelope(recalls, precisions)))
    return min(1.0, max(0.0, ap))


def build_report(
    m: MatchSequence, avg_time_per_image_s: Optional[float] = None
) -> MetricsReport:
    precision, recall = precision_recall(m)
    return MetricsReport(
        precision=precision,
        recall=recall,
        average_precision=average_precision(pr_curve(m)),
        true_positives=m.true_positives,
        false_positives=m.false_positives,
        false_negatives=m.n_ground_truth - m.true_positives,
        avg_time_per_image_s=avg_time_per_image_s,
    )


def default_thresholds() -> List[float]:
    """0.05, 0.10, ..., 0.50."""
    return [round(0.05 * i, 10) for i in range(1, 11)]


def parse_threshold_grid(grid: str) -> List[float]:
    """Parse ``lo:hi:step`` into an inclusive list of score thresholds."""
    try:
        lo, hi, step = (float(part) for part in grid.split(":"))
    except ValueError as e:
        raise ConfigError(f"invalid threshold grid '{grid}', expected lo:hi:step") from e
    if step <= 0 or lo > hi or lo < 0 or hi > 1:
        raise ConfigError(f"invalid threshold grid '{grid}': need 0 <= lo <= hi <= 1, step > 0")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def threshold_sweep(
    dets: Sequence[Detection],
    labels: Sequence[GroundTruth],
    scheme: SchemeParams,
    bba: BbaConfig,
    thresholds: Optional[Sequence[float]] = None,
) -> List[SweepRow]:
    """Aggregate, match and score once per score threshold."""
    thresholds = default_thresholds() if thresholds is None else list(thresholds)
    if not thresholds:
        raise ConfigError("threshold grid is empty")
    if any(not 0.0 <= t <= 1.0 for t in thresholds):
        raise ConfigError("score thresholds must lie in [0, 1]")

    rows: List[SweepRow] = []
    for t in thresholds:
        m = match_dataset(aggregate(dets, bba, t), labels, scheme)
        precision, recall = precision_recall(m)
        rows.append(
            SweepRow(
                score_threshold=t,
                precision=precision,
                recall=recall,
                average_precision=average_precision(pr_curve(m)),
            )
        )
        logger.debug(f"t_s={t}: PRC={precision:.4f} RCL={recall:.4f}")
    return rows
