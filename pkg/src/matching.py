"""Generalized ground truth matching (VOC2012 and SAR-APD schemes)."""

import logging
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

from .exceptions import ConfigError, UnsortedPredictionsError
from .geometry import area, iou
from .schemas import Detection, GroundTruth, MatchSequence, SchemeParams

logger = logging.getLogger(__name__)

SCHEMES = ("voc2012", "sar-apd")


def scheme_from_name(name: str) -> SchemeParams:
    """Look up a preset evaluation scheme by its CLI name."""
    if name == "voc2012":
        return SchemeParams.voc2012()
    if name == "sar-apd":
        return SchemeParams.sar_apd()
    raise ConfigError(f"unknown scheme '{name}', expected one of {', '.join(SCHEMES)}")


def _match_per_prediction(
    predictions: Sequence[Detection],
    labels: Sequence[GroundTruth],
    params: SchemeParams,
) -> List[List[int]]:
    """Outcomes emitted by each prediction: ``[0]`` or one ``1`` per matched label."""
    for prev, cur in zip(predictions, predictions[1:]):
        if cur.score > prev.score:
            raise UnsortedPredictionsError()

    g_max = params.g_max
    pool: List[GroundTruth] = list(labels)
    per_prediction: List[List[int]] = []

    for pred in predictions:
        pred_area = area(pred.box)
        ious = [iou(pred.box, label.box) for label in pool]
        # Stable: equal IoUs keep label input order.
        ranked = sorted(range(len(pool)), key=lambda k: -ious[k])

        matched: List[int] = []
        for k in ranked:
            size_ok = pred_area > params.a_min * area(pool[k].box)
            below_cap = g_max is None or len(matched) < g_max
            if ious[k] >= params.epsilon and below_cap and size_ok:
                matched.append(k)

        if matched:
            per_prediction.append([1] * len(matched))
            taken = set(matched)
            pool = [label for k, label in enumerate(pool) if k not in taken]
        else:
            per_prediction.append([0])

    return per_prediction


def match_boxes_generic(
    predictions: Sequence[Detection],
    labels: Sequence[GroundTruth],
    params: SchemeParams,
) -> MatchSequence:
    """Classify predictions of one image and class into TPs and FPs.

    Predictions are visited in score order. Each one is compared against the
    labels still in the pool, best IoU first; a label is matched when
    IoU >= epsilon, fewer than g_max labels are matched so far and the
    prediction is larger than a_min times the label area. A prediction with
    no match yields one FP; matched labels leave the pool.
    """
    outcomes: List[int] = []
    scores: List[float] = []
    for pred, emitted in zip(predictions, _match_per_prediction(predictions, labels, params)):
        outcomes.extend(emitted)
        scores.extend([pred.score] * len(emitted))
    return MatchSequence(outcomes=outcomes, scores=scores, n_ground_truth=len(labels))


def match_dataset(
    detections: Sequence[Detection],
    labels: Sequence[GroundTruth],
    params: SchemeParams,
) -> MatchSequence:
    """Match every (image, class) group and merge the outcomes by descending score.

    Ties in score are ordered by image_id, then by the detection's input position.
    """
    det_groups: Dict[Tuple[str, str], List[Tuple[int, Detection]]] = defaultdict(list)
    for idx, det in enumerate(detections):
        det_groups[(det.image_id, det.class_label)].append((idx, det))

    label_groups: Dict[Tuple[str, str], List[GroundTruth]] = defaultdict(list)
    for label in labels:
        label_groups[(label.image_id, label.class_label)].append(label)

    # (score, image_id, input index, outcome)
    merged: List[Tuple[float, str, int, int]] = []
    for key in sorted(det_groups):
        group = sorted(det_groups[key], key=lambda item: -item[1].score)
        per_prediction = _match_per_prediction(
            [det for _, det in group], label_groups.get(key, []), params
        )
        for (idx, det), emitted in zip(group, per_prediction):
            merged.extend((det.score, det.image_id, idx, o) for o in emitted)

    merged.sort(key=lambda item: (-item[0], item[1], item[2]))
    logger.debug(
        f"Matched {len(detections)} detections in {len(det_groups)} groups against "
        f"{len(labels)} labels: {sum(item[3] for item in merged)} TP entries"
    )
    return MatchSequence(
        outcomes=[item[3] for item in merged],
        scores=[item[0] for item in merged],
        n_ground_truth=len(labels),
    )
