# Per-image pipeline: aggregation, matching and timing

import concurrent.futures
import logging
import time
from typing import Dict, List, Sequence, Tuple

from tqdm import tqdm

from .aggregation import aggregate
from .matching import match_dataset
from .metrics import build_report
from .schemas import (
    AnnotationFile,
    BbaConfig,
    BbaMethod,
    Detection,
    EvaluationResult,
    GroundTruth,
    SchemeParams,
)

logger = logging.getLogger(__name__)


def split_by_image(dets: Sequence[Detection]) -> Dict[str, List[Detection]]:
    """Detections per image_id, keeping input order within each image."""
    per_image: Dict[str, List[Detection]] = {}
    for det in dets:
        per_image.setdefault(det.image_id, []).append(det)
    return per_image


def aggregate_images(
    dets: Sequence[Detection],
    bba: BbaConfig,
    score_threshold: float,
    jobs: int = 1,
    show_progress: bool = False,
) -> Tuple[List[Detection], Dict[str, Tuple[int, int]]]:
    """Aggregate every image, up to ``jobs`` images at a time.

    Returns the aggregated detections (images in sorted order; input order
    for ``none``) and per-image (before, after) box counts.
    """
    per_image = split_by_image(dets)
    image_ids = sorted(per_image)

    if bba.method == BbaMethod.NONE:
        kept = aggregate(dets, bba, score_threshold)
        after = split_by_image(kept)
        counts = {i: (len(per_image[i]), len(after.get(i, []))) for i in image_ids}
        return kept, counts

    def run_one(image_id: str) -> List[Detection]:
        return aggregate(per_image[image_id], bba, score_threshold)

    results: List[List[Detection]] = []
    with tqdm(
        total=len(image_ids),
        desc=f"Aggregating ({bba.method.value})",
        unit="image",
        disable=not show_progress,
        leave=False,
    ) as pbar:
        if jobs > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as executor:
                # map() yields in submission order, so the merge is deterministic.
                for result in executor.map(run_one, image_ids):
                    results.append(result)
                    pbar.update(1)
        else:
            for image_id in image_ids:
                results.append(run_one(image_id))
                pbar.update(1)

    aggregated: List[Detection] = []
    counts: Dict[str, Tuple[int, int]] = {}
    for image_id, result in zip(image_ids, results):
        aggregated.extend(result)
        counts[image_id] = (len(per_image[image_id]), len(result))
    return aggregated, counts


def labels_from_annotations(annotations: Sequence[AnnotationFile]) -> List[GroundTruth]:
    return [obj for annotation in annotations for obj in annotation.objects]


def evaluate_dataset(
    dets: Sequence[Detection],
    annotations: Sequence[AnnotationFile],
    scheme: SchemeParams,
    bba: BbaConfig,
    score_threshold: float,
    jobs: int = 1,
    show_progress: bool = False,
) -> EvaluationResult:
    """Aggregate, match and score a whole dataset.

    The reported time per image is the wall time of aggregation plus matching
    divided by the number of distinct images (annotated or detected).
    """
    annotated = {a.image_id for a in annotations}
    unknown = sorted({d.image_id for d in dets} - annotated)
    if unknown:
        logger.warning(
            f"{len(unknown)} image(s) with detections have no annotation and count as "
            f"zero-label images: {', '.join(unknown[:5])}{' ...' if len(unknown) > 5 else ''}"
        )
    n_images = len(annotated | {d.image_id for d in dets})

    start = time.perf_counter()
    aggregated, _ = aggregate_images(dets, bba, score_threshold, jobs, show_progress)
    match = match_dataset(aggregated, labels_from_annotations(annotations), scheme)
    elapsed = time.perf_counter() - start

    avg_time = elapsed / n_images if n_images else 0.0
    report = build_report(match, avg_time_per_image_s=avg_time)
    logger.info(
        f"Evaluated {n_images} images: {len(dets)} raw -> {len(aggregated)} aggregated "
        f"detections, {report.true_positives} TP / {report.false_positives} FP / "
        f"{report.false_negatives} FN"
    )
    return EvaluationResult(
        report=report, match=match, detections=aggregated, n_images=n_images
    )
