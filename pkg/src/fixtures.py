"""Synthetic datasets for tests, demos and throughput checks."""

import logging
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from .formats import write_detections, write_voc_xml
from .schemas import AnnotationFile, BBox, Detection, GroundTruth

logger = logging.getLogger(__name__)

PERSON = "person"
IMAGE_WIDTH, IMAGE_HEIGHT = 4000, 3000

Dataset = Tuple[List[AnnotationFile], List[Detection]]


def dense_group_scenario(image_id: str = "group") -> Dataset:
    """Five persons standing close together and five chain-overlapping raw detections.

    MOB merges the detections into one box covering the whole group, which is
    five TPs under SAR-APD and one FP plus five FNs under VOC2012.
    """
    gt_boxes = [
        (1000, 1000, 1060, 1060),
        (1050, 1020, 1110, 1080),
        (1100, 1000, 1160, 1060),
        (1020, 1080, 1080, 1140),
        (1090, 1090, 1150, 1150),
    ]
    det_boxes = [
        (995, 995, 1065, 1065),
        (1045, 1015, 1115, 1085),
        (1095, 995, 1165, 1065),
        (1015, 1075, 1085, 1145),
        (1080, 1080, 1155, 1155),
    ]
    scores = [0.9, 0.8, 0.7, 0.6, 0.5]

    annotation = AnnotationFile(
        image_id=image_id,
        image_width=IMAGE_WIDTH,
        image_height=IMAGE_HEIGHT,
        objects=[
            GroundTruth(box=BBox.from_xyxy(*b), class_label=PERSON, image_id=image_id)
            for b in gt_boxes
        ],
    )
    detections = [
        Detection(box=BBox.from_xyxy(*b), score=s, class_label=PERSON, image_id=image_id)
        for b, s in zip(det_boxes, scores)
    ]
    return [annotation], detections


def _clip_box(x1: float, y1: float, x2: float, y2: float) -> BBox:
    x1, x2 = max(0.0, x1), min(float(IMAGE_WIDTH), x2)
    y1, y2 = max(0.0, y1), min(float(IMAGE_HEIGHT), y2)
    return BBox.from_xyxy(x1, y1, max(x2, x1 + 1.0), max(y2, y1 + 1.0))


def random_dataset(
    seed: int = 0,
    n_images: int = 101,
    dets_per_image: int = 10,
    hit_rate: float = 0.7,
) -> Dataset:
    """Images of 1-5 persons (~60 px) with noisy detections around them.

    A fraction ``hit_rate`` of the detections jitter around a random person,
    the rest are background boxes. Scores are uniform in (0, 1).
    """
    rng = np.random.default_rng(seed)
    annotations: List[AnnotationFile] = []
    detections: List[Detection] = []

    for i in range(n_images):
        image_id = f"img_{i:04d}"
        n_gt = int(rng.integers(1, 6))
        objects = []
        for _ in range(n_gt):
            w, h = rng.uniform(40, 80, size=2)
            cx = rng.uniform(w, IMAGE_WIDTH - w)
            cy = rng.uniform(h, IMAGE_HEIGHT - h)
            objects.append(
                GroundTruth(
                    box=BBox.from_xyxy(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2),
                    class_label=PERSON,
                    image_id=image_id,
                )
            )
        annotations.append(
            AnnotationFile(
                image_id=image_id,
                image_width=IMAGE_WIDTH,
                image_height=IMAGE_HEIGHT,
                objects=objects,
            )
        )

        for _ in range(dets_per_image):
            if rng.random() < hit_rate:
                target = objects[int(rng.integers(0, n_gt))].box
                cx, cy = target.center
                cx += rng.normal(0, 10)
                cy += rng.normal(0, 10)
                w = target.width * rng.uniform(0.8, 1.3)
                h = target.height * rng.uniform(0.8, 1.3)
            else:
                w, h = rng.uniform(30, 90, size=2)
                cx = rng.uniform(0, IMAGE_WIDTH)
                cy = rng.uniform(0, IMAGE_HEIGHT)
            detections.append(
                Detection(
                    box=_clip_box(cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2),
                    score=float(rng.uniform(0.001, 0.999)),
                    class_label=PERSON,
                    image_id=image_id,
                )
            )

    return annotations, detections


def write_fixture_set(
    out_dir: Union[str, Path],
    annotations: List[AnnotationFile],
    detections: List[Detection],
    det_format: str = "jsonl",
) -> Tuple[Path, Path]:
    """Write ``annotations/<image_id>.xml`` and ``detections.<format>`` under ``out_dir``."""
    out_dir = Path(out_dir)
    gt_dir = out_dir / "annotations"
    gt_dir.mkdir(parents=True, exist_ok=True)
    for annotation in annotations:
        (gt_dir / f"{annotation.image_id}.xml").write_text(
            write_voc_xml(annotation), encoding="utf-8"
        )
    det_path = out_dir / f"detections.{det_format}"
    det_path.write_text(write_detections(detections, det_format), encoding="utf-8")
    logger.info(
        f"Wrote {len(annotations)} annotations to {gt_dir} and "
        f"{len(detections)} detections to {det_path}"
    )
    return gt_dir, det_path
