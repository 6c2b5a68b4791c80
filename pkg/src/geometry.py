"""Axis-aligned box arithmetic and localization bounds.

All functions are pure; boxes use the continuous coordinate convention
(area = width * height, no +1 pixel correction).
"""

import math
from typing import Sequence

import numpy as np

from .schemas import BBox, DistanceMatrix


def area(b: BBox) -> float:
    return (b.xmax - b.xmin) * (b.ymax - b.ymin)


def intersection_area(a: BBox, b: BBox) -> float:
    w = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    h = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union. Boxes that only touch have IoU 0."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (area(a) + area(b) - inter)


def jaccard_distance(a: BBox, b: BBox) -> float:
    return 1.0 - iou(a, b)


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    """Stack boxes into an (n, 4) float64 array of xmin, ymin, xmax, ymax."""
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)


def pairwise_iou(boxes: Sequence[BBox]) -> np.ndarray:
    """IoU of every pair of boxes as an (n, n) array.

    Uses the same operation order as :func:`iou`, so entries agree with the
    scalar function bit for bit.
    """
    arr = boxes_to_array(boxes)
    x1, y1, x2, y2 = arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]
    areas = (x2 - x1) * (y2 - y1)

    w = np.minimum(x2[:, None], x2[None, :]) - np.maximum(x1[:, None], x1[None, :])
    h = np.minimum(y2[:, None], y2[None, :]) - np.maximum(y1[:, None], y1[None, :])
    overlapping = (w > 0) & (h > 0)
    inter = np.where(overlapping, w * h, 0.0)
    union = areas[:, None] + areas[None, :] - inter

    result = np.zeros_like(inter)
    np.divide(inter, union, out=result, where=overlapping)
    np.fill_diagonal(result, 1.0)
    return result


def distance_matrix(boxes: Sequence[BBox]) -> DistanceMatrix:
    """Jaccard distance matrix D with D[i][k] = 1 - IoU(b_i, b_k)."""
    if len(boxes) == 0:
        raise ValueError("no boxes")
    entries = 1.0 - pairwise_iou(boxes)
    np.fill_diagonal(entries, 0.0)
    return DistanceMatrix(n=len(boxes), entries=entries)


def enclose(boxes: Sequence[BBox]) -> BBox:
    """Smallest box containing every input box (component-wise min of minima, max of maxima)."""
    if len(boxes) == 0:
        raise ValueError("no boxes")
    return BBox.from_xyxy(
        min(b.xmin for b in boxes),
        min(b.ymin for b in boxes),
        max(b.xmax for b in boxes),
        max(b.ymax for b in boxes),
    )


def average_box(boxes: Sequence[BBox]) -> BBox:
    """Coordinate-wise arithmetic mean of the boxes."""
    if len(boxes) == 0:
        raise ValueError("no boxes")
    n = len(boxes)
    return BBox.from_xyxy(
        math.fsum(b.xmin for b in boxes) / n,
        math.fsum(b.ymin for b in boxes) / n,
        math.fsum(b.xmax for b in boxes) / n,
        math.fsum(b.ymax for b in boxes) / n,
    )


def max_pred_width(epsilon: float, w_avg: float) -> float:
    """Widest square prediction that still reaches IoU epsilon with an enclosed object of width w_avg."""
    if epsilon <= 0:
        raise ValueError("unbounded width")
    if w_avg <= 0:
        raise ValueError("average object width must be positive")
    return w_avg / math.sqrt(epsilon)


def max_tp_area_width(epsilon: float, w_avg: float) -> float:
    """Width of the square region a maximum-sized prediction may occupy and still be a TP."""
    return 2 * max_pred_width(epsilon, w_avg) - w_avg


def max_safe_inflation(epsilon: float) -> float:
    """Largest MOB inflation factor whose merged boxes respect the epsilon size bound.

    Equals (max_pred_width / w_avg)^2, which does not depend on w_avg.
    """
    if epsilon <= 0:
        raise ValueError("unbounded width")
    return 1.0 / epsilon


def pixels_to_ground(px: float, ground_resolution: float) -> float:
    """Convert a pixel length to meters on the ground."""
    if px < 0:
        raise ValueError("pixel length must be non-negative")
    if ground_resolution <= 0:
        raise ValueError("ground resolution must be positive")
    return px * ground_resolution
