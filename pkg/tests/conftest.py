import logging
from typing import Callable, List

import numpy as np
import pytest

from src.fixtures import PERSON, dense_group_scenario
from src.schemas import BBox, Detection, GroundTruth


def det(xmin, ymin, xmax, ymax, score=0.5, image_id="img", label=PERSON) -> Detection:
    return Detection(
        box=BBox.from_xyxy(xmin, ymin, xmax, ymax),
        score=score,
        class_label=label,
        image_id=image_id,
    )


def gt(xmin, ymin, xmax, ymax, image_id="img", label=PERSON) -> GroundTruth:
    return GroundTruth(
        box=BBox.from_xyxy(xmin, ymin, xmax, ymax), class_label=label, image_id=image_id
    )


def random_boxes(rng: np.random.Generator, n: int, extent: float = 100.0, max_side: float = 30.0) -> List[BBox]:
    """n random boxes with real-valued corners inside [0, extent]^2."""
    boxes = []
    for _ in range(n):
        w, h = rng.uniform(1.0, max_side, size=2)
        x, y = rng.uniform(0.0, extent - max_side, size=2)
        boxes.append(BBox.from_xyxy(float(x), float(y), float(x + w), float(y + h)))
    return boxes


def random_detections(rng: np.random.Generator, n: int, **kwargs) -> List[Detection]:
    return [
        Detection(box=b, score=float(rng.uniform(0.01, 0.99)), class_label=PERSON, image_id="img")
        for b in random_boxes(rng, n, **kwargs)
    ]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def dense_group():
    """(annotations, detections) of five clustered persons."""
    return dense_group_scenario()


@pytest.fixture
def make_detections(rng) -> Callable[[int], List[Detection]]:
    return lambda n, **kwargs: random_detections(rng, n, **kwargs)


@pytest.fixture
def restore_logging():
    """Put the root logger back after code that calls setup_logging."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
