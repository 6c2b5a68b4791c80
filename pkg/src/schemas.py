import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class BBox(BaseModel):
    """Axis-aligned box in continuous pixel coordinates.

    Coordinates are reals; area is (xmax - xmin) * (ymax - ymin) with no +1
    pixel correction. Boxes with zero or negative extent are rejected.
    """

    model_config = ConfigDict(frozen=True)

    xmin: float = Field(..., description="Minimum x coordinate.")
    ymin: float = Field(..., description="Minimum y coordinate.")
    xmax: float = Field(..., description="Maximum x coordinate.")
    ymax: float = Field(..., description="Maximum y coordinate.")

    @model_validator(mode="after")
    def _check_extent(self) -> "BBox":
        coords = (self.xmin, self.ymin, self.xmax, self.ymax)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinate in {coords}")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate box {coords}")
        return self

    @classmethod
    def from_xyxy(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "BBox":
        return cls(xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax)

    @property
    def width(self) -> float:
        return self.xmax - self.xmin

    @property
    def height(self) -> float:
        return self.ymax - self.ymin

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.xmin + self.xmax) / 2.0, (self.ymin + self.ymax) / 2.0)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.xmin, self.ymin, self.xmax, self.ymax)

    def contains(self, other: "BBox") -> bool:
        """True when ``other`` lies inside this box (boundaries included)."""
        return (
            self.xmin <= other.xmin
            and self.ymin <= other.ymin
            and self.xmax >= other.xmax
            and self.ymax >= other.ymax
        )

    def scale(self, factor: float) -> "BBox":
        return BBox.from_xyxy(*(c * factor for c in self.as_tuple()))


class Detection(BaseModel):
    """A predicted box with its confidence score, class label and image id."""

    model_config = ConfigDict(frozen=True)

    box: BBox
    score: float = Field(..., ge=0.0, le=1.0, description="Confidence score.")
    class_label: str = Field(..., min_length=1, description="Object class name.")
    image_id: str = Field(..., description="Image filename stem.")

    def with_box(self, box: BBox, score: Optional[float] = None) -> "Detection":
        return self.model_copy(
            update={"box": box, "score": self.score if score is None else score}
        )


class GroundTruth(BaseModel):
    """A labelled object box."""

    model_config = ConfigDict(frozen=True)

    box: BBox
    class_label: str = Field(..., min_length=1, description="Object class name.")
    image_id: str = Field(..., description="Image filename stem.")


class DistanceMatrix(BaseModel):
    """Pair-wise Jaccard distances; symmetric with a zero diagonal."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    entries: np.ndarray

    @model_validator(mode="after")
    def _check_shape(self) -> "DistanceMatrix":
        if self.entries.shape != (self.n, self.n):
            raise ValueError(f"expected a {self.n}x{self.n} matrix")
        return self


class OverlapCluster(BaseModel):
    """Detections that are merged into a single output box."""

    model_config = ConfigDict(frozen=True)

    members: Tuple[Detection, ...] = Field(..., min_length=1)


class MergeStrategy(str, Enum):
    """How an overlap cluster is turned into one box."""

    ENCLOSE = "enclose"
    AVERAGE = "average"


class MobConfig(BaseModel):
    """Parameters of merging of overlapping bounding boxes (MOB)."""

    model_config = ConfigDict(frozen=True)

    omega: float = Field(
        0.0, ge=0.0, lt=1.0, description="Boxes link when their IoU exceeds omega."
    )
    m_max: int = Field(3, ge=1, description="Maximum number of MOB iterations.")
    i_max: Optional[float] = Field(
        100.0,
        gt=0.0,
        description="Maximum inflation factor; None leaves merged boxes unbounded.",
    )
    top_k: Optional[int] = Field(
        None, ge=1, description="Keep only the k best-scoring members per cluster."
    )
    merge_strategy: MergeStrategy = Field(MergeStrategy.ENCLOSE)
    fixed_area_bound: bool = Field(
        False,
        description="Keep A_max at its first-iteration value instead of recomputing it.",
    )


class BbaMethod(str, Enum):
    NONE = "none"
    NMS = "nms"
    MOB = "mob"


class BbaConfig(BaseModel):
    """Which bounding box aggregation to run and with what parameters."""

    model_config = ConfigDict(frozen=True)

    method: BbaMethod = Field(BbaMethod.NONE)
    nms_iou: float = Field(0.5, ge=0.0, le=1.0)
    mob: MobConfig = Field(default_factory=MobConfig)


class SchemeParams(BaseModel):
    """Inputs of the generalized ground truth matching method."""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(..., ge=0.0, le=1.0, description="Box IoU threshold.")
    g_max: Optional[int] = Field(
        ..., ge=1, description="Max labels one prediction may match; None is unbounded."
    )
    a_min: float = Field(
        ..., ge=0.0, le=1.0, description="Minimum prediction/label area ratio."
    )

    @classmethod
    def voc2012(cls) -> "SchemeParams":
        return cls(epsilon=0.5, g_max=1, a_min=0.0)

    @classmethod
    def sar_apd(cls, a_min: float = 0.25) -> "SchemeParams":
        return cls(epsilon=0.0025, g_max=None, a_min=a_min)

    @classmethod
    def custom(
        cls, epsilon: float, g_max: Optional[int] = None, a_min: float = 0.0
    ) -> "SchemeParams":
        return cls(epsilon=epsilon, g_max=g_max, a_min=a_min)


class MatchSequence(BaseModel):
    """Binary TP/FP outcomes with their originating scores and the label count."""

    outcomes: List[int] = Field(default_factory=list)
    scores: List[float] = Field(default_factory=list)
    n_ground_truth: int = Field(0, ge=0)

    @field_validator("outcomes")
    @classmethod
    def _binary(cls, v: List[int]) -> List[int]:
        if any(o not in (0, 1) for o in v):
            raise ValueError("outcomes must be 0 or 1")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> "MatchSequence":
        if len(self.outcomes) != len(self.scores):
            raise ValueError("outcomes and scores differ in length")
        if sum(self.outcomes) > self.n_ground_truth:
            raise ValueError("more true positives than ground truth labels")
        return self

    @property
    def true_positives(self) -> int:
        return sum(self.outcomes)

    @property
    def false_positives(self) -> int:
        return len(self.outcomes) - self.true_positives


class PrPoint(BaseModel):
    recall: float = Field(..., ge=0.0, le=1.0)
    precision: float = Field(..., ge=0.0, le=1.0)
    score_cutoff: float = Field(..., ge=0.0, le=1.0)


class SweepRow(BaseModel):
    score_threshold: float = Field(..., ge=0.0, le=1.0)
    precision: float
    recall: float
    average_precision: float


class MetricsReport(BaseModel):
    """Headline metrics of one evaluation run."""

    precision: float
    recall: float
    average_precision: float
    true_positives: int = Field(..., ge=0)
    false_positives: int = Field(..., ge=0)
    false_negatives: int = Field(..., ge=0)
    avg_time_per_image_s: Optional[float] = None


class AnnotationFile(BaseModel):
    """One parsed VOC XML annotation."""

    image_id: str
    image_width: int = Field(..., gt=0)
    image_height: int = Field(..., gt=0)
    objects: List[GroundTruth] = Field(default_factory=list)

    @model_validator(mode="after")
    def _inside_image(self) -> "AnnotationFile":
        for obj in self.objects:
            b = obj.box
            if b.xmin < 0 or b.ymin < 0 or b.xmax > self.image_width or b.ymax > self.image_height:
                raise ValueError(f"object box {b.as_tuple()} outside image bounds")
        return self


class DetectionFile(BaseModel):
    records: List[Detection] = Field(default_factory=list)
    source_lines: List[str] = Field(
        default_factory=list, description="Raw text of each record, parallel to records."
    )
    header: Optional[str] = Field(None, description="CSV header line, as read.")


class EvaluationResult(BaseModel):
    """Everything one evaluation run produces."""

    report: MetricsReport
    match: MatchSequence
    detections: List[Detection] = Field(
        default_factory=list, description="Detections after aggregation."
    )
    n_images: int = Field(0, ge=0)
