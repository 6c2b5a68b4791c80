"""Bounding box aggregation: greedy NMS and merging of overlapping boxes (MOB)."""

import logging
import math
from collections import Counter, defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import area, average_box, enclose, pairwise_iou
from .schemas import (
    BbaConfig,
    BbaMethod,
    Detection,
    MergeStrategy,
    MobConfig,
    OverlapCluster,
)

logger = logging.getLogger(__name__)

GroupKey = Tuple[str, str]


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by rank."""

    def __init__(self, n: int) -> None:
        self.parent: List[int] = list(range(n))
        self.rank: List[int] = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        root_x, root_y = self.find(x), self.find(y)
        if root_x == root_y:
            return False
        if self.rank[root_x] < self.rank[root_y]:
            root_x, root_y = root_y, root_x
        self.parent[root_y] = root_x
        if self.rank[root_x] == self.rank[root_y]:
            self.rank[root_x] += 1
        return True


def _by_descending_score(dets: Sequence[Detection]) -> List[Detection]:
    # Stable: equal scores keep input order.
    return sorted(dets, key=lambda d: -d.score)


def nms(
    dets: Sequence[Detection], omega: float, score_threshold: float = 0.0
) -> List[Detection]:
    """Greedy non-maximum suppression for one (image, class) group.

    Drops detections scoring below ``score_threshold``, then repeatedly keeps
    the best remaining detection and discards every remaining one whose IoU
    with it exceeds ``omega``. Output is in descending score order.
    """
    candidates = _by_descending_score([d for d in dets if d.score >= score_threshold])
    if not candidates:
        return []

    overlaps = pairwise_iou([d.box for d in candidates])
    order = np.arange(len(candidates))
    keep: List[int] = []
    while order.size > 0:
        i = order[0]
        keep.append(int(i))
        rest = order[1:]
        order = rest[overlaps[i, rest] <= omega]

    return [candidates[i] for i in keep]


def cluster_overlaps(dets: Sequence[Detection], omega: float) -> List[OverlapCluster]:
    """Single-linkage clusters of the graph linking boxes with IoU > omega.

    Clusters are ordered by their lowest member index, members keep input order.
    """
    if not dets:
        return []

    linked = pairwise_iou([d.box for d in dets]) > omega
    rows, cols = np.nonzero(np.triu(linked, k=1))
    uf = UnionFind(len(dets))
    for i, k in zip(rows.tolist(), cols.tolist()):
        uf.union(i, k)

    components: Dict[int, List[Detection]] = {}
    for idx, det in enumerate(dets):
        components.setdefault(uf.find(idx), []).append(det)
    return [OverlapCluster(members=tuple(members)) for members in components.values()]


def merge_cluster(
    cluster: OverlapCluster,
    strategy: MergeStrategy = MergeStrategy.ENCLOSE,
    top_k: Optional[int] = None,
) -> Detection:
    """Replace a cluster with one detection.

    With ``top_k`` only the k best-scoring members (ties by input order) are
    merged. The merged score is the unweighted mean of the retained scores.
    """
    members = list(cluster.members)
    if top_k is not None and len(members) > top_k:
        members = _by_descending_score(members)[:top_k]
    if len(members) == 1:
        return members[0]

    boxes = [m.box for m in members]
    if strategy == MergeStrategy.ENCLOSE:
        box = enclose(boxes)
    elif strategy == MergeStrategy.AVERAGE:
        box = average_box(boxes)
    else:
        raise ValueError(f"unknown merge strategy: {strategy}")

    score = min(1.0, math.fsum(m.score for m in members) / len(members))
    return members[0].with_box(box, score=score)


def subdivide(cluster: OverlapCluster, a_max: float) -> List[OverlapCluster]:
    """Split a cluster until every part's enclosing box has area <= a_max.

    Members are ordered by box center along the longer side of the cluster's
    enclosing box and cut at the median (ceil(n/2) / floor(n/2)).
    """
    members = cluster.members
    bound = enclose([m.box for m in members])
    if area(bound) <= a_max:
        return [cluster]
    if len(members) == 1:
        # Only reachable when a_max is below a single member's area.
        logger.debug(f"Singleton cluster exceeds area bound {a_max}; kept as is.")
        return [cluster]

    axis = 0 if bound.width >= bound.height else 1
    ordered = sorted(members, key=lambda m: m.box.center[axis])
    half = (len(ordered) + 1) // 2
    return subdivide(OverlapCluster(members=tuple(ordered[:half])), a_max) + subdivide(
        OverlapCluster(members=tuple(ordered[half:])), a_max
    )


def _area_bound(dets: Sequence[Detection], i_max: Optional[float]) -> Optional[float]:
    if i_max is None:
        return None
    return i_max * max(area(d.box) for d in dets)


def _output_order(dets: Sequence[Detection]) -> List[Detection]:
    return sorted(dets, key=lambda d: (-d.score, d.box.as_tuple()))


def mob(
    dets: Sequence[Detection],
    config: Optional[MobConfig] = None,
    score_threshold: float = 0.0,
) -> List[Detection]:
    """Merge overlapping bounding boxes for one (image, class) group.

    Each iteration clusters the boxes, subdivides clusters whose merged box
    would exceed A_max = i_max * (largest input box area), and merges every
    cluster. Stops after ``m_max`` iterations, when one box remains, or when
    an iteration leaves the detections unchanged.
    """
    config = config or MobConfig()
    current = _by_descending_score([d for d in dets if d.score >= score_threshold])
    if not current:
        return []

    fixed_bound: Optional[float] = None
    for iteration in range(1, config.m_max + 1):
        if len(current) <= 1:
            break

        if config.fixed_area_bound:
            if fixed_bound is None:
                fixed_bound = _area_bound(current, config.i_max)
            a_max = fixed_bound
        else:
            a_max = _area_bound(current, config.i_max)

        clusters = cluster_overlaps(current, config.omega)
        if a_max is not None:
            clusters = [part for c in clusters for part in subdivide(c, a_max)]

        merged = _by_descending_score(
            [merge_cluster(c, config.merge_strategy, config.top_k) for c in clusters]
        )
        logger.debug(
            f"MOB iteration {iteration}: {len(current)} -> {len(merged)} boxes"
            f" (A_max={a_max})"
        )
        if Counter(merged) == Counter(current):
            current = merged
            break
        current = merged

    return _output_order(current)


def group_detections(dets: Sequence[Detection]) -> Dict[GroupKey, List[Detection]]:
    """Group detections by (image_id, class_label), keeping input order inside groups."""
    groups: Dict[GroupKey, List[Detection]] = defaultdict(list)
    for det in dets:
        groups[(det.image_id, det.class_label)].append(det)
    return dict(groups)


def aggregate_group(
    dets: Sequence[Detection], bba: BbaConfig, score_threshold: float
) -> List[Detection]:
    """Run the configured aggregation on one (image, class) group."""
    if bba.method == BbaMethod.NMS:
        return nms(dets, bba.nms_iou, score_threshold)
    if bba.method == BbaMethod.MOB:
        return mob(dets, bba.mob, score_threshold)
    return [d for d in dets if d.score >= score_threshold]


def aggregate(
    dets: Sequence[Detection], bba: BbaConfig, score_threshold: float = 0.0
) -> List[Detection]:
    """Apply the configured aggregation to every (image, class) group.

    ``none`` only filters by score and keeps the input order; the other
    methods emit groups in sorted (image_id, class_label) order.
    """
    if bba.method == BbaMethod.NONE:
        return aggregate_group(dets, bba, score_threshold)
    groups = group_detections(dets)
    result: List[Detection] = []
    for key in sorted(groups):
        result.extend(aggregate_group(groups[key], bba, score_threshold))
    return result
