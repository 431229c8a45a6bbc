"""
The spatio-temporal graph over joint detections.

Nodes are detections. Spatial edges join every pair of detections in a
frame, whatever their joint types. Temporal edges join detections of the
same joint type at most ``tau`` frames apart.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

from .config.context import Context
from .errors import ValidationError
from .log import Logger
from .model import BoundingBox, Detection

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

# Box side in pixels of a detection found at scale 1.
BOX_SIZE = 70.0
DEFAULT_TAU = 3
DEFAULT_NMS_IOU = 0.7


@dataclass(frozen=True, order=True)
class SpatialEdge:
    """Edge between two detections of one frame, ``a < b``."""
    a: int
    b: int


@dataclass(frozen=True, order=True)
class TemporalEdge:
    """Edge between same-type detections, ``frame(a) < frame(b)``."""
    a: int
    b: int


@dataclass(frozen=True)
class GraphStats:
    frames: int
    nodes: int
    spatial_edges: int
    temporal_edges: int


def derive_bbox(d: Detection) -> BoundingBox:
    """
    Return the square box of a detection, side ``70 / scale``.

    :param d: The detection.
    :type d: Detection
    :return: The box centered on the detection.
    :rtype: BoundingBox
    """
    return BoundingBox(d.x, d.y, BOX_SIZE / d.scale)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """
    Intersection over union of two boxes; 0 for disjoint boxes.
    """
    width = min(a.x1, b.x1) - max(a.x0, b.x0)
    height = min(a.y1, b.y1) - max(a.y0, b.y0)
    if width <= 0.0 or height <= 0.0:
        return 0.0
    intersection = width * height
    union = a.area + b.area - intersection
    if union <= 0.0:
        return 0.0
    return intersection / union


def nms(dets: list[Detection], iou_threshold: float = DEFAULT_NMS_IOU) -> list[Detection]:
    """
    Greedy non-maximum suppression within each (frame, joint type) group.

    Detections are visited by decreasing score (lower id first on ties); a
    detection is kept when its IoU with every kept detection of its group is
    at most ``iou_threshold``. Detection scales are not separated.

    :param dets: Detections of one video.
    :type dets: list[Detection]
    :param iou_threshold: Suppression threshold in (0, 1].
    :type iou_threshold: float
    :return: The kept detections, in input order.
    :rtype: list[Detection]
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError(f"NMS threshold {iou_threshold} outside (0, 1].")
    groups = defaultdict(list)
    for det in dets:
        groups[(det.frame, det.joint)].append(det)
    kept_ids = set()
    for key in sorted(groups):
        kept = []
        for det in sorted(groups[key], key=lambda d: (-d.score, d.id)):
            box = derive_bbox(det)
            if all(iou(box, other) <= iou_threshold for other in kept):
                kept.append(box)
                kept_ids.add(det.id)
    result = [det for det in dets if det.id in kept_ids]
    log.debug(f"Non-maximum suppression kept {len(result)} of {len(dets)} detections.")
    return result


@dataclass(frozen=True)
class SpatioTemporalGraph:
    """
    Detections with their boxes and the two edge families.

    ``nodes`` are sorted by (frame, id); ``spatial_edges`` by
    (frame, a, b); ``temporal_edges`` by (frame(a), frame(b), a, b).
    """

    nodes: tuple[Detection, ...]
    spatial_edges: tuple[SpatialEdge, ...]
    temporal_edges: tuple[TemporalEdge, ...]
    tau: int
    temporal_joints: frozenset | None = None
    boxes: dict = field(default_factory=dict, compare=False, repr=False)

    @cached_property
    def by_id(self) -> dict[int, Detection]:
        return {det.id: det for det in self.nodes}

    @cached_property
    def frames(self) -> list[int]:
        return sorted({det.frame for det in self.nodes})

    @cached_property
    def frame_nodes(self) -> dict[int, list[int]]:
        """Detection ids per frame, ascending."""
        grouped = defaultdict(list)
        for det in self.nodes:
            grouped[det.frame].append(det.id)
        return {frame: sorted(ids) for frame, ids in grouped.items()}

    @cached_property
    def spatial_set(self) -> frozenset:
        return frozenset((e.a, e.b) for e in self.spatial_edges)

    @cached_property
    def temporal_set(self) -> frozenset:
        return frozenset((e.a, e.b) for e in self.temporal_edges)

    def box(self, det_id: int) -> BoundingBox:
        if det_id not in self.boxes:
            self.boxes[det_id] = derive_bbox(self.by_id[det_id])
        return self.boxes[det_id]

    def temporal_key(self, x: int, y: int) -> tuple[int, int]:
        """Order a same-type pair by frame."""
        if self.by_id[x].frame < self.by_id[y].frame:
            return (x, y)
        return (y, x)

    def has_temporal(self, x: int, y: int) -> bool:
        return self.temporal_key(x, y) in self.temporal_set

    def stats(self) -> GraphStats:
        return GraphStats(
            frames=len(self.frames),
            nodes=len(self.nodes),
            spatial_edges=len(self.spatial_edges),
            temporal_edges=len(self.temporal_edges),
        )


def _temporal_joint_ok(joint, temporal_joints):
    return temporal_joints is None or joint in temporal_joints


def build_graph(
    dets: list[Detection], tau: int = DEFAULT_TAU, temporal_joints=None
) -> SpatioTemporalGraph:
    """
    Build the spatio-temporal graph of a set of detections.

    :param dets: Detections, normally already passed through :func:`nms`.
    :type dets: list[Detection]
    :param tau: Longest temporal edge in frames, at least 1.
    :type tau: int
    :param temporal_joints: Joint types that receive temporal edges, None for all.
    :type temporal_joints: iterable or None
    :return: The graph.
    :rtype: SpatioTemporalGraph
    :raises ValidationError: If tau is below 1 or ids repeat.
    """
    if tau < 1:
        raise ValidationError(f"tau must be at least 1, got {tau}.")
    if temporal_joints is not None:
        temporal_joints = frozenset(int(j) for j in temporal_joints)
    nodes = tuple(sorted(dets, key=lambda d: (d.frame, d.id)))
    if len({d.id for d in nodes}) != len(nodes):
        raise ValidationError("Detection ids must be unique to build a graph.")

    by_frame = defaultdict(list)
    by_frame_joint = defaultdict(list)
    for det in nodes:
        by_frame[det.frame].append(det.id)
        by_frame_joint[(det.frame, det.joint)].append(det.id)
    frames = sorted(by_frame)

    spatial = []
    for frame in frames:
        ids = sorted(by_frame[frame])
        spatial.extend(SpatialEdge(a, b) for a, b in combinations(ids, 2))

    frame_of = {det.id: det.frame for det in nodes}
    joints = sorted({det.joint for det in nodes})
    temporal = []
    for i, frame in enumerate(frames):
        for later in frames[i + 1:]:
            if later - frame > tau:
                break
            for joint in joints:
                if not _temporal_joint_ok(joint, temporal_joints):
                    continue
                for a in by_frame_joint.get((frame, joint), ()):
                    for b in by_frame_joint.get((later, joint), ()):
                        temporal.append(TemporalEdge(a, b))
    temporal.sort(key=lambda e: (frame_of[e.a], frame_of[e.b], e.a, e.b))

    graph = SpatioTemporalGraph(
        nodes=nodes,
        spatial_edges=tuple(spatial),
        temporal_edges=tuple(temporal),
        tau=tau,
        temporal_joints=temporal_joints,
        boxes={det.id: derive_bbox(det) for det in nodes},
    )
    log.debug(
        f"Built graph with {len(nodes)} nodes, {len(spatial)} spatial "
        f"and {len(temporal)} temporal edges (tau={tau})."
    )
    return graph
