"""
Batch-wise pose tracking.

The video is cut into windows of ``batch_size`` frames. Each window's
graph holds its own detections plus the detections of the trailing
``tau`` frames already decided, whose variables are fixed to the values
chosen before. After the last window the active nodes and edges are split
into connected components, small components are dropped, duplicate joints
are merged and the remaining components become tracks.
"""
from __future__ import annotations

import math
import os
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields

import networkx as nx
import pandas as pd

from .access import io
from .config.context import Context
from .errors import ConfigurationError
from .graph import DEFAULT_NMS_IOU, DEFAULT_TAU, build_graph, nms
from .ilp import FAMILIES, VarIndex, build_instance, check_families
from .log import Logger
from .model import PoseTracks, Track, TrackEntry
from .potentials import CorrespondenceIndex, build_potentials
from .solver import SolverConfig, solve
from .util.files import ensure_directory

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)


@dataclass(frozen=True)
class TrackerConfig:
    """
    Windowing, filtering and solver settings of the tracker.

    ``temporal_joints`` restricts temporal edges to some joint types;
    ``constraints`` lists the enabled constraint families.
    """

    batch_size: int = 31
    tau: int = DEFAULT_TAU
    min_frames: int = 7
    min_avg_nodes: float = 6.0
    nms_iou: float = DEFAULT_NMS_IOU
    temporal_joints: tuple | None = None
    constraints: tuple = FAMILIES
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be at least 1, got {self.batch_size}.")
        if self.tau < 1:
            raise ConfigurationError(f"tau must be at least 1, got {self.tau}.")
        if self.min_frames < 1:
            raise ConfigurationError(f"min_frames must be at least 1, got {self.min_frames}.")
        if self.min_avg_nodes < 0:
            raise ConfigurationError(f"min_avg_nodes must be non-negative, got {self.min_avg_nodes}.")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ConfigurationError(f"nms_iou must lie in (0, 1], got {self.nms_iou}.")
        if self.temporal_joints is not None:
            object.__setattr__(self, "temporal_joints", tuple(sorted(int(j) for j in self.temporal_joints)))
        try:
            families = check_families(self.constraints)
        except ValueError as exc:
            raise ConfigurationError(str(exc))
        object.__setattr__(self, "constraints", tuple(f for f in FAMILIES if f in families))

    @classmethod
    def from_mapping(cls, data: dict, solver: dict = None) -> "TrackerConfig":
        """
        Build a config from a ``[tracker]`` mapping and an optional ``[solver]`` mapping.

        :raises ConfigurationError: On unknown keys or invalid values.
        """
        known = {f.name for f in fields(cls)} - {"solver"}
        unknown = sorted(set(data) - known)
        if unknown:
            errmsg = f"Unknown tracker settings {unknown}; known are {sorted(known)}."
            log.error(errmsg)
            raise ConfigurationError(errmsg)
        values = dict(data)
        if "constraints" in values:
            values["constraints"] = tuple(values["constraints"])
        return cls(**values, solver=SolverConfig.from_mapping(solver or {}))


@dataclass(frozen=True)
class Models:
    """The temporal model and the cross-type spatial model or probability table."""

    temporal: object = None
    spatial: object = None


@dataclass(frozen=True)
class Partition:
    """A connected set of selected detections, ``members`` ascending."""

    members: tuple[int, ...]
    member_frames: tuple[int, ...]

    @classmethod
    def from_members(cls, members, frame_of) -> "Partition":
        ordered = tuple(sorted(members))
        return cls(ordered, tuple(frame_of[m] for m in ordered))

    @property
    def frames(self) -> list[int]:
        return sorted(set(self.member_frames))

    @property
    def first_frame(self) -> int:
        return min(self.member_frames)

    @property
    def frame_span(self) -> int:
        return max(self.member_frames) - min(self.member_frames) + 1

    @property
    def avg_nodes_per_frame(self) -> float:
        return len(self.members) / len(set(self.member_frames))


@dataclass
class WindowStats:
    window: int
    first_frame: int
    last_frame: int
    nodes: int
    spatial_edges: int
    temporal_edges: int
    fixed: int
    objective: float
    nodes_explored: int
    constraints_added: int
    proven_optimal: bool
    wall_time: float | None = None


@dataclass
class TrackStats:
    """What happened during a tracking run."""

    windows: list = field(default_factory=list)
    partitions: int = 0
    kept_partitions: int = 0
    tracks: int = 0
    duplicate_joints: int = 0
    warnings: list = field(default_factory=list)
    runtime_per_frame: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        """Per window statistics as a data frame."""
        return pd.DataFrame([asdict(w) for w in self.windows])


def _components(nodes, edges, frame_of) -> list[Partition]:
    graph = nx.Graph()
    graph.add_nodes_from(nodes)
    graph.add_edges_from(edges)
    parts = [Partition.from_members(c, frame_of) for c in nx.connected_components(graph)]
    return sorted(parts, key=lambda p: p.members[0])


def extract_partitions(g, assignment) -> list[Partition]:
    """
    Split the active part of a solved graph into connected components.

    :param g: The graph the assignment belongs to.
    :param assignment: Values of the variables of ``g`` or an Assignment.
    :return: The partitions ordered by their smallest member id.
    :rtype: list[Partition]
    """
    index = VarIndex.from_graph(g)
    values = list(getattr(assignment, "values", assignment))
    nodes = [d for d, x in index.node_vars.items() if values[x]]
    edges = [k for k, x in index.spatial_vars.items() if values[x]]
    edges += [k for k, x in index.temporal_vars.items() if values[x]]
    frame_of = {det.id: det.frame for det in g.nodes}
    return _components(nodes, edges, frame_of)


def merge_duplicates(p: Partition, dets) -> dict:
    """
    Merge detections of one joint type in one frame of a partition.

    The merged joint sits at the score weighted mean position and keeps the
    highest member score.

    :param p: The partition.
    :param dets: Detections by id, or a list of detections.
    :return: frame -> joint type -> TrackEntry.
    :rtype: dict
    """
    by_id = dets if isinstance(dets, dict) else {det.id: det for det in dets}
    groups = defaultdict(list)
    for member in p.members:
        det = by_id[member]
        groups[(det.frame, det.joint)].append(det)
    poses = {}
    for (frame, joint), group in sorted(groups.items()):
        if len(group) == 1:
            det = group[0]
            entry = TrackEntry(frame, joint, det.x, det.y, det.score)
        else:
            weight = math.fsum(det.score for det in group)
            x = math.fsum(det.score * det.x for det in group) / weight
            y = math.fsum(det.score * det.y for det in group) / weight
            entry = TrackEntry(frame, joint, x, y, max(det.score for det in group))
        poses.setdefault(frame, {})[joint] = entry
    return poses


def filter_partitions(parts, cfg: TrackerConfig) -> list[Partition]:
    """Keep partitions spanning at least ``min_frames`` with enough nodes per occupied frame."""
    return [
        p
        for p in parts
        if p.frame_span >= cfg.min_frames and p.avg_nodes_per_frame >= cfg.min_avg_nodes
    ]


def duplicate_joint_count(parts, dets) -> int:
    """Number of (partition, frame, joint type) groups holding more than one detection."""
    by_id = dets if isinstance(dets, dict) else {det.id: det for det in dets}
    count = 0
    for p in parts:
        seen = defaultdict(int)
        for member in p.members:
            det = by_id[member]
            seen[(det.frame, det.joint)] += 1
        count += sum(1 for n in seen.values() if n > 1)
    return count


def partitions_to_tracks(parts, dets) -> PoseTracks:
    """
    Merge each partition into a track; ids follow the first frame, then the smallest member id.
    """
    ordered = sorted(parts, key=lambda p: (p.first_frame, p.members[0]))
    tracks = []
    for track_id, p in enumerate(ordered):
        poses = merge_duplicates(p, dets)
        entries = tuple(poses[frame][joint] for frame in sorted(poses) for joint in sorted(poses[frame]))
        tracks.append(Track(track_id, entries))
    return PoseTracks(tuple(tracks))


def _windows(frames, batch_size):
    first = frames[0]
    last = frames[-1]
    start = first
    while start <= last:
        yield start, start + batch_size - 1
        start += batch_size


def track_with_stats(dets, correspondences, models: Models, cfg: TrackerConfig = None,
                     deterministic: bool = True, dump_dir: str = None):
    """
    Track the poses of a video.

    :param dets: Joint detections of the video.
    :param correspondences: Correspondences covering every frame pair at most ``tau`` apart.
    :param models: Temporal and spatial models.
    :type models: Models
    :param cfg: Tracker settings.
    :type cfg: TrackerConfig
    :param deterministic: Leave wall times out of the statistics.
    :param dump_dir: Directory receiving the graph and potentials of every window.
    :return: The tracks and run statistics.
    :rtype: tuple[PoseTracks, TrackStats]
    """
    cfg = cfg or TrackerConfig()
    stats = TrackStats()
    start_time = time.perf_counter()
    dets = nms(list(dets), cfg.nms_iou)
    if not dets:
        log.info("No detections to track.")
        return PoseTracks(()), stats
    if dump_dir is not None:
        ensure_directory(dump_dir)
    corr = CorrespondenceIndex(correspondences)
    by_id = {det.id: det for det in dets}
    frame_of = {det.id: det.frame for det in dets}
    frames = sorted({det.frame for det in dets})

    decided_nodes = {}
    decided_edges = {}
    for number, (first, last) in enumerate(_windows(frames, cfg.batch_size)):
        own = [det for det in dets if first <= det.frame <= last]
        carried = [
            det for det in dets if first - cfg.tau <= det.frame < first and det.id in decided_nodes
        ]
        if not own:
            continue
        g = build_graph(carried + own, cfg.tau, cfg.temporal_joints)
        index = VarIndex.from_graph(g)
        fixed_elements = {("v", det.id): decided_nodes[det.id] for det in carried}
        for key in index.keys:
            if key[0] != "v" and key in decided_edges:
                fixed_elements[key] = decided_edges[key]
        pot = build_potentials(g, corr, models.temporal, models.spatial)
        inst = build_instance(g, pot, index.fixed_values(fixed_elements), cfg.constraints)
        if dump_dir is not None:
            stem = os.path.join(dump_dir, f"window_{number:03d}")
            io.write_graph(g, stem + ".graph.jsonl")
            io.write_potentials(pot, stem + ".potentials.jsonl", fixed_elements)

        assignment, solve_stats = solve(inst, cfg.solver)
        if not solve_stats.proven_optimal:
            message = f"Window {number} (frames {first}-{last}) was not solved to optimality."
            log.warning(message)
            stats.warnings.append(message)
        for x, key in enumerate(index.keys):
            if key[0] == "v":
                decided_nodes[key[1]] = assignment.values[x]
            else:
                decided_edges[key] = assignment.values[x]
        graph_stats = g.stats()
        stats.windows.append(
            WindowStats(
                window=number,
                first_frame=first,
                last_frame=last,
                nodes=graph_stats.nodes,
                spatial_edges=graph_stats.spatial_edges,
                temporal_edges=graph_stats.temporal_edges,
                fixed=len(inst.fixed),
                objective=assignment.objective,
                nodes_explored=solve_stats.nodes_explored,
                constraints_added=solve_stats.constraints_added,
                proven_optimal=solve_stats.proven_optimal,
                wall_time=None if deterministic else solve_stats.wall_time,
            )
        )
        log.info(
            f"Window {number}: frames {first}-{last}, {graph_stats.nodes} nodes, "
            f"objective {assignment.objective:.6g}."
        )

    nodes = [d for d, v in decided_nodes.items() if v]
    edges = [(key[1], key[2]) for key, v in decided_edges.items() if v]
    parts = _components(nodes, edges, frame_of)
    kept = filter_partitions(parts, cfg)
    tracks = partitions_to_tracks(kept, by_id)
    stats.partitions = len(parts)
    stats.kept_partitions = len(kept)
    stats.tracks = len(tracks)
    stats.duplicate_joints = duplicate_joint_count(kept, by_id)
    if not deterministic:
        stats.runtime_per_frame = (time.perf_counter() - start_time) / len(frames)
    log.info(f"Kept {len(kept)} of {len(parts)} partitions as tracks.")
    return tracks, stats


def track(dets, correspondences, models: Models, cfg: TrackerConfig = None) -> PoseTracks:
    """Track the poses of a video; see :func:`track_with_stats`."""
    tracks, _ = track_with_stats(dets, correspondences, models, cfg)
    return tracks
