"""
Domain types shared by every jointrack module.

All records are frozen dataclasses; once constructed they are safe to share
between workers. Pixel coordinates are floats, frames are non-negative
integers and joint types are integers in ``[0, J)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ValidationError

EPSILON = 1e-6
DEFAULT_JOINT_COUNT = 14

JOINT_NAMES = (
    "right_ankle",
    "right_knee",
    "right_hip",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_wrist",
    "right_elbow",
    "right_shoulder",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "neck",
    "head_top",
)

# Symmetric joints are reported together, as in head-box benchmarks.
BODY_PARTS = {
    "Head": (12, 13),
    "Shoulder": (8, 9),
    "Elbow": (7, 10),
    "Wrist": (6, 11),
    "Hip": (2, 3),
    "Knee": (1, 4),
    "Ankle": (0, 5),
}


def clamp_probability(p: float, eps: float = EPSILON) -> float:
    """
    Clamp a probability into ``[eps, 1 - eps]`` so log-odds stay finite.

    :param p: The probability.
    :type p: float
    :param eps: The clamping margin.
    :type eps: float
    :return: The clamped probability.
    :rtype: float
    """
    return min(max(float(p), eps), 1.0 - eps)


@dataclass(frozen=True)
class JointType:
    """A body joint type ``id`` out of ``J`` types."""

    id: int
    J: int = DEFAULT_JOINT_COUNT

    def __post_init__(self):
        if self.J < 1:
            raise ValidationError(f"Joint count must be at least 1, got {self.J}.")
        if not 0 <= self.id < self.J:
            raise ValidationError(f"Joint type {self.id} outside [0, {self.J}).")

    @property
    def name(self) -> str:
        if self.J == DEFAULT_JOINT_COUNT:
            return JOINT_NAMES[self.id]
        return f"joint_{self.id}"


@dataclass(frozen=True)
class Detection:
    """One scored body joint hypothesis."""

    id: int
    frame: int
    joint: int
    x: float
    y: float
    score: float
    scale: float

    def __post_init__(self):
        if self.frame < 0:
            raise ValidationError(f"Detection {self.id} has negative frame {self.frame}.")
        if self.joint < 0:
            raise ValidationError(f"Detection {self.id} has negative joint type {self.joint}.")
        if not 0.0 < self.score < 1.0:
            raise ValidationError(f"Detection {self.id} score {self.score} outside (0, 1).")
        if not self.scale > 0.0:
            raise ValidationError(f"Detection {self.id} scale {self.scale} is not positive.")

    @property
    def pos(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class BoundingBox:
    """Axis aligned square box of width and height ``side`` around a center."""

    cx: float
    cy: float
    side: float

    def __post_init__(self):
        if not self.side > 0.0:
            raise ValidationError(f"Bounding box side {self.side} is not positive.")

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    @property
    def x0(self) -> float:
        return self.cx - self.side / 2.0

    @property
    def x1(self) -> float:
        return self.cx + self.side / 2.0

    @property
    def y0(self) -> float:
        return self.cy - self.side / 2.0

    @property
    def y1(self) -> float:
        return self.cy + self.side / 2.0

    @property
    def area(self) -> float:
        return self.side * self.side

    def contains(self, points: np.ndarray) -> np.ndarray:
        """
        Return a boolean mask of the points (n x 2) inside the box, borders included.
        """
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        half = self.side / 2.0
        return (np.abs(points[:, 0] - self.cx) <= half) & (np.abs(points[:, 1] - self.cy) <= half)


@dataclass(frozen=True)
class GroundTruthJoint:
    joint: int
    x: float
    y: float
    occluded: bool = False


@dataclass(frozen=True)
class GroundTruthPose:
    """
    An annotated person in one frame.

    Truncated joints are absent from ``joints``; occluded joints are present
    with ``occluded=True``. ``head_box`` is ``(x0, y0, x1, y1)``.
    """

    frame: int
    person_id: int
    head_box: tuple[float, float, float, float]
    joints: tuple[GroundTruthJoint, ...] = ()

    def __post_init__(self):
        x0, y0, x1, y1 = self.head_box
        if not (x1 > x0 and y1 > y0):
            raise ValidationError(
                f"Head box {self.head_box} of person {self.person_id} in frame {self.frame} "
                "must have positive width and height."
            )
        seen = set()
        for joint in self.joints:
            if joint.joint in seen:
                raise ValidationError(
                    f"Joint type {joint.joint} listed twice for person {self.person_id} "
                    f"in frame {self.frame}."
                )
            seen.add(joint.joint)

    @property
    def head_diagonal(self) -> float:
        x0, y0, x1, y1 = self.head_box
        return math.hypot(x1 - x0, y1 - y0)

    def joint(self, joint: int) -> GroundTruthJoint | None:
        for entry in self.joints:
            if entry.joint == joint:
                return entry
        return None

    @cached_property
    def by_type(self) -> dict[int, GroundTruthJoint]:
        return {entry.joint: entry for entry in self.joints}


@dataclass(frozen=True)
class Correspondence:
    """Matched key points between two frames: ``points_a[i]`` moves to ``points_b[i]``."""

    frame_a: int
    frame_b: int
    points_a: tuple[tuple[float, float], ...]
    points_b: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points_a) != len(self.points_b):
            raise ValidationError(
                f"Correspondence ({self.frame_a}, {self.frame_b}) has {len(self.points_a)} "
                f"source and {len(self.points_b)} target points."
            )
        if self.frame_a == self.frame_b:
            raise ValidationError(f"Correspondence links frame {self.frame_a} to itself.")

    @cached_property
    def array_a(self) -> np.ndarray:
        return np.asarray(self.points_a, dtype=float).reshape(-1, 2)

    @cached_property
    def array_b(self) -> np.ndarray:
        return np.asarray(self.points_b, dtype=float).reshape(-1, 2)

    def reversed(self) -> "Correspondence":
        return Correspondence(self.frame_b, self.frame_a, self.points_b, self.points_a)


@dataclass(frozen=True)
class TrackEntry:
    frame: int
    joint: int
    x: float
    y: float
    score: float


@dataclass(frozen=True)
class Track:
    track_id: int
    entries: tuple[TrackEntry, ...] = ()

    @property
    def frames(self) -> list[int]:
        return sorted({entry.frame for entry in self.entries})


@dataclass(frozen=True)
class PoseTracks:
    """
    The tracked poses of a video, one :class:`Track` per person identity.
    """

    tracks: tuple[Track, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = set()
        for track in self.tracks:
            if track.track_id in ids:
                raise ValidationError(f"Track id {track.track_id} used twice.")
            ids.add(track.track_id)
            seen = set()
            for entry in track.entries:
                key = (entry.frame, entry.joint)
                if key in seen:
                    raise ValidationError(
                        f"Track {track.track_id} has two entries for joint {entry.joint} "
                        f"in frame {entry.frame}."
                    )
                seen.add(key)

    def __len__(self):
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    def poses_by_frame(self) -> dict[int, dict[int, dict[int, TrackEntry]]]:
        """
        Regroup the tracks as frame -> track id -> joint type -> entry.
        """
        poses = {}
        for track in self.tracks:
            for entry in track.entries:
                poses.setdefault(entry.frame, {}).setdefault(track.track_id, {})[entry.joint] = entry
        return poses
