"""
Synthetic scenes: ground truth poses, joint detections and correspondences.

Every draw comes from one ``numpy.random.default_rng(seed)`` (PCG64)
generator, in this order: per person scale, start position and velocity;
occlusion episodes; per frame motion noise; detections frame by frame
(person by person, joint by joint: miss draw, then noise) followed by the
false positives of the frame; correspondences frame by frame and gap by
gap. Background correspondence points move with the nearest person.
The same configuration therefore always gives the same scene.

Skeletons are a rigid template of joint offsets measured in detection box
sides (``70 / scale`` pixels) around a root point that moves with constant
velocity.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .config.context import Context
from .errors import ConfigurationError
from .graph import BOX_SIZE
from .log import Logger
from .model import (
    DEFAULT_JOINT_COUNT,
    Correspondence,
    Detection,
    GroundTruthJoint,
    GroundTruthPose,
)

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

# Joint offsets from the hip center in box sides, x right and y down, in
# the order of model.JOINT_NAMES.
TEMPLATE = np.array(
    [
        [-0.25, 1.4],
        [-0.22, 0.7],
        [-0.2, 0.0],
        [0.2, 0.0],
        [0.22, 0.7],
        [0.25, 1.4],
        [-0.55, 0.0],
        [-0.5, -0.5],
        [-0.35, -1.0],
        [0.35, -1.0],
        [0.5, -0.5],
        [0.55, 0.0],
        [0.0, -1.1],
        [0.0, -1.6],
    ]
)
NECK = 12
HEAD_TOP = 13
FP_SCORE_RANGE = (0.5, 0.7)
TP_SCORE_RANGE = (0.75, 0.95)
# Offsets of the local correspondence points around a joint, in box sides.
LOCAL_OFFSETS = (-0.25, 0.0, 0.25)


@dataclass(frozen=True)
class SynthConfig:
    """
    Scene parameters. Rates are probabilities; noise is in pixels.

    ``spacing`` places the persons that many pixels apart around the image
    center instead of spreading them over equal lanes.
    """

    seed: int = 0
    persons: int = 3
    frames: int = 41
    joint_count: int = DEFAULT_JOINT_COUNT
    width: int = 1280
    height: int = 720
    max_speed: float = 2.0
    motion_noise: float = 0.0
    detection_noise: float = 0.0
    miss_rate: float = 0.0
    fp_rate: float = 0.0
    occlusions: int = 0
    occlusion_duration: tuple = (3, 8)
    scale_range: tuple = (0.6, 1.5)
    spacing: float | None = None
    emit_occluded: bool = False
    corr_span: int = 3
    corr_grid: int = 40
    corr_jitter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "occlusion_duration", tuple(self.occlusion_duration))
        object.__setattr__(self, "scale_range", tuple(float(s) for s in self.scale_range))
        for name in ("miss_rate", "fp_rate"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {value}.")
        for name in ("persons", "occlusions", "corr_span"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative.")
        for name in ("frames", "width", "height", "corr_grid"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive.")
        if self.joint_count != DEFAULT_JOINT_COUNT:
            raise ConfigurationError(f"The skeleton template has {DEFAULT_JOINT_COUNT} joints.")
        for name in ("max_speed", "motion_noise", "detection_noise", "corr_jitter"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative.")
        low, high = self.scale_range
        if not 0.0 < low <= high:
            raise ConfigurationError(f"scale_range {self.scale_range} must be positive and ordered.")
        shortest, longest = self.occlusion_duration
        if not 1 <= shortest <= longest:
            raise ConfigurationError(f"occlusion_duration {self.occlusion_duration} must be ordered and at least 1.")

    @classmethod
    def from_mapping(cls, data: dict) -> "SynthConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown synth settings {unknown}.")
        return cls(**data)


@dataclass(frozen=True)
class Scene:
    annotations: list
    detections: list
    correspondences: list


def _roots(cfg, rng):
    """Root start positions and velocities, one row per person."""
    starts = np.zeros((cfg.persons, 2))
    velocities = np.zeros((cfg.persons, 2))
    for p in range(cfg.persons):
        if cfg.spacing is None:
            lane = cfg.width / max(cfg.persons, 1)
            x = lane * (p + 0.5)
        else:
            x = cfg.width / 2.0 + (p - (cfg.persons - 1) / 2.0) * cfg.spacing
        y = cfg.height * 0.5 + rng.uniform(-0.05, 0.05) * cfg.height
        starts[p] = (x, y)
        velocities[p] = rng.uniform(-cfg.max_speed, cfg.max_speed, size=2)
    return starts, velocities


def _occlusion_mask(cfg, rng):
    """Boolean array frames x persons x joints of occluded joints."""
    mask = np.zeros((cfg.frames, cfg.persons, cfg.joint_count), dtype=bool)
    if cfg.persons == 0:
        return mask
    shortest, longest = cfg.occlusion_duration
    for _ in range(cfg.occlusions):
        person = int(rng.integers(cfg.persons))
        start = int(rng.integers(cfg.frames))
        duration = int(rng.integers(shortest, longest + 1))
        joints = rng.random(cfg.joint_count) < 0.5
        mask[start:start + duration, person, joints] = True
    return mask


def _background_shift(points, roots_a, roots_b):
    """Move each point with the root of the person nearest to it in the first frame."""
    if len(roots_a) == 0:
        return np.zeros_like(points)
    nearest = np.argmin(((points[:, None, :] - roots_a[None, :, :]) ** 2).sum(axis=2), axis=1)
    return (roots_b - roots_a)[nearest]


def generate(cfg: SynthConfig = None) -> Scene:
    """
    Generate a scene.

    :param cfg: The scene parameters.
    :type cfg: SynthConfig
    :return: Annotations, detections and correspondences.
    :rtype: Scene
    """
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    low, high = cfg.scale_range
    scales = rng.uniform(low, high, size=cfg.persons)
    sides = BOX_SIZE / scales
    starts, velocities = _roots(cfg, rng)
    occluded = _occlusion_mask(cfg, rng)

    roots = np.zeros((cfg.frames, cfg.persons, 2))
    drift = np.zeros((cfg.persons, 2))
    for f in range(cfg.frames):
        if f > 0:
            drift += rng.normal(0.0, cfg.motion_noise, size=(cfg.persons, 2))
        roots[f] = starts + velocities * f + drift
    # frames x persons x joints x 2
    joints = roots[:, :, None, :] + TEMPLATE[None, None, :, :] * sides[None, :, None, None]

    annotations = []
    for f in range(cfg.frames):
        for p in range(cfg.persons):
            head, neck = joints[f, p, HEAD_TOP], joints[f, p, NECK]
            cx = (head[0] + neck[0]) / 2.0
            half = 0.25 * sides[p]
            box = (
                float(cx - half),
                float(head[1] - 0.05 * sides[p]),
                float(cx + half),
                float(neck[1] + 0.05 * sides[p]),
            )
            annotations.append(
                GroundTruthPose(
                    f,
                    p,
                    box,
                    tuple(
                        GroundTruthJoint(j, float(joints[f, p, j, 0]), float(joints[f, p, j, 1]), bool(occluded[f, p, j]))
                        for j in range(cfg.joint_count)
                    ),
                )
            )

    detections = []
    for f in range(cfg.frames):
        for p in range(cfg.persons):
            for j in range(cfg.joint_count):
                if occluded[f, p, j] and not cfg.emit_occluded:
                    continue
                if rng.random() < cfg.miss_rate:
                    continue
                noise = rng.normal(0.0, cfg.detection_noise, size=2)
                score = rng.uniform(*TP_SCORE_RANGE)
                detections.append(
                    Detection(
                        len(detections),
                        f,
                        j,
                        float(joints[f, p, j, 0] + noise[0]),
                        float(joints[f, p, j, 1] + noise[1]),
                        float(score),
                        float(scales[p]),
                    )
                )
        for j in range(cfg.joint_count):
            if rng.random() < cfg.fp_rate:
                detections.append(
                    Detection(
                        len(detections),
                        f,
                        j,
                        float(rng.uniform(0, cfg.width)),
                        float(rng.uniform(0, cfg.height)),
                        float(rng.uniform(*FP_SCORE_RANGE)),
                        float(rng.uniform(low, high)),
                    )
                )

    grid = np.array(
        [
            (x, y)
            for y in np.arange(cfg.corr_grid / 2.0, cfg.height, cfg.corr_grid)
            for x in np.arange(cfg.corr_grid / 2.0, cfg.width, cfg.corr_grid)
        ]
    ).reshape(-1, 2)
    local = np.array([(dx, dy) for dy in LOCAL_OFFSETS for dx in LOCAL_OFFSETS])
    correspondences = []
    for f in range(cfg.frames):
        for gap in range(1, cfg.corr_span + 1):
            g = f + gap
            if g >= cfg.frames:
                break
            points_a = [grid]
            points_b = [grid + _background_shift(grid, roots[f], roots[g])]
            for p in range(cfg.persons):
                for j in range(cfg.joint_count):
                    if occluded[f, p, j] or occluded[g, p, j]:
                        continue
                    around = local * sides[p]
                    points_a.append(joints[f, p, j] + around)
                    points_b.append(joints[g, p, j] + around)
            points_a = np.vstack(points_a)
            points_b = np.vstack(points_b) + rng.normal(0.0, cfg.corr_jitter, size=(len(points_a), 2))
            correspondences.append(
                Correspondence(
                    f,
                    g,
                    tuple(map(tuple, points_a.tolist())),
                    tuple(map(tuple, points_b.tolist())),
                )
            )
    log.info(
        f"Generated {cfg.persons} persons over {cfg.frames} frames: "
        f"{len(detections)} detections, {len(correspondences)} correspondence records."
    )
    return Scene(annotations, detections, correspondences)
