"""
Pose estimation and tracking measures.

Correctness of a predicted joint follows PCKh: it must lie within
``ratio`` times the head box diagonal of the ground truth person. Pose
estimation is scored by the mean average precision over joint types;
tracking treats every (person, joint type) trajectory as a target and
reports the CLEAR MOT measures over them.

With ``occlusion_aware`` set an occluded ground truth joint is only
counted when something was predicted for it: a prediction in place is a
true positive, a misplaced one a false positive, and no prediction at
all removes the joint from the ground truth.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from .config.context import Context
from .errors import ConfigurationError, ValidationError
from .log import Logger
from .model import BODY_PARTS, DEFAULT_JOINT_COUNT, JointType

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

# Fractions of a trajectory, in tenths.
MOSTLY_TRACKED = 8
MOSTLY_LOST = 2
# Cost given to pairs beyond the threshold in the optimal assignment.
_UNREACHABLE = 1.0e6


@dataclass(frozen=True)
class PckhConfig:
    ratio: float = 0.2

    def __post_init__(self):
        if not self.ratio > 0:
            raise ConfigurationError(f"PCKh ratio must be positive, got {self.ratio}.")

    @classmethod
    def from_mapping(cls, data: dict) -> "PckhConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(f"Unknown pckh settings {unknown}.")
        return cls(**data)


def pckh_threshold(gt_pose, cfg: PckhConfig = None) -> float:
    """
    Distance in pixels within which a joint of ``gt_pose`` counts as found.

    :param gt_pose: A GroundTruthPose or a head box ``(x0, y0, x1, y1)``.
    :param cfg: PCKh settings.
    :return: ``ratio`` times the head box diagonal.
    :raises ValidationError: For a head box without area.
    """
    cfg = cfg or PckhConfig()
    x0, y0, x1, y1 = getattr(gt_pose, "head_box", gt_pose)
    if not (x1 > x0 and y1 > y0):
        raise ValidationError(f"Head box {(x0, y0, x1, y1)} has no area.")
    return cfg.ratio * math.hypot(x1 - x0, y1 - y0)


def _distance(entry, joint) -> float:
    return math.hypot(entry.x - joint.x, entry.y - joint.y)


def _pose_score(pose: dict) -> float:
    return math.fsum(entry.score for entry in pose.values()) / len(pose) if pose else 0.0


def match_poses(predictions: dict, gts, cfg: PckhConfig = None) -> dict:
    """
    Greedily match the predicted poses of one frame to its ground truth poses.

    Predictions are visited by decreasing mean joint score (then track id);
    each takes the unmatched person with most correct joints, at least one,
    then the smaller mean normalised distance of those joints, then the
    smaller person id.

    :param predictions: track id -> joint type -> TrackEntry.
    :param gts: Ground truth poses of the frame.
    :return: track id -> person id for matched predictions.
    :rtype: dict
    """
    cfg = cfg or PckhConfig()
    thresholds = {pose.person_id: pckh_threshold(pose, cfg) for pose in gts}
    available = {pose.person_id: pose for pose in gts}
    order = sorted(predictions, key=lambda t: (-_pose_score(predictions[t]), t))
    matches = {}
    for track_id in order:
        pose = predictions[track_id]
        best = None
        for person_id in sorted(available):
            gt = available[person_id]
            threshold = thresholds[person_id]
            correct = []
            for joint, entry in pose.items():
                target = gt.by_type.get(joint)
                if target is None:
                    continue
                distance = _distance(entry, target)
                if distance <= threshold:
                    correct.append(distance / threshold)
            if not correct:
                continue
            key = (-len(correct), math.fsum(correct) / len(correct), person_id)
            if best is None or key < best:
                best = key
        if best is not None:
            matches[track_id] = best[2]
            del available[best[2]]
    return matches


def average_precision(ranked, n_gt: int) -> float:
    """
    Area under the interpolated precision/recall curve.

    :param ranked: True positive flags of the predictions, best first.
    :param n_gt: Number of ground truth items.
    :return: The average precision in [0, 1], NaN without ground truth.
    """
    if n_gt == 0:
        return math.nan
    if len(ranked) == 0:
        return 0.0
    hits = np.asarray(ranked, dtype=float)
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, len(hits) + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    # recall grows by 1 / n_gt at every hit
    return math.fsum(envelope[hits > 0].tolist()) / n_gt


def _joint_name(joint, joint_count):
    return JointType(joint, joint_count).name


def _frames(gts):
    grouped = defaultdict(list)
    for pose in gts:
        grouped[pose.frame].append(pose)
    return grouped


def pose_map(tracks, gts, cfg: PckhConfig = None, occlusion_aware: bool = False,
             joint_count: int = DEFAULT_JOINT_COUNT) -> dict:
    """
    Average precision per joint type and its mean, in percent.

    :param tracks: The predicted PoseTracks.
    :param gts: The ground truth poses.
    :return: ``{"per_joint_ap": {name: AP}, "per_part_ap": {...}, "mAP": value}``;
        joint types without ground truth get NaN and are left out of the mean.
    :rtype: dict
    """
    cfg = cfg or PckhConfig()
    predicted = tracks.poses_by_frame()
    gt_frames = _frames(gts)
    scored = defaultdict(list)
    n_gt = defaultdict(int)
    for frame in sorted(set(predicted) | set(gt_frames)):
        poses = predicted.get(frame, {})
        frame_gts = gt_frames.get(frame, [])
        matches = match_poses(poses, frame_gts, cfg)
        by_person = {pose.person_id: pose for pose in frame_gts}
        matched_people = {}
        for track_id in sorted(poses):
            person_id = matches.get(track_id)
            gt = by_person.get(person_id)
            if gt is not None:
                matched_people[person_id] = poses[track_id]
            threshold = pckh_threshold(gt, cfg) if gt is not None else None
            for joint, entry in sorted(poses[track_id].items()):
                target = gt.by_type.get(joint) if gt is not None else None
                hit = target is not None and _distance(entry, target) <= threshold
                scored[joint].append((entry.score, frame, track_id, hit))
        for pose in frame_gts:
            prediction = matched_people.get(pose.person_id, {})
            for joint in pose.joints:
                if occlusion_aware and joint.occluded and joint.joint not in prediction:
                    continue
                n_gt[joint.joint] += 1

    per_joint = {}
    for joint in range(joint_count):
        ranked = sorted(scored.get(joint, []), key=lambda item: (-item[0], item[1], item[2]))
        ap = average_precision([item[3] for item in ranked], n_gt.get(joint, 0))
        per_joint[joint] = ap * 100.0 if not math.isnan(ap) else math.nan
    values = [ap for ap in per_joint.values() if not math.isnan(ap)]
    mean = float(np.mean(values)) if values else math.nan
    result = {
        "per_joint_ap": {_joint_name(j, joint_count): ap for j, ap in per_joint.items()},
        "mAP": mean,
    }
    if joint_count == DEFAULT_JOINT_COUNT:
        parts = {}
        for name, (first, second) in BODY_PARTS.items():
            pair = [per_joint[first], per_joint[second]]
            pair = [ap for ap in pair if not math.isnan(ap)]
            parts[name] = float(np.mean(pair)) if pair else math.nan
        result["per_part_ap"] = parts
    return result


def assign_within(costs: np.ndarray, limits: np.ndarray) -> list[tuple[int, int]]:
    """
    One-to-one matching restricted to pairs with ``cost <= limit``.

    The matching has as many pairs as possible and, among those, the least
    total cost. Pairs beyond their limit are never returned.

    :return: (row, column) pairs in row order.
    """
    if costs.size == 0:
        return []
    allowed = costs <= limits
    padded = np.where(allowed, costs, _UNREACHABLE)
    rows, cols = linear_sum_assignment(padded)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if allowed[r, c]]


@dataclass
class _Target:
    frames: int = 0
    matched: int = 0
    last_track: int | None = None
    was_matched: bool = False
    was_lost: bool = False
    fragments: int = 0


def track_metrics(tracks, gts, cfg: PckhConfig = None, occlusion_aware: bool = False) -> dict:
    """
    CLEAR MOT measures over joint trajectories.

    Every (person id, joint type) of the ground truth is a target. In each
    frame and for each joint type the matches of the previous frame are
    kept when still within threshold, the rest are matched by a minimum
    total distance assignment among pairs within threshold.

    :param tracks: The predicted PoseTracks.
    :param gts: The ground truth poses.
    :return: Rcll, Prcn, MT, ML, IDs, FM, MOTA, MOTP and the counters behind them.
    :rtype: dict
    """
    cfg = cfg or PckhConfig()
    predicted = tracks.poses_by_frame()
    gt_frames = _frames(gts)
    targets = defaultdict(_Target)
    previous = {}
    tp = fp = fn = switches = counted = 0
    precision_terms = []
    for frame in sorted(set(predicted) | set(gt_frames)):
        gt_by_type = defaultdict(list)
        for pose in sorted(gt_frames.get(frame, []), key=lambda p: p.person_id):
            threshold = pckh_threshold(pose, cfg)
            for joint in pose.joints:
                gt_by_type[joint.joint].append((pose.person_id, joint, threshold))
        pred_by_type = defaultdict(list)
        for track_id in sorted(predicted.get(frame, {})):
            for joint, entry in predicted[frame][track_id].items():
                pred_by_type[joint].append((track_id, entry))

        current = {}
        for joint in sorted(set(gt_by_type) | set(pred_by_type)):
            gt_items = gt_by_type.get(joint, [])
            pred_items = pred_by_type.get(joint, [])
            pred_pos = {track_id: i for i, (track_id, _) in enumerate(pred_items)}
            pairs = {}
            used = set()
            for g, (person_id, target, threshold) in enumerate(gt_items):
                track_id = previous.get((person_id, joint))
                if track_id in pred_pos and track_id not in used:
                    distance = _distance(pred_items[pred_pos[track_id]][1], target)
                    if distance <= threshold:
                        pairs[g] = pred_pos[track_id]
                        used.add(track_id)
            free_gt = [g for g in range(len(gt_items)) if g not in pairs]
            free_pred = [p for p, (track_id, _) in enumerate(pred_items) if track_id not in used]
            if free_gt and free_pred:
                costs = np.array(
                    [[_distance(pred_items[p][1], gt_items[g][1]) for p in free_pred] for g in free_gt]
                )
                limits = np.array([[gt_items[g][2]] * len(free_pred) for g in free_gt])
                for r, c in assign_within(costs, limits):
                    pairs[free_gt[r]] = free_pred[c]

            matched_preds = set(pairs.values())
            for g, (person_id, target, threshold) in enumerate(gt_items):
                key = (person_id, joint)
                state = targets[key]
                if g in pairs:
                    track_id, entry = pred_items[pairs[g]]
                    tp += 1
                    counted += 1
                    state.frames += 1
                    state.matched += 1
                    if state.last_track is not None and state.last_track != track_id:
                        switches += 1
                    if state.was_lost:
                        state.fragments += 1
                    state.last_track = track_id
                    state.was_matched = True
                    state.was_lost = False
                    current[key] = track_id
                    precision_terms.append(1.0 - _distance(entry, target) / threshold)
                elif occlusion_aware and target.occluded:
                    continue
                else:
                    fn += 1
                    counted += 1
                    state.frames += 1
                    if state.was_matched:
                        state.was_lost = True
            fp += len(pred_items) - len(matched_preds)
        previous = current

    live = [t for t in targets.values() if t.frames > 0]
    mostly_tracked = sum(1 for t in live if 10 * t.matched >= MOSTLY_TRACKED * t.frames)
    mostly_lost = sum(1 for t in live if 10 * t.matched <= MOSTLY_LOST * t.frames)
    return {
        "Rcll": 100.0 * tp / counted if counted else math.nan,
        "Prcn": 100.0 * tp / (tp + fp) if tp + fp else math.nan,
        "MT": mostly_tracked,
        "ML": mostly_lost,
        "IDs": switches,
        "FM": sum(t.fragments for t in live),
        "MOTA": 100.0 * (1.0 - (fn + fp + switches) / counted) if counted else math.nan,
        "MOTP": 100.0 * math.fsum(precision_terms) / len(precision_terms) if precision_terms else math.nan,
        "TP": tp,
        "FP": fp,
        "FN": fn,
        "GT": counted,
        "trajectories": len(live),
    }


@dataclass
class EvalReport:
    """All measures of one evaluation run; rates are percentages."""

    mAP: float
    per_joint_ap: dict
    MOTA: float
    MOTP: float
    Rcll: float
    Prcn: float
    MT: int
    ML: int
    IDs: int
    FM: int
    TP: int = 0
    FP: int = 0
    FN: int = 0
    GT: int = 0
    trajectories: int = 0
    per_part_ap: dict = field(default_factory=dict)
    occlusion_aware: bool = False
    pckh_ratio: float = 0.2

    def to_dict(self) -> dict:
        """Report as plain data, NaN written as None."""

        def clean(value):
            if isinstance(value, dict):
                return {k: clean(v) for k, v in value.items()}
            if isinstance(value, float) and math.isnan(value):
                return None
            return value

        return {key: clean(value) for key, value in asdict(self).items()}

    def to_frame(self) -> pd.DataFrame:
        """One row summary of the headline measures."""
        columns = ["Rcll", "Prcn", "MT", "ML", "IDs", "FM", "MOTA", "MOTP", "mAP"]
        return pd.DataFrame([{name: getattr(self, name) for name in columns}])


def evaluate(tracks, gts, cfg: PckhConfig = None, occlusion_aware: bool = False,
             joint_count: int = DEFAULT_JOINT_COUNT) -> EvalReport:
    """
    Score predicted tracks against ground truth.

    :param tracks: The predicted PoseTracks.
    :param gts: The ground truth poses.
    :param cfg: PCKh settings.
    :param occlusion_aware: Apply the occluded joint rules.
    :return: The report.
    :rtype: EvalReport
    """
    cfg = cfg or PckhConfig()
    gts = list(gts)
    pose_scores = pose_map(tracks, gts, cfg, occlusion_aware, joint_count)
    tracking = track_metrics(tracks, gts, cfg, occlusion_aware)
    report = EvalReport(
        mAP=pose_scores["mAP"],
        per_joint_ap=pose_scores["per_joint_ap"],
        per_part_ap=pose_scores.get("per_part_ap", {}),
        occlusion_aware=occlusion_aware,
        pckh_ratio=cfg.ratio,
        **tracking,
    )
    log.info(f"Evaluated {len(tracks)} tracks: MOTA {report.MOTA:.2f}, mAP {report.mAP:.2f}.")
    return report
