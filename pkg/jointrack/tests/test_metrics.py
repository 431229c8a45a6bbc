import itertools
import math

import numpy as np
import pandas as pd
import pytest

from jointrack.errors import ConfigurationError, ValidationError
from jointrack.metrics import (
    EvalReport,
    PckhConfig,
    assign_within,
    average_precision,
    evaluate,
    match_poses,
    pckh_threshold,
    pose_map,
    track_metrics,
)
from jointrack.model import GroundTruthJoint, GroundTruthPose, PoseTracks, Track, TrackEntry
from jointrack.synth import SynthConfig, generate

HEAD = (0.0, 0.0, 60.0, 80.0)


def gt(frame, person, joints, head=HEAD):
    """Ground truth pose from {joint: (x, y)} or {joint: (x, y, occluded)}."""
    return GroundTruthPose(
        frame,
        person,
        head,
        tuple(GroundTruthJoint(j, *values) for j, values in sorted(joints.items())),
    )


def tracks_of(entries):
    """PoseTracks from {track_id: [(frame, joint, x, y, score), ...]}."""
    return PoseTracks(
        tuple(Track(tid, tuple(TrackEntry(*e) for e in rows)) for tid, rows in sorted(entries.items()))
    )


def tracks_from_gts(gts, score=0.9):
    rows = {}
    for pose in gts:
        for joint in pose.joints:
            rows.setdefault(pose.person_id, []).append((pose.frame, joint.joint, joint.x, joint.y, score))
    return tracks_of(rows)


def square_scene(persons=2, joints=3, frames=4):
    return [
        gt(f, p, {j: (100.0 + 300.0 * p + 20.0 * j, 100.0 + 5.0 * f) for j in range(joints)})
        for f in range(frames)
        for p in range(persons)
    ]


def test_pckh_threshold():
    assert pckh_threshold(HEAD) == pytest.approx(20.0)
    assert pckh_threshold(gt(0, 0, {}), PckhConfig(ratio=0.3)) == pytest.approx(30.0)
    with pytest.raises(ValidationError):
        pckh_threshold((0.0, 0.0, 0.0, 10.0))


def test_pckh_config():
    assert PckhConfig.from_mapping({"ratio": 0.5}).ratio == 0.5
    with pytest.raises(ConfigurationError):
        PckhConfig(ratio=0.0)
    with pytest.raises(ConfigurationError):
        PckhConfig.from_mapping({"radius": 3})


def test_match_poses():
    truth = [gt(0, 4, {0: (10.0, 10.0), 1: (30.0, 10.0)})]
    on_truth = {0: {0: TrackEntry(0, 0, 10.0, 10.0, 0.5), 1: TrackEntry(0, 1, 30.0, 10.0, 0.5)}}
    assert match_poses(on_truth, truth) == {0: 4}

    far = {0: {0: TrackEntry(0, 0, 200.0, 10.0, 0.5)}}
    assert match_poses(far, truth) == {}

    both = {
        0: {0: TrackEntry(0, 0, 10.0, 10.0, 0.6)},
        1: {0: TrackEntry(0, 0, 12.0, 10.0, 0.9)},
    }
    assert match_poses(both, truth) == {1: 4}


def test_match_poses_prefers_more_correct_joints():
    truth = [
        gt(0, 0, {0: (0.0, 0.0), 1: (50.0, 0.0)}),
        gt(0, 1, {0: (5.0, 0.0), 1: (300.0, 0.0)}),
    ]
    prediction = {7: {0: TrackEntry(0, 0, 4.0, 0.0, 0.5), 1: TrackEntry(0, 1, 50.0, 0.0, 0.5)}}
    assert match_poses(prediction, truth) == {7: 0}


def test_average_precision():
    assert average_precision([True, False], 1) == 1.0
    assert average_precision([False, True], 1) == 0.5
    assert average_precision([], 3) == 0.0
    assert math.isnan(average_precision([True], 0))
    assert average_precision([True] * 7, 7) == 1.0


def test_pose_map_rank_swap():
    truth = [gt(0, 0, {0: (100.0, 100.0)})]
    good_first = tracks_of({0: [(0, 0, 100.0, 100.0, 0.9)], 1: [(0, 0, 400.0, 100.0, 0.5)]})
    bad_first = tracks_of({0: [(0, 0, 100.0, 100.0, 0.5)], 1: [(0, 0, 400.0, 100.0, 0.9)]})
    assert pose_map(good_first, truth, joint_count=1)["mAP"] == 100.0
    assert pose_map(bad_first, truth, joint_count=1)["mAP"] == 50.0
    assert "per_part_ap" not in pose_map(good_first, truth, joint_count=1)


def test_pose_map_without_predictions():
    result = pose_map(PoseTracks(()), square_scene(joints=14))
    assert result["mAP"] == 0.0
    assert set(result["per_part_ap"]) == {"Head", "Shoulder", "Elbow", "Wrist", "Hip", "Knee", "Ankle"}


def test_pose_map_skips_joints_without_truth():
    truth = square_scene(joints=2)
    result = pose_map(tracks_from_gts(truth), truth)
    assert result["mAP"] == 100.0
    assert result["per_joint_ap"]["right_ankle"] == 100.0
    assert math.isnan(result["per_joint_ap"]["head_top"])


def test_identical_predictions():
    truth = square_scene()
    result = track_metrics(tracks_from_gts(truth), truth)
    assert result["MOTA"] == 100.0
    assert result["MOTP"] == 100.0
    assert (result["IDs"], result["FM"], result["FP"], result["FN"]) == (0, 0, 0, 0)
    assert result["MT"] == result["trajectories"] == 6
    assert result["ML"] == 0


def test_mota_fixture():
    truth = [gt(f, 0, {0: (100.0, 100.0)}) for f in range(10)]
    rows = {
        0: [(f, 0, 100.0, 100.0, 0.9) for f in range(4)],
        1: [(f, 0, 100.0, 100.0, 0.9) for f in range(4, 8)],
        2: [(0, 0, 500.0, 500.0, 0.9)],
    }
    result = track_metrics(tracks_of(rows), truth)
    assert (result["GT"], result["TP"], result["FN"], result["FP"], result["IDs"]) == (10, 8, 2, 1, 1)
    assert result["MOTA"] == pytest.approx(60.0, abs=1e-12)
    assert result["Rcll"] == pytest.approx(80.0)
    assert result["Prcn"] == pytest.approx(800.0 / 9.0)
    # matched in exactly 8 of 10 frames
    assert result["MT"] == 1
    assert result["ML"] == 0
    assert result["FM"] == 0


def test_fragmentation():
    truth = [gt(f, 0, {0: (100.0, 100.0)}) for f in range(4)]
    rows = {0: [(f, 0, 100.0, 100.0, 0.9) for f in (0, 1, 3)]}
    result = track_metrics(tracks_of(rows), truth)
    assert result["FM"] == 1
    assert result["IDs"] == 0
    assert result["FN"] == 1


def test_matches_persist_over_closer_tracks():
    truth = [gt(f, 0, {0: (100.0, 100.0)}) for f in range(2)]
    rows = {
        0: [(0, 0, 100.0, 100.0, 0.9), (1, 0, 110.0, 100.0, 0.9)],
        1: [(1, 0, 100.0, 100.0, 0.9)],
    }
    result = track_metrics(tracks_of(rows), truth)
    assert result["IDs"] == 0
    assert result["FP"] == 1
    assert result["MOTP"] == pytest.approx(100.0 * (1.0 + 0.5) / 2.0)


def brute_force_matching(costs, limits):
    rows, cols = costs.shape
    best = (0, 0.0)
    for size in range(min(rows, cols), 0, -1):
        found = None
        for chosen_rows in itertools.combinations(range(rows), size):
            for chosen_cols in itertools.permutations(range(cols), size):
                pairs = list(zip(chosen_rows, chosen_cols))
                if all(costs[r, c] <= limits[r, c] for r, c in pairs):
                    total = math.fsum(costs[r, c] for r, c in pairs)
                    if found is None or total < found:
                        found = total
        if found is not None:
            return size, found
    return best


def test_assignment_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(60):
        rows, cols = int(rng.integers(1, 7)), int(rng.integers(1, 7))
        costs = rng.uniform(0.0, 10.0, size=(rows, cols))
        limits = rng.uniform(0.0, 10.0, size=(rows, cols))
        pairs = assign_within(costs, limits)
        size, total = brute_force_matching(costs, limits)
        assert len(pairs) == size
        assert math.fsum(costs[r, c] for r, c in pairs) == pytest.approx(total, abs=1e-9)
        assert all(costs[r, c] <= limits[r, c] for r, c in pairs)
        assert len({r for r, _ in pairs}) == len({c for _, c in pairs}) == len(pairs)


def test_assignment_of_empty_matrix():
    assert assign_within(np.zeros((0, 3)), np.zeros((0, 3))) == []


@pytest.fixture(scope="module")
def noisy():
    """Ground truth with predictions that drift, drop out and swap identities."""
    scene = generate(SynthConfig(seed=5, persons=3, frames=12))
    truth = scene.annotations
    rng = np.random.default_rng(2)
    rows = {}
    for pose in truth:
        for joint in pose.joints:
            if rng.random() < 0.15:
                continue
            track_id = pose.person_id
            if pose.frame >= 6 and pose.person_id < 2:
                track_id = 1 - pose.person_id
            dx, dy = rng.normal(0.0, 4.0, size=2)
            rows.setdefault(track_id, []).append(
                (pose.frame, joint.joint, joint.x + dx, joint.y + dy, float(rng.uniform(0.3, 0.95)))
            )
    return truth, tracks_of(rows)


def test_relabelling_tracks_changes_nothing(noisy):
    truth, predictions = noisy
    renamed = PoseTracks(
        tuple(Track({0: 17, 1: 3, 2: 9}[t.track_id], t.entries) for t in predictions)
    )
    before = evaluate(predictions, truth)
    after = evaluate(renamed, truth)
    assert after.MOTA == before.MOTA
    assert after.IDs == before.IDs
    assert after.mAP == pytest.approx(before.mAP, abs=1e-9)


def test_false_positives_never_help(noisy):
    truth, predictions = noisy
    rng = np.random.default_rng(3)
    ghosts = Track(
        99,
        tuple(
            TrackEntry(f, j, float(rng.uniform(2000.0, 3000.0)), float(rng.uniform(2000.0, 3000.0)), float(rng.uniform(0.1, 0.99)))
            for f in range(12)
            for j in range(0, 14, 3)
        ),
    )
    polluted = PoseTracks(predictions.tracks + (ghosts,))
    before = evaluate(predictions, truth)
    after = evaluate(polluted, truth)
    assert after.MOTA < before.MOTA
    assert after.mAP <= before.mAP
    assert after.FP == before.FP + len(ghosts.entries)


def test_correctness_is_scale_covariant(noisy):
    truth, predictions = noisy
    c = 2.5
    scaled_truth = [
        GroundTruthPose(
            pose.frame,
            pose.person_id,
            tuple(c * v for v in pose.head_box),
            tuple(GroundTruthJoint(j.joint, c * j.x, c * j.y, j.occluded) for j in pose.joints),
        )
        for pose in truth
    ]
    scaled = PoseTracks(
        tuple(
            Track(t.track_id, tuple(TrackEntry(e.frame, e.joint, c * e.x, c * e.y, e.score) for e in t.entries))
            for t in predictions
        )
    )
    before = evaluate(predictions, truth)
    after = evaluate(scaled, scaled_truth)
    for name in ("TP", "FP", "FN", "IDs", "FM", "MT", "ML"):
        assert getattr(after, name) == getattr(before, name)
    assert after.MOTA == pytest.approx(before.MOTA)
    assert after.MOTP == pytest.approx(before.MOTP)
    assert after.mAP == pytest.approx(before.mAP)


@pytest.fixture(scope="module")
def occluded():
    scene = generate(SynthConfig(seed=3, persons=2, frames=10, occlusions=4))
    return scene.annotations


def test_occluded_truth_is_present(occluded):
    assert any(j.occluded for pose in occluded for j in pose.joints)


def test_unpredicted_occluded_joints_are_forgiven(occluded):
    rows = {}
    for pose in occluded:
        for joint in pose.joints:
            if not joint.occluded:
                rows.setdefault(pose.person_id, []).append((pose.frame, joint.joint, joint.x, joint.y, 0.9))
    predictions = tracks_of(rows)
    plain = evaluate(predictions, occluded)
    aware = evaluate(predictions, occluded, occlusion_aware=True)
    assert plain.MOTA < 100.0
    assert aware.MOTA == 100.0
    assert aware.mAP == 100.0
    assert aware.MOTA >= plain.MOTA


def test_predicted_occluded_joints_count(occluded):
    predictions = tracks_from_gts(occluded)
    aware = evaluate(predictions, occluded, occlusion_aware=True)
    assert aware.MOTA == 100.0
    assert aware.GT == sum(len(pose.joints) for pose in occluded)


def test_dropping_misplaced_occluded_predictions_never_hurts(occluded):
    kept = {}
    misplaced = {}
    for pose in occluded:
        for joint in pose.joints:
            row = (pose.frame, joint.joint, joint.x, joint.y, 0.9)
            if joint.occluded:
                row = (pose.frame, joint.joint, joint.x + 500.0, joint.y + 500.0, 0.8)
                misplaced.setdefault(pose.person_id, []).append(row)
            else:
                kept.setdefault(pose.person_id, []).append(row)
    full = {p: kept.get(p, []) + misplaced.get(p, []) for p in set(kept) | set(misplaced)}
    before = evaluate(tracks_of(full), occluded, occlusion_aware=True)
    after = evaluate(tracks_of(kept), occluded, occlusion_aware=True)
    assert before.FP > 0
    for name in ("MOTA", "Rcll", "Prcn", "mAP", "MOTP", "MT"):
        assert getattr(after, name) >= getattr(before, name)
    for name in ("IDs", "FM", "FP", "FN"):
        assert getattr(after, name) <= getattr(before, name)


def test_report_as_data():
    truth = [gt(0, 0, {0: (100.0, 100.0)})]
    report = evaluate(tracks_from_gts(truth), truth)
    assert isinstance(report, EvalReport)
    data = report.to_dict()
    for name in ("mAP", "per_joint_ap", "MOTA", "MOTP", "Rcll", "Prcn", "MT", "ML", "IDs", "FM"):
        assert name in data
    assert data["MOTA"] == 100.0
    assert data["per_joint_ap"]["right_ankle"] == 100.0
    assert data["per_joint_ap"]["head_top"] is None
    assert data["per_part_ap"]["Ankle"] == 100.0
    frame = report.to_frame()
    assert isinstance(frame, pd.DataFrame)
    assert list(frame.columns) == ["Rcll", "Prcn", "MT", "ML", "IDs", "FM", "MOTA", "MOTP", "mAP"]


def test_empty_evaluation():
    report = evaluate(PoseTracks(()), [])
    assert math.isnan(report.MOTA)
    assert report.to_dict()["MOTA"] is None
