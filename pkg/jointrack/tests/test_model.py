import numpy as np
import pytest

from jointrack.errors import ValidationError
from jointrack.model import (
    BODY_PARTS,
    JOINT_NAMES,
    BoundingBox,
    Correspondence,
    Detection,
    GroundTruthJoint,
    GroundTruthPose,
    JointType,
    PoseTracks,
    Track,
    TrackEntry,
    clamp_probability,
)


def test_joint_type_names():
    assert JointType(13).name == "head_top"
    assert JointType(2, 5).name == "joint_2"
    assert len(JOINT_NAMES) == 14
    assert sorted(j for pair in BODY_PARTS.values() for j in pair) == list(range(14))


@pytest.mark.parametrize("joint, count", [(14, 14), (-1, 14), (0, 0)])
def test_joint_type_range(joint, count):
    with pytest.raises(ValidationError):
        JointType(joint, count)


@pytest.mark.parametrize("score, scale", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0), (0.5, -2.0)])
def test_detection_invariants(score, scale):
    with pytest.raises(ValidationError):
        Detection(0, 0, 0, 0.0, 0.0, score, scale)


def test_clamp_probability():
    assert clamp_probability(0.0) == 1e-6
    assert clamp_probability(1.0) == 1.0 - 1e-6
    assert clamp_probability(0.3) == 0.3


def test_bounding_box_contains_borders():
    box = BoundingBox(10.0, 10.0, 4.0)
    inside = box.contains(np.array([[8.0, 8.0], [12.0, 10.0], [12.1, 10.0], [10.0, 7.9]]))
    assert inside.tolist() == [True, True, False, False]


def test_ground_truth_pose_helpers():
    pose = GroundTruthPose(0, 1, (0.0, 0.0, 60.0, 80.0), (GroundTruthJoint(12, 3.0, 4.0),))
    assert pose.head_diagonal == 100.0
    assert pose.joint(12).x == 3.0
    assert pose.joint(13) is None
    assert set(pose.by_type) == {12}


def test_correspondence_reversed():
    corr = Correspondence(2, 5, ((1.0, 2.0),), ((3.0, 4.0),))
    back = corr.reversed()
    assert (back.frame_a, back.frame_b) == (5, 2)
    assert back.points_a == ((3.0, 4.0),)
    with pytest.raises(ValidationError):
        Correspondence(1, 1, (), ())


def test_pose_tracks_reject_duplicate_entries():
    entry = TrackEntry(0, 3, 1.0, 1.0, 0.9)
    with pytest.raises(ValidationError):
        PoseTracks((Track(0, (entry, entry)),))
    with pytest.raises(ValidationError):
        PoseTracks((Track(0, (entry,)), Track(0, ())))


def test_pose_tracks_by_frame():
    tracks = PoseTracks(
        (
            Track(0, (TrackEntry(0, 3, 1.0, 1.0, 0.9), TrackEntry(1, 3, 2.0, 1.0, 0.8))),
            Track(1, (TrackEntry(1, 4, 5.0, 5.0, 0.7),)),
        )
    )
    poses = tracks.poses_by_frame()
    assert sorted(poses) == [0, 1]
    assert sorted(poses[1]) == [0, 1]
    assert poses[1][1][4].x == 5.0
    assert tracks.tracks[0].frames == [0, 1]
    assert len(tracks) == 2
