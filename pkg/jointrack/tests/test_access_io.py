import json
import os

import pytest

from jointrack.access import io
from jointrack.errors import (
    DimensionMismatchError,
    FileFormatError,
    ValidationError,
)
from jointrack.graph import build_graph
from jointrack.model import (
    Correspondence,
    Detection,
    GroundTruthJoint,
    GroundTruthPose,
    PoseTracks,
    Track,
    TrackEntry,
)
from jointrack.potentials import LogisticModel, PotentialTable, SpatialModel


def write_lines(path, records):
    with open(path, "w", encoding="utf-8") as stream:
        for record in records:
            if isinstance(record, str):
                stream.write(record + "\n")
            else:
                stream.write(json.dumps(record) + "\n")
    return str(path)


@pytest.fixture
def detections():
    return [
        Detection(0, 0, 0, 10.0, 20.0, 0.9, 1.0),
        Detection(1, 0, 1, 12.5, 40.25, 0.6, 0.6),
        Detection(2, 1, 0, 11.0, 21.0, 0.8, 1.5),
    ]


def test_read_detections_fields(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", [{"frame": 0, "joint": 0, "x": 10.0, "y": 20.0, "score": 0.9, "scale": 1.0}])
    dets = io.read_detections(path)
    assert dets == [Detection(0, 0, 0, 10.0, 20.0, 0.9, 1.0)]


def test_read_detections_clamps_scores(tmp_path):
    path = write_lines(
        tmp_path / "d.jsonl",
        [
            {"frame": 0, "joint": 0, "x": 1.0, "y": 1.0, "score": 1.0, "scale": 1.0},
            {"frame": 0, "joint": 1, "x": 1.0, "y": 1.0, "score": 0.0, "scale": 1.0},
        ],
    )
    dets = io.read_detections(path)
    assert dets[0].score == 1.0 - 1e-6
    assert dets[1].score == 1e-6


def test_read_detections_assigns_sequential_ids(tmp_path):
    records = [{"frame": f, "joint": 0, "x": 0.0, "y": 0.0, "score": 0.5, "scale": 1.0} for f in range(3)]
    dets = io.read_detections(write_lines(tmp_path / "d.jsonl", records))
    assert [d.id for d in dets] == [0, 1, 2]


def test_read_detections_rejects_negative_scale(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", [{"frame": 0, "joint": 0, "x": 0.0, "y": 0.0, "score": 0.5, "scale": -1.0}])
    with pytest.raises(ValidationError):
        io.read_detections(path)


def test_read_detections_reports_line_of_malformed_record(tmp_path):
    path = write_lines(
        tmp_path / "d.jsonl",
        [{"frame": 0, "joint": 0, "x": 0.0, "y": 0.0, "score": 0.5, "scale": 1.0}, "{not json"],
    )
    with pytest.raises(FileFormatError) as excinfo:
        io.read_detections(path)
    assert excinfo.value.line == 2


def test_read_detections_reports_missing_field(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", [{"frame": 0, "joint": 0, "x": 0.0, "score": 0.5, "scale": 1.0}])
    with pytest.raises(FileFormatError) as excinfo:
        io.read_detections(path)
    assert excinfo.value.field == "y"


def test_read_detections_rejects_joint_outside_range(tmp_path):
    path = write_lines(tmp_path / "d.jsonl", [{"frame": 0, "joint": 14, "x": 0.0, "y": 0.0, "score": 0.5, "scale": 1.0}])
    with pytest.raises(ValidationError):
        io.read_detections(path)


def test_detections_round_trip(tmp_path, detections):
    path = str(tmp_path / "d.jsonl")
    io.write_detections(detections, path)
    assert io.read_detections(path) == detections


def test_annotations_accept_two_people_in_one_frame(tmp_path):
    records = [
        {"frame": 0, "person": 0, "head": [0, 0, 10, 10], "joints": [{"type": 0, "x": 1.0, "y": 2.0, "occluded": False}]},
        {"frame": 0, "person": 1, "head": [20, 0, 30, 10], "joints": []},
    ]
    poses = io.read_annotations(write_lines(tmp_path / "a.jsonl", records))
    assert [p.person_id for p in poses] == [0, 1]
    assert poses[0].joints[0] == GroundTruthJoint(0, 1.0, 2.0, False)


def test_annotations_reject_repeated_joint(tmp_path):
    joint = {"type": 3, "x": 1.0, "y": 2.0}
    records = [{"frame": 0, "person": 0, "head": [0, 0, 10, 10], "joints": [joint, joint]}]
    with pytest.raises(ValidationError):
        io.read_annotations(write_lines(tmp_path / "a.jsonl", records))


def test_annotations_reject_repeated_person(tmp_path):
    record = {"frame": 4, "person": 2, "head": [0, 0, 10, 10], "joints": []}
    with pytest.raises(ValidationError):
        io.read_annotations(write_lines(tmp_path / "a.jsonl", [record, record]))


def test_annotations_reject_degenerate_head_box(tmp_path):
    records = [{"frame": 0, "person": 0, "head": [5, 0, 5, 10], "joints": []}]
    with pytest.raises(ValidationError):
        io.read_annotations(write_lines(tmp_path / "a.jsonl", records))


def test_annotations_round_trip(tmp_path):
    poses = [
        GroundTruthPose(0, 3, (1.0, 2.0, 11.0, 16.0), (GroundTruthJoint(13, 5.0, 3.0, True), GroundTruthJoint(12, 5.5, 14.0))),
        GroundTruthPose(1, 3, (1.5, 2.0, 11.5, 16.0), ()),
    ]
    path = str(tmp_path / "a.jsonl")
    io.write_annotations(poses, path)
    assert io.read_annotations(path) == poses


def test_correspondences_round_trip(tmp_path):
    corr = [Correspondence(0, 1, ((1.0, 2.0), (3.5, 4.0)), ((1.5, 2.0), (3.0, 4.5)))]
    path = str(tmp_path / "c.jsonl")
    io.write_correspondences(corr, path)
    assert io.read_correspondences(path) == corr


def test_correspondences_reject_uneven_point_lists(tmp_path):
    records = [{"frame_a": 0, "frame_b": 1, "points_a": [[0, 0]], "points_b": []}]
    with pytest.raises(ValidationError):
        io.read_correspondences(write_lines(tmp_path / "c.jsonl", records))


def test_tracks_round_trip(tmp_path):
    tracks = PoseTracks(
        (
            Track(0, (TrackEntry(0, 0, 1.0, 2.0, 0.9), TrackEntry(1, 0, 1.25, 2.0, 0.8))),
            Track(5, (TrackEntry(0, 13, 100.0, 50.0, 0.7),)),
        )
    )
    path = str(tmp_path / "t.jsonl")
    io.write_tracks(tracks, path)
    assert io.read_tracks(path) == tracks


def test_writers_refuse_non_finite_values(tmp_path):
    path = str(tmp_path / "t.jsonl")
    tracks = PoseTracks((Track(0, (TrackEntry(0, 0, float("nan"), 2.0, 0.9),)),))
    with pytest.raises(ValidationError):
        io.write_tracks(tracks, path)
    assert not os.path.exists(path)


def test_edge_probabilities_round_trip(tmp_path):
    table = {(0, 3): 0.25, (1, 2): 0.75}
    path = str(tmp_path / "p.jsonl")
    io.write_edge_probabilities(table, path)
    assert io.read_edge_probabilities(path) == table


def test_temporal_model_round_trip(tmp_path):
    model = LogisticModel(tuple(0.1 * i for i in range(10)), -0.3)
    path = str(tmp_path / "temporal.json")
    io.write_temporal_model(model, path)
    assert io.read_temporal_model(path) == model


def test_temporal_model_dimension_is_checked(tmp_path):
    path = str(tmp_path / "temporal.json")
    io.write_json_file({"weights": [1.0, 2.0], "bias": 0.0}, path)
    with pytest.raises(DimensionMismatchError):
        io.read_temporal_model(path)


def test_spatial_model_round_trip(tmp_path):
    offsets = {(0, 1): (0.1, -0.7, 0.05, 0.1), (2, 3): (0.4, 0.0, 0.2, 0.05)}
    shell = SpatialModel(4, offsets)
    model = SpatialModel(4, offsets, LogisticModel(tuple(float(i) for i in range(shell.feature_dim)), 0.5))
    path = str(tmp_path / "spatial.json")
    io.write_spatial_model(model, path)
    loaded = io.read_spatial_model(path)
    assert loaded == model
    assert loaded.offsets == offsets


def test_graph_dump_round_trip(tmp_path, detections):
    g = build_graph(detections, tau=2, temporal_joints=[0])
    path = str(tmp_path / "g.jsonl")
    io.write_graph(g, path)
    loaded = io.read_graph(path)
    assert loaded.nodes == g.nodes
    assert loaded.spatial_edges == g.spatial_edges
    assert loaded.temporal_edges == g.temporal_edges
    assert loaded.tau == 2
    assert loaded.temporal_joints == frozenset([0])


def test_graph_dump_with_wrong_edges_is_rejected(tmp_path, detections):
    g = build_graph(detections, tau=1)
    path = str(tmp_path / "g.jsonl")
    io.write_graph(g, path)
    with open(path, "a", encoding="utf-8") as stream:
        stream.write(json.dumps({"kind": "temporal", "a": 1, "b": 2}) + "\n")
    with pytest.raises(ValidationError):
        io.read_graph(path)


def test_potentials_dump_round_trip(tmp_path):
    table = PotentialTable({0: -2.0, 1: 0.5}, {(0, 1): 1.25}, {})
    fixed = {("v", 0): 1, ("s", 0, 1): 0}
    path = str(tmp_path / "p.jsonl")
    io.write_potentials(table, path, fixed)
    loaded, loaded_fixed = io.read_potentials(path)
    assert loaded == table
    assert loaded_fixed == fixed


def test_atomic_writer_leaves_no_temporary_files(tmp_path, detections):
    io.write_detections(detections, str(tmp_path / "d.jsonl"))
    assert sorted(os.listdir(tmp_path)) == ["d.jsonl"]
