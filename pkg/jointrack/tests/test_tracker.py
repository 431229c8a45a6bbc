import os

import numpy as np
import pandas as pd
import pytest

from jointrack.access import io
from jointrack.errors import ConfigurationError, MissingCorrespondenceError
from jointrack.graph import build_graph, nms
from jointrack.ilp import FAMILIES, TRANS_SPATIAL, VarIndex, build_instance
from jointrack.metrics import evaluate
from jointrack.model import Detection, TrackEntry
from jointrack.potentials import EdgeProbabilities, build_potentials
from jointrack.solver import SolverConfig, solve
from jointrack.synth import SynthConfig, generate
from jointrack.tracker import (
    Models,
    Partition,
    TrackerConfig,
    TrackStats,
    duplicate_joint_count,
    extract_partitions,
    filter_partitions,
    merge_duplicates,
    partitions_to_tracks,
    track,
    track_with_stats,
)


def det(det_id, frame, joint, x=0.0, y=0.0, score=0.5):
    return Detection(det_id, frame, joint, x, y, score, 1.0)


def test_extract_partitions():
    dets = [det(0, 0, 0), det(1, 0, 1), det(2, 1, 0), det(3, 1, 1)]
    g = build_graph(dets, tau=1)
    # v0..v3, s01, s23, t02, t13
    values = [1, 1, 1, 1, 1, 0, 0, 1]
    parts = extract_partitions(g, values)
    assert [p.members for p in parts] == [(0, 1, 3), (2,)]
    assert parts[0].member_frames == (0, 0, 1)

    values = [1, 1, 0, 1, 1, 0, 0, 1]
    assert [p.members for p in extract_partitions(g, values)] == [(0, 1, 3)]


def test_partition_properties():
    p = Partition.from_members([4, 1, 9], {1: 2, 4: 2, 9: 5})
    assert p.members == (1, 4, 9)
    assert p.frames == [2, 5]
    assert p.first_frame == 2
    assert p.frame_span == 4
    assert p.avg_nodes_per_frame == 1.5


def test_merge_duplicates():
    dets = [det(0, 0, 0, x=0.0, score=0.8), det(1, 0, 0, x=10.0, score=0.2), det(2, 0, 1, x=5.0, y=3.0)]
    p = Partition.from_members([0, 1, 2], {0: 0, 1: 0, 2: 0})
    poses = merge_duplicates(p, dets)
    assert poses == {
        0: {
            0: TrackEntry(0, 0, 2.0, 0.0, 0.8),
            1: TrackEntry(0, 1, 5.0, 3.0, 0.5),
        }
    }


def test_filter_partitions():
    cfg = TrackerConfig(min_frames=3, min_avg_nodes=2.0)

    def part(frames):
        return Partition(tuple(range(len(frames))), tuple(frames))

    kept = part((0, 0, 1, 1, 2, 2))
    short = part((0, 0, 1, 1))
    gapped = part((0, 0, 0, 2))
    sparse = part((0, 1, 2))
    assert filter_partitions([kept, short, gapped, sparse], cfg) == [kept, gapped]


def test_partitions_to_tracks_order():
    dets = [det(2, 1, 0), det(5, 1, 1), det(6, 1, 2), det(7, 0, 0)]
    frame_of = {d.id: d.frame for d in dets}
    parts = [
        Partition.from_members([5, 6], frame_of),
        Partition.from_members([7], frame_of),
        Partition.from_members([2], frame_of),
    ]
    tracks = partitions_to_tracks(parts, dets)
    assert [t.track_id for t in tracks] == [0, 1, 2]
    assert [[(e.frame, e.joint) for e in t.entries] for t in tracks] == [[(0, 0)], [(1, 0)], [(1, 1), (1, 2)]]


def test_duplicate_joint_count():
    dets = [det(0, 0, 0), det(1, 0, 0), det(2, 1, 0), det(3, 1, 1), det(4, 1, 1)]
    frame_of = {d.id: d.frame for d in dets}
    parts = [Partition.from_members([0, 1, 2], frame_of), Partition.from_members([3, 4], frame_of)]
    assert duplicate_joint_count(parts, dets) == 2
    assert duplicate_joint_count(parts[:1], {d.id: d for d in dets}) == 1


def test_empty_input():
    tracks, stats = track_with_stats([], [], Models())
    assert len(tracks) == 0
    assert stats.tracks == 0
    assert stats.windows == []


def test_tracker_config():
    cfg = TrackerConfig(constraints=("trans_st", "couple_spatial"), temporal_joints=[3, 1])
    assert cfg.constraints == ("couple_spatial", "trans_st")
    assert cfg.temporal_joints == (1, 3)
    assert TrackerConfig().constraints == FAMILIES
    for bad in ({"batch_size": 0}, {"tau": 0}, {"min_frames": 0}, {"min_avg_nodes": -1.0}, {"nms_iou": 0.0}):
        with pytest.raises(ConfigurationError):
            TrackerConfig(**bad)
    with pytest.raises(ConfigurationError):
        TrackerConfig(constraints=("trans_nothing",))


def test_tracker_config_from_mapping():
    cfg = TrackerConfig.from_mapping(
        {"batch_size": 5, "constraints": ["couple_spatial", "couple_temporal"]},
        {"node_limit": 100},
    )
    assert cfg.batch_size == 5
    assert cfg.constraints == ("couple_spatial", "couple_temporal")
    assert cfg.solver == SolverConfig(node_limit=100)
    with pytest.raises(ConfigurationError):
        TrackerConfig.from_mapping({"window": 5})


def test_missing_models(clean_scene):
    with pytest.raises(ConfigurationError):
        track(clean_scene.detections, clean_scene.correspondences, Models())


def test_missing_correspondences(clean_scene, clean_models):
    with pytest.raises(MissingCorrespondenceError):
        track(clean_scene.detections, clean_scene.correspondences[:1], clean_models)


def ground_truth_positions(annotations):
    positions = {}
    for pose in annotations:
        for joint in pose.joints:
            positions[(pose.frame, joint.joint, joint.x, joint.y)] = pose.person_id
    return positions


def test_clean_scene_recovers_ground_truth(clean_scene, clean_models):
    tracks, stats = track_with_stats(clean_scene.detections, clean_scene.correspondences, clean_models)
    assert len(tracks) == 2
    positions = ground_truth_positions(clean_scene.annotations)
    persons = set()
    for t in tracks:
        owners = {positions[(e.frame, e.joint, e.x, e.y)] for e in t.entries}
        assert len(owners) == 1
        persons |= owners
        assert t.frames == list(range(8))
        assert len(t.entries) == 8 * 14
    assert persons == {0, 1}
    assert stats.partitions == stats.kept_partitions == stats.tracks == 2
    assert stats.duplicate_joints == 0
    assert all(w.proven_optimal for w in stats.windows)
    assert all(w.wall_time is None for w in stats.windows)
    assert stats.runtime_per_frame is None
    assert stats.warnings == []


def test_window_size_does_not_change_clean_tracks(clean_scene, clean_models):
    whole = track(clean_scene.detections, clean_scene.correspondences, clean_models, TrackerConfig(batch_size=31))
    pieces, stats = track_with_stats(
        clean_scene.detections, clean_scene.correspondences, clean_models, TrackerConfig(batch_size=3)
    )
    assert pieces == whole
    assert [(w.first_frame, w.last_frame) for w in stats.windows] == [(0, 2), (3, 5), (6, 8)]
    assert stats.windows[0].fixed == 0
    assert stats.windows[1].fixed > 0


def test_tracking_is_deterministic(clean_scene, clean_models):
    cfg = TrackerConfig(batch_size=4)
    first = track_with_stats(clean_scene.detections, clean_scene.correspondences, clean_models, cfg)
    second = track_with_stats(clean_scene.detections, clean_scene.correspondences, clean_models, cfg)
    assert first[0] == second[0]
    assert first[1].to_dict() == second[1].to_dict()


def test_timed_stats(clean_scene, clean_models):
    _, stats = track_with_stats(
        clean_scene.detections, clean_scene.correspondences, clean_models, deterministic=False
    )
    assert all(isinstance(w.wall_time, float) for w in stats.windows)
    assert stats.runtime_per_frame > 0.0


def test_window_dumps(tmp_path, clean_scene, clean_models):
    dump_dir = os.path.join(tmp_path, "dumps")
    track_with_stats(
        clean_scene.detections, clean_scene.correspondences, clean_models,
        TrackerConfig(batch_size=4), dump_dir=dump_dir,
    )
    assert sorted(os.listdir(dump_dir)) == [
        "window_000.graph.jsonl",
        "window_000.potentials.jsonl",
        "window_001.graph.jsonl",
        "window_001.potentials.jsonl",
    ]


def test_stats_frame(clean_scene, clean_models):
    _, stats = track_with_stats(
        clean_scene.detections, clean_scene.correspondences, clean_models, TrackerConfig(batch_size=4)
    )
    frame = stats.to_frame()
    assert isinstance(frame, pd.DataFrame)
    assert list(frame["window"]) == [0, 1]
    assert {"objective", "nodes_explored", "constraints_added", "fixed"} <= set(frame.columns)
    assert TrackStats().to_frame().empty


def two_person_scene(temporal_model, correspondence_factory):
    """
    Two persons with three joints in two frames. One cross-person pair of
    different types looks like a same-person pair in both frames.
    """
    dets = []
    for frame in (0, 1):
        for x in (100.0, 500.0):
            for joint in range(3):
                dets.append(Detection(len(dets), frame, joint, x, 100.0 + 60.0 * joint, 0.9, 1.0))
    person = {d.id: int(d.x > 300.0) for d in dets}
    table = {}
    for a in dets:
        for b in dets:
            if a.id < b.id and a.frame == b.frame and a.joint != b.joint:
                table[(a.id, b.id)] = 0.9 if person[a.id] == person[b.id] else 0.1
    # person 0 joint 0 with person 1 joint 1
    table[(0, 4)] = 0.9
    table[(6, 10)] = 0.9
    models = Models(temporal=temporal_model, spatial=EdgeProbabilities(table))
    return dets, [correspondence_factory(0, 1)], models


def test_spatial_transitivity_prevents_merged_persons(temporal_model, correspondence_factory):
    dets, corr, models = two_person_scene(temporal_model, correspondence_factory)
    base = {"batch_size": 10, "tau": 1, "min_frames": 1, "min_avg_nodes": 0.0}

    tracks, stats = track_with_stats(dets, corr, models, TrackerConfig(**base))
    assert len(tracks) == 2
    assert stats.duplicate_joints == 0

    relaxed = TrackerConfig(**base, constraints=tuple(f for f in FAMILIES if f != TRANS_SPATIAL))
    tracks, stats = track_with_stats(dets, corr, models, relaxed)
    assert len(tracks) == 1
    assert stats.duplicate_joints == 6


@pytest.mark.slow
def test_clean_video_scores_perfectly(models_for):
    scene = generate(SynthConfig(seed=7, persons=3, frames=41))
    tracks = track(scene.detections, scene.correspondences, models_for(scene))
    report = evaluate(tracks, scene.annotations)
    assert report.MOTA == 100.0
    assert report.mAP == 100.0
    assert report.IDs == 0
    assert report.FM == 0


@pytest.mark.slow
def test_missed_and_occluded_joints_degrade_scores(models_for):
    scene = generate(SynthConfig(seed=7, persons=3, frames=41, miss_rate=0.2))
    report = evaluate(track(scene.detections, scene.correspondences, models_for(scene)), scene.annotations)
    assert 0.0 < report.MOTA < 100.0

    scene = generate(SynthConfig(seed=7, persons=3, frames=41, occlusions=6))
    tracks = track(scene.detections, scene.correspondences, models_for(scene))
    plain = evaluate(tracks, scene.annotations)
    aware = evaluate(tracks, scene.annotations, occlusion_aware=True)
    assert aware.MOTA >= plain.MOTA
    assert plain.MOTA < 100.0


def test_one_window_equals_direct_solve(clean_scene, clean_models):
    cfg = TrackerConfig(batch_size=100, min_frames=1, min_avg_nodes=1.0)
    windowed = track(clean_scene.detections, clean_scene.correspondences, clean_models, cfg)

    dets = nms(list(clean_scene.detections), cfg.nms_iou)
    g = build_graph(dets, cfg.tau, cfg.temporal_joints)
    pot = build_potentials(g, clean_scene.correspondences, clean_models.temporal, clean_models.spatial)
    assignment, _ = solve(build_instance(g, pot, families=cfg.constraints), cfg.solver)
    parts = filter_partitions(extract_partitions(g, assignment), cfg)
    assert windowed == partitions_to_tracks(parts, dets)


def solve_dump(stem, cfg):
    g = io.read_graph(stem + ".graph.jsonl")
    table, fixed = io.read_potentials(stem + ".potentials.jsonl")
    index = VarIndex.from_graph(g)
    assignment, _ = solve(build_instance(g, table, index.fixed_values(fixed), cfg.constraints), cfg.solver)
    return dict(zip(index.keys, assignment.values)), fixed


def test_carried_variables_keep_their_values(tmp_path, clean_scene, clean_models):
    cfg = TrackerConfig(batch_size=3)
    track_with_stats(clean_scene.detections, clean_scene.correspondences, clean_models, cfg,
                     dump_dir=str(tmp_path))
    decided = {}
    for number in range(3):
        values, fixed = solve_dump(os.path.join(tmp_path, f"window_{number:03d}"), cfg)
        if number == 0:
            assert fixed == {}
        else:
            assert fixed
        for key, value in fixed.items():
            assert decided[key] == value
            assert values[key] == value
        decided.update(values)


def test_stricter_filters_keep_fewer_partitions():
    rng = np.random.default_rng(12)
    frame_of = {i: int(rng.integers(0, 12)) for i in range(200)}
    ids = list(frame_of)
    parts = []
    while ids:
        size = min(len(ids), int(rng.integers(1, 15)))
        parts.append(Partition.from_members(ids[:size], frame_of))
        ids = ids[size:]
    loose = TrackerConfig(min_frames=2, min_avg_nodes=1.0)
    for min_frames, min_avg_nodes in [(2, 1.5), (4, 1.0), (6, 2.0), (12, 3.0)]:
        strict = TrackerConfig(min_frames=min_frames, min_avg_nodes=min_avg_nodes)
        kept = filter_partitions(parts, strict)
        assert set(kept) <= set(filter_partitions(parts, loose))
        assert all(p.frame_span >= min_frames for p in kept)


def test_noisy_scene_still_yields_tracks(models_for):
    scene = generate(SynthConfig(seed=3, persons=2, frames=9, detection_noise=3.0))
    cfg = TrackerConfig(min_frames=3, solver=SolverConfig(node_limit=40))
    tracks = track(scene.detections, scene.correspondences, models_for(scene), cfg)
    assert len(tracks) > 0
    assert evaluate(tracks, scene.annotations).MOTA > 0.0
