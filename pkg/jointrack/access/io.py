"""Readers and writers for every file jointrack consumes or produces.

Record files are line delimited JSON (one object per line, UTF-8, LF line
endings). Field names and pixel units are fixed; see ``docs/formats.rst``.
All writers go through :func:`jointrack.util.files.atomic_write` so an
interrupted run never leaves a truncated output behind.
"""
import json
import math

from ..config.context import Context
from ..errors import DimensionMismatchError, FileFormatError, ValidationError
from ..graph import build_graph
from ..log import Logger
from ..model import (
    DEFAULT_JOINT_COUNT,
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
from ..potentials import TEMPORAL_FEATURE_DIM, LogisticModel, PotentialTable, SpatialModel
from ..util.files import atomic_write

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)


def _dumps(record):
    """Serialise one record; non-finite numbers are refused."""
    try:
        return json.dumps(record, separators=(",", ":"), allow_nan=False)
    except ValueError as exc:
        errmsg = f"Cannot write non-finite value in record {record}: {exc}"
        log.error(errmsg)
        raise ValidationError(errmsg)


def read_jsonl_file(filename):
    """
    Read a line delimited JSON file.

    :param filename: The file to read.
    :type filename: str
    :return: (line number, record) pairs in file order, blank lines skipped.
    :rtype: list
    :raises FileFormatError: If a line is not a JSON object.
    """
    records = []
    log.debug(f'Reading line delimited json file "{filename}".')
    with open(filename, "r", encoding="utf-8") as stream:
        for num, line in enumerate(stream, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                errmsg = f"invalid JSON ({exc.msg})"
                log.error(f'{filename}:{num}: {errmsg}')
                raise FileFormatError(num, errmsg, filename=filename)
            if not isinstance(record, dict):
                raise FileFormatError(num, "record is not a JSON object", filename=filename)
            records.append((num, record))
    return records


def write_jsonl_file(records, filename):
    """
    Write records as line delimited JSON.

    :param records: The records (dictionaries) in output order.
    :type records: iterable
    :param filename: The file to write.
    :type filename: str
    """
    lines = [_dumps(record) + "\n" for record in records]
    with atomic_write(filename) as stream:
        log.debug(f'Writing line delimited json file "{filename}".')
        stream.writelines(lines)


def read_json_file(filename):
    """
    Read a json file and return a python dictionary.

    :param filename: The filename of the json file.
    :type filename: str
    :return: The data read from the file.
    :rtype: dict
    :raises FileFormatError: If the file is not valid JSON.
    """
    with open(filename, "r", encoding="utf-8") as stream:
        try:
            log.debug(f'Reading json file "{filename}"')
            data = json.load(stream)
        except json.JSONDecodeError as exc:
            log.error(exc)
            raise FileFormatError(exc.lineno, exc.msg, filename=filename)
    return data


def write_json_file(data, filename):
    """Write a json file from a python dictionary."""
    try:
        text = json.dumps(data, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise ValidationError(f'Cannot write "{filename}": {exc}')
    with atomic_write(filename) as stream:
        log.debug(f'Writing json file "{filename}".')
        stream.write(text)


def _field(record, key, kind, line, filename, default=None, required=True):
    """
    Extract and type check one field of a record.

    :param kind: "int", "float", "bool", "list" or "dict".
    """
    if key not in record:
        if required:
            raise FileFormatError(line, "missing field", field=key, filename=filename)
        return default
    value = record[key]
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise FileFormatError(line, "expected an integer", field=key, filename=filename)
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise FileFormatError(line, "expected a number", field=key, filename=filename)
        value = float(value)
        if not math.isfinite(value):
            raise FileFormatError(line, "expected a finite number", field=key, filename=filename)
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise FileFormatError(line, "expected a boolean", field=key, filename=filename)
        return value
    if kind == "list":
        if not isinstance(value, list):
            raise FileFormatError(line, "expected a list", field=key, filename=filename)
        return value
    raise ValueError(f'Unknown field kind "{kind}".')


def _point(value, line, key, filename):
    if (
        not isinstance(value, list)
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise FileFormatError(line, "expected an [x, y] pair", field=key, filename=filename)
    return (float(value[0]), float(value[1]))


def _check_joint(joint, joint_count, line, filename):
    try:
        JointType(joint, joint_count)
    except ValidationError as exc:
        errmsg = f"{filename}:{line}: {exc}"
        log.error(errmsg)
        raise ValidationError(errmsg)


def read_detections(filename, joint_count=DEFAULT_JOINT_COUNT):
    """
    Read joint detections.

    Ids are taken from an optional "id" field and otherwise assigned as the
    record position. Scores inside [0, 1] are clamped into (0, 1).

    :param filename: The detections file.
    :type filename: str
    :param joint_count: The number of joint types.
    :type joint_count: int
    :return: The detections in file order.
    :rtype: list[Detection]
    :raises FileFormatError: On a malformed line.
    :raises ValidationError: On a non-positive scale, an out of range score or joint type, or duplicate ids.
    """
    detections = []
    ids = set()
    for position, (line, record) in enumerate(read_jsonl_file(filename)):
        det_id = _field(record, "id", "int", line, filename, default=position, required=False)
        frame = _field(record, "frame", "int", line, filename)
        joint = _field(record, "joint", "int", line, filename)
        x = _field(record, "x", "float", line, filename)
        y = _field(record, "y", "float", line, filename)
        score = _field(record, "score", "float", line, filename)
        scale = _field(record, "scale", "float", line, filename)
        if scale <= 0.0:
            errmsg = f"{filename}:{line}: scale {scale} is not positive."
            log.error(errmsg)
            raise ValidationError(errmsg)
        if not 0.0 <= score <= 1.0:
            errmsg = f"{filename}:{line}: score {score} is not a probability."
            log.error(errmsg)
            raise ValidationError(errmsg)
        if frame < 0:
            raise ValidationError(f"{filename}:{line}: negative frame {frame}.")
        _check_joint(joint, joint_count, line, filename)
        if det_id in ids:
            raise ValidationError(f"{filename}:{line}: detection id {det_id} used twice.")
        ids.add(det_id)
        detections.append(
            Detection(det_id, frame, joint, x, y, clamp_probability(score), scale)
        )
    log.debug(f'Read {len(detections)} detections from "{filename}".')
    return detections


def write_detections(detections, filename):
    """Write detections, one record per line, in the given order."""
    write_jsonl_file(
        (
            {
                "id": det.id,
                "frame": det.frame,
                "joint": det.joint,
                "x": det.x,
                "y": det.y,
                "score": det.score,
                "scale": det.scale,
            }
            for det in detections
        ),
        filename,
    )


def read_annotations(filename, joint_count=DEFAULT_JOINT_COUNT):
    """
    Read ground truth poses.

    :param filename: The annotation file.
    :type filename: str
    :return: The poses in file order.
    :rtype: list[GroundTruthPose]
    :raises ValidationError: On a duplicate (frame, person) pose, a duplicate joint type in a pose or a degenerate head box.
    """
    poses = []
    keys = set()
    for line, record in read_jsonl_file(filename):
        frame = _field(record, "frame", "int", line, filename)
        person = _field(record, "person", "int", line, filename)
        head = _field(record, "head", "list", line, filename)
        if len(head) != 4 or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in head):
            raise FileFormatError(line, "expected [x0, y0, x1, y1]", field="head", filename=filename)
        joints = []
        for entry in _field(record, "joints", "list", line, filename, default=[], required=False):
            if not isinstance(entry, dict):
                raise FileFormatError(line, "joint entry is not an object", field="joints", filename=filename)
            joint = _field(entry, "type", "int", line, filename)
            _check_joint(joint, joint_count, line, filename)
            joints.append(
                GroundTruthJoint(
                    joint,
                    _field(entry, "x", "float", line, filename),
                    _field(entry, "y", "float", line, filename),
                    _field(entry, "occluded", "bool", line, filename, default=False, required=False),
                )
            )
        if (frame, person) in keys:
            errmsg = f"{filename}:{line}: person {person} annotated twice in frame {frame}."
            log.error(errmsg)
            raise ValidationError(errmsg)
        keys.add((frame, person))
        try:
            poses.append(
                GroundTruthPose(frame, person, tuple(float(v) for v in head), tuple(joints))
            )
        except ValidationError as exc:
            errmsg = f"{filename}:{line}: {exc}"
            log.error(errmsg)
            raise ValidationError(errmsg)
    log.debug(f'Read {len(poses)} annotated poses from "{filename}".')
    return poses


def write_annotations(poses, filename):
    """Write ground truth poses, one record per line."""
    write_jsonl_file(
        (
            {
                "frame": pose.frame,
                "person": pose.person_id,
                "head": list(pose.head_box),
                "joints": [
                    {"type": j.joint, "x": j.x, "y": j.y, "occluded": j.occluded}
                    for j in pose.joints
                ],
            }
            for pose in poses
        ),
        filename,
    )


def read_correspondences(filename):
    """
    Read matched key points between frame pairs.

    :param filename: The correspondence file.
    :type filename: str
    :return: The correspondences in file order.
    :rtype: list[Correspondence]
    """
    correspondences = []
    for line, record in read_jsonl_file(filename):
        frame_a = _field(record, "frame_a", "int", line, filename)
        frame_b = _field(record, "frame_b", "int", line, filename)
        points_a = tuple(
            _point(p, line, "points_a", filename)
            for p in _field(record, "points_a", "list", line, filename)
        )
        points_b = tuple(
            _point(p, line, "points_b", filename)
            for p in _field(record, "points_b", "list", line, filename)
        )
        try:
            correspondences.append(Correspondence(frame_a, frame_b, points_a, points_b))
        except ValidationError as exc:
            raise ValidationError(f"{filename}:{line}: {exc}")
    log.debug(f'Read {len(correspondences)} correspondence records from "{filename}".')
    return correspondences


def write_correspondences(correspondences, filename):
    """Write correspondences, one frame pair per line."""
    write_jsonl_file(
        (
            {
                "frame_a": corr.frame_a,
                "frame_b": corr.frame_b,
                "points_a": [list(p) for p in corr.points_a],
                "points_b": [list(p) for p in corr.points_b],
            }
            for corr in correspondences
        ),
        filename,
    )


def read_tracks(filename):
    """
    Read pose tracks.

    Tracks appear in order of their first line; entries keep file order.

    :param filename: The tracks file.
    :type filename: str
    :return: The tracks.
    :rtype: PoseTracks
    """
    grouped = {}
    for line, record in read_jsonl_file(filename):
        track = _field(record, "track", "int", line, filename)
        entry = TrackEntry(
            _field(record, "frame", "int", line, filename),
            _field(record, "joint", "int", line, filename),
            _field(record, "x", "float", line, filename),
            _field(record, "y", "float", line, filename),
            _field(record, "score", "float", line, filename),
        )
        grouped.setdefault(track, []).append(entry)
    return PoseTracks(tuple(Track(tid, tuple(entries)) for tid, entries in grouped.items()))


def write_tracks(tracks, filename):
    """Write pose tracks, one joint entry per line, track by track."""
    write_jsonl_file(
        (
            {
                "track": track.track_id,
                "frame": entry.frame,
                "joint": entry.joint,
                "x": entry.x,
                "y": entry.y,
                "score": entry.score,
            }
            for track in tracks.tracks
            for entry in track.entries
        ),
        filename,
    )


def read_edge_probabilities(filename):
    """
    Read cross type spatial probabilities.

    :param filename: File with {"a": id, "b": id, "p": probability} lines.
    :type filename: str
    :return: Probabilities keyed by the (smaller id, larger id) pair, clamped into (0, 1).
    :rtype: dict
    """
    probabilities = {}
    for line, record in read_jsonl_file(filename):
        a = _field(record, "a", "int", line, filename)
        b = _field(record, "b", "int", line, filename)
        p = _field(record, "p", "float", line, filename)
        if not 0.0 <= p <= 1.0:
            raise ValidationError(f"{filename}:{line}: p={p} is not a probability.")
        probabilities[(min(a, b), max(a, b))] = clamp_probability(p)
    log.debug(f'Read {len(probabilities)} edge probabilities from "{filename}".')
    return probabilities


def write_edge_probabilities(probabilities, filename):
    """Write cross type spatial probabilities sorted by id pair."""
    write_jsonl_file(
        ({"a": a, "b": b, "p": p} for (a, b), p in sorted(probabilities.items())),
        filename,
    )


def write_temporal_model(model, filename):
    """Write a temporal logistic model as JSON."""
    write_json_file({"kind": "temporal", **model.to_dict()}, filename)


def read_temporal_model(filename):
    """
    Read a temporal logistic model.

    :raises DimensionMismatchError: If the model does not have one weight per temporal feature.
    """
    data = read_json_file(filename)
    if data.get("kind", "temporal") != "temporal":
        raise ValidationError(f'"{filename}" holds a {data.get("kind")} model, not a temporal one.')
    model = LogisticModel.from_dict(data)
    if model.feature_dim != TEMPORAL_FEATURE_DIM:
        raise DimensionMismatchError(
            f'"{filename}": temporal model has {model.feature_dim} weights, expected {TEMPORAL_FEATURE_DIM}.'
        )
    return model


def write_spatial_model(model, filename):
    write_json_file(model.to_dict(), filename)


def read_spatial_model(filename):
    data = read_json_file(filename)
    if data.get("kind") != "spatial":
        raise ValidationError(f'"{filename}" does not hold a spatial model.')
    if "weights" not in data:
        raise ValidationError(f'"{filename}": spatial model has no trained weights.')
    return SpatialModel.from_dict(data)


def write_graph(graph, filename):
    """
    Dump a graph: a header line, then node, spatial and temporal edge lines.
    """
    joints = None if graph.temporal_joints is None else sorted(graph.temporal_joints)
    records = [{"kind": "graph", "tau": graph.tau, "temporal_joints": joints}]
    records.extend(
        {
            "kind": "node",
            "id": det.id,
            "frame": det.frame,
            "joint": det.joint,
            "x": det.x,
            "y": det.y,
            "score": det.score,
            "scale": det.scale,
        }
        for det in graph.nodes
    )
    records.extend({"kind": "spatial", "a": e.a, "b": e.b} for e in graph.spatial_edges)
    records.extend({"kind": "temporal", "a": e.a, "b": e.b} for e in graph.temporal_edges)
    write_jsonl_file(records, filename)


def read_graph(filename, joint_count=DEFAULT_JOINT_COUNT):
    """
    Read a graph dump.

    The graph is rebuilt from its nodes and checked against the edges listed
    in the file.

    :raises FileFormatError: If the header is missing or a line has an unknown kind.
    :raises ValidationError: If the listed edges differ from the rebuilt graph.
    """
    records = read_jsonl_file(filename)
    if not records or records[0][1].get("kind") != "graph":
        raise FileFormatError(records[0][0] if records else 1, "missing graph header", field="kind", filename=filename)
    line, header = records[0]
    tau = _field(header, "tau", "int", line, filename)
    joints = header.get("temporal_joints")
    nodes = []
    spatial = set()
    temporal = set()
    for line, record in records[1:]:
        kind = record.get("kind")
        if kind == "node":
            joint = _field(record, "joint", "int", line, filename)
            _check_joint(joint, joint_count, line, filename)
            nodes.append(
                Detection(
                    _field(record, "id", "int", line, filename),
                    _field(record, "frame", "int", line, filename),
                    joint,
                    _field(record, "x", "float", line, filename),
                    _field(record, "y", "float", line, filename),
                    _field(record, "score", "float", line, filename),
                    _field(record, "scale", "float", line, filename),
                )
            )
        elif kind == "spatial":
            spatial.add((_field(record, "a", "int", line, filename), _field(record, "b", "int", line, filename)))
        elif kind == "temporal":
            temporal.add((_field(record, "a", "int", line, filename), _field(record, "b", "int", line, filename)))
        else:
            raise FileFormatError(line, f"unknown record kind {kind!r}", field="kind", filename=filename)
    graph = build_graph(nodes, tau, joints)
    if spatial != graph.spatial_set or temporal != graph.temporal_set:
        errmsg = f'"{filename}": listed edges do not match the graph built from its nodes.'
        log.error(errmsg)
        raise ValidationError(errmsg)
    return graph


def write_potentials(table, filename, fixed=None):
    """
    Dump potentials, optionally with fixed values.

    :param table: The potentials.
    :type table: PotentialTable
    :param fixed: Element key to value, keys ``("v", id)``, ``("s", a, b)`` or ``("t", a, b)``.
    :type fixed: dict
    """
    fixed = fixed or {}

    def record(kind, key, ids, cost):
        entry = {"kind": kind, **ids, "cost": cost}
        if key in fixed:
            entry["fixed"] = fixed[key]
        return entry

    records = [record("node", ("v", i), {"id": i}, c) for i, c in sorted(table.node_cost.items())]
    records += [
        record("spatial", ("s", a, b), {"a": a, "b": b}, c) for (a, b), c in sorted(table.spatial_cost.items())
    ]
    records += [
        record("temporal", ("t", a, b), {"a": a, "b": b}, c) for (a, b), c in sorted(table.temporal_cost.items())
    ]
    write_jsonl_file(records, filename)


def read_potentials(filename):
    """
    Read a potentials dump.

    :return: The potentials and the fixed values keyed like :func:`write_potentials`.
    :rtype: tuple[PotentialTable, dict]
    """
    node_cost = {}
    spatial_cost = {}
    temporal_cost = {}
    fixed = {}
    for line, record in read_jsonl_file(filename):
        kind = record.get("kind")
        cost = _field(record, "cost", "float", line, filename)
        if kind == "node":
            key = ("v", _field(record, "id", "int", line, filename))
            node_cost[key[1]] = cost
        elif kind in ("spatial", "temporal"):
            a = _field(record, "a", "int", line, filename)
            b = _field(record, "b", "int", line, filename)
            if kind == "spatial":
                key = ("s", a, b)
                spatial_cost[(a, b)] = cost
            else:
                key = ("t", a, b)
                temporal_cost[(a, b)] = cost
        else:
            raise FileFormatError(line, f"unknown record kind {kind!r}", field="kind", filename=filename)
        value = _field(record, "fixed", "int", line, filename, required=False)
        if value is not None:
            if value not in (0, 1):
                raise FileFormatError(line, "fixed value must be 0 or 1", field="fixed", filename=filename)
            fixed[key] = value
    return PotentialTable(node_cost, spatial_cost, temporal_cost), fixed
