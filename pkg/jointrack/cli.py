#!/usr/bin/env python3

import os
import sys
import argparse

import numpy as np

from . import FORMAT_REVISION, __version__
from .access import io
from .config.context import Context
from .config.interface import Settings
from .errors import JointrackError
from .ilp import FAMILIES, VarIndex, build_instance, to_lp
from .log import Logger
from .metrics import PckhConfig, evaluate
from .potentials import EdgeProbabilities, TrainingConfig, train_spatial_model, train_temporal_model
from .solver import SolverConfig, brute_force, check, random_instance, solve
from .synth import SynthConfig, generate
from .tracker import Models, TrackerConfig, track_with_stats
from .util.files import atomic_write

ctxt = Context()
log = Logger(
    name=__name__,
    level=ctxt["logging"]["level"],
    filename=ctxt["logging"]["filename"],
)

USAGE_ERROR = 2
VALIDATION_ERROR = 1


def _add_tracker_flags(parser):
    parser.add_argument("--batch-size", type=int, help="Frames per window")
    parser.add_argument("--tau", type=int, help="Longest temporal edge in frames")
    parser.add_argument("--min-frames", type=int, help="Shortest kept track in frames")
    parser.add_argument("--min-avg-nodes", type=float, help="Fewest detections per frame of a kept track")
    parser.add_argument("--nms-iou", type=float, help="Non-maximum suppression threshold")
    parser.add_argument("--temporal-joints", type=int, nargs="+",
                        help="Joint types connected over time (default all)")
    parser.add_argument("--disable-constraint", action="append", choices=FAMILIES, default=[],
                        help="Leave out a constraint family (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jointrack",
        description="Multi-person pose tracking by spatio-temporal graph partitioning.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__} (formats revision {FORMAT_REVISION})")
    parser.add_argument("--log-level", type=str, help="debug, info, warning, error or critical")
    parser.add_argument("--config", type=str, help="TOML or YAML settings file")
    parser.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=None,
                        help="Leave wall times out of every output (default on)")
    commands = parser.add_subparsers(dest="command", metavar="command")

    synth = commands.add_parser("synth", help="Generate a synthetic scene")
    synth.add_argument("--seed", type=int)
    synth.add_argument("--persons", type=int)
    synth.add_argument("--frames", type=int)
    synth.add_argument("--noise", type=float, help="Detection noise in pixels")
    synth.add_argument("--miss", type=float, help="Probability of dropping a detection")
    synth.add_argument("--fp", type=float, help="False positive probability per frame and joint type")
    synth.add_argument("--occlusions", type=int, help="Number of occlusion episodes")
    synth.add_argument("--spacing", type=float, help="Distance between persons in pixels")
    synth.add_argument("--out-dir", type=str, required=True)

    temporal = commands.add_parser("train-temporal", help="Learn the temporal edge model")
    spatial = commands.add_parser("train-spatial", help="Learn the cross-type spatial model")
    for sub in (temporal, spatial):
        sub.add_argument("--detections", type=str, required=True)
        sub.add_argument("--annotations", type=str, required=True)
        sub.add_argument("--out", type=str, required=True)
        sub.add_argument("--epochs", type=int)
        sub.add_argument("--l2", type=float)
        sub.add_argument("--lr", type=float)
        sub.add_argument("--pckh-ratio", type=float)
        sub.add_argument("--nms-iou", type=float)
        sub.add_argument("--seed", type=int, help="Recorded only; training does not draw random numbers")
    temporal.add_argument("--correspondences", type=str, required=True)
    temporal.add_argument("--tau", type=int)
    temporal.add_argument("--temporal-joints", type=int, nargs="+")

    tracking = commands.add_parser("track", help="Track the poses of a video")
    tracking.add_argument("--detections", type=str, required=True)
    tracking.add_argument("--correspondences", type=str, required=True)
    tracking.add_argument("--temporal-model", type=str, required=True)
    source = tracking.add_mutually_exclusive_group(required=True)
    source.add_argument("--spatial-model", type=str)
    source.add_argument("--spatial-edges", type=str)
    tracking.add_argument("--out", type=str, required=True)
    tracking.add_argument("--stats", type=str)
    tracking.add_argument("--dump-dir", type=str, help="Write the graph and potentials of every window")
    tracking.add_argument("--time-limit", type=float)
    tracking.add_argument("--node-limit", type=int)
    _add_tracker_flags(tracking)

    solving = commands.add_parser("solve", help="Solve one dumped window")
    solving.add_argument("--graph", type=str, required=True)
    solving.add_argument("--potentials", type=str, required=True)
    solving.add_argument("--time-limit", type=float)
    solving.add_argument("--node-limit", type=int)
    solving.add_argument("--oracle", action="store_true", help="Also enumerate every assignment and compare")
    solving.add_argument("--disable-constraint", action="append", choices=FAMILIES, default=[])
    solving.add_argument("--out", type=str, help="Write the assignment as JSON")
    solving.add_argument("--lp", type=str, help="Write the instance in LP format")

    scoring = commands.add_parser("eval", help="Score tracks against ground truth")
    scoring.add_argument("--gt", type=str, required=True)
    scoring.add_argument("--pred", type=str, required=True)
    scoring.add_argument("--pckh-ratio", type=float)
    scoring.add_argument("--occlusion-aware", action="store_true")
    scoring.add_argument("--out", type=str)

    oracle = commands.add_parser("oracle", help="Compare the solver with exhaustive search on random instances")
    oracle.add_argument("--instances", type=int, default=100)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--max-vars", type=int, default=22)
    for sub in commands.choices.values():
        sub.add_argument("--config", type=str, default=argparse.SUPPRESS, help="TOML or YAML settings file")
    return parser


def _settings(args):
    flags = {
        "deterministic": args.deterministic,
        "tracker": {
            "batch_size": getattr(args, "batch_size", None),
            "tau": getattr(args, "tau", None),
            "min_frames": getattr(args, "min_frames", None),
            "min_avg_nodes": getattr(args, "min_avg_nodes", None),
            "nms_iou": getattr(args, "nms_iou", None),
            "temporal_joints": getattr(args, "temporal_joints", None),
        },
        "solver": {
            "time_limit": getattr(args, "time_limit", None),
            "node_limit": getattr(args, "node_limit", None),
        },
        "pckh": {"ratio": getattr(args, "pckh_ratio", None)},
        "training": {
            "epochs": getattr(args, "epochs", None),
            "l2": getattr(args, "l2", None),
            "lr": getattr(args, "lr", None),
        },
    }
    return Settings.layered(flags, args.config)


def _families(settings, disabled):
    enabled = settings.section("tracker").get("constraints", list(FAMILIES))
    return tuple(f for f in enabled if f not in set(disabled))


def _tracker_config(settings, disabled=()):
    section = settings.section("tracker")
    section["constraints"] = _families(settings, disabled)
    return TrackerConfig.from_mapping(section, settings.section("solver"))


def run_synth(args, settings):
    values = settings.section("synth")
    overrides = {
        "seed": args.seed,
        "persons": args.persons,
        "frames": args.frames,
        "detection_noise": args.noise,
        "miss_rate": args.miss,
        "fp_rate": args.fp,
        "occlusions": args.occlusions,
        "spacing": args.spacing,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = SynthConfig.from_mapping(values)
    scene = generate(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    io.write_annotations(scene.annotations, os.path.join(args.out_dir, "annotations.jsonl"))
    io.write_detections(scene.detections, os.path.join(args.out_dir, "detections.jsonl"))
    io.write_correspondences(scene.correspondences, os.path.join(args.out_dir, "correspondences.jsonl"))
    print(f"Wrote {len(scene.detections)} detections and {len(scene.annotations)} poses to {args.out_dir}")
    return 0


def _training(settings):
    return {
        **TrainingConfig.from_mapping(settings.section("training")).as_kwargs(),
        "ratio": float(settings.section("pckh")["ratio"]),
        "nms_iou": float(settings.section("tracker")["nms_iou"]),
    }


def run_train_temporal(args, settings):
    tracker = settings.section("tracker")
    model = train_temporal_model(
        io.read_detections(args.detections),
        io.read_annotations(args.annotations),
        io.read_correspondences(args.correspondences),
        tau=int(tracker["tau"]),
        temporal_joints=tracker.get("temporal_joints"),
        **_training(settings),
    )
    io.write_temporal_model(model, args.out)
    print(f"Wrote temporal model to {args.out}")
    return 0


def run_train_spatial(args, settings):
    model = train_spatial_model(
        io.read_detections(args.detections),
        io.read_annotations(args.annotations),
        **_training(settings),
    )
    io.write_spatial_model(model, args.out)
    print(f"Wrote spatial model to {args.out}")
    return 0


def run_track(args, settings):
    cfg = _tracker_config(settings, args.disable_constraint)
    if args.spatial_model is not None:
        spatial = io.read_spatial_model(args.spatial_model)
    else:
        spatial = EdgeProbabilities(io.read_edge_probabilities(args.spatial_edges))
    models = Models(io.read_temporal_model(args.temporal_model), spatial)
    tracks, stats = track_with_stats(
        io.read_detections(args.detections),
        io.read_correspondences(args.correspondences),
        models,
        cfg,
        deterministic=bool(settings["deterministic"]),
        dump_dir=args.dump_dir,
    )
    io.write_tracks(tracks, args.out)
    if args.stats is not None:
        io.write_json_file(stats.to_dict(), args.stats)
    print(f"Wrote {len(tracks)} tracks to {args.out}")
    return 0


def run_solve(args, settings):
    graph = io.read_graph(args.graph)
    table, fixed = io.read_potentials(args.potentials)
    families = _families(settings, args.disable_constraint)
    index = VarIndex.from_graph(graph)
    inst = build_instance(graph, table, index.fixed_values(fixed), families)
    if args.lp is not None:
        with atomic_write(args.lp) as stream:
            stream.write(to_lp(inst))
    cfg = SolverConfig.from_mapping(settings.section("solver"))
    assignment, stats = solve(inst, cfg)
    print(f"objective: {assignment.objective!r}")
    print(f"proven optimal: {stats.proven_optimal}")
    status = 0
    if args.oracle:
        reference, feasible = brute_force(inst)
        print(f"oracle objective: {reference.objective!r} ({feasible} feasible assignments)")
        if reference.objective != assignment.objective:
            log.error(f"Solver objective {assignment.objective!r} differs from {reference.objective!r}.")
            status = VALIDATION_ERROR
    if args.out is not None:
        data = {
            "objective": assignment.objective,
            "values": list(assignment.values),
            "variables": inst.index.names,
            "proven_optimal": stats.proven_optimal,
            "nodes_explored": stats.nodes_explored,
            "constraints_added": stats.constraints_added,
        }
        if not settings["deterministic"]:
            data["wall_time"] = stats.wall_time
        io.write_json_file(data, args.out)
    return status


def run_eval(args, settings):
    cfg = PckhConfig.from_mapping(settings.section("pckh"))
    report = evaluate(
        io.read_tracks(args.pred),
        io.read_annotations(args.gt),
        cfg,
        occlusion_aware=args.occlusion_aware,
    )
    if args.out is not None:
        io.write_json_file(report.to_dict(), args.out)
    print(report.to_frame().to_string(index=False))
    return 0


def run_oracle(args, settings):
    rng = np.random.default_rng(args.seed)
    failures = 0
    for number in range(args.instances):
        inst = random_instance(rng, max_vars=args.max_vars)
        assignment, _ = solve(inst)
        reference, _ = brute_force(inst)
        if assignment.objective != reference.objective or not check(inst, assignment, exhaustive=True):
            failures += 1
            log.error(
                f"Instance {number}: solver {assignment.objective!r}, exhaustive {reference.objective!r}."
            )
    print(f"{args.instances - failures} of {args.instances} instances agree")
    return 0 if failures == 0 else VALIDATION_ERROR


COMMANDS = {
    "synth": run_synth,
    "train-temporal": run_train_temporal,
    "train-spatial": run_train_spatial,
    "track": run_track,
    "solve": run_solve,
    "eval": run_eval,
    "oracle": run_oracle,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    try:
        settings = _settings(args)
        level = args.log_level or settings.section("logging").get("level")
        if level is not None:
            log.set_level(level)
        return COMMANDS[args.command](args, settings)
    except JointrackError as exc:
        print(f"jointrack: error: {exc}", file=sys.stderr)
        return VALIDATION_ERROR
    except ValueError as exc:
        print(f"jointrack: error: {exc}", file=sys.stderr)
        return VALIDATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
