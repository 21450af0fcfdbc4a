"""Command-line entry point: simulate, locate, bench, export.

Exit codes: 0 success, 1 runtime/IO failure, 2 usage error. Every
subcommand accepts --json for a machine-readable summary on stdout. Flags
win over values from --config when both are given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from uavradar import bench as bench_mod
from uavradar import capture, heatmaps, simulate
from uavradar.bench import METHOD_NAMES, make_pipelines
from uavradar.radar import RadarConfig, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavradar",
        description="FMCW radar drone simulation and 3-D localization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize a dataset")
    p_sim.add_argument("--out", required=True, help="output directory")
    p_sim.add_argument("--bench", choices=["sim-bench-v1"],
                       help="write all sequences of the named benchmark")
    p_sim.add_argument("--seed", type=int, default=0, help="sequence seed")
    p_sim.add_argument("--duration", type=float, help="seconds per sequence")
    p_sim.add_argument("--encoding", choices=["float32", "int16"], default="float32")
    p_sim.add_argument("--config", help="radar config file (key = value lines)")
    p_sim.add_argument("--json", action="store_true")

    p_loc = sub.add_parser("locate", help="run one localizer over a sequence")
    p_loc.add_argument("--method", required=True, choices=list(METHOD_NAMES))
    p_loc.add_argument("--in", dest="input", required=True, help="sequence directory")
    p_loc.add_argument("--out", required=True, help="estimates CSV path")
    p_loc.add_argument("--workers", type=int, default=1)
    p_loc.add_argument("--json", action="store_true")

    p_bench = sub.add_parser("bench", help="benchmark pipelines over a dataset")
    p_bench.add_argument("--in", dest="input", required=True,
                         help="dataset root (sequence directories) or one sequence")
    p_bench.add_argument("--out", required=True, help="report output directory")
    p_bench.add_argument("--method", action="append", choices=list(METHOD_NAMES),
                         help="repeatable; default with --all is every method")
    p_bench.add_argument("--all", action="store_true", help="run all methods")
    p_bench.add_argument("--workers", type=int, default=1)
    p_bench.add_argument("--stride", type=int, default=1, help="frame stride")
    p_bench.add_argument("--json", action="store_true")

    p_exp = sub.add_parser("export", help="export training heatmaps (HTMP)")
    p_exp.add_argument("--in", dest="input", required=True,
                       help="dataset root or one sequence directory")
    p_exp.add_argument("--out", required=True, help="output directory")
    p_exp.add_argument("--chirps", type=int, default=16, help="chirps per record")
    p_exp.add_argument("--stride", type=int, default=1, help="frame stride")
    p_exp.add_argument("--json", action="store_true")
    return parser


def _emit(args, summary: dict) -> None:
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        for k, v in summary.items():
            print(f"{k}: {v}")


def _sequence_dirs(root: str) -> list:
    if os.path.exists(os.path.join(root, "config.txt")):
        return [root]
    dirs = sorted(
        os.path.join(root, d) for d in os.listdir(root)
        if os.path.exists(os.path.join(root, d, "config.txt")))
    if not dirs:
        raise FileNotFoundError(f"no sequence directories under {root}")
    return dirs


def cmd_simulate(args) -> dict:
    cfg = load_config(args.config) if args.config else RadarConfig()
    encoding = capture.ENC_INT16 if args.encoding == "int16" else capture.ENC_FLOAT32
    seeds = range(simulate.SIM_BENCH_V1["sequences"]) if args.bench else [args.seed]
    total_frames = 0
    for seed in seeds:
        scene = simulate.sim_bench_scene(seed, duration=args.duration, cfg=cfg)
        seq = simulate.SimSequence(scene, cfg, simulate.default_layout(cfg),
                                   sequence_id=seed)
        out = os.path.join(args.out, f"seq{seed:02d}") if args.bench else args.out
        simulate.write_sequence(out, seq, encoding=encoding)
        total_frames += len(seq)
    n_scatter = 1 + simulate.DroneModel().rotor_count * simulate.DroneModel().blade_tips_per_rotor
    return {"sequences": len(list(seeds)), "frames": total_frames,
            "drone_scatterers": n_scatter, "out": args.out}


def cmd_locate(args) -> dict:
    seq = capture.DiskSequence(args.input)
    pipeline = make_pipelines(seq.cfg, seq.layout, methods=[args.method],
                              workers=args.workers)[args.method]
    rows = []
    n_dropped = 0
    for cube in seq.frames():
        try:
            est = pipeline(cube)
            rows.append((cube.frame_index, cube.timestamp, est.as_array(), "ok"))
        except Exception:
            rows.append((cube.frame_index, cube.timestamp, None, "no_target"))
            n_dropped += 1
    bench_mod.write_estimates_csv(args.out, rows)
    return {"method": args.method, "frames": len(rows), "no_target": n_dropped,
            "out": args.out}


def cmd_bench(args) -> dict:
    methods = list(METHOD_NAMES) if (args.all or not args.method) else args.method
    sequences = [capture.DiskSequence(d) for d in _sequence_dirs(args.input)]
    cfg, layout = sequences[0].cfg, sequences[0].layout
    pipelines = make_pipelines(cfg, layout, methods=methods, workers=args.workers)
    result = bench_mod.run_benchmark(sequences, pipelines, out_dir=args.out,
                                     frame_stride=args.stride, workers=args.workers)
    return {
        "methods": {m: result.error_reports[m].summary() for m in methods},
        "runtime_ms": {m: result.runtime_reports[m].mean_ms for m in methods},
        "out": args.out,
    }


def cmd_export(args) -> dict:
    sequences = [capture.DiskSequence(d) for d in _sequence_dirs(args.input)]
    n = heatmaps.export_training_set(sequences, args.out,
                                     chirps_per_sample=args.chirps,
                                     frame_stride=args.stride)
    return {"records": n, "heatmaps_per_record": 6 * args.chirps, "out": args.out}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"simulate": cmd_simulate, "locate": cmd_locate,
               "bench": cmd_bench, "export": cmd_export}[args.command]
    try:
        summary = handler(args)
    except Exception as exc:  # runtime/IO failure -> exit 1 per contract
        print(f"uavradar {args.command}: {exc}", file=sys.stderr)
        return 1
    _emit(args, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
