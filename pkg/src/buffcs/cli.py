"""Command-line interface: generate scenes, run experiments, emit reports,
and verify the acceptance properties.

Exit codes: 0 on success, 2 for configuration errors, 3 when one or more
experiment cells failed, 4 when verification checks failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .buffering import Strategy
from .errors import BuffcsError, ConfigError
from .harness import (
    ExperimentConfig,
    RunRecord,
    config_from_dict,
    default_profile,
    emit_reports,
    generate_scenes,
    run_experiment,
)
from .scenegen import write_frames_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CELL_FAILURE = 3
EXIT_VERIFY_FAILURE = 4


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        cfg = config_from_dict(doc)
    else:
        cfg = ExperimentConfig(scene_profile=default_profile())
    if getattr(args, "seeds", None):
        cfg.seeds = [int(s) for s in args.seeds.split(",")]
    if getattr(args, "strategies", None):
        try:
            cfg.strategies = [Strategy(s.strip()) for s in args.strategies.split(",")]
        except ValueError as exc:
            raise ConfigError(f"unknown strategy: {exc}") from exc
    if getattr(args, "buffer_sizes", None):
        cfg.buffer_sizes = [int(s) for s in args.buffer_sizes.split(",")]
    if getattr(args, "order", None):
        if args.order.startswith("random:"):
            cfg.order = f"random({int(args.order.split(':', 1)[1])})"
        else:
            cfg.order = [int(s) for s in args.order.split(",")]
    if getattr(args, "replay_mode", None):
        cfg.replay_mode = args.replay_mode
    cfg.__post_init__()
    return cfg


def _cmd_generate(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seed = int(args.seed)
    scenes = generate_scenes(cfg, seed)
    for sid in sorted(scenes):
        scene = scenes[sid]
        scene.hierarchy.save_json(out / f"scene_{sid}_hierarchy.json")
        write_frames_csv(scene, out / f"scene_{sid}_frames.csv")
        print(f"scene {sid}: {scene.points.shape[0]} points, {len(scene.frames)} frames, "
              f"labels per level {scene.hierarchy.level_sizes}")
    print(f"wrote {2 * len(scenes)} files to {out}")
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    resume = None
    if args.resume:
        resume = RunRecord.load(args.resume)
    record = run_experiment(cfg, out_dir=out, resume=resume, jobs=int(args.jobs))
    emit_reports(record, out)
    failed = record.failed_cells
    done = sum(1 for c in record.cells.values() if c.error is None)
    print(f"completed {done}/{len(record.cells)} cells; record at {out / 'run_record.json'}")
    if failed:
        for key in failed:
            print(f"FAILED cell {key}: {record.cells[key].error}", file=sys.stderr)
        return EXIT_CELL_FAILURE
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    record = RunRecord.load(args.record)
    paths = emit_reports(record, Path(args.out))
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    from . import acceptance

    names = args.only.split(",") if args.only else None
    results = acceptance.run_checks(names=names, quick=args.quick)
    failed = [r for r in results if not r.passed]
    return EXIT_VERIFY_FAILURE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="buffcs", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (defaults to the built-in profile)")
    common.add_argument("--seeds", help="comma-separated seed list override")
    common.add_argument("--strategies", help="comma-separated strategies override")
    common.add_argument("--buffer-sizes", dest="buffer_sizes", help="comma-separated buffer sizes override")
    common.add_argument("--order", help="task order: comma-separated scene ids or random:SEED")
    common.add_argument("--replay-mode", dest="replay_mode", choices=["img", "rep"], help="buffer payload mode")

    p_gen = sub.add_parser("generate", parents=[common], help="generate scenes and export them")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", default=0, help="generation seed (default 0)")
    p_gen.set_defaults(func=_cmd_generate)

    p_run = sub.add_parser("run", parents=[common], help="run the experiment grid and emit reports")
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--jobs", default=1, help="parallel worker processes over seeds")
    p_run.add_argument("--resume", help="previous run_record.json; completed cells are reused")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="re-emit CSVs and figures from a run record")
    p_rep.add_argument("--record", required=True, help="path to run_record.json")
    p_rep.add_argument("--out", required=True, help="output directory")
    p_rep.set_defaults(func=_cmd_report)

    p_ver = sub.add_parser("verify", help="run the acceptance checks")
    p_ver.add_argument("--quick", action="store_true", help="reduced repetition counts (smoke mode)")
    p_ver.add_argument("--only", help="comma-separated check names to run")
    p_ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BuffcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CELL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
