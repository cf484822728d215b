"""Command-line front end.

Subcommands: gen-scene (seeded bin scenes), run (one trial on a saved
scene), bench (the singulation and pipeline suites), render (density or
instance-mask PGM images). Every command is deterministic given its flags,
the config document, and the seed.

Exit codes: 0 command ran (a failed trial still exits 0), 2 bad flags or
config, 3 scene generation failure, 4 I/O failure.
"""

import argparse
import os
import sys

import numpy as np

from .config import Config, dump_config, load_config
from .density import dot_to_density, make_dot_map, save_pgm
from .errors import BinPickError, ConfigError, PlacementFailureError
from .pipeline import (
    BenchRow,
    Mode,
    run_one_stage,
    run_pipeline_bench,
    run_singulation_bench,
    run_two_stage,
    rows_to_csv,
    write_summary,
)
from .world import generate_scene, load_scene, rasterize, save_scene

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_IO = 4

CONFIG_ENV_VAR = "BINPICK_CONFIG"


def _load_config(args):
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return Config().validate()
    return load_config(path)


def _positive_int(raw):
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative_int(raw):
    value = int(raw)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def cmd_gen_scene(args):
    cfg = _load_config(args)
    try:
        world = generate_scene(
            n_objects=args.objects,
            seed=args.seed,
            workspace=cfg.build_workspace(),
            shape_kind=args.shape,
            pile_count=args.piles,
            pile_contact=args.piles > 0,
            clearance=args.clearance,
        )
    except PlacementFailureError as exc:
        print(f"scene generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    try:
        save_scene(world, args.out)
    except OSError as exc:
        print(f"cannot write scene: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_run(args):
    cfg = _load_config(args)
    try:
        world = load_scene(args.scene)
    except OSError as exc:
        print(f"cannot read scene: {exc}", file=sys.stderr)
        return EXIT_IO
    mode = Mode(args.mode.replace("-", "_"))
    trial_cfg = cfg.build_trial_config(seed=world.rng_seed, mode=mode.value)
    if mode is Mode.TWO_STAGE:
        record = run_two_stage(world, trial_cfg)
    else:
        record = run_one_stage(world, trial_cfg)
    row = BenchRow(
        mode=mode.value,
        policy=trial_cfg.singulation_policy.value,
        cluster_size=len(world.items),
        seed=world.rng_seed,
        record=record,
    )
    try:
        rows_to_csv([row], args.out)
    except OSError as exc:
        print(f"cannot write results: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_bench(args):
    cfg = _load_config(args)
    if args.suite == "singulation":
        rows = run_singulation_bench(
            trials=args.trials,
            root_seed=args.seed,
            max_singulations=cfg.bench.max_singulations,
            workers=args.workers,
        )
    else:
        rows = run_pipeline_bench(
            trials=args.trials,
            root_seed=args.seed,
            scene_params=cfg.bench.scene_params(),
            cfg=cfg.build_trial_config(),
            workers=args.workers,
        )
    summary_path = args.summary or (args.out + ".summary.json")
    try:
        rows_to_csv(rows, args.out)
        write_summary(rows, summary_path)
    except OSError as exc:
        print(f"cannot write bench output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _save_mask_pgm(frame, path):
    """Plain-text PGM of the instance mask, one gray level per instance."""
    inst = frame.instance_mask
    maxval = max(int(inst.max()), 1)
    with open(path, "w") as f:
        f.write(f"P2\n{frame.width} {frame.height}\n{maxval}\n")
        for row in inst:
            f.write(" ".join(str(int(v)) for v in row))
            f.write("\n")


def cmd_render(args):
    cfg = _load_config(args)
    try:
        world = load_scene(args.scene)
    except OSError as exc:
        print(f"cannot read scene: {exc}", file=sys.stderr)
        return EXIT_IO
    frame = rasterize(
        world, world.workspace.bin_region, cfg.raster.bin_mm_per_px
    )
    try:
        if args.what == "density":
            density = dot_to_density(make_dot_map(frame), cfg.density.sigma_px)
            save_pgm(density, args.out)
        else:
            _save_mask_pgm(frame, args.out)
    except OSError as exc:
        print(f"cannot write render: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_dump_config(args):
    cfg = _load_config(args)
    try:
        dump_config(cfg, args.out)
    except OSError as exc:
        print(f"cannot write config: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="binpick",
        description="Deterministic 2-D bin-picking laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a seeded bin scene")
    p.add_argument("--objects", type=_positive_int, required=True)
    p.add_argument("--shape", choices=("disk", "polygon", "mixed"), default="disk")
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--piles", type=_non_negative_int, default=0)
    p.add_argument("--clearance", type=float, default=0.3)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("run", help="run one trial on a saved scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--mode", choices=("two-stage", "one-stage"), required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--suite", choices=("singulation", "pipeline"), required=True)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--summary")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("render", help="render a scene to PGM")
    p.add_argument("--scene", required=True)
    p.add_argument("--what", choices=("density", "masks"), required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("dump-config", help="write the effective config")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dump_config)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BinPickError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
