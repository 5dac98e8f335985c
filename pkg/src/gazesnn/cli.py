"""Command line entry point: ``gazesnn run|compare|dump-connectome|dump-rf-grid``.

Exit codes: 0 success, 2 configuration error, 3 runtime numeric error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .connectome import assemble_controller, dump_connectome
from .harness import (ExperimentConfig, compare_learning, comparison_table, run_experiment,
                      write_run)
from .plant import ScriptError, TrajectorySpec, trajectory_from_config
from .retina import dump_rf_grid, grid_from_config, profile_from_config
from .snn import NumericInputError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("config", f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _trajectory(arg: str | None, cfg, seed: int) -> TrajectorySpec:
    spec = trajectory_from_config(cfg, seed)
    if arg is None:
        return spec
    if arg in ("random", "repetitive"):
        spec.kind = arg
    elif arg.startswith("scripted:") and len(arg) > len("scripted:"):
        spec.kind, spec.path = "scripted", arg[len("scripted:"):]
    else:
        raise ConfigError("trajectory", f"--trajectory must be random, repetitive or scripted:PATH, got {arg!r}")
    spec.__post_init__()
    return spec


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    seed = cfg["harness.seed"] if args.seed is None else args.seed
    kw = {"seed": seed, "trajectory": _trajectory(args.trajectory, cfg, seed)}
    if args.duration_ms is not None:
        kw["duration"] = float(args.duration_ms)
    if args.learning is not None:
        kw["learning"] = args.learning == "on"
    exp = ExperimentConfig.from_config(cfg, **kw)
    result = run_experiment(exp)
    trace_path, metrics_path = write_run(result, args.out, learning_log=args.learning_log)
    print(result.metrics.to_text(), end="")
    logging.info("wrote %s and %s", trace_path, metrics_path)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    if args.seeds < 1:
        raise ConfigError("harness", "--seeds must be >= 1")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def runner(exp):
        result = run_experiment(exp)
        tag = "on" if exp.learning else "off"
        write_run(result, out, prefix=f"seed{exp.seed}_{tag}_")
        return result

    dur = None if args.duration_ms is None else float(args.duration_ms)
    rows = compare_learning(cfg, args.seeds, duration=dur, runner=runner)
    table = comparison_table(rows)
    (out / "comparison.txt").write_text(table)
    print(table, end="")
    return EXIT_OK


def cmd_dump_connectome(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    sys.stdout.write(dump_connectome(assemble_controller(cfg)))
    return EXIT_OK


def cmd_dump_rf_grid(args) -> int:
    cfg = load_config(args.config, _overrides(args.set))
    sys.stdout.write(dump_rf_grid(grid_from_config(cfg), profile_from_config(cfg)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gazesnn", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")

    p = sub.add_parser("run", help="run one closed-loop experiment")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration-ms", type=float)
    p.add_argument("--learning", choices=("on", "off"))
    p.add_argument("--trajectory", help="random | repetitive | scripted:PATH")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--learning-log", action="store_true", help="also write learning.txt")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="paired learning off/on runs over seeds")
    common(p)
    p.add_argument("--seeds", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--duration-ms", type=float)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("dump-connectome", help="print the assembled edge list")
    common(p)
    p.set_defaults(func=cmd_dump_connectome)

    p = sub.add_parser("dump-rf-grid", help="print the receptive-field grid")
    common(p)
    p.set_defaults(func=cmd_dump_rf_grid)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ScriptError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericInputError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
