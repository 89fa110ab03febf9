from __future__ import annotations

import sys
import json
import logging
import argparse
from pathlib import Path
from typing import Any, Optional, Dict, Sequence

from . import __version__
from .config import PipelineConfig, load_config
from .pipeline import run_count, run_synth, run_eval, run_bench, run_suite
from .exceptions import (
    BoothCountException,
    ConfigError,
    ParameterError,
    UnknownPreset,
    FormatError,
    InvariantError,
    FrameOrderError,
    EmptyModel,
)


__all__ = [
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_INPUT",
    "EXIT_INTERNAL",
    "build_parser",
    "main",
    "entry_point",
]
logger = logging.getLogger(__package__)
EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("-c", "--config", type=Path, help="configuration file to read")
    parser.add_argument("-o", "--output-dir", type=Path, help="where to write run artifacts")
    parser.add_argument("--seed", type=int, help="synthetic scene seed")
    parser.add_argument("--ground-truth", type=Path, help="ground truth CSV to evaluate against")
    parser.add_argument("--tolerance-frames", type=int, help="event matching tolerance")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a single configuration value, can be repeated",
    )


def _add_input(parser: argparse.ArgumentParser):
    parser.add_argument(
        "-i", "--input", type=Path, help="PGM directory or Y4M file, instead of a synthetic scene"
    )
    parser.add_argument("--preset", help="synthetic scene preset, e.g. n_people(4)")
    parser.add_argument("--width", type=int, help="synthetic frame width")
    parser.add_argument("--height", type=int, help="synthetic frame height")
    parser.add_argument("--line", help="counting line as x1,y1,x2,y2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boothcount",
        description="Entry and exit counting with background subtraction and line crossings.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    count = commands.add_parser("count", help="count crossings in a video")
    _add_common(count)
    _add_input(count)
    count.add_argument("--mask-every", type=int, help="dump every N-th cleaned mask")
    count.add_argument("--track-csv", action="store_true", default=None, help="write tracks.csv")
    count.add_argument(
        "--dump-background",
        action="store_true",
        default=None,
        help="write the final background image",
    )

    synth = commands.add_parser("synth", help="render a synthetic scene to disk")
    synth.add_argument("preset", nargs="?", default="single_cross", help="scene preset name")
    synth.add_argument("-o", "--output-dir", type=Path, default=Path("scene"))
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--width", type=int, default=320)
    synth.add_argument("--height", type=int, default=240)

    evaluate = commands.add_parser("eval", help="score an events file against ground truth")
    evaluate.add_argument("predicted", type=Path, help="events.csv to score")
    evaluate.add_argument("truth", type=Path, help="ground truth CSV")
    evaluate.add_argument("--tolerance-frames", type=int, default=15)
    evaluate.add_argument("--p0", type=float, default=0.05)
    evaluate.add_argument("-o", "--output-dir", type=Path, help="where to write report.json")

    bench = commands.add_parser("bench", help="measure processing throughput")
    _add_common(bench)
    _add_input(bench)
    bench.add_argument("--repeat", type=int, default=1, help="amount of timed runs")

    suite = commands.add_parser("suite", help="run the n_people scenarios over many seeds")
    _add_common(suite)
    suite.add_argument("--seeds", type=int, default=10, help="amount of seeds per scenario")
    suite.add_argument(
        "--counts", type=int, nargs="+", default=[2, 4, 10], help="people per scenario"
    )
    return parser


def _infer_source(path: Path) -> str:
    if path.is_dir():
        return "pgm_dir"
    if path.suffix.lower() == ".y4m":
        return "y4m"
    raise ConfigError("input.path", f"can't tell the input kind of {path}")


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    values: Dict[str, Any] = {
        "input.seed": args.seed,
        "eval.ground_truth": args.ground_truth,
        "eval.tolerance_frames": args.tolerance_frames,
        "output.directory": args.output_dir,
    }
    input_path: Optional[Path] = getattr(args, "input", None)
    if input_path is not None:
        values["input.source"] = _infer_source(input_path)
        values["input.path"] = input_path
    for flag, key in (
        ("preset", "input.preset"),
        ("width", "input.width"),
        ("height", "input.height"),
        ("line", "counter.line"),
        ("mask_every", "output.mask_every"),
        ("track_csv", "output.track_csv"),
        ("dump_background", "output.dump_background"),
    ):
        values[key] = getattr(args, flag, None)
    return load_config(args.config, args.overrides, values)


def _count(args: argparse.Namespace) -> int:
    summary = run_count(_config_from_args(args))
    print(summary.line())
    return EXIT_OK


def _synth(args: argparse.Namespace) -> int:
    paths, truth_path = run_synth(
        args.preset, args.seed, args.output_dir, width=args.width, height=args.height
    )
    print(f"frames={len(paths)} directory={args.output_dir} truth={truth_path}")
    return EXIT_OK


def _eval(args: argparse.Namespace) -> int:
    report = run_eval(
        args.predicted,
        args.truth,
        args.tolerance_frames,
        p0=args.p0,
        output_dir=args.output_dir,
    )
    print(report.table())
    return EXIT_OK


def _bench(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    report = run_bench(config, args.repeat)
    print(report.table())
    if args.output_dir is not None:
        config.output_dir.mkdir(parents=True, exist_ok=True)
        with open(config.output_dir / "bench.json", "w") as file:
            json.dump(report.to_dict(), file, indent=2)
    return EXIT_OK


def _suite(args: argparse.Namespace) -> int:
    rows = run_suite(range(args.seeds), args.counts, _config_from_args(args))
    print(f"{'People':>6}  {'Entering':>9}  {'Leaving':>9}  {'Average F1':>10}")
    for row in rows:
        print(
            f"{row.people:>6}  {row.enter_f1 * 100:>8.2f}%  "
            f"{row.exit_f1 * 100:>8.2f}%  {row.average_f1 * 100:>9.2f}%"
        )
    return EXIT_OK


_COMMANDS = {
    "count": _count,
    "synth": _synth,
    "eval": _eval,
    "bench": _bench,
    "suite": _suite,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    The command-line entry point.

    Returns
    -------
    int
        The exit code: ``0`` on success, ``1`` for configuration and parameter errors,
        ``2`` for unreadable or malformed input and output failures, ``3`` for internal
        failures.
    """
    args = build_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, UnknownPreset, ValueError) as exc:
        logger.error(str(exc))
        return EXIT_CONFIG
    except (FormatError, OSError) as exc:
        logger.error(str(exc))
        return EXIT_INPUT
    except (InvariantError, FrameOrderError, EmptyModel) as exc:
        logger.error(str(exc))
        return EXIT_INTERNAL
    except BoothCountException as exc:
        # dimension mismatches between input files
        logger.error(str(exc))
        return EXIT_INPUT
    except Exception:
        logger.exception("Unexpected failure")
        return EXIT_INTERNAL


def entry_point():
    sys.exit(main())

