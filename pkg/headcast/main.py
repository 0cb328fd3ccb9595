import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from headcast.src.config_manager.config_manager import ConfigManager
from headcast.src.config_params.config_params import OBJECTIVES
from headcast.src.constants import (
    CONFIG_FILEPATH,
    DEFAULT_ALPHA,
    DEFAULT_FPS,
    DEFAULT_HEAD_LEAD_S,
    DEFAULT_MAX_DEPTH_M,
    DEFAULT_MIN_DEPTH_M,
    DEFAULT_N_STEPS,
)
from headcast.src.pipeline.prediction_pipeline import STDIN_MARKER, PredictionPipeline
from headcast.src.pipeline.validation_pipeline import ValidationPipeline
from headcast.src.utils.exception import EXIT_CONFIG_OR_IO, EXIT_DEGENERATE_STATISTICS, HeadcastException
from headcast.src.utils.logger import logger

EXIT_OK = 0


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help=f"YAML file layered over the packaged config (default: {CONFIG_FILEPATH.name}).")
    common.add_argument("--seed", type=int, default=None, help="Simulation seed (default: 7).")
    common.add_argument("--out", type=str, default=None,
                        help="Output file (predict) or directory (other commands).")
    common.add_argument("--w", type=float, default=None, help="Blend weight w (default: 1.0).")
    horizon = common.add_mutually_exclusive_group()
    horizon.add_argument("--n-steps", type=int, default=None,
                         help=f"Prediction horizon N in frames (default: {DEFAULT_N_STEPS}).")
    horizon.add_argument("--delay-s", type=float, default=None,
                         help="Mechanical delay in seconds, converted to N = round(delay * fps).")
    common.add_argument("--fps", type=float, default=None, help=f"Frame rate (default: {DEFAULT_FPS:g}).")
    common.add_argument("--w-max", type=float, default=None, help="Upper bound of w and of the grid (default: 1.0).")
    common.add_argument("--w-step", type=float, default=None, help="Grid step for tuning (default: 0.05).")
    common.add_argument("--objective", choices=OBJECTIVES, default=None,
                        help="Tuning objective (default: frame_sum).")
    common.add_argument("--alpha", type=float, default=None,
                        help=f"Significance level of the one-tailed test (default: {DEFAULT_ALPHA:g}).")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="headcast",
        description=(
            "Head-pose-conditioned N-step head position prediction. "
            f"Operating range {DEFAULT_MIN_DEPTH_M:g}-{DEFAULT_MAX_DEPTH_M:g} m, "
            f"simulated head lead {DEFAULT_HEAD_LEAD_S:g} s."
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="Generate a synthetic walking dataset.")
    simulate.add_argument("--subjects", type=int, default=None, help="Number of subjects (default: 14).")
    simulate.add_argument("--routes", type=str, default=None,
                          help="Comma-separated route ids, 'straight' (R1), 'turn' (R3) or 'all' (default: all).")

    predict = commands.add_parser("predict", parents=[common], help="Predict positions (a), (b), (c) per frame.")
    predict.add_argument("--input", type=str, required=True, help="Track CSV, or '-' for standard input.")
    predict.add_argument("--stream", action="store_true",
                         help="Read frames line by line from standard input and flush one row per frame.")

    for name, summary in (
        ("tune", "Grid-search the blend weight w."),
        ("evaluate", "Compare baseline and proposed errors per route group."),
        ("loso", "Leave-one-subject-out tuning and evaluation."),
    ):
        sub = commands.add_parser(name, parents=[common], help=summary)
        sub.add_argument("--data", type=str, default=None, help="Dataset directory (default: dataset).")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ["seed", "out", "w", "n_steps", "delay_s", "fps", "w_max", "w_step", "objective", "alpha",
            "subjects", "routes", "input", "data", "stream"]
    return {key: getattr(args, key, None) for key in keys}


def run(args: argparse.Namespace) -> int:
    config_manager = ConfigManager(args.config) if args.config else ConfigManager()
    run_config = config_manager.get_run_config(args.command, _overrides(args))

    if args.command == "predict":
        pipeline = PredictionPipeline(run_config)
        if run_config.stream:
            if run_config.input_path != STDIN_MARKER:
                with open(run_config.input_path, encoding="utf-8") as source:
                    pipeline.run_stream(source, sys.stdout)
            else:
                pipeline.run_stream(sys.stdin, sys.stdout)
        else:
            pipeline.run_batch(run_config.input_path, Path(run_config.out) if run_config.out else None)
        return EXIT_OK

    pipeline = ValidationPipeline(run_config, config_manager)
    if args.command == "simulate":
        paths = pipeline.simulate()
        print(Path(paths[0]).parent if paths else "")
        return EXIT_OK
    degenerate = getattr(pipeline, args.command)()
    if degenerate:
        logger.warning("Report written with degenerate group statistics")
        return EXIT_DEGENERATE_STATISTICS
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except HeadcastException as e:
        e.log_error()
        return e.exit_code
    except UnicodeDecodeError as e:
        logger.error(f"Input is not valid UTF-8: {e}")
        return EXIT_CONFIG_OR_IO
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_CONFIG_OR_IO


if __name__ == "__main__":
    sys.exit(main())
