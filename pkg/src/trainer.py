import argparse
import sys
from typing import List, Optional

from models import Preset, Task
from training.config import load_config, parse_overrides
from training.experiments import run_experiment
from utils.errors import UrnnError
from utils.logging_config import configure_logging

logger = configure_logging()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Unitary RNN experiments: restricted vs full-capacity recurrences"
    )
    subcommands = parser.add_subparsers(dest="task", required=True)
    for task, help_text in (
        (Task.COPYMEM, "Train on the copy memory problem"),
        (Task.SYSID, "Learn a synthetic unitary system from input/output pairs"),
        (Task.CAPACITY, "Fit the restricted family to in-image and generic targets"),
        (Task.GRADCHECK, "Check BPTT gradients against finite differences"),
    ):
        sub = subcommands.add_parser(task.value, help=help_text)
        sub.add_argument("--config", help="Key-value config file")
        sub.add_argument(
            "--preset",
            choices=[preset.value for preset in Preset],
            help="Hyperparameter preset (default: desk)",
        )
        sub.add_argument("--seed-data", type=int, help="Seed for data generation")
        sub.add_argument("--seed-init", type=int, help="Seed for model initialization")
        sub.add_argument("--out", help="Output directory (default: runs)")
        sub.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one config value; may be repeated",
        )
        sub.add_argument("--debug", action="store_true", help="Enable debug logging")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)

    configure_logging(debug=args.debug)

    try:
        config = load_config(
            args.task,
            preset=args.preset,
            config_path=args.config,
            overrides=parse_overrides(args.set),
            seed_data=args.seed_data,
            seed_init=args.seed_init,
            out_dir=args.out,
        )

        match config.task:
            case Task.COPYMEM | Task.SYSID:
                summary = run_experiment(config)
                logger.info(f"Best test loss {summary.best_test:.6g}")
            case Task.CAPACITY | Task.GRADCHECK:
                summary = run_experiment(config)
                if not summary.passed:
                    logger.warning(f"{config.task.value} run did not meet its pass criterion")
            case _:
                logger.error(f"Unknown task: {config.task}")
                return 1

    except UrnnError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code

    return 0


if __name__ == "__main__":
    sys.exit(main())
