import logging
import sys
import os


class RunContextFilter(logging.Filter):
    """Filter that stamps every record with the active run tag"""

    def __init__(self, run: str = "-"):
        super().__init__()
        self.run = run

    def set_run(self, run: str) -> None:
        """Change the tag applied to subsequent records"""
        self.run = run or "-"

    def filter(self, record: logging.LogRecord) -> bool:
        """Attach the run tag unless the caller already supplied one"""
        if not hasattr(record, "run"):
            record.run = self.run
        return True


_run_filter = RunContextFilter()


def configure_logging(debug: bool = False) -> logging.Logger:
    """
    Configure logging for the entire application.

    Args:
        debug: Whether to enable debug logging or not
    """
    log_level = (
        logging.DEBUG if (debug or os.environ.get("DEBUG") == "1") else logging.INFO
    )

    formatter = logging.Formatter(
        "%(asctime)s - %(name)s - %(levelname)s - [%(run)s] %(message)s"
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(log_level)
    console_handler.addFilter(_run_filter)

    root_logger.addHandler(console_handler)

    return root_logger


def set_run_context(run: str) -> None:
    """
    Tag all following log lines with a run identifier.

    Args:
        run: Short run description, e.g. "sysid seed_data=1 seed_init=2"
    """
    _run_filter.set_run(run)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger for a module.

    Args:
        name: Module name (usually __name__)

    Returns:
        Logger instance
    """
    return logging.getLogger(name)
