"""
Experiment configuration resolution.

Values are layered preset → config file → command-line overrides, and the
result is validated as one ExperimentConfig before any work starts.

Config files hold one `key = value` per line; `#` starts a comment, lists
are comma separated and an empty value means "unset".
"""

from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Union

from pydantic import ValidationError as PydanticValidationError

from models import ExperimentConfig, Origin, Preset, RecurrenceKind, Task
from utils.errors import ConfigError
from utils.logging_config import get_logger

logger = get_logger(__name__)

PRESETS: Dict[Preset, Dict[Task, Dict[str, Any]]] = {
    Preset.DESK: {
        Task.COPYMEM: {
            "recurrence": RecurrenceKind.FULL,
            "n": 32,
            "t_delay": 100,
            "batch_size": 20,
            "iterations": 10000,
            "lr": 1e-3,
            "stiefel_lr": 1e-3,
            "test_batch": 100,
            "eval_every": 100,
        },
        Task.SYSID: {
            "n": 8,
            "seq_len": 150,
            "origin": Origin.WIDE,
            "train_count": 2000,
            "valid_count": 200,
            "test_count": 200,
            "batch_size": 50,
            "epochs": 20,
            "init_seeds": 3,
            "lr": 1e-3,
            "stiefel_lr": 1e-2,
            "grad_scale": True,
            "oracle_freeze": True,
        },
        Task.CAPACITY: {
            "capacity_dims": [4, 6, 7, 8, 16],
            "fit_restarts": 8,
            "fit_iters": 3000,
            "fit_lr": 1e-2,
        },
        Task.GRADCHECK: {
            "gradcheck_dims": [2, 4, 8],
            "gradcheck_len": 10,
            "gradcheck_batch": 3,
            "gradcheck_step": 1e-6,
            "gradcheck_rtol": 1e-6,
        },
    },
    Preset.PAPER: {
        Task.COPYMEM: {
            "recurrence": RecurrenceKind.FULL,
            "n": 128,
            "match_params": True,
            "t_delay": 1000,
            "batch_size": 20,
            "iterations": 10000,
            "lr": 1e-3,
            "stiefel_lr": 1e-3,
            "grad_scale": False,
            "test_batch": 10000,
            "eval_every": 100,
        },
        Task.SYSID: {
            "n": 8,
            "seq_len": 150,
            "origin": Origin.WIDE,
            "train_count": 20000,
            "valid_count": 1000,
            "test_count": 1000,
            "batch_size": 50,
            "epochs": 100,
            "init_seeds": 6,
            "lr": 1e-3,
            "stiefel_lr": 1e-3,
            "oracle_freeze": True,
            "sysid_dims": [4, 6, 7, 8, 16],
            "sysid_origins": [Origin.RESTRICTED, Origin.WIDE],
        },
        Task.CAPACITY: {
            "capacity_dims": [4, 6, 7, 8, 16],
            "fit_restarts": 8,
            "fit_iters": 3000,
            "fit_lr": 1e-2,
        },
        Task.GRADCHECK: {
            "gradcheck_dims": [2, 4, 8],
            "gradcheck_len": 10,
            "gradcheck_batch": 3,
            "gradcheck_step": 1e-6,
            "gradcheck_rtol": 1e-6,
        },
    },
}


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Optional[str]]:
    """
    Parse `key = value` lines.

    Raises:
        ConfigError: on a line without '=' or a repeated key
    """
    values: Dict[str, Optional[str]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{number}: missing key")
        if key in values:
            raise ConfigError(f"{source}:{number}: duplicate key '{key}'")
        values[key] = value or None
    return values


def read_config_file(path: Union[str, Path]) -> Dict[str, Optional[str]]:
    """Read and parse a config file"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Could not read config file {path}: {e}") from e
    return parse_config_text(text, str(path))


def parse_overrides(pairs: Iterable[str]) -> Dict[str, Optional[str]]:
    """Turn repeated `key=value` flags into a dict; later flags win"""
    values: Dict[str, Optional[str]] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"Override must look like key=value, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        values[key] = value or None
    return values


def load_config(
    task: Union[Task, str],
    preset: Optional[Union[Preset, str]] = None,
    config_path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    seed_data: Optional[int] = None,
    seed_init: Optional[int] = None,
    out_dir: Optional[str] = None,
) -> ExperimentConfig:
    """
    Resolve and validate the configuration of one run.

    Args:
        task: Subcommand being run
        preset: Preset name; falls back to the file's `preset`, then desk
        config_path: Optional key-value config file
        overrides: Values from `--set key=value`
        seed_data: `--seed-data`
        seed_init: `--seed-init`
        out_dir: `--out`

    Returns:
        A validated ExperimentConfig

    Raises:
        ConfigError: unknown keys, bad values, or a task mismatch
    """
    try:
        task = Task(task)
        file_values = read_config_file(config_path) if config_path else {}
        file_task = file_values.pop("task", None)
        if file_task is not None and Task(file_task) is not task:
            raise ConfigError(f"Config file is for task '{file_task}', not '{task.value}'")
        file_preset = file_values.pop("preset", None)
        chosen = Preset(preset or file_preset or Preset.DESK)
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e)) from e

    values: Dict[str, Any] = {"task": task, "preset": chosen}
    values.update(PRESETS[chosen][task])
    values.update(file_values)
    cli_values = dict(overrides or {})
    for key, value in (("seed_data", seed_data), ("seed_init", seed_init), ("out_dir", out_dir)):
        if value is not None:
            cli_values[key] = value
    for key, value in cli_values.items():
        logger.info(f"Config override {key} = {value}")
    values.update(cli_values)

    try:
        return ExperimentConfig(**values)
    except PydanticValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid configuration: {problems}") from e
