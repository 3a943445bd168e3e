import pytest

from models import Origin, Preset, RecurrenceKind, Task
from training.config import PRESETS, load_config, parse_config_text, parse_overrides
from utils.errors import ConfigError


def test_desk_preset_is_the_default():
    config = load_config("sysid")
    assert config.preset is Preset.DESK
    assert (config.n, config.seq_len, config.train_count, config.init_seeds) == (8, 150, 2000, 3)
    assert config.origin is Origin.WIDE


def test_paper_preset_values():
    config = load_config(Task.SYSID, preset="paper")
    assert (config.train_count, config.valid_count, config.test_count) == (20000, 1000, 1000)
    assert (config.batch_size, config.epochs, config.init_seeds) == (50, 100, 6)
    copymem = load_config(Task.COPYMEM, preset=Preset.PAPER)
    assert copymem.t_delay == 1000 and copymem.n == 128 and copymem.grad_scale is False


def test_every_preset_validates():
    for preset, tasks in PRESETS.items():
        for task in tasks:
            load_config(task, preset=preset)


def test_parse_config_text():
    text = """
    # full-capacity copy run
    recurrence = full     # inline comment
    n = 16
    capacity_dims = 4, 8
    resume_from =
    """
    values = parse_config_text(text)
    assert values == {"recurrence": "full", "n": "16", "capacity_dims": "4, 8", "resume_from": None}


@pytest.mark.parametrize("text", ["just a line", "= 3", "n = 1\nn = 2"])
def test_malformed_config_text(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_layering_preset_file_cli(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = desk\nn = 16\nlr = 0.01\nrecurrence = restricted\ngradcheck_dims = 2,3\n")
    config = load_config(
        "copymem",
        config_path=path,
        overrides=parse_overrides(["lr=0.002", "t_delay=50"]),
        seed_data=7,
        seed_init=9,
        out_dir=str(tmp_path / "out"),
    )
    assert config.n == 16
    assert config.lr == 0.002
    assert config.t_delay == 50
    assert config.recurrence is RecurrenceKind.RESTRICTED
    assert config.gradcheck_dims == [2, 3]
    assert (config.seed_data, config.seed_init) == (7, 9)
    assert config.out_dir == str(tmp_path / "out")
    assert config.batch_size == 20


def test_cli_preset_beats_file_preset(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("preset = desk\n")
    assert load_config("sysid", preset="paper", config_path=path).preset is Preset.PAPER


@pytest.mark.parametrize(
    "overrides",
    [{"lr": "0"}, {"batch_size": "0"}, {"no_such_key": "1"}, {"n": "many"}, {"capacity_dims": "4,-1"}],
)
def test_invalid_values_raise_config_error(overrides):
    with pytest.raises(ConfigError):
        load_config("capacity", overrides=overrides)


def test_task_and_preset_mismatches(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("task = sysid\n")
    with pytest.raises(ConfigError):
        load_config("copymem", config_path=path)
    with pytest.raises(ConfigError):
        load_config("copymem", preset="huge")
    with pytest.raises(ConfigError):
        load_config("copymem", config_path=tmp_path / "absent.cfg")
    with pytest.raises(ConfigError):
        parse_overrides(["lr"])


def test_config_error_exit_code():
    with pytest.raises(ConfigError) as info:
        load_config("gradcheck", overrides={"gradcheck_step": "-1"})
    assert info.value.exit_code == 1
