import numpy as np
import pytest

from complex_core import make_rng
from models import Origin
from rnn.urnn import SequenceBatch
from tasks.copy_memory import CopySpec, gen_copy_batch, recall_mask
from tasks.dataset_io import dump_dataset, load_dataset
from tasks.system_id import gen_sysid_dataset, gen_sysid_system
from utils.errors import ArtifactIOError, CheckpointFormatError


def test_sysid_dataset_reloads_bit_identically(tmp_path):
    system = gen_sysid_system(4, Origin.WIDE, make_rng(0))
    data = gen_sysid_dataset(system, 8, 3, make_rng(1))
    path = tmp_path / "sysid.bin"
    dump_dataset(data, path)
    loaded = load_dataset(path)
    np.testing.assert_array_equal(loaded.inputs, data.inputs)
    np.testing.assert_array_equal(loaded.targets, data.targets)
    assert loaded.mask is None


def test_copy_batch_keeps_integer_targets_and_mask(tmp_path):
    spec = CopySpec(t_delay=3, batch=2, seed=4)
    batch = gen_copy_batch(spec)
    batch = SequenceBatch(inputs=batch.inputs, targets=batch.targets, mask=recall_mask(spec))
    path = tmp_path / "copy.bin"
    dump_dataset(batch, path)
    loaded = load_dataset(path)
    assert loaded.targets.dtype == np.int64
    np.testing.assert_array_equal(loaded.targets, batch.targets)
    np.testing.assert_array_equal(loaded.mask, batch.mask)


def test_corrupt_and_truncated_files_are_rejected(tmp_path):
    batch = gen_copy_batch(CopySpec(t_delay=1, batch=1, seed=0))
    path = tmp_path / "data.bin"
    dump_dataset(batch, path)
    raw = path.read_bytes()

    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(CheckpointFormatError):
        load_dataset(path)

    path.write_bytes(raw[:-5])
    with pytest.raises(CheckpointFormatError):
        load_dataset(path)

    path.write_bytes(raw + b"\x00")
    with pytest.raises(CheckpointFormatError):
        load_dataset(path)


def test_missing_file_is_an_io_error(tmp_path):
    with pytest.raises(ArtifactIOError):
        load_dataset(tmp_path / "absent.bin")
