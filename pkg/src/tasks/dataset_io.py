"""
Dataset dumps for replay.

Layout (all little-endian): magic b"URNNDATA", u32 version, then for inputs
and targets a u8 element code (0 = f64, 1 = complex as f64 pairs,
2 = i64) followed by the array, then a u8 mask flag and the mask if present.
"""

from pathlib import Path
from typing import Union

import numpy as np

from rnn.urnn import SequenceBatch
from utils.binary_io import C128, F64, I64, BinaryReader, BinaryWriter
from utils.errors import ArtifactIOError, CheckpointFormatError
from utils.logging_config import get_logger

logger = get_logger(__name__)

DATASET_MAGIC = b"URNNDATA"
DATASET_VERSION = 1
_CODES = {0: F64, 1: C128, 2: I64}


def _code(array: np.ndarray) -> int:
    if np.iscomplexobj(array):
        return 1
    if np.issubdtype(array.dtype, np.integer):
        return 2
    return 0


def _write(writer: BinaryWriter, array: np.ndarray) -> None:
    code = _code(array)
    writer.write_u8(code)
    writer.write_array(array, _CODES[code])


def _read(reader: BinaryReader) -> np.ndarray:
    code = reader.read_u8()
    if code not in _CODES:
        raise CheckpointFormatError(f"Unknown element code {code}")
    return reader.read_array(_CODES[code])


def dump_dataset(batch: SequenceBatch, path: Union[str, Path]) -> None:
    """Write a batch to a versioned binary container"""
    try:
        with open(path, "wb") as stream:
            writer = BinaryWriter(stream, DATASET_MAGIC, DATASET_VERSION)
            _write(writer, batch.inputs)
            _write(writer, batch.targets)
            writer.write_u8(0 if batch.mask is None else 1)
            if batch.mask is not None:
                writer.write_array(batch.mask, F64)
    except OSError as e:
        raise ArtifactIOError(f"Could not write dataset {path}: {e}") from e
    logger.debug(f"Dumped dataset of {batch.batch_size} sequences to {path}")


def load_dataset(path: Union[str, Path]) -> SequenceBatch:
    """Read a batch written by dump_dataset"""
    try:
        with open(path, "rb") as stream:
            reader = BinaryReader(stream, DATASET_MAGIC, DATASET_VERSION)
            inputs = _read(reader)
            targets = _read(reader)
            mask = reader.read_array(F64) if reader.read_u8() else None
            reader.expect_end()
    except OSError as e:
        raise ArtifactIOError(f"Could not read dataset {path}: {e}") from e
    return SequenceBatch(inputs=inputs, targets=targets, mask=mask)
