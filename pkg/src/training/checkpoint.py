"""
Model checkpoints.

Layout (little-endian): magic b"URNNCKPT", u32 version, u32 n, m, l, u8
recurrence tag (0 restricted, 1 full), u8 flags (bit 0 real_output, bit 1
train_h0), then the recurrence (θ as 7n f64 followed by the i64
permutation, or W as n×n interleaved re/im f64), then V, b, U, c, h0.
"""

from enum import Enum
from pathlib import Path
from typing import Optional, Union

from models import RecurrenceKind
from rnn.urnn import UrnnModel
from unitary.recurrence import FullRecurrence, RestrictedRecurrence, promote_to_full
from unitary.restricted import RestrictedParams
from unitary.stiefel import StiefelPoint
from utils.binary_io import C128, F64, I64, BinaryReader, BinaryWriter
from utils.errors import ArtifactIOError, CheckpointFormatError
from utils.logging_config import get_logger

logger = get_logger(__name__)

CHECKPOINT_MAGIC = b"URNNCKPT"
CHECKPOINT_VERSION = 1

_TAGS = {RecurrenceKind.RESTRICTED: 0, RecurrenceKind.FULL: 1}
_KINDS = {tag: kind for kind, tag in _TAGS.items()}
_REAL_OUTPUT = 0x1
_TRAIN_H0 = 0x2


class Direction(str, Enum):
    SAVE = "save"
    LOAD = "load"


def save_checkpoint(model: UrnnModel, path: Union[str, Path]) -> None:
    """Write the model to `path`"""
    n, m, l = model.n, model.m, model.l
    flags = (_REAL_OUTPUT if model.real_output else 0) | (_TRAIN_H0 if model.train_h0 else 0)
    try:
        with open(path, "wb") as stream:
            writer = BinaryWriter(stream, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
            writer.write_u32(n, m, l)
            writer.write_u8(_TAGS[model.kind])
            writer.write_u8(flags)
            match model.recurrence:
                case RestrictedRecurrence(params=params):
                    writer.write_array(params.theta, F64)
                    writer.write_array(params.perm, I64)
                case FullRecurrence(point=point):
                    writer.write_array(point.w, C128)
            writer.write_array(model.v, C128)
            writer.write_array(model.b, F64)
            writer.write_array(model.u, C128)
            writer.write_array(model.c, C128)
            writer.write_array(model.h0, C128)
    except OSError as e:
        raise ArtifactIOError(f"Could not write checkpoint {path}: {e}") from e
    logger.debug(f"Saved {model.kind.value} checkpoint (n={n}) to {path}")


def load_checkpoint(
    path: Union[str, Path], promote_to: Optional[RecurrenceKind] = None
) -> UrnnModel:
    """
    Read a checkpoint written by save_checkpoint.

    Args:
        path: Checkpoint file
        promote_to: RecurrenceKind.FULL materializes a restricted recurrence
            as W = compose(θ); a full checkpoint cannot be demoted

    Raises:
        CheckpointFormatError: bad magic, version, tag, shape or truncation
        ArtifactIOError: the file cannot be read
    """
    try:
        with open(path, "rb") as stream:
            reader = BinaryReader(stream, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)
            n, m, l = reader.read_u32(3)
            tag = reader.read_u8()
            if tag not in _KINDS:
                raise CheckpointFormatError(f"Unknown recurrence tag {tag}")
            flags = reader.read_u8()
            if _KINDS[tag] is RecurrenceKind.RESTRICTED:
                theta = reader.read_array(F64, (7 * n,))
                perm = reader.read_array(I64, (n,))
                recurrence = RestrictedRecurrence(RestrictedParams.from_theta(theta, perm))
            else:
                recurrence = FullRecurrence(StiefelPoint(reader.read_array(C128, (n, n))))
            v = reader.read_array(C128, (n, m))
            b = reader.read_array(F64, (n,))
            u = reader.read_array(C128, (l, n))
            c = reader.read_array(C128, (l,))
            h0 = reader.read_array(C128, (n,))
            reader.expect_end()
    except OSError as e:
        raise ArtifactIOError(f"Could not read checkpoint {path}: {e}") from e

    if promote_to is RecurrenceKind.FULL:
        recurrence = promote_to_full(recurrence)
    elif promote_to is not None and promote_to is not recurrence.kind:
        raise CheckpointFormatError(
            f"Cannot load a {recurrence.kind.value} checkpoint as {promote_to.value}"
        )

    logger.info(f"Loaded {recurrence.kind.value} checkpoint (n={n}, m={m}, l={l}) from {path}")
    return UrnnModel(
        recurrence=recurrence,
        v=v,
        b=b,
        u=u,
        c=c,
        h0=h0,
        real_output=bool(flags & _REAL_OUTPUT),
        train_h0=bool(flags & _TRAIN_H0),
    )


def checkpoint_io(
    model: Optional[UrnnModel],
    path: Union[str, Path],
    direction: Direction,
    promote_to: Optional[RecurrenceKind] = None,
) -> Optional[UrnnModel]:
    """Save `model` to, or load a model from, `path`"""
    match Direction(direction):
        case Direction.SAVE:
            if model is None:
                raise CheckpointFormatError("Nothing to save")
            save_checkpoint(model, path)
            return None
        case Direction.LOAD:
            return load_checkpoint(path, promote_to)
