"""
Copy memory problem.

Category indices 0..7 are the data symbols (1..8 in the usual write-up),
8 is blank and 9 the delimiter. A sequence with delay T has length T + 20:

    position          input           target
    0 .. 9            symbols         blank
    10 .. T+8         blank (T−1)     blank
    T+9               delimiter       blank
    T+10 .. T+19      blank           the ten symbols, in order

Inputs are one-hot over 10 categories; targets are class indices over the
9 output classes (the delimiter is never a target).
"""

from dataclasses import dataclass

import numpy as np

from complex_core import make_rng
from rnn.urnn import SequenceBatch
from utils.errors import ValidationError

N_SYMBOLS = 8
BLANK = 8
DELIMITER = 9
INPUT_CLASSES = 10
OUTPUT_CLASSES = 9
RECALL_LENGTH = 10


@dataclass(frozen=True)
class CopySpec:
    """Delay, batch size and data seed of one copy-memory batch"""

    t_delay: int
    batch: int
    seed: int

    def __post_init__(self):
        if self.t_delay < 1:
            raise ValidationError(f"Delay must be at least 1, got {self.t_delay}")
        if self.batch < 1:
            raise ValidationError(f"Batch size must be at least 1, got {self.batch}")

    @property
    def length(self) -> int:
        return self.t_delay + 2 * RECALL_LENGTH


def gen_copy_batch(spec: CopySpec) -> SequenceBatch:
    """Draw a batch of copy-memory sequences from its seed"""
    rng = make_rng(spec.seed)
    length = spec.length
    head = rng.integers(0, N_SYMBOLS, (spec.batch, RECALL_LENGTH))

    codes = np.full((spec.batch, length), BLANK, dtype=np.int64)
    codes[:, :RECALL_LENGTH] = head
    codes[:, spec.t_delay + 9] = DELIMITER

    targets = np.full((spec.batch, length), BLANK, dtype=np.int64)
    targets[:, -RECALL_LENGTH:] = head

    inputs = np.eye(INPUT_CLASSES)[codes]
    return SequenceBatch(inputs=inputs, targets=targets)


def recall_mask(spec: CopySpec) -> np.ndarray:
    """(batch, T+20) mask selecting the ten recall positions"""
    mask = np.zeros((spec.batch, spec.length))
    mask[:, -RECALL_LENGTH:] = 1.0
    return mask


def copy_baseline(t_delay: int) -> float:
    """
    Expected cross entropy of the memoryless strategy: blanks, then uniform
    guesses over the 8 symbols for the last ten steps, i.e. 10·ln 8/(T+20).
    """
    if t_delay < 1:
        raise ValidationError(f"Delay must be at least 1, got {t_delay}")
    return float(RECALL_LENGTH * np.log(N_SYMBOLS) / (t_delay + 2 * RECALL_LENGTH))
