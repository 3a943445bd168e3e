"""
Synthetic system identification.

A target uRNN with V = U = I, c = 0 and h0 = 0 is driven by circular
complex Gaussian inputs; a learner must recover its recurrence from the
input/output pairs.
"""

from dataclasses import dataclass

import numpy as np

from complex_core import Rng, randn_circular, unitarity_defect
from models import Origin
from rnn.urnn import SequenceBatch, UrnnModel, forward
from unitary.recurrence import FullRecurrence
from unitary.restricted import compose, sample_restricted, sample_wide_unitary
from unitary.stiefel import StiefelPoint
from utils.errors import ValidationError
from utils.logging_config import get_logger

logger = get_logger(__name__)

BIAS_LOW = -0.11
BIAS_HIGH = -0.09
SYSTEM_UNITARITY_TOL = 1e-10


@dataclass(frozen=True)
class SysIdSystem:
    """True system: recurrence matrix, modReLU bias and where W came from"""

    n: int
    w_sys: np.ndarray
    b_sys: np.ndarray
    origin: Origin

    def __post_init__(self):
        defect = unitarity_defect(self.w_sys)
        if defect >= SYSTEM_UNITARITY_TOL:
            raise ValidationError(f"System matrix is not unitary (defect {defect:.3e})")
        if self.w_sys.shape != (self.n, self.n) or self.b_sys.shape != (self.n,):
            raise ValidationError("System arrays do not match the declared dimension")


def gen_sysid_system(n: int, origin: Origin, rng: Rng) -> SysIdSystem:
    """
    Draw a true system.

    W comes from one restricted draw (W_u) or the product of two (W_g);
    the bias is uniform on [−0.11, −0.09], mean −0.1, which keeps the
    outputs stable.
    """
    if n < 1:
        raise ValidationError(f"Dimension must be positive, got {n}")
    match origin:
        case Origin.RESTRICTED:
            w_sys = compose(sample_restricted(n, rng))
        case Origin.WIDE:
            w_sys = sample_wide_unitary(n, rng)
        case _:
            raise ValidationError(f"Unknown origin: {origin}")
    b_sys = rng.uniform(BIAS_LOW, BIAS_HIGH, n)
    return SysIdSystem(n=n, w_sys=w_sys, b_sys=b_sys, origin=origin)


def sysid_oracle_model(system: SysIdSystem) -> UrnnModel:
    """The true system as a uRNN with complex outputs"""
    n = system.n
    return UrnnModel(
        recurrence=FullRecurrence(StiefelPoint(system.w_sys)),
        v=np.eye(n, dtype=np.complex128),
        b=system.b_sys.copy(),
        u=np.eye(n, dtype=np.complex128),
        c=np.zeros(n, dtype=np.complex128),
        h0=np.zeros(n, dtype=np.complex128),
        real_output=False,
    )


def gen_sysid_dataset(system: SysIdSystem, t: int, count: int, rng: Rng) -> SequenceBatch:
    """
    `count` sequences of length `t` with targets produced by the true system.
    """
    if t < 0 or count < 1:
        raise ValidationError(f"Need t >= 0 and count >= 1, got t={t}, count={count}")
    inputs = randn_circular((count, t, system.n), rng)
    _, targets = forward(sysid_oracle_model(system), SequenceBatch(inputs, np.zeros_like(inputs)))
    return SequenceBatch(inputs=inputs, targets=targets)


def nmse(pred: np.ndarray, target: np.ndarray) -> float:
    """Σ|pred − target|² / Σ|target|² over every axis"""
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValidationError(f"Shapes differ: {pred.shape} vs {target.shape}")
    energy = float(np.sum(np.abs(target) ** 2))
    if energy == 0.0:
        raise ValidationError("Target has zero energy; NMSE is undefined")
    return float(np.sum(np.abs(pred - target) ** 2)) / energy
