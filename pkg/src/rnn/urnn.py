"""
Unitary recurrent network

    z_t = W·h_{t-1} + V·x_t
    h_t = modReLU_b(z_t)
    y_t = U·h_t + c            (real part taken when real_output)

with exact backpropagation through time for every parameter. Complex
parameters are differentiated as pairs of reals: a gradient g of a complex
array stands for ∂L/∂Re + i·∂L/∂Im.
"""

import hashlib
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from complex_core import Rng
from models import LossKind, RecurrenceKind
from rnn.losses import loss_and_output_gradient
from unitary.recurrence import FullRecurrence, RestrictedRecurrence, UnitaryRecurrence
from unitary.restricted import compose, sample_restricted
from unitary.stiefel import StiefelPoint
from utils.errors import DimensionError, TraceMismatchError
from utils.logging_config import get_logger

logger = get_logger(__name__)

MODRELU_EPS = 1e-12


@dataclass
class UrnnModel:
    """Parameters of one uRNN; n, m, l are read off the array shapes"""

    recurrence: UnitaryRecurrence
    v: np.ndarray
    b: np.ndarray
    u: np.ndarray
    c: np.ndarray
    h0: np.ndarray
    real_output: bool = True
    train_h0: bool = False

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=np.complex128)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.complex128)
        self.c = np.asarray(self.c, dtype=np.complex128)
        self.h0 = np.asarray(self.h0, dtype=np.complex128)
        n = self.recurrence.n
        if self.v.ndim != 2 or self.v.shape[0] != n:
            raise DimensionError(f"V must be {n}×m, got {self.v.shape}", self.v.shape)
        if self.u.ndim != 2 or self.u.shape[1] != n:
            raise DimensionError(f"U must be l×{n}, got {self.u.shape}", self.u.shape)
        if self.b.shape != (n,) or self.h0.shape != (n,):
            raise DimensionError(
                f"b and h0 must have shape ({n},), got {self.b.shape} and {self.h0.shape}",
                self.b.shape,
                self.h0.shape,
            )
        if self.c.shape != (self.u.shape[0],):
            raise DimensionError(f"c must have shape ({self.u.shape[0]},), got {self.c.shape}", self.c.shape)

    @property
    def n(self) -> int:
        return self.recurrence.n

    @property
    def m(self) -> int:
        return self.v.shape[1]

    @property
    def l(self) -> int:
        return self.u.shape[0]

    @property
    def kind(self) -> RecurrenceKind:
        return self.recurrence.kind


@dataclass
class SequenceBatch:
    """
    Inputs (batch, T, m), targets (batch, T, l) or class indices (batch, T),
    and an optional (batch, T) loss mask.
    """

    inputs: np.ndarray
    targets: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.targets = np.asarray(self.targets)
        if self.inputs.ndim != 3:
            raise DimensionError(f"inputs must be (batch, T, m), got {self.inputs.shape}", self.inputs.shape)
        if self.targets.shape[:2] != self.inputs.shape[:2]:
            raise DimensionError(
                f"targets {self.targets.shape} disagree with inputs {self.inputs.shape} on (batch, T)",
                self.targets.shape,
                self.inputs.shape,
            )
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=np.float64)
            if self.mask.shape != self.inputs.shape[:2]:
                raise DimensionError(f"mask must be (batch, T), got {self.mask.shape}", self.mask.shape)

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]

    @property
    def length(self) -> int:
        return self.inputs.shape[1]

    def select(self, index) -> "SequenceBatch":
        """Sub-batch of the given sequence indices or slice"""
        return SequenceBatch(
            inputs=self.inputs[index],
            targets=self.targets[index],
            mask=None if self.mask is None else self.mask[index],
        )


@dataclass
class HiddenTrace:
    """States h_0..h_T and pre-activations z_1..z_T kept for backprop"""

    hs: np.ndarray
    zs: np.ndarray
    inputs: np.ndarray
    fingerprint: str


@dataclass
class GradientSet:
    """One gradient per model field; recurrence is θ (7n) or dense G (n×n)"""

    recurrence: np.ndarray
    v: np.ndarray
    b: np.ndarray
    u: np.ndarray
    c: np.ndarray
    h0: np.ndarray

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(
            **{name: factor * getattr(self, name) for name in GRADIENT_FIELDS}
        )


GRADIENT_FIELDS = ("recurrence", "v", "b", "u", "c", "h0")


def _fingerprint(model: UrnnModel) -> str:
    digest = hashlib.blake2b(digest_size=16)
    digest.update(model.recurrence.flat_parameters().tobytes())
    for array in (model.v, model.b, model.h0):
        digest.update(np.ascontiguousarray(array).tobytes())
    return digest.hexdigest()


def modrelu(z: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Magnitude soft-threshold: (|z|+b)·z/|z| where |z|+b > 0, else 0.

    Entries with |z| < 1e-12 map to exactly 0 whatever b is.
    """
    z = np.asarray(z, dtype=np.complex128)
    b = np.asarray(b, dtype=np.float64)
    if z.shape[-1:] != b.shape:
        raise DimensionError(f"modReLU bias {b.shape} does not match input {z.shape}", z.shape, b.shape)
    magnitude = np.abs(z)
    active = (magnitude >= MODRELU_EPS) & (magnitude + b > 0)
    scale = np.divide(magnitude + b, magnitude, out=np.zeros_like(magnitude), where=active)
    return scale * z


def modrelu_backward(
    z: np.ndarray, b: np.ndarray, grad: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Exact pullback of modReLU on the active set, zero elsewhere.

    Returns:
        (∂L/∂z shaped like z, ∂L/∂b summed over leading axes)
    """
    magnitude = np.abs(z)
    active = (magnitude >= MODRELU_EPS) & (magnitude + b > 0)
    safe = np.where(active, magnitude, 1.0)
    unit = np.where(active, z / safe, 0.0)
    rho = np.real(grad.conj() * unit)
    ratio = np.where(active, b / safe, 0.0)
    grad_z = np.where(active, (1.0 + ratio) * grad - ratio * rho * unit, 0.0)
    grad_b = np.where(active, rho, 0.0).reshape(-1, b.size).sum(axis=0)
    return grad_z, grad_b


def forward(model: UrnnModel, batch: SequenceBatch) -> Tuple[HiddenTrace, np.ndarray]:
    """
    Run the recurrence over every sequence of the batch.

    Returns:
        (trace with h_0..h_T and z_1..z_T, outputs of shape (batch, T, l))
    """
    if batch.inputs.shape[2] != model.m:
        raise DimensionError(
            f"Input dimension {batch.inputs.shape[2]} does not match model m={model.m}",
            batch.inputs.shape,
            model.v.shape,
        )
    x = batch.inputs.astype(np.complex128)
    size, steps = batch.batch_size, batch.length
    hs = np.empty((size, steps + 1, model.n), dtype=np.complex128)
    zs = np.empty((size, steps, model.n), dtype=np.complex128)
    hs[:, 0] = model.h0
    drive = x @ model.v.T

    for t in range(steps):
        z = model.recurrence.apply(hs[:, t]) + drive[:, t]
        zs[:, t] = z
        hs[:, t + 1] = modrelu(z, model.b)

    outputs = hs[:, 1:] @ model.u.T + model.c
    if model.real_output:
        outputs = outputs.real.copy()
    trace = HiddenTrace(hs=hs, zs=zs, inputs=x, fingerprint=_fingerprint(model))
    return trace, outputs


def bptt_backward(
    model: UrnnModel,
    batch: SequenceBatch,
    trace: HiddenTrace,
    loss_kind: LossKind,
) -> GradientSet:
    """Exact gradients of the mean loss with respect to every model field"""
    _, gradients = _backward(model, batch, trace, loss_kind)
    return gradients


def loss_and_gradients(
    model: UrnnModel, batch: SequenceBatch, loss_kind: LossKind
) -> Tuple[float, GradientSet, np.ndarray]:
    """Forward pass, loss and BPTT in one call; returns (loss, grads, outputs)"""
    trace, outputs = forward(model, batch)
    loss, gradients = _backward(model, batch, trace, loss_kind, outputs)
    return loss, gradients, outputs


def _backward(
    model: UrnnModel,
    batch: SequenceBatch,
    trace: HiddenTrace,
    loss_kind: LossKind,
    outputs: Optional[np.ndarray] = None,
) -> Tuple[float, GradientSet]:
    size, steps = batch.batch_size, batch.length
    if trace.zs.shape != (size, steps, model.n) or trace.fingerprint != _fingerprint(model):
        raise TraceMismatchError(
            "Hidden trace does not come from a forward pass of this model on this batch"
        )
    if outputs is None:
        outputs = trace.hs[:, 1:] @ model.u.T + model.c
        if model.real_output:
            outputs = outputs.real.copy()

    loss, grad_y = loss_and_output_gradient(outputs, batch.targets, loss_kind, batch.mask)
    grad_w = grad_y.astype(np.complex128)

    grad_u = np.einsum("btl,btn->ln", grad_w, trace.hs[:, 1:].conj())
    grad_c = grad_w.sum(axis=(0, 1))
    grad_h_out = grad_w @ model.u.conj()

    grad_v = np.zeros_like(model.v)
    grad_b = np.zeros_like(model.b)
    grad_rec = model.recurrence.zero_grad()
    carry = np.zeros((size, model.n), dtype=np.complex128)

    for t in reversed(range(steps)):
        grad_h = grad_h_out[:, t] + carry
        grad_z, grad_b_t = modrelu_backward(trace.zs[:, t], model.b, grad_h)
        grad_b += grad_b_t
        grad_v += grad_z.T @ trace.inputs[:, t].conj()
        grad_rec_t, carry = model.recurrence.backward(trace.hs[:, t], grad_z)
        grad_rec = grad_rec + grad_rec_t

    grad_h0 = carry.sum(axis=0) if model.train_h0 else np.zeros_like(model.h0)
    return loss, GradientSet(
        recurrence=grad_rec, v=grad_v, b=grad_b, u=grad_u, c=grad_c, h0=grad_h0
    )


def _glorot(rows: int, cols: int, rng: Rng, scale: float = 1.0) -> np.ndarray:
    bound = scale * np.sqrt(6.0 / (rows + cols))
    real = rng.uniform(-bound, bound, (rows, cols))
    imag = rng.uniform(-bound, bound, (rows, cols))
    return real + 1j * imag


def init_model(
    n: int,
    m: int,
    l: int,
    kind: RecurrenceKind,
    rng: Rng,
    real_output: bool = True,
    train_h0: bool = False,
    u_init_scale: float = 1.0,
) -> UrnnModel:
    """
    Fresh model: W from one restricted draw (materialized for the full
    variant), Glorot-uniform V and U per real component, b = c = h0 = 0.
    """
    params = sample_restricted(n, rng)
    if kind is RecurrenceKind.FULL:
        recurrence: UnitaryRecurrence = FullRecurrence(StiefelPoint(compose(params)))
    else:
        recurrence = RestrictedRecurrence(params)
    v = _glorot(n, m, rng)
    u = _glorot(l, n, rng, scale=u_init_scale)
    return UrnnModel(
        recurrence=recurrence,
        v=v,
        b=np.zeros(n),
        u=u,
        c=np.zeros(l, dtype=np.complex128),
        h0=np.zeros(n, dtype=np.complex128),
        real_output=real_output,
        train_h0=train_h0,
    )


def _count(kind: RecurrenceKind, n: int, m: int, l: int, train_h0: bool) -> int:
    recurrence = n * n if kind is RecurrenceKind.FULL else 7 * n
    return recurrence + 2 * n * m + n + 2 * l * n + 2 * l + (2 * n if train_h0 else 0)


def count_parameters(model: UrnnModel) -> int:
    """
    Real trainable parameters; a full recurrence counts dim U(n) = n²,
    complex entries count twice.
    """
    return _count(model.kind, model.n, model.m, model.l, model.train_h0)


def matched_restricted_dim(n_full: int, m: int, l: int, train_h0: bool = False) -> int:
    """Restricted hidden size whose parameter count is closest to a full model's"""
    target = _count(RecurrenceKind.FULL, n_full, m, l, train_h0)
    per_unit = 7 + 2 * m + 1 + 2 * l + (2 if train_h0 else 0)
    guess = max(1, round((target - 2 * l) / per_unit))
    candidates = [d for d in (guess - 1, guess, guess + 1) if d >= 1]
    return min(
        candidates,
        key=lambda d: (abs(_count(RecurrenceKind.RESTRICTED, d, m, l, train_h0) - target), d),
    )


def with_recurrence(model: UrnnModel, recurrence: UnitaryRecurrence) -> UrnnModel:
    """Copy of the model carrying another recurrence"""
    return replace(model, recurrence=recurrence)
