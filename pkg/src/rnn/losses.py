"""
Sequence losses and their output gradients.

Both losses are means: MSE over batch, time and output components (squared
modulus for complex errors), cross entropy over batch and time. A (batch, T)
mask restricts the mean to the positions it weights.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.special import log_softmax, softmax

from models import LossKind
from utils.errors import DimensionError, NumericFailure, ValidationError


def _check_finite(outputs: np.ndarray) -> None:
    finite = np.isfinite(outputs)
    if not finite.all():
        raise NumericFailure("Non-finite network output", np.argwhere(~finite)[0])


def _weights(shape: Tuple[int, int], mask: Optional[np.ndarray]) -> Tuple[np.ndarray, float]:
    weights = np.ones(shape) if mask is None else np.asarray(mask, dtype=np.float64)
    total = float(weights.sum())
    return weights, total


def loss_and_output_gradient(
    outputs: np.ndarray,
    targets: np.ndarray,
    kind: LossKind,
    mask: Optional[np.ndarray] = None,
) -> Tuple[float, np.ndarray]:
    """
    Mean loss and ∂L/∂outputs (split-real convention for complex outputs).

    Args:
        outputs: (batch, T, l) network outputs
        targets: (batch, T, l) values for MSE, (batch, T) class indices for
            cross entropy
        kind: Which loss
        mask: Optional (batch, T) weights

    Raises:
        DimensionError: on shape disagreement
        ValidationError: cross entropy on complex outputs or non-integer targets
        NumericFailure: if any output is NaN or infinite
    """
    outputs = np.asarray(outputs)
    targets = np.asarray(targets)
    _check_finite(outputs)
    weights, total = _weights(outputs.shape[:2], mask)
    if weights.shape != outputs.shape[:2]:
        raise DimensionError(f"mask {weights.shape} does not match outputs {outputs.shape}", weights.shape)

    match kind:
        case LossKind.MSE:
            if targets.shape != outputs.shape:
                raise DimensionError(
                    f"MSE targets {targets.shape} do not match outputs {outputs.shape}",
                    targets.shape,
                    outputs.shape,
                )
            if total == 0 or outputs.shape[2] == 0:
                return 0.0, np.zeros_like(outputs)
            count = total * outputs.shape[2]
            error = outputs - targets
            loss = float(np.sum(weights[..., np.newaxis] * np.abs(error) ** 2) / count)
            grad = (2.0 / count) * weights[..., np.newaxis] * error
            return loss, grad

        case LossKind.CROSS_ENTROPY:
            if np.iscomplexobj(outputs):
                raise ValidationError("Cross entropy needs real-valued outputs")
            if targets.shape != outputs.shape[:2] or not np.issubdtype(targets.dtype, np.integer):
                raise DimensionError(
                    f"Cross-entropy targets must be (batch, T) class indices, got {targets.shape}",
                    targets.shape,
                    outputs.shape,
                )
            if total == 0:
                return 0.0, np.zeros_like(outputs)
            log_probs = log_softmax(outputs, axis=-1)
            picked = np.take_along_axis(log_probs, targets[..., np.newaxis], axis=-1)[..., 0]
            loss = float(-np.sum(weights * picked) / total)
            grad = softmax(outputs, axis=-1)
            np.put_along_axis(
                grad,
                targets[..., np.newaxis],
                np.take_along_axis(grad, targets[..., np.newaxis], axis=-1) - 1.0,
                axis=-1,
            )
            grad *= weights[..., np.newaxis] / total
            return loss, grad

        case _:
            raise ValidationError(f"Unknown loss kind: {kind}")


def compute_loss(
    outputs: np.ndarray,
    targets: np.ndarray,
    kind: LossKind,
    mask: Optional[np.ndarray] = None,
) -> float:
    """Mean loss of outputs against targets"""
    loss, _ = loss_and_output_gradient(outputs, targets, kind, mask)
    return loss


def predict_classes(outputs: np.ndarray) -> np.ndarray:
    """Arg-max class per (sequence, step)"""
    return np.argmax(outputs, axis=-1)


def accuracy(
    outputs: np.ndarray, targets: np.ndarray, mask: Optional[np.ndarray] = None
) -> float:
    """Fraction of (masked) positions whose arg-max matches the target class"""
    hits = (predict_classes(outputs) == targets).astype(np.float64)
    weights, total = _weights(hits.shape, mask)
    return float(np.sum(weights * hits) / total) if total else 0.0
