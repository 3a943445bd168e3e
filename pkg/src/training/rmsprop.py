"""
RMSprop with heavy-ball momentum on the RMS-scaled step.

    r ← (1 − avg)·r + avg·g²
    m ← μ·m + lr·g/√(r + ε)
    p ← p − m

Complex parameters are updated as independent real and imaginary parts.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from utils.errors import DimensionError, NumericFailure

Params = Dict[str, np.ndarray]


def _real_view(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    if np.iscomplexobj(array):
        return array.astype(np.complex128, copy=False).view(np.float64)
    return array.astype(np.float64, copy=False)


def _like(real: np.ndarray, template: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(template):
        return np.ascontiguousarray(real).view(np.complex128).reshape(template.shape)
    return real.reshape(template.shape)


@dataclass
class RmspropState:
    """Per-group mean-square accumulators and momentum buffers"""

    averaging: float = 0.1
    momentum: float = 0.9
    epsilon: float = 1e-8
    square: Dict[str, np.ndarray] = field(default_factory=dict)
    velocity: Dict[str, np.ndarray] = field(default_factory=dict)


def rmsprop_update(
    params: Params, grads: Params, state: RmspropState, lr: float
) -> Tuple[Params, RmspropState]:
    """
    Apply one update to every group present in `grads`.

    Groups missing from `grads` are passed through untouched; inputs are not
    modified in place.

    Raises:
        DimensionError: if a gradient shape differs from its parameter
        NumericFailure: if a gradient contains NaN or infinity
    """
    new_params = dict(params)
    square = dict(state.square)
    velocity = dict(state.velocity)

    for name in sorted(grads):
        param, grad = params[name], np.asarray(grads[name])
        if grad.shape != np.shape(param):
            raise DimensionError(
                f"Gradient for '{name}' has shape {grad.shape}, parameter {np.shape(param)}",
                grad.shape,
                np.shape(param),
            )
        g = _real_view(grad)
        finite = np.isfinite(g)
        if not finite.all():
            raise NumericFailure(f"Non-finite gradient for '{name}'", np.argwhere(~finite)[0])

        r = square.get(name, np.zeros_like(g))
        m = velocity.get(name, np.zeros_like(g))
        r = (1.0 - state.averaging) * r + state.averaging * g * g
        m = state.momentum * m + lr * g / np.sqrt(r + state.epsilon)
        square[name] = r
        velocity[name] = m
        new_params[name] = _like(_real_view(param) - m, np.asarray(param))

    return new_params, RmspropState(
        averaging=state.averaging,
        momentum=state.momentum,
        epsilon=state.epsilon,
        square=square,
        velocity=velocity,
    )
