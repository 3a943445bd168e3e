from typing import Protocol, Tuple, runtime_checkable

import numpy as np

from models import RecurrenceKind


@runtime_checkable
class Recurrence(Protocol):
    """Protocol for unitary hidden-to-hidden transitions"""

    kind: RecurrenceKind

    @property
    def n(self) -> int:
        """Hidden dimension"""
        ...

    def matrix(self) -> np.ndarray:
        """Dense n×n transition matrix"""
        ...

    def apply(self, h: np.ndarray) -> np.ndarray:
        """W·h for every row of h"""
        ...

    def backward(
        self, h_prev: np.ndarray, grad_z: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Return (parameter gradient, gradient w.r.t. h_prev) for z = W·h_prev"""
        ...

    def zero_grad(self) -> np.ndarray:
        """Zero parameter gradient in the layout backward returns"""
        ...

    def flat_parameters(self) -> np.ndarray:
        """Trainable reals as a flat float64 vector"""
        ...

    def flat_gradient(self, grad: np.ndarray) -> np.ndarray:
        """Flatten a parameter gradient to match flat_parameters"""
        ...

    def with_flat_parameters(self, flat: np.ndarray) -> "Recurrence":
        """Copy holding new trainable values (unitarity not enforced)"""
        ...

    def unitarity_defect(self) -> float:
        """‖WᴴW − I‖_F of the current transition"""
        ...
