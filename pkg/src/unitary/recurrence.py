"""
The two recurrence variants a uRNN can carry.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from complex_core import unitarity_defect
from models import RecurrenceKind
from unitary.protocols import Recurrence
from unitary.restricted import RestrictedParams, apply, apply_backward, compose
from unitary.stiefel import StiefelPoint


@dataclass(frozen=True)
class RestrictedRecurrence(Recurrence):
    """W = W(θ) from the 7n-parameter family"""

    params: RestrictedParams
    kind: RecurrenceKind = RecurrenceKind.RESTRICTED

    @property
    def n(self) -> int:
        return self.params.n

    def matrix(self) -> np.ndarray:
        return compose(self.params)

    def apply(self, h: np.ndarray) -> np.ndarray:
        return apply(self.params, h)

    def backward(
        self, h_prev: np.ndarray, grad_z: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        return apply_backward(self.params, h_prev, grad_z)

    def zero_grad(self) -> np.ndarray:
        return np.zeros(7 * self.n)

    def flat_parameters(self) -> np.ndarray:
        return self.params.theta

    def flat_gradient(self, grad: np.ndarray) -> np.ndarray:
        return np.asarray(grad, dtype=np.float64).ravel()

    def with_flat_parameters(self, flat: np.ndarray) -> "RestrictedRecurrence":
        return RestrictedRecurrence(self.params.with_theta(flat))

    def unitarity_defect(self) -> float:
        return unitarity_defect(self.matrix())


@dataclass(frozen=True)
class FullRecurrence(Recurrence):
    """W is an explicit point on the unitary manifold"""

    point: StiefelPoint
    kind: RecurrenceKind = RecurrenceKind.FULL

    @property
    def n(self) -> int:
        return self.point.n

    def matrix(self) -> np.ndarray:
        return self.point.w

    def apply(self, h: np.ndarray) -> np.ndarray:
        return h @ self.point.w.T

    def backward(
        self, h_prev: np.ndarray, grad_z: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        # G = Σ_b g_b·h_bᴴ, grad_h = Wᴴ·g
        h2 = h_prev.reshape(-1, self.n)
        g2 = grad_z.reshape(-1, self.n)
        return g2.T @ h2.conj(), grad_z @ self.point.w.conj()

    def zero_grad(self) -> np.ndarray:
        return np.zeros((self.n, self.n), dtype=np.complex128)

    def flat_parameters(self) -> np.ndarray:
        return np.ascontiguousarray(self.point.w).view(np.float64).ravel().copy()

    def flat_gradient(self, grad: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(grad, dtype=np.complex128).view(np.float64).ravel()

    def with_flat_parameters(self, flat: np.ndarray) -> "FullRecurrence":
        w = np.ascontiguousarray(flat, dtype=np.float64).view(np.complex128)
        return FullRecurrence(StiefelPoint.unchecked(w.reshape(self.n, self.n)))

    def unitarity_defect(self) -> float:
        return self.point.defect()


UnitaryRecurrence = Union[RestrictedRecurrence, FullRecurrence]


def promote_to_full(recurrence: UnitaryRecurrence) -> FullRecurrence:
    """Materialize any recurrence as an explicit Stiefel point"""
    if isinstance(recurrence, FullRecurrence):
        return recurrence
    return FullRecurrence(StiefelPoint(recurrence.matrix()))
