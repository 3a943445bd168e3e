"""
Full-capacity optimization on the unitary (square Stiefel) manifold.

Gradients follow the split-real convention G = ∂L/∂Re(W) + i·∂L/∂Im(W), so
that Re tr(GᴴΔ) is the first-order change of L along Δ.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from complex_core import linear_solve, reproject_unitary, unitarity_defect
from utils.errors import DimensionError, ValidationError
from utils.logging_config import get_logger

logger = get_logger(__name__)

POINT_TOL = 1e-8
DRIFT_TOL = 1e-8
SKEW_TOL = 1e-10


@dataclass(frozen=True)
class StiefelPoint:
    """A square unitary matrix, checked on construction"""

    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.complex128, order="C")
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"Stiefel point must be square, got {w.shape}", w.shape)
        defect = unitarity_defect(w)
        if defect >= POINT_TOL:
            raise ValidationError(f"Matrix is not unitary (defect {defect:.3e})")
        object.__setattr__(self, "w", w)

    @classmethod
    def unchecked(cls, w: np.ndarray) -> "StiefelPoint":
        """Wrap w without the unitarity check (finite-difference checks only)"""
        point = object.__new__(cls)
        object.__setattr__(point, "w", np.array(w, dtype=np.complex128, order="C"))
        return point

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def defect(self) -> float:
        return unitarity_defect(self.w)


@dataclass(frozen=True)
class GradScaleState:
    """Running average of squared gradient Frobenius norms"""

    running_sq_norm: float = 0.0
    decay: float = 0.9
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValidationError(f"decay must lie in (0, 1), got {self.decay}")
        if self.epsilon <= 0:
            raise ValidationError(f"epsilon must be positive, got {self.epsilon}")
        if not np.isfinite(self.running_sq_norm) or self.running_sq_norm < 0:
            raise ValidationError("running_sq_norm must be finite and non-negative")


def _check_same_shape(g: np.ndarray, w: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != w.shape:
        raise DimensionError(
            f"Gradient shape {g.shape} does not match point shape {w.shape}",
            g.shape,
            w.shape,
        )
    return g


def riemannian_skew(g: np.ndarray, w: StiefelPoint) -> np.ndarray:
    """
    A = GᴴW − WᴴG.

    Evaluated as X − Xᴴ with X = GᴴW, which makes A skew-Hermitian exactly
    in floating point.
    """
    g = _check_same_shape(g, w.w)
    x = g.conj().T @ w.w
    return x - x.conj().T


def left_generator(a: np.ndarray, w: StiefelPoint) -> np.ndarray:
    """
    Congruent generator −W·A·Wᴴ (= GWᴴ − WGᴴ for A from riemannian_skew).

    Feeding it to cayley_step yields the curve W·cay(−A), whose tangent at
    λ = 0 is W·A. Along it L changes at rate Re tr(GᴴWA) = −½‖X − Xᴴ‖²_F
    with X = GᴴW, so the step descends.
    """
    b = -(w.w @ a @ w.w.conj().T)
    return 0.5 * (b - b.conj().T)


def cayley_step(w: StiefelPoint, a: np.ndarray, lam: float) -> StiefelPoint:
    """
    Y(λ) = (I + λ/2·A)⁻¹ (I − λ/2·A) W, solved without forming an inverse.

    Raises:
        ValidationError: if A is not skew-Hermitian to 1e-10 or λ ≤ 0
        SingularMatrixError: if I + λ/2·A is numerically singular
    """
    a = _check_same_shape(a, w.w)
    if lam <= 0:
        raise ValidationError(f"Step size must be positive, got {lam}")
    skewness = float(np.linalg.norm(a + a.conj().T, "fro"))
    if skewness > SKEW_TOL * max(1.0, float(np.linalg.norm(a, "fro"))):
        raise ValidationError(f"Generator is not skew-Hermitian (‖A + Aᴴ‖ = {skewness:.3e})")

    half = 0.5 * lam * a
    eye = np.eye(w.n, dtype=np.complex128)
    y = linear_solve(eye + half, (eye - half) @ w.w)
    return StiefelPoint.unchecked(y)


def scale_gradient(
    g: np.ndarray, state: GradScaleState
) -> Tuple[np.ndarray, GradScaleState]:
    """
    RMSprop-style scalar normalization by a running mean of ‖G‖²_F.

    Returns:
        (G / √(r + ε), state with r ← decay·r + (1 − decay)·‖G‖²_F)
    """
    g = np.asarray(g, dtype=np.complex128)
    sq_norm = float(np.sum(np.abs(g) ** 2))
    running = state.decay * state.running_sq_norm + (1.0 - state.decay) * sq_norm
    new_state = GradScaleState(
        running_sq_norm=running, decay=state.decay, epsilon=state.epsilon
    )
    return g / np.sqrt(running + state.epsilon), new_state


def full_step(
    w: StiefelPoint,
    g: np.ndarray,
    lam: float,
    state: Optional[GradScaleState] = None,
) -> Tuple[StiefelPoint, Optional[GradScaleState]]:
    """
    One full-capacity update of the recurrence matrix.

    Optionally normalizes G, forms A = riemannian_skew(G, W) and moves along
    the Cayley curve generated by left_generator(A, W). Gradients are never
    clipped. If the result drifts beyond 1e-8 from unitarity it is
    re-projected by QR and the event is logged.
    """
    g = _check_same_shape(g, w.w)
    if state is not None:
        g, state = scale_gradient(g, state)
    a = riemannian_skew(g, w)
    y = cayley_step(w, left_generator(a, w), lam)

    defect = y.defect()
    if defect > DRIFT_TOL:
        logger.warning(f"Unitarity drift {defect:.3e} exceeded {DRIFT_TOL:.0e}; re-projecting")
        return StiefelPoint(reproject_unitary(y.w)), state
    return y, state
