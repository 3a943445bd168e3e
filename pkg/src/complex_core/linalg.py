"""
Dense complex linear algebra on numpy complex128 arrays.
"""

import warnings

import numpy as np
import scipy.linalg
from scipy.linalg import LinAlgWarning

from utils.errors import DimensionError, SingularMatrixError
from utils.logging_config import get_logger

logger = get_logger(__name__)

# Relative pivot threshold for linear_solve
PIVOT_RTOL = 1e-14


def as_complex(a: np.ndarray) -> np.ndarray:
    """Return `a` as a complex128 array (no copy when already complex128)"""
    return np.asarray(a, dtype=np.complex128)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Complex matrix product a·b.

    Accumulation is delegated to BLAS zgemm, so results are reproducible on a
    given machine and numpy build.

    Raises:
        DimensionError: if a.cols != b.rows
    """
    a = as_complex(a)
    b = as_complex(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"Cannot multiply matrices of shape {a.shape} and {b.shape}",
            a.shape,
            b.shape,
        )
    return a @ b


def linear_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Solve a·X = b by LU factorisation with partial pivoting.

    Args:
        a: Square n×n coefficient matrix
        b: Right-hand side with n rows (vector or matrix)

    Returns:
        X with the shape of b

    Raises:
        DimensionError: if a is not square or b has the wrong number of rows
        SingularMatrixError: if pivot k falls below 1e-14 times the largest
            magnitude in column k of a
    """
    a = as_complex(a)
    b = as_complex(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"Coefficient matrix must be square, got {a.shape}", a.shape)
    if b.ndim not in (1, 2) or b.shape[0] != a.shape[0]:
        raise DimensionError(
            f"Right-hand side of shape {b.shape} does not match {a.shape}",
            a.shape,
            b.shape,
        )

    # row pivoting keeps column k of the factor aligned with column k of a
    thresholds = PIVOT_RTOL * np.max(np.abs(a), axis=0, initial=0.0)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)

    pivots = np.abs(np.diag(lu))
    bad = np.flatnonzero((pivots < thresholds) | (pivots == 0.0))
    if bad.size:
        index = int(bad[0])
        logger.debug(f"linear_solve rejected pivot {index} ({pivots[index]:.3e})")
        raise SingularMatrixError(index, float(pivots[index]), float(thresholds[index]))

    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def unitarity_defect(w: np.ndarray) -> float:
    """
    Frobenius distance ‖WᴴW − I‖_F.

    Raises:
        DimensionError: if w is not square
    """
    w = as_complex(w)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError(f"Unitarity defect needs a square matrix, got {w.shape}", w.shape)
    gram = w.conj().T @ w
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(np.linalg.norm(gram, "fro"))


def reproject_unitary(w: np.ndarray) -> np.ndarray:
    """
    Nearest-by-QR unitary matrix to w.

    The R factor's diagonal phases are folded back into Q so that a matrix
    that is already unitary maps to itself up to rounding.
    """
    q, r = np.linalg.qr(as_complex(w))
    diag = np.diag(r)
    magnitude = np.abs(diag)
    phases = np.ones_like(diag)
    nonzero = magnitude > 0
    phases[nonzero] = diag[nonzero] / magnitude[nonzero]
    return q * phases[np.newaxis, :]
