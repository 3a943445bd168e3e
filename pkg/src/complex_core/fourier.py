"""
Unitary discrete Fourier transform.

F[j, k] = n^(-1/2) · exp(-2πi·jk/n), so FᴴF = I and the inverse is Fᴴ.
"""

import numpy as np

from utils.errors import DimensionError


def unitary_dft(v: np.ndarray, inverse: bool = False) -> np.ndarray:
    """
    Apply F (or Fᴴ when `inverse`) along the last axis.

    Uses pocketfft with orthonormal scaling, which runs in O(n log n) for
    every length including non powers of two.
    """
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim == 0 or v.shape[-1] < 1:
        raise DimensionError(f"DFT needs a non-empty last axis, got {v.shape}", v.shape)
    if inverse:
        return np.fft.ifft(v, axis=-1, norm="ortho")
    return np.fft.fft(v, axis=-1, norm="ortho")


def dft_matrix(n: int) -> np.ndarray:
    """Dense n×n unitary DFT matrix (direct O(n²) reference)"""
    if n < 1:
        raise DimensionError(f"DFT size must be positive, got {n}", (n,))
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
