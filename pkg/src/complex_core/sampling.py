"""
Seeded random sampling.

All randomness flows through numpy Generators backed by PCG64, which produce
the same stream for the same seed on every platform. No function here reads
system entropy.
"""

from typing import Tuple, Union

import numpy as np

Rng = np.random.Generator
Shape = Union[int, Tuple[int, ...]]


def make_rng(seed: int) -> Rng:
    """Create a PCG64 generator from a non-negative 64-bit seed"""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"Seed must fit in an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def randn_circular(shape: Shape, rng: Rng) -> np.ndarray:
    """
    Standard circular complex Gaussians, z = (g1 + i·g2)/√2 so E|z|² = 1.

    Args:
        shape: Output shape (an int gives a vector)
        rng: Generator to draw from
    """
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    g = rng.standard_normal(shape + (2,))
    return (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2.0)


def haar_unitary(n: int, rng: Rng) -> np.ndarray:
    """
    Haar-distributed n×n unitary matrix.

    QR of a circular Gaussian matrix, with R's diagonal phases absorbed into
    Q so that the result is uniform on U(n).
    """
    if n < 1:
        raise ValueError(f"Dimension must be positive, got {n}")
    z = randn_circular((n, n), rng)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))[np.newaxis, :]
