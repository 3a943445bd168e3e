from complex_core.fourier import dft_matrix, unitary_dft
from complex_core.linalg import (
    as_complex,
    linear_solve,
    matmul,
    reproject_unitary,
    unitarity_defect,
)
from complex_core.sampling import Rng, haar_unitary, make_rng, randn_circular

__all__ = [
    "Rng",
    "as_complex",
    "dft_matrix",
    "haar_unitary",
    "linear_solve",
    "make_rng",
    "matmul",
    "randn_circular",
    "reproject_unitary",
    "unitarity_defect",
    "unitary_dft",
]
