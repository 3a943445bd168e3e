import numpy as np
import pytest

from complex_core import (
    dft_matrix,
    haar_unitary,
    linear_solve,
    make_rng,
    matmul,
    randn_circular,
    reproject_unitary,
    unitarity_defect,
    unitary_dft,
)
from utils.errors import DimensionError, SingularMatrixError


def test_matmul_identity_and_imaginary_unit():
    m = np.array([[1 + 2j, 3], [-1j, 0.5]])
    np.testing.assert_array_equal(matmul(np.eye(2), m), m)
    np.testing.assert_array_equal(matmul([[1j]], [[1j]]), [[-1]])


def test_matmul_adjoint_and_associativity():
    rng = make_rng(1)
    a, b, c = (randn_circular((4, 4), rng) for _ in range(3))
    np.testing.assert_allclose(matmul(a, b).conj().T, matmul(b.conj().T, a.conj().T), atol=1e-12)
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-10)


def test_matmul_rejects_mismatched_shapes():
    with pytest.raises(DimensionError):
        matmul(np.ones((2, 3)), np.ones((2, 3)))


def test_dft_of_impulse_is_flat():
    np.testing.assert_allclose(unitary_dft([1, 0, 0, 0]), np.full(4, 0.5), atol=1e-15)


def test_two_point_butterfly():
    a, b = 2 - 1j, 0.5 + 3j
    expected = np.array([a + b, a - b]) / np.sqrt(2)
    np.testing.assert_allclose(unitary_dft([a, b]), expected, atol=1e-15)


@pytest.mark.parametrize("n", [1, 3, 8, 12, 64])
def test_dft_round_trip_parseval_and_dense_reference(n):
    v = randn_circular(n, make_rng(n))
    forward = unitary_dft(v)
    np.testing.assert_allclose(unitary_dft(forward, inverse=True), v, atol=1e-12)
    assert abs(np.linalg.norm(forward) - np.linalg.norm(v)) < 1e-12
    np.testing.assert_allclose(forward, dft_matrix(n) @ v, atol=1e-12)
    assert unitarity_defect(dft_matrix(n)) < 1e-12


def test_dft_acts_on_last_axis():
    batch = randn_circular((5, 8), make_rng(2))
    rows = np.stack([unitary_dft(row) for row in batch])
    np.testing.assert_allclose(unitary_dft(batch), rows, atol=1e-14)


def test_linear_solve_examples():
    b = randn_circular((3, 2), make_rng(3))
    np.testing.assert_allclose(linear_solve(np.eye(3), b), b, atol=1e-15)
    np.testing.assert_allclose(linear_solve([[2j]], [[4]]), [[-2j]], atol=1e-15)


def test_linear_solve_reconstructs_solution():
    rng = make_rng(4)
    a = randn_circular((8, 8), rng) + 8 * np.eye(8)
    x = randn_circular(8, rng)
    np.testing.assert_allclose(linear_solve(a, a @ x), x, atol=1e-10)
    xs = randn_circular((8, 3), rng)
    np.testing.assert_allclose(linear_solve(a, a @ xs), xs, atol=1e-10)


def test_linear_solve_reports_singular_pivot():
    a = np.array([[1, 2], [2, 4]], dtype=complex)
    with pytest.raises(SingularMatrixError) as info:
        linear_solve(a, np.ones(2))
    assert info.value.pivot_index == 1


def test_linear_solve_thresholds_each_column_on_its_own_scale():
    a = np.diag([1.0, 1e-20]).astype(complex)
    np.testing.assert_allclose(linear_solve(a, [1.0, 1e-20]), [1.0, 1.0], atol=1e-12)
    a = np.array([[1, 1e20], [1, 1e20 + 2**16]], dtype=complex)
    with pytest.raises(SingularMatrixError) as info:
        linear_solve(a, np.ones(2))
    assert info.value.pivot_index == 1
    assert info.value.threshold == pytest.approx(1e-14 * (1e20 + 2**16))


def test_linear_solve_shape_checks():
    with pytest.raises(DimensionError):
        linear_solve(np.ones((2, 3)), np.ones(2))
    with pytest.raises(DimensionError):
        linear_solve(np.eye(2), np.ones(3))


def test_unitarity_defect_examples():
    assert unitarity_defect(np.eye(5)) == 0.0
    assert unitarity_defect(np.diag([1.0, 2.0])) == pytest.approx(3.0)
    with pytest.raises(DimensionError):
        unitarity_defect(np.ones((2, 3)))


@pytest.mark.parametrize("n", [1, 2, 8, 16, 128])
def test_haar_unitary_is_unitary(n):
    assert unitarity_defect(haar_unitary(n, make_rng(n))) < 1e-12


def test_haar_unitary_scalar_and_determinism():
    w = haar_unitary(1, make_rng(9))
    assert abs(abs(w[0, 0]) - 1.0) < 1e-12
    np.testing.assert_array_equal(haar_unitary(8, make_rng(5)), haar_unitary(8, make_rng(5)))


def test_randn_circular_moments():
    z = randn_circular(100_000, make_rng(6))
    assert abs(z.mean()) < 0.02
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.02
    np.testing.assert_array_equal(randn_circular(16, make_rng(7)), randn_circular(16, make_rng(7)))


def test_make_rng_rejects_negative_seed():
    with pytest.raises(ValueError):
        make_rng(-1)


def test_reproject_unitary_fixes_drift_and_keeps_unitary_points():
    w = haar_unitary(6, make_rng(8))
    np.testing.assert_allclose(reproject_unitary(w), w, atol=1e-12)
    drifted = w + 1e-6 * randn_circular((6, 6), make_rng(10))
    assert unitarity_defect(drifted) > 1e-8
    assert unitarity_defect(reproject_unitary(drifted)) < 1e-12
