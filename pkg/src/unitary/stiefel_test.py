import numpy as np
import pytest

from complex_core import haar_unitary, make_rng, randn_circular, unitarity_defect
from unitary.stiefel import (
    GradScaleState,
    StiefelPoint,
    cayley_step,
    full_step,
    left_generator,
    riemannian_skew,
    scale_gradient,
)
from utils.errors import ValidationError


def _point(n: int, seed: int) -> StiefelPoint:
    return StiefelPoint(haar_unitary(n, make_rng(seed)))


def _skew(n: int, seed: int) -> np.ndarray:
    x = randn_circular((n, n), make_rng(seed))
    return x - x.conj().T


def test_point_rejects_non_unitary():
    with pytest.raises(ValidationError):
        StiefelPoint(np.diag([1.0, 2.0]))


def test_riemannian_skew_examples():
    w = _point(5, 0)
    np.testing.assert_allclose(riemannian_skew(w.w, w), np.zeros((5, 5)), atol=1e-15)
    a = riemannian_skew(np.array([[1j]]), StiefelPoint(np.eye(1)))
    np.testing.assert_allclose(a, [[-2j]], atol=1e-15)


def test_riemannian_skew_is_skew_hermitian():
    w = _point(8, 1)
    a = riemannian_skew(randn_circular((8, 8), make_rng(2)), w)
    assert np.linalg.norm(a + a.conj().T) < 1e-12


def test_gradient_colinear_with_point_produces_no_motion():
    w = _point(6, 3)
    a = riemannian_skew(-2.5 * w.w, w)
    assert np.linalg.norm(a) < 1e-12


def test_cayley_step_examples():
    w = _point(4, 4)
    np.testing.assert_allclose(cayley_step(w, np.zeros((4, 4)), 0.1).w, w.w, atol=1e-15)
    y = cayley_step(StiefelPoint(np.eye(1)), np.array([[-2j]]), 1.0)
    np.testing.assert_allclose(y.w, [[1j]], atol=1e-15)
    assert abs(abs(y.w[0, 0]) - 1.0) < 1e-15


def test_cayley_step_stays_unitary():
    y = cayley_step(_point(16, 5), _skew(16, 6), 0.3)
    assert unitarity_defect(y.w) < 1e-12


def test_cayley_step_validates_arguments():
    w = _point(3, 7)
    with pytest.raises(ValidationError):
        cayley_step(w, randn_circular((3, 3), make_rng(8)), 0.1)
    with pytest.raises(ValidationError):
        cayley_step(w, _skew(3, 9), 0.0)


def test_left_generator_is_skew_and_congruent():
    w = _point(6, 10)
    g = randn_circular((6, 6), make_rng(11))
    b = left_generator(riemannian_skew(g, w), w)
    assert np.linalg.norm(b + b.conj().T) < 1e-12
    np.testing.assert_allclose(b, g @ w.w.conj().T - w.w @ g.conj().T, atol=1e-12)


def test_scale_gradient_examples():
    g = np.zeros((2, 2), dtype=complex)
    scaled, state = scale_gradient(g, GradScaleState(running_sq_norm=4.0))
    assert not scaled.any()
    assert state.running_sq_norm == pytest.approx(3.6)

    g = np.diag([1.0, 0.0]).astype(complex)
    scaled, state = scale_gradient(g, GradScaleState())
    assert np.linalg.norm(scaled) == pytest.approx(1 / np.sqrt(0.1 + 1e-8), rel=1e-12)
    assert state.running_sq_norm == pytest.approx(0.1)


def test_scale_gradient_preserves_direction():
    g = randn_circular((4, 4), make_rng(12))
    scaled, _ = scale_gradient(g, GradScaleState(running_sq_norm=0.5))
    ratio = scaled / g
    np.testing.assert_allclose(ratio, np.full((4, 4), ratio[0, 0]), atol=1e-12)
    assert abs(ratio[0, 0].imag) < 1e-14 and ratio[0, 0].real > 0


def test_grad_scale_state_validation():
    with pytest.raises(ValidationError):
        GradScaleState(decay=1.0)
    with pytest.raises(ValidationError):
        GradScaleState(running_sq_norm=np.inf)


def test_full_step_zero_gradient_keeps_point():
    w = _point(5, 13)
    y, state = full_step(w, np.zeros((5, 5)), 1e-3)
    np.testing.assert_array_equal(y.w, w.w)
    assert state is None


def test_thousand_steps_stay_unitary():
    rng = make_rng(14)
    w = _point(32, 15)
    state = GradScaleState()
    for _ in range(1000):
        w, state = full_step(w, randn_circular((32, 32), rng), 1e-3, state)
    assert w.defect() < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_full_step_descends_on_linear_objective(seed):
    w = _point(8, 100 + seed)
    g = randn_circular((8, 8), make_rng(200 + seed))
    before = np.real(np.trace(g.conj().T @ w.w))
    y, _ = full_step(w, g, 1e-4)
    after = np.real(np.trace(g.conj().T @ y.w))
    assert after < before


def test_step_length_shrinks_linearly_with_lambda():
    w = _point(8, 16)
    g = randn_circular((8, 8), make_rng(17))
    a = riemannian_skew(g, w)
    bound = np.linalg.norm(a) * np.linalg.norm(w.w)
    moves = {}
    for lam in (1e-3, 1e-4):
        y, _ = full_step(w, g, lam)
        moves[lam] = np.linalg.norm(y.w - w.w)
        assert moves[lam] <= lam * bound * (1 + 1e-2)
    assert moves[1e-3] / moves[1e-4] == pytest.approx(10.0, rel=1e-2)
