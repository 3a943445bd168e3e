import numpy as np
import pytest

from complex_core import make_rng, randn_circular, unitarity_defect
from unitary.restricted import (
    RestrictedParams,
    apply,
    apply_backward,
    capacity_verdict,
    compose,
    fit_to_target,
    jacobian,
    param_count,
    sample_restricted,
    sample_wide_unitary,
)
from models import FitMethod
from utils.errors import DimensionError, ValidationError


def _loss(p: RestrictedParams, v: np.ndarray, weights: np.ndarray) -> float:
    # real-valued test loss L = Re Σ conj(c)·y, so ∂L/∂y = c
    return float(np.real(np.vdot(weights, apply(p, v))))


@pytest.mark.parametrize("n, count", [(1, 7), (7, 49), (16, 112)])
def test_param_count(n, count):
    assert param_count(n) == count


@pytest.mark.parametrize("n", range(1, 33))
def test_capacity_verdict_is_exactly_n_at_least_8(n):
    verdict = capacity_verdict(n)
    assert verdict.provably_restricted is (n >= 8)
    assert verdict.manifold_dim == n * n


def test_capacity_verdict_examples():
    assert capacity_verdict(7).provably_restricted is False
    assert capacity_verdict(8).provably_restricted is True
    assert capacity_verdict(4).param_count == 28


def test_sample_restricted_ranges_and_determinism():
    p = sample_restricted(16, make_rng(0))
    for phase in (p.phase1, p.phase2, p.phase3):
        assert np.all(phase >= -np.pi) and np.all(phase < np.pi)
    assert p.theta.size == 7 * 16
    q = sample_restricted(16, make_rng(0))
    np.testing.assert_array_equal(p.theta, q.theta)
    np.testing.assert_array_equal(p.perm, q.perm)


@pytest.mark.parametrize("n", [1, 2, 4, 7, 8, 16, 32])
def test_compose_is_unitary(n):
    assert unitarity_defect(compose(sample_restricted(n, make_rng(n)))) < 1e-12


def test_compose_scalar_reflections_cancel():
    p = RestrictedParams(
        n=1,
        phase1=np.zeros(1),
        refl1=np.ones(1, dtype=complex),
        phase2=np.zeros(1),
        refl2=np.ones(1, dtype=complex),
        phase3=np.zeros(1),
        perm=np.arange(1),
    )
    assert abs(compose(p)[0, 0] - 1.0) < 1e-12


def test_apply_matches_compose_and_preserves_norm():
    rng = make_rng(3)
    p = sample_restricted(16, rng)
    v = randn_circular(16, rng)
    y = apply(p, v)
    np.testing.assert_allclose(y, compose(p) @ v, atol=1e-12)
    assert abs(np.linalg.norm(y) - np.linalg.norm(v)) < 1e-12
    np.testing.assert_array_equal(apply(p, np.zeros(16, dtype=complex)), np.zeros(16))


def test_apply_is_batched_over_rows():
    rng = make_rng(4)
    p = sample_restricted(8, rng)
    batch = randn_circular((5, 8), rng)
    np.testing.assert_allclose(apply(p, batch), batch @ compose(p).T, atol=1e-12)


def test_apply_rejects_wrong_dimension():
    with pytest.raises(DimensionError):
        apply(sample_restricted(4, make_rng(0)), np.ones(5))


def test_theta_round_trip():
    p = sample_restricted(6, make_rng(5))
    q = RestrictedParams.from_theta(p.theta, p.perm)
    np.testing.assert_array_equal(compose(p), compose(q))


def test_invalid_params_are_rejected():
    p = sample_restricted(3, make_rng(6))
    with pytest.raises(ValidationError):
        RestrictedParams.from_theta(p.theta, np.array([0, 0, 1]))
    with pytest.raises(ValidationError):
        RestrictedParams(
            n=3,
            phase1=p.phase1,
            refl1=np.zeros(3, dtype=complex),
            phase2=p.phase2,
            refl2=p.refl2,
            phase3=p.phase3,
            perm=p.perm,
        )


def test_apply_backward_zero_and_linear():
    rng = make_rng(7)
    p = sample_restricted(8, rng)
    v = randn_circular(8, rng)
    g = randn_circular(8, rng)
    zero_theta, zero_v = apply_backward(p, v, np.zeros(8, dtype=complex))
    assert not zero_theta.any() and not zero_v.any()
    theta1, v1 = apply_backward(p, v, g)
    theta2, v2 = apply_backward(p, v, 2 * g)
    np.testing.assert_allclose(theta2, 2 * theta1, atol=1e-14)
    np.testing.assert_allclose(v2, 2 * v1, atol=1e-14)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_apply_backward_matches_central_differences(seed):
    rng = make_rng(seed)
    p = sample_restricted(8, rng)
    v = randn_circular(8, rng)
    weights = randn_circular(8, rng)
    grad_theta, grad_v = apply_backward(p, v, weights)

    step = 1e-6
    theta = p.theta
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        numeric = (_loss(p.with_theta(up), v, weights) - _loss(p.with_theta(down), v, weights)) / (2 * step)
        error = abs(numeric - grad_theta[i])
        assert error <= 1e-9 or error <= 1e-6 * max(abs(numeric), abs(grad_theta[i]))

    for i in range(8):
        for direction in (1.0, 1j):
            shift = np.zeros(8, dtype=complex)
            shift[i] = direction * step
            numeric = (_loss(p, v + shift, weights) - _loss(p, v - shift, weights)) / (2 * step)
            analytic = grad_v[i].real if direction == 1.0 else grad_v[i].imag
            error = abs(numeric - analytic)
            assert error <= 1e-9 or error <= 1e-6 * max(abs(numeric), abs(analytic))


def test_sample_wide_unitary():
    w = sample_wide_unitary(16, make_rng(20))
    assert unitarity_defect(w) < 1e-12
    np.testing.assert_array_equal(w, sample_wide_unitary(16, make_rng(20)))
    rng = make_rng(20)
    first = compose(sample_restricted(16, rng))
    second = compose(sample_restricted(16, rng))
    assert np.linalg.norm(w - first) > 1e-6 and np.linalg.norm(w - second) > 1e-6


@pytest.mark.parametrize("method", list(FitMethod))
def test_fit_trace_is_best_so_far(method):
    truth = sample_restricted(4, make_rng(30))
    result = fit_to_target(
        compose(truth), restarts=2, iters=50, lr=1e-2, rng=make_rng(31), perm=truth.perm, method=method
    )
    if method is FitMethod.GRADIENT:
        assert len(result.trace) == 51
    else:
        assert 1 <= len(result.trace) <= 51
    assert all(b <= a for a, b in zip(result.trace, result.trace[1:]))
    assert result.trace[-1] == result.residual
    assert 0 <= result.restart < 2


@pytest.mark.parametrize("method", list(FitMethod))
def test_fit_is_deterministic(method):
    target = sample_wide_unitary(4, make_rng(32))
    a = fit_to_target(target, restarts=2, iters=20, lr=1e-2, rng=make_rng(33), method=method)
    b = fit_to_target(target, restarts=2, iters=20, lr=1e-2, rng=make_rng(33), method=method)
    assert a.residual == b.residual
    np.testing.assert_array_equal(a.params.theta, b.params.theta)


def test_fit_rejects_non_unitary_target():
    with pytest.raises(ValidationError):
        fit_to_target(2 * np.eye(3), restarts=1, iters=1, lr=1e-2, rng=make_rng(0))
    with pytest.raises(ValidationError):
        fit_to_target(np.ones((2, 3)), restarts=1, iters=1, lr=1e-2, rng=make_rng(0))


@pytest.mark.parametrize("n", [1, 3, 8])
def test_jacobian_is_the_transpose_of_apply_backward(n):
    rng = make_rng(40 + n)
    p = sample_restricted(n, rng)
    weights = randn_circular((n, n), rng)
    grad_theta, _ = apply_backward(p, np.eye(n, dtype=complex), weights)
    jac = jacobian(p)
    assert jac.shape == (2 * n * n, 7 * n)
    np.testing.assert_allclose(jac.T @ weights.view(np.float64).ravel(), grad_theta, atol=1e-12)


def test_jacobian_matches_central_differences():
    p = sample_restricted(4, make_rng(45))
    jac = jacobian(p)
    basis = np.eye(4, dtype=complex)
    step = 1e-6
    for i in range(p.theta.size):
        up, down = p.theta.copy(), p.theta.copy()
        up[i] += step
        down[i] -= step
        numeric = (apply(p.with_theta(up), basis) - apply(p.with_theta(down), basis)) / (2 * step)
        np.testing.assert_allclose(jac[:, i], numeric.view(np.float64).ravel(), atol=1e-8)


def test_least_squares_fit_recovers_an_in_image_target():
    truth = sample_restricted(4, make_rng(50))
    result = fit_to_target(compose(truth), restarts=4, iters=2000, lr=1e-2, rng=make_rng(51), perm=truth.perm)
    assert result.residual < 1e-6
    np.testing.assert_allclose(compose(result.params), compose(truth), atol=1e-5)
    assert unitarity_defect(compose(result.params)) < 1e-12
