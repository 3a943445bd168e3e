"""
Restricted-capacity unitary parameterization

    W(θ) = D3 · R2 · F⁻¹ · D2 · P · R1 · F · D1

with D_k = diag(exp(i·phase_k)), R_k = I − 2·u_k·u_kᴴ/(u_kᴴu_k) Householder
reflections, F the unitary DFT and P a fixed permutation, (P·x)[i] = x[perm[i]].
The 7n trainable reals are flattened in the fixed order

    phase1 ‖ refl1.re ‖ refl1.im ‖ phase2 ‖ refl2.re ‖ refl2.im ‖ phase3

which is also the checkpoint order.
"""

from dataclasses import dataclass, field
from functools import partial
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import least_squares

from complex_core import Rng, unitarity_defect, unitary_dft
from models import CapacityVerdict, FitMethod
from utils.errors import DimensionError, ValidationError
from utils.logging_config import get_logger

logger = get_logger(__name__)

MIN_REFLECTION_NORM_SQ = 1e-20
SAMPLE_REFLECTION_NORM_SQ = 1e-6
TARGET_UNITARITY_TOL = 1e-8
FIT_CONVERGED = 1e-12
DESCENT_EVALS = 200
DESCENT_TOL = 1e-12


def param_count(n: int) -> int:
    """Trainable real parameters of W(θ): 3n phases plus two complex n-vectors"""
    if n < 1:
        raise ValidationError(f"Hidden dimension must be positive, got {n}")
    return 7 * n


def capacity_verdict(n: int) -> CapacityVerdict:
    """
    Compare the parameter count against dim U(n) = n².

    With fewer parameters than the manifold dimension the image of θ ↦ W(θ)
    has measure zero in U(n), so the family provably misses unitary matrices.
    That happens exactly when 7n < n², i.e. n ≥ 8.
    """
    count = param_count(n)
    return CapacityVerdict(
        n=n,
        param_count=count,
        manifold_dim=n * n,
        provably_restricted=count < n * n,
    )


@dataclass
class RestrictedParams:
    """Trainable factors of W(θ) plus the frozen permutation"""

    n: int
    phase1: np.ndarray
    refl1: np.ndarray
    phase2: np.ndarray
    refl2: np.ndarray
    phase3: np.ndarray
    perm: np.ndarray = field(repr=False)

    def __post_init__(self):
        n = self.n
        for name in ("phase1", "phase2", "phase3"):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.shape != (n,):
                raise DimensionError(f"{name} must have shape ({n},), got {value.shape}", value.shape)
            setattr(self, name, value)
        for name in ("refl1", "refl2"):
            value = np.asarray(getattr(self, name), dtype=np.complex128)
            if value.shape != (n,):
                raise DimensionError(f"{name} must have shape ({n},), got {value.shape}", value.shape)
            if np.vdot(value, value).real <= MIN_REFLECTION_NORM_SQ:
                raise ValidationError(f"{name} has vanishing norm")
            setattr(self, name, value)
        perm = np.asarray(self.perm, dtype=np.int64)
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValidationError(f"perm must be a permutation of 0..{n - 1}")
        self.perm = perm

    @property
    def theta(self) -> np.ndarray:
        """Flattened trainable parameters in the fixed 7n order"""
        return np.concatenate(
            [
                self.phase1,
                self.refl1.real,
                self.refl1.imag,
                self.phase2,
                self.refl2.real,
                self.refl2.imag,
                self.phase3,
            ]
        )

    @classmethod
    def from_theta(cls, theta: np.ndarray, perm: np.ndarray) -> "RestrictedParams":
        """Rebuild parameters from a flat 7n vector and a permutation"""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.ndim != 1 or theta.size % 7:
            raise DimensionError(f"theta must be a flat vector of length 7n, got {theta.shape}", theta.shape)
        n = theta.size // 7
        p1, r1re, r1im, p2, r2re, r2im, p3 = np.split(theta, 7)
        return cls(
            n=n,
            phase1=p1.copy(),
            refl1=r1re + 1j * r1im,
            phase2=p2.copy(),
            refl2=r2re + 1j * r2im,
            phase3=p3.copy(),
            perm=perm,
        )

    def with_theta(self, theta: np.ndarray) -> "RestrictedParams":
        """Copy with new trainable values and the same permutation"""
        return RestrictedParams.from_theta(theta, self.perm)


def sample_restricted(n: int, rng: Rng) -> RestrictedParams:
    """
    Random member of the restricted family.

    Draw order (fixed for reproducibility): phase1, phase2, phase3 uniform on
    [−π, π); refl1, refl2 with real and imaginary parts uniform on [−1, 1]
    (redrawn while ‖u‖² < 1e-6); then a uniform random permutation.
    """
    if n < 1:
        raise ValidationError(f"Hidden dimension must be positive, got {n}")
    phases = [rng.uniform(-np.pi, np.pi, n) for _ in range(3)]
    reflections = []
    for _ in range(2):
        while True:
            u = rng.uniform(-1.0, 1.0, n) + 1j * rng.uniform(-1.0, 1.0, n)
            if np.vdot(u, u).real >= SAMPLE_REFLECTION_NORM_SQ:
                break
        reflections.append(u)
    perm = rng.permutation(n)
    return RestrictedParams(
        n=n,
        phase1=phases[0],
        refl1=reflections[0],
        phase2=phases[1],
        refl2=reflections[1],
        phase3=phases[2],
        perm=perm,
    )


def _reflect(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Householder reflection of every row of x"""
    alpha = x @ u.conj()
    return x - (2.0 / np.vdot(u, u).real) * alpha[..., np.newaxis] * u


def _check_vector(p: RestrictedParams, v: np.ndarray, name: str = "v") -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim == 0 or v.shape[-1] != p.n:
        raise DimensionError(
            f"{name} has trailing dimension {v.shape[-1:]} but the recurrence has n={p.n}",
            v.shape,
        )
    return v


def _rotate(phase: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.exp(1j * phase) * x


def _permute(perm: np.ndarray, x: np.ndarray) -> np.ndarray:
    return x[..., perm]


def _stage_ops(p: RestrictedParams) -> List[Callable[[np.ndarray], np.ndarray]]:
    """The eight factors in application order; op k maps stage k to stage k+1"""
    return [
        partial(_rotate, p.phase1),
        unitary_dft,
        partial(_reflect, p.refl1),
        partial(_permute, p.perm),
        partial(_rotate, p.phase2),
        partial(unitary_dft, inverse=True),
        partial(_reflect, p.refl2),
        partial(_rotate, p.phase3),
    ]


def _forward_stages(p: RestrictedParams, v: np.ndarray) -> List[np.ndarray]:
    """Intermediate vectors s0..s8 of the factor chain (s8 is the output)"""
    stages = [v]
    for op in _stage_ops(p):
        stages.append(op(stages[-1]))
    return stages


def apply(p: RestrictedParams, v: np.ndarray) -> np.ndarray:
    """
    W(θ)·v in O(n log n), factor by factor.

    Batched along leading axes: every row v[..., :] is transformed.
    """
    v = _check_vector(p, v)
    return _forward_stages(p, v)[-1]


def compose(p: RestrictedParams) -> np.ndarray:
    """Dense n×n matrix W(θ), built by applying the chain to the standard basis"""
    return apply(p, np.eye(p.n, dtype=np.complex128)).T


def _diag_backward(
    phase: np.ndarray, out: np.ndarray, grad: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    # y = e^{iφ}·x: ∂L/∂φ = Im(g·conj(y)), g_x = e^{-iφ}·g
    grad_phase = np.imag(grad * out.conj()).reshape(-1, phase.size).sum(axis=0)
    return grad_phase, np.exp(-1j * phase) * grad


def _reflect_backward(
    u: np.ndarray, x: np.ndarray, grad: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    s = np.vdot(u, u).real
    x2 = x.reshape(-1, u.size)
    g2 = grad.reshape(-1, u.size)
    alpha = x2 @ u.conj()
    beta = g2.conj() @ u
    grad_u = (
        -(2.0 / s) * (alpha.conj() @ g2 + beta @ x2)
        + (4.0 / s**2) * np.sum(np.real(alpha * beta)) * u
    )
    return grad_u, _reflect(u, grad)


def apply_backward(
    p: RestrictedParams, v: np.ndarray, grad_out: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pull a loss gradient back through y = W(θ)·v.

    Complex quantities are treated as pairs of reals: a gradient g stands for
    ∂L/∂Re + i·∂L/∂Im. For batched inputs the θ gradient is summed over rows.

    Args:
        p: Parameters of W(θ)
        v: Input vector(s), trailing dimension n
        grad_out: ∂L/∂y with the shape of v

    Returns:
        (grad_theta of length 7n in the fixed order, grad_v shaped like v)
    """
    v = _check_vector(p, v)
    grad = np.asarray(grad_out, dtype=np.complex128)
    if grad.shape != v.shape:
        raise DimensionError(
            f"grad_out shape {grad.shape} does not match input shape {v.shape}",
            grad.shape,
            v.shape,
        )
    s = _forward_stages(p, v)

    g_phase3, g = _diag_backward(p.phase3, s[8], grad)
    g_refl2, g = _reflect_backward(p.refl2, s[6], g)
    g = unitary_dft(g)
    g_phase2, g = _diag_backward(p.phase2, s[5], g)
    unpermuted = np.empty_like(g)
    unpermuted[..., p.perm] = g
    g = unpermuted
    g_refl1, g = _reflect_backward(p.refl1, s[2], g)
    g = unitary_dft(g, inverse=True)
    g_phase1, g = _diag_backward(p.phase1, s[1], g)

    grad_theta = np.concatenate(
        [
            g_phase1,
            g_refl1.real,
            g_refl1.imag,
            g_phase2,
            g_refl2.real,
            g_refl2.imag,
            g_phase3,
        ]
    )
    return grad_theta, g




def sample_wide_unitary(n: int, rng: Rng) -> np.ndarray:
    """Product of two independent restricted draws (the wider set)"""
    first = compose(sample_restricted(n, rng))
    second = compose(sample_restricted(n, rng))
    return first @ second


def _phase_tangents(out: np.ndarray) -> np.ndarray:
    # ∂(e^{iφ}·x)/∂φ_k = i·y_k·e_k, one tangent per k
    n = out.shape[-1]
    return 1j * out[np.newaxis] * np.eye(n)[:, np.newaxis, :]


def _reflection_tangents(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    # y = x − (2/s)·α·u with α = x·ū, s = uᴴu; du = c·e_k for c in (1, i)
    n = u.size
    s = np.vdot(u, u).real
    alpha = x @ u.conj()
    eye = np.eye(n)[:, np.newaxis, :]
    blocks = []
    for c in (1.0, 1j):
        ds = 2.0 * np.real(u.conj() * c)
        d_alpha = np.conj(c) * x.T
        blocks.append(
            -(2.0 / s) * (d_alpha[:, :, np.newaxis] * u + c * alpha[np.newaxis, :, np.newaxis] * eye)
            + (2.0 / s**2) * ds[:, np.newaxis, np.newaxis] * alpha[np.newaxis, :, np.newaxis] * u
        )
    return np.concatenate(blocks)


def _downstream(ops: List[Callable[[np.ndarray], np.ndarray]], x: np.ndarray, start: int) -> np.ndarray:
    for op in ops[start:]:
        x = op(x)
    return x


def jacobian(p: RestrictedParams) -> np.ndarray:
    """
    Forward-mode derivative of the basis images W(θ)·e_j.

    Row-major over (j, k, re/im), so it matches
    `apply(p, I).view(np.float64).ravel()`; columns follow the 7n θ order.
    Returns a real (2n², 7n) matrix.
    """
    ops = _stage_ops(p)
    s = _forward_stages(p, np.eye(p.n, dtype=np.complex128))
    tangents = np.concatenate(
        [
            _downstream(ops, _phase_tangents(s[1]), 1),
            _downstream(ops, _reflection_tangents(p.refl1, s[2]), 3),
            _downstream(ops, _phase_tangents(s[5]), 5),
            _downstream(ops, _reflection_tangents(p.refl2, s[6]), 7),
            _phase_tangents(s[8]),
        ]
    )
    flat = np.ascontiguousarray(tangents).reshape(7 * p.n, -1)
    return flat.view(np.float64).T


@dataclass
class FitResult:
    """Best restricted approximation found for a target matrix"""

    params: RestrictedParams
    residual: float
    restart: int
    trace: List[float]


def _fit_gradient(
    target: np.ndarray,
    init: RestrictedParams,
    iters: int,
    lr: float,
) -> Tuple[RestrictedParams, float, List[float]]:
    n = init.n
    basis = np.eye(n, dtype=np.complex128)
    target_rows = target.T
    theta = init.theta
    best_theta = theta.copy()
    best = np.inf
    trace: List[float] = []
    for step in range(iters + 1):
        params = init.with_theta(theta)
        rows = apply(params, basis)
        diff = rows - target_rows
        residual = float(np.sqrt(np.sum(np.abs(diff) ** 2)))
        if residual < best:
            best = residual
            best_theta = theta.copy()
        trace.append(best)
        if step == iters:
            break
        grad_theta, _ = apply_backward(params, basis, 2.0 * diff)
        theta = theta - lr * grad_theta
    return init.with_theta(best_theta), best, trace


@dataclass
class _BestSoFar:
    """Residual bookkeeping shared by every descent of one restart"""

    init: RestrictedParams
    target_rows: np.ndarray
    limit: int
    theta: np.ndarray
    residual: float = np.inf
    trace: List[float] = field(default_factory=list)

    @property
    def exhausted(self) -> bool:
        return len(self.trace) >= self.limit

    def residuals(self, theta: np.ndarray) -> np.ndarray:
        rows = apply(self.init.with_theta(theta), np.eye(self.init.n, dtype=np.complex128))
        r = np.ascontiguousarray(rows - self.target_rows).view(np.float64).ravel()
        if not self.exhausted:
            value = float(np.linalg.norm(r))
            if value < self.residual:
                self.residual = value
                self.theta = theta.copy()
            self.trace.append(self.residual)
        return r

    def jacobian(self, theta: np.ndarray) -> np.ndarray:
        return jacobian(self.init.with_theta(theta))


def _unit_reflections(theta: np.ndarray, n: int) -> np.ndarray:
    # W is invariant to the scale of u, so rescaling only fixes the gauge
    theta = theta.copy()
    for start in (n, 4 * n):
        u = theta[start : start + 2 * n]
        theta[start : start + 2 * n] = u / np.linalg.norm(u)
    return theta


def _fit_least_squares(
    target: np.ndarray,
    init: RestrictedParams,
    iters: int,
    hop_scale: float,
    rng: Rng,
) -> Tuple[RestrictedParams, float, List[float]]:
    n = init.n
    state = _BestSoFar(
        init=init,
        target_rows=np.ascontiguousarray(target.T),
        limit=iters + 1,
        theta=init.theta,
    )
    state.residuals(init.theta)

    scale = np.full(7 * n, hop_scale)
    scale[n : 3 * n] /= np.sqrt(n)
    scale[4 * n : 6 * n] /= np.sqrt(n)

    start = init.theta
    descents = 0
    while not state.exhausted and state.residual > FIT_CONVERGED:
        least_squares(
            state.residuals,
            start,
            jac=state.jacobian,
            method="trf",
            max_nfev=min(DESCENT_EVALS, state.limit - len(state.trace)),
            ftol=DESCENT_TOL,
            xtol=DESCENT_TOL,
            gtol=DESCENT_TOL,
        )
        descents += 1
        start = _unit_reflections(state.theta, n) + scale * rng.standard_normal(7 * n)

    logger.debug(f"least-squares fit: {descents} descents, {len(state.trace)} evaluations")
    return init.with_theta(state.theta), state.residual, state.trace


def fit_to_target(
    target: np.ndarray,
    restarts: int,
    iters: int,
    lr: float,
    rng: Rng,
    perm: Optional[np.ndarray] = None,
    method: FitMethod = FitMethod.LEAST_SQUARES,
    hop_scale: float = 0.3,
) -> FitResult:
    """
    Fit W(θ) to a unitary target by minimizing ‖W(θ) − target‖²_F.

    Each restart draws its initial θ from an independent child stream of
    `rng`. If `perm` is given every restart uses it; otherwise each restart
    keeps the permutation of its own draw. The run with the lowest residual
    wins, ties going to the lowest restart index.

    `FitMethod.GRADIENT` takes `iters` plain gradient steps of size `lr`.
    `FitMethod.LEAST_SQUARES` spends up to `iters` residual evaluations on
    trust-region descents with the analytic Jacobian; after each descent it
    restarts from the best point so far, perturbed by `hop_scale`, and stops
    early once the residual vanishes. In both cases `trace` holds the
    best-so-far residual per evaluation of the winning restart.

    Raises:
        ValidationError: if the target is not square and unitary to 1e-8
    """
    target = np.asarray(target, dtype=np.complex128)
    if target.ndim != 2 or target.shape[0] != target.shape[1]:
        raise ValidationError(f"Target must be square, got {target.shape}")
    defect = unitarity_defect(target)
    if defect >= TARGET_UNITARITY_TOL:
        raise ValidationError(f"Target is not unitary (defect {defect:.3e})")
    if restarts < 1:
        raise ValidationError("At least one restart is required")

    n = target.shape[0]
    best: Optional[FitResult] = None
    for index, child in enumerate(rng.spawn(restarts)):
        init = sample_restricted(n, child)
        if perm is not None:
            init = RestrictedParams.from_theta(init.theta, perm)
        if method is FitMethod.GRADIENT:
            params, residual, trace = _fit_gradient(target, init, iters, lr)
        else:
            params, residual, trace = _fit_least_squares(target, init, iters, hop_scale, child)
        logger.debug(f"fit restart {index}: residual {residual:.3e}")
        if best is None or residual < best.residual:
            best = FitResult(params=params, residual=residual, restart=index, trace=trace)

    logger.info(
        f"fit_to_target n={n} ({method.value}): best residual {best.residual:.3e} "
        f"(restart {best.restart} of {restarts})"
    )
    return best
