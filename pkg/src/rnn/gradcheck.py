"""
Central finite-difference check of the BPTT gradients.
"""

from dataclasses import replace
from typing import Dict, List, Tuple

import numpy as np

from complex_core import Rng, randn_circular
from models import GradcheckGroup, GradcheckReport, LossKind, RecurrenceKind
from rnn.losses import compute_loss
from rnn.urnn import (
    GradientSet,
    SequenceBatch,
    UrnnModel,
    forward,
    init_model,
    loss_and_gradients,
)
from utils.logging_config import get_logger

logger = get_logger(__name__)

ABS_FLOOR = 1e-9
COMPLEX_FIELDS = ("v", "u", "c", "h0")


def _flat(array: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(array):
        return np.ascontiguousarray(array).view(np.float64).ravel().copy()
    return np.asarray(array, dtype=np.float64).ravel().copy()


def _groups(model: UrnnModel) -> List[str]:
    names = ["recurrence", "v", "b", "u", "c"]
    if model.train_h0:
        names.append("h0")
    return names


def _parameters(model: UrnnModel, name: str) -> np.ndarray:
    if name == "recurrence":
        return model.recurrence.flat_parameters()
    return _flat(getattr(model, name))


def _gradient(model: UrnnModel, grads: GradientSet, name: str) -> np.ndarray:
    if name == "recurrence":
        return model.recurrence.flat_gradient(grads.recurrence)
    return _flat(getattr(grads, name))


def _with_parameters(model: UrnnModel, name: str, flat: np.ndarray) -> UrnnModel:
    if name == "recurrence":
        return replace(model, recurrence=model.recurrence.with_flat_parameters(flat))
    current = getattr(model, name)
    if name in COMPLEX_FIELDS:
        value = np.ascontiguousarray(flat).view(np.complex128).reshape(current.shape)
    else:
        value = flat.reshape(current.shape)
    return replace(model, **{name: value})


def _loss(model: UrnnModel, batch: SequenceBatch, loss_kind: LossKind) -> float:
    _, outputs = forward(model, batch)
    return compute_loss(outputs, batch.targets, loss_kind, batch.mask)


def central_differences(
    model: UrnnModel,
    batch: SequenceBatch,
    loss_kind: LossKind,
    name: str,
    step: float,
) -> np.ndarray:
    """∂L/∂(each real component of one parameter group) by central differences"""
    base = _parameters(model, name)
    estimate = np.empty_like(base)
    for index in range(base.size):
        shifted = base.copy()
        shifted[index] = base[index] + step
        upper = _loss(_with_parameters(model, name, shifted), batch, loss_kind)
        shifted[index] = base[index] - step
        lower = _loss(_with_parameters(model, name, shifted), batch, loss_kind)
        estimate[index] = (upper - lower) / (2.0 * step)
    return estimate


def _compare(
    name: str, analytic: np.ndarray, numeric: np.ndarray, rtol: float, atol: float
) -> GradcheckGroup:
    error = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    above_floor = error > atol
    relative = np.where(above_floor, error / np.where(scale > 0, scale, 1.0), 0.0)
    passed = bool(np.all(~above_floor | (error <= rtol * scale)))
    return GradcheckGroup(
        name=name,
        size=int(analytic.size),
        max_abs_error=float(error.max()) if error.size else 0.0,
        max_rel_error=float(relative.max()) if relative.size else 0.0,
        passed=passed,
    )


def gradcheck(
    model: UrnnModel,
    batch: SequenceBatch,
    loss_kind: LossKind,
    step: float = 1e-6,
    rtol: float = 1e-6,
    atol: float = ABS_FLOOR,
) -> GradcheckReport:
    """
    Compare bptt gradients with central differences, group by group.

    A component passes when its absolute error is within `atol` or its
    relative error is within `rtol`. Failures are report content, not
    exceptions.
    """
    _, grads, _ = loss_and_gradients(model, batch, loss_kind)
    groups = []
    for name in _groups(model):
        analytic = _gradient(model, grads, name)
        numeric = central_differences(model, batch, loss_kind, name, step)
        group = _compare(name, analytic, numeric, rtol, atol)
        logger.debug(
            f"gradcheck {model.kind.value}/{loss_kind.value} {name}: "
            f"max rel {group.max_rel_error:.2e}, max abs {group.max_abs_error:.2e}"
        )
        groups.append(group)
    return GradcheckReport(
        n=model.n,
        recurrence=model.kind,
        loss=loss_kind,
        step=step,
        rtol=rtol,
        atol=atol,
        groups=groups,
        passed=all(group.passed for group in groups),
    )


def random_instance(
    n: int,
    io_dim: int,
    steps: int,
    batch_size: int,
    kind: RecurrenceKind,
    loss_kind: LossKind,
    rng: Rng,
) -> Tuple[UrnnModel, SequenceBatch]:
    """
    Small random model and batch for gradient checking.

    Cross entropy uses real outputs, real inputs and class targets; MSE uses
    complex outputs, circular Gaussian inputs and complex targets. Biases,
    c and a trainable h0 are randomized so that every group is exercised.
    """
    real_output = loss_kind is LossKind.CROSS_ENTROPY
    model = init_model(
        n, io_dim, io_dim, kind, rng, real_output=real_output, train_h0=True
    )
    model = replace(
        model,
        b=rng.uniform(-0.1, 0.1, n),
        c=randn_circular(io_dim, rng),
        h0=randn_circular(n, rng),
    )
    if real_output:
        inputs = rng.standard_normal((batch_size, steps, io_dim))
        targets = rng.integers(0, io_dim, (batch_size, steps))
    else:
        inputs = randn_circular((batch_size, steps, io_dim), rng)
        targets = randn_circular((batch_size, steps, io_dim), rng)
    return model, SequenceBatch(inputs=inputs, targets=targets)


def gradcheck_grid(
    dims: List[int],
    io_dim: int,
    steps: int,
    batch_size: int,
    step: float,
    rtol: float,
    rng: Rng,
) -> List[GradcheckReport]:
    """Run gradcheck over dims × {restricted, full} × {MSE, cross entropy}"""
    reports: List[GradcheckReport] = []
    for n in dims:
        for kind in (RecurrenceKind.RESTRICTED, RecurrenceKind.FULL):
            for loss_kind in (LossKind.MSE, LossKind.CROSS_ENTROPY):
                model, batch = random_instance(
                    n, io_dim, steps, batch_size, kind, loss_kind, rng
                )
                report = gradcheck(model, batch, loss_kind, step=step, rtol=rtol)
                verdict = "pass" if report.passed else "FAIL"
                logger.info(f"gradcheck n={n} {kind.value} {loss_kind.value}: {verdict}")
                reports.append(report)
    return reports


def summarize(reports: List[GradcheckReport]) -> Dict[str, float]:
    """Worst relative error per group name across reports"""
    worst: Dict[str, float] = {}
    for report in reports:
        for group in report.groups:
            worst[group.name] = max(worst.get(group.name, 0.0), group.max_rel_error)
    return worst
