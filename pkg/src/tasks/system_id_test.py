from dataclasses import replace

import numpy as np
import pytest

from complex_core import make_rng, unitarity_defect
from models import Origin
from rnn.urnn import forward
from tasks.system_id import (
    BIAS_HIGH,
    BIAS_LOW,
    SysIdSystem,
    gen_sysid_dataset,
    gen_sysid_system,
    nmse,
    sysid_oracle_model,
)
from utils.errors import ValidationError


@pytest.mark.parametrize("origin", list(Origin))
def test_system_draws(origin):
    system = gen_sysid_system(8, origin, make_rng(0))
    assert np.all((system.b_sys >= BIAS_LOW) & (system.b_sys <= BIAS_HIGH))
    assert unitarity_defect(system.w_sys) < 1e-12
    again = gen_sysid_system(8, origin, make_rng(0))
    np.testing.assert_array_equal(system.w_sys, again.w_sys)
    np.testing.assert_array_equal(system.b_sys, again.b_sys)


def test_system_rejects_non_unitary_matrix():
    with pytest.raises(ValidationError):
        SysIdSystem(n=2, w_sys=np.diag([1.0, 2.0]), b_sys=np.zeros(2), origin=Origin.WIDE)


def test_suppressed_system_outputs_zero():
    system = gen_sysid_system(4, Origin.RESTRICTED, make_rng(1))
    silent = replace(system, b_sys=np.full(4, -1e6))
    data = gen_sysid_dataset(silent, 12, 5, make_rng(2))
    assert not data.targets.any()


def test_targets_grow_no_faster_than_inputs():
    system = gen_sysid_system(6, Origin.WIDE, make_rng(3))
    data = gen_sysid_dataset(system, 40, 4, make_rng(4))
    norms = np.linalg.norm(data.targets, axis=-1)
    inputs = np.linalg.norm(data.inputs, axis=-1)
    assert np.all(np.isfinite(norms))
    assert np.all(norms[:, 0] <= inputs[:, 0] + 1e-12)
    assert np.all(norms[:, 1:] <= norms[:, :-1] + inputs[:, 1:] + 1e-12)


def test_dataset_is_reproducible():
    system = gen_sysid_system(4, Origin.WIDE, make_rng(5))
    first = gen_sysid_dataset(system, 10, 3, make_rng(6))
    second = gen_sysid_dataset(system, 10, 3, make_rng(6))
    np.testing.assert_array_equal(first.inputs, second.inputs)
    np.testing.assert_array_equal(first.targets, second.targets)


def test_oracle_reproduces_its_own_data():
    system = gen_sysid_system(8, Origin.WIDE, make_rng(7))
    data = gen_sysid_dataset(system, 30, 6, make_rng(8))
    _, outputs = forward(sysid_oracle_model(system), data)
    assert nmse(outputs, data.targets) < 1e-20


def test_nmse_examples():
    target = np.array([[1 + 1j, -2.0], [0.5j, 3.0]])
    assert nmse(target, target) == 0.0
    assert nmse(np.zeros_like(target), target) == pytest.approx(1.0)
    assert nmse(2 * target, target) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        nmse(target, np.zeros_like(target))
    with pytest.raises(ValidationError):
        nmse(target[0], target)
