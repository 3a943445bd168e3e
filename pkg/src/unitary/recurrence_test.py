import numpy as np

from complex_core import make_rng, randn_circular
from models import RecurrenceKind
from rnn.urnn import SequenceBatch, forward, init_model
from unitary.protocols import Recurrence
from unitary.recurrence import FullRecurrence, RestrictedRecurrence, promote_to_full
from unitary.restricted import compose, sample_restricted
from unitary.stiefel import StiefelPoint


def test_both_variants_satisfy_the_protocol():
    params = sample_restricted(4, make_rng(0))
    restricted = RestrictedRecurrence(params)
    full = FullRecurrence(StiefelPoint(compose(params)))
    for recurrence in (restricted, full):
        assert isinstance(recurrence, Recurrence)
        assert recurrence.n == 4
    assert restricted.kind is RecurrenceKind.RESTRICTED
    assert full.kind is RecurrenceKind.FULL


def test_variants_agree_on_the_same_matrix():
    rng = make_rng(1)
    params = sample_restricted(6, rng)
    restricted = RestrictedRecurrence(params)
    full = promote_to_full(restricted)
    h = randn_circular((3, 6), rng)
    np.testing.assert_allclose(restricted.apply(h), full.apply(h), atol=1e-12)
    assert full.unitarity_defect() < 1e-12
    assert promote_to_full(full) is full


def test_full_backward_is_outer_product_sum():
    rng = make_rng(2)
    full = FullRecurrence(StiefelPoint(compose(sample_restricted(3, rng))))
    h = randn_circular((2, 3), rng)
    g = randn_circular((2, 3), rng)
    grad_w, grad_h = full.backward(h, g)
    expected = sum(np.outer(g[i], h[i].conj()) for i in range(2))
    np.testing.assert_allclose(grad_w, expected, atol=1e-14)
    np.testing.assert_allclose(grad_h, g @ full.matrix().conj(), atol=1e-14)


def test_flat_parameters_round_trip():
    rng = make_rng(3)
    params = sample_restricted(5, rng)
    for recurrence in (RestrictedRecurrence(params), promote_to_full(RestrictedRecurrence(params))):
        rebuilt = recurrence.with_flat_parameters(recurrence.flat_parameters())
        np.testing.assert_array_equal(rebuilt.matrix(), recurrence.matrix())
        assert recurrence.flat_gradient(recurrence.zero_grad()).shape == recurrence.flat_parameters().shape


def test_full_recurrence_from_composed_matrix_runs_forward():
    rng = make_rng(7)
    params = sample_restricted(5, rng)
    assert not compose(params).flags.c_contiguous
    full = FullRecurrence(StiefelPoint(compose(params)))
    assert full.point.w.flags.c_contiguous
    assert full.flat_parameters().shape == (50,)
    model = init_model(5, 2, 3, RecurrenceKind.FULL, rng)
    batch = SequenceBatch(inputs=rng.standard_normal((2, 4, 2)), targets=np.zeros((2, 4, 3)))
    _, outputs = forward(model, batch)
    assert outputs.shape == (2, 4, 3)
