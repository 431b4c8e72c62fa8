"""Test the optimizer and learning-rate schedule."""
import pytest
import numpy as np

from latentdg.exceptions import DivergenceError
from latentdg.nn import SGD, OptimizerState, Parameter, sgd_step, step_lr


def test_sgd_momentum_and_weight_decay():
    w = Parameter(np.array([1.0]), 'feature_extractor')
    state = OptimizerState(momentum=0.9, weight_decay=0.1, base_lr=0.1)

    w.grad = np.array([0.5])
    sgd_step([w], state, lr=0.1)
    np.testing.assert_allclose(w.data, [0.94])
    assert w.grad is None

    w.grad = np.array([0.5])
    sgd_step([w], state, lr=0.1)
    np.testing.assert_allclose(w.data, [0.94 - 0.1 * (0.9 * 0.6 + 0.594)])


def test_lr_multiplier_scales_step():
    base = Parameter(np.zeros(2), 'feature_extractor')
    head = Parameter(np.zeros(2), 'classifier', lr_multiplier=10.0)
    state = OptimizerState(momentum=0.0, weight_decay=0.0)
    for p in (base, head):
        p.grad = np.ones(2)
    sgd_step([base, head], state, lr=0.01)
    np.testing.assert_allclose(base.data, -0.01)
    np.testing.assert_allclose(head.data, -0.1)


def test_parameters_without_gradient_are_untouched():
    w = Parameter(np.ones(3), 'discriminator')
    state = OptimizerState(weight_decay=0.5)
    sgd_step([w], state, lr=1.0)
    np.testing.assert_array_equal(w.data, np.ones(3))
    assert id(w) not in state.velocity


def test_non_finite_gradient_raises_without_update():
    a = Parameter(np.ones(2), 'feature_extractor', name='a')
    b = Parameter(np.ones(2), 'classifier', name='b')
    a.grad = np.ones(2)
    b.grad = np.array([np.nan, 1.0])
    with pytest.raises(DivergenceError) as err:
        sgd_step([a, b], OptimizerState(), lr=0.1)
    assert 'b' in str(err.value)
    np.testing.assert_array_equal(a.data, np.ones(2))


def test_step_lr_decays_once():
    lrs = [step_lr(1e-3, epoch, 10, 0.1, 0.8) for epoch in range(10)]
    np.testing.assert_allclose(lrs[:8], 1e-3)
    np.testing.assert_allclose(lrs[8:], 1e-4)
    assert len(set(lrs)) == 2


@pytest.mark.parametrize("epochs,decay_at,decay_epoch", [
    (10, 1.0, 9),
    (2, 0.8, 1),
    (6, 0.25, 2),
    (10, 0.25, 3),
    (10, 0.7, 7),
    (5, 0.01, 1),
])
def test_step_lr_decay_epoch(epochs, decay_at, decay_epoch):
    lrs = [step_lr(1.0, epoch, epochs, 0.5, decay_at)
           for epoch in range(epochs)]
    assert lrs == [1.0] * decay_epoch + [0.5] * (epochs - decay_epoch)


def test_step_lr_single_epoch():
    assert step_lr(1e-3, 0, 1, 0.1, 0.8) == 1e-3
    assert step_lr(1e-3, 0, 1, 0.1, 1.0) == 1e-3


@pytest.mark.parametrize("kwargs", [
    dict(momentum=1.0), dict(momentum=-0.1), dict(weight_decay=-1.0),
    dict(base_lr=0.0),
])
def test_optimizer_state_validation(kwargs):
    with pytest.raises(ValueError):
        OptimizerState(**kwargs)


def test_sgd_wrapper():
    w = Parameter(np.array([2.0]), 'feature_extractor')
    opt = SGD([w], base_lr=0.5, momentum=0.0, weight_decay=0.0)
    w.grad = np.array([1.0])
    opt.step()
    np.testing.assert_allclose(w.data, [1.5])
    with pytest.raises(ValueError):
        opt.step(lr=0.0)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Parameter(np.zeros(2), 'backbone')
    with pytest.raises(ValueError):
        Parameter(np.zeros(2), 'classifier', lr_multiplier=0.0)
