"""
Stochastic gradient descent with momentum, weight decay and per-parameter
learning-rate multipliers.
"""

import math

import numpy as np

from latentdg.exceptions import DivergenceError


class OptimizerState(object):
    """Velocity buffers and hyperparameters of SGD.

    Attributes
    ----------
    velocity : dict
        Maps ``id(parameter)`` to a buffer shaped like the parameter.
    momentum : float
        In [0, 1).
    weight_decay : float
        Non-negative L2 coefficient added to the gradient.
    base_lr : float
        Positive learning rate before schedules and multipliers.
    """

    def __init__(self, momentum=0.9, weight_decay=5e-4, base_lr=1e-3):
        if not 0 <= momentum < 1:
            raise ValueError('momentum must lie in [0, 1), got {}'.format(
                momentum))
        if not weight_decay >= 0:
            raise ValueError('weight_decay must be non-negative, got {}'
                             .format(weight_decay))
        if not base_lr > 0:
            raise ValueError('base_lr must be positive, got {}'.format(base_lr))
        self.velocity = dict()
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self.base_lr = float(base_lr)


def sgd_step(params, state, lr):
    """Applies one SGD update and clears the gradients.

    For every parameter ``w`` with gradient ``g``::

        v <- momentum * v + g + weight_decay * w
        w <- w - lr * lr_multiplier * v

    Parameters without a gradient are left untouched.

    Parameters
    ----------
    params : list of Parameter
    state : OptimizerState
    lr : float
        Learning rate for this step (the scheduled base rate).

    Raises
    ------
    DivergenceError
        If any gradient holds non-finite values. No parameter is updated
        in that case.
    """
    active = [p for p in params if p.grad is not None]
    for p in active:
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(
                'non-finite gradient in parameter {}'.format(p.name))

    for p in active:
        d_p = p.grad + state.weight_decay * p.data
        v = state.velocity.get(id(p))
        v = d_p if v is None else state.momentum * v + d_p
        state.velocity[id(p)] = v
        p.data = p.data - lr * p.lr_multiplier * v

    for p in params:
        p.zero_grad()


def step_lr(base_lr, epoch, epochs, decay_factor=0.1, decay_at=0.8):
    """Returns the step-decayed learning rate for a 0-based ``epoch``.

    The rate is multiplied by ``decay_factor`` once, for all epochs at or
    after ``ceil(decay_at * epochs)``. The decay epoch is clipped to the last
    epoch, so a run of two or more epochs always trains at both rates; a
    single-epoch run keeps ``base_lr``.
    """
    decay_epoch = int(math.ceil(round(decay_at * epochs, 9)))
    decay_epoch = max(1, min(decay_epoch, epochs - 1))
    return base_lr * decay_factor if epoch >= decay_epoch else base_lr


class SGD(object):
    """Convenience wrapper bundling parameters with their optimizer state."""

    def __init__(self, params, base_lr=1e-3, momentum=0.9, weight_decay=5e-4):
        self.params = list(params)
        self.state = OptimizerState(momentum, weight_decay, base_lr)

    def step(self, lr=None):
        lr = self.state.base_lr if lr is None else lr
        if not math.isfinite(lr) or lr <= 0:
            raise ValueError('learning rate must be positive, got {}'.format(lr))
        sgd_step(self.params, self.state, lr)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()
