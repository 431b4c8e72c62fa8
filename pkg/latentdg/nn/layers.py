"""
Trainable parameters and the two parameterized layers used by the model.
"""

import numpy as np

from latentdg.nn import functional as F
from latentdg.nn.tensor import Tensor
from latentdg.utils import check_random_state

GROUPS = ('feature_extractor', 'classifier', 'discriminator')


class Parameter(Tensor):
    """Tensor trained by the optimizer.

    Attributes
    ----------
    lr_multiplier : float
        Scale applied to the base learning rate for this parameter.
    group : str
        One of ``GROUPS``.
    """

    def __init__(self, data, group, lr_multiplier=1.0, name=None):
        super().__init__(data, requires_grad=True, name=name)
        if group not in GROUPS:
            raise ValueError('Unknown parameter group {!r}; expected one of '
                             '{}'.format(group, GROUPS))
        if not lr_multiplier > 0:
            raise ValueError('lr_multiplier must be positive, got {}'.format(
                lr_multiplier))
        self.group = group
        self.lr_multiplier = float(lr_multiplier)

    def __repr__(self):
        return 'Parameter({}, shape={}, group={}, lr_multiplier={})'.format(
            self.name, self.shape, self.group, self.lr_multiplier)


def kaiming_uniform(shape, fan_in, random_state):
    """Draws weights from U(-b, b) with b = sqrt(6 / fan_in)."""
    rs = check_random_state(random_state)
    bound = np.sqrt(6.0 / fan_in)
    return rs.uniform(-bound, bound, size=shape)


class Conv2d(object):
    """Convolution with Kaiming-uniform weights and zero bias."""

    def __init__(self, in_channels, out_channels, kernel, stride=1, padding=0,
                 group='feature_extractor', lr_multiplier=1.0, name='conv',
                 random_state=None):
        shape = (out_channels, in_channels, kernel, kernel)
        fan_in = in_channels * kernel * kernel
        self.weight = Parameter(
            kaiming_uniform(shape, fan_in, random_state), group,
            lr_multiplier, name=name + '.weight')
        self.bias = Parameter(
            np.zeros(out_channels), group, lr_multiplier, name=name + '.bias')
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride,
                        padding=self.padding)

    def parameters(self):
        return [self.weight, self.bias]


class Linear(object):
    """Fully connected layer with Kaiming-uniform weights and zero bias."""

    def __init__(self, in_features, out_features, group,
                 lr_multiplier=1.0, name='linear', random_state=None):
        self.weight = Parameter(
            kaiming_uniform((out_features, in_features), in_features,
                            random_state),
            group, lr_multiplier, name=name + '.weight')
        self.bias = Parameter(
            np.zeros(out_features), group, lr_multiplier, name=name + '.bias')

    def __call__(self, x):
        return F.linear(x, self.weight, self.bias)

    def parameters(self):
        return [self.weight, self.bias]
