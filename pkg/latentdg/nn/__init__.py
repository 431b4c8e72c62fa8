"""
Minimal tensor and reverse-mode automatic differentiation engine.
"""

from latentdg.nn.tensor import Tensor, backward, no_grad, is_grad_enabled
from latentdg.nn.functional import forward_op, grl, cross_entropy
from latentdg.nn.layers import Parameter, Conv2d, Linear, GROUPS
from latentdg.nn.optim import OptimizerState, SGD, sgd_step, step_lr
