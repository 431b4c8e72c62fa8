"""
Dense tensors with tape-based reverse-mode differentiation.

A graph is recorded while operations run with gradient tracking enabled.
Each non-leaf tensor keeps a ``Node`` holding its parents and a closure that
maps the upstream gradient to one gradient per parent. The graph is consumed
by a single call to ``backward``.
"""

import contextlib

import numpy as np

from latentdg.exceptions import GraphError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Context manager that disables graph recording."""
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def is_grad_enabled():
    return _GRAD_ENABLED


class Node(object):
    """Backward-graph record of a single operation."""

    __slots__ = ('op', 'parents', 'backward_fn', 'consumed')

    def __init__(self, op, parents, backward_fn):
        self.op = op
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.consumed = False


class Tensor(object):
    """N-dimensional array of 64-bit floats with optional gradient tracking.

    Attributes
    ----------
    data : ndarray
        Values, always ``float64``.
    grad : ndarray or None
        Accumulated gradient, same shape as ``data``. Only leaf tensors
        with ``requires_grad=True`` receive gradients.
    requires_grad : bool
        Whether operations on this tensor are recorded.
    node : Node or None
        Backward record, None for leaves.
    """

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node = None
        self.name = name

    @classmethod
    def wrap(cls, data):
        """Wraps a float64 array without copying it."""
        out = cls.__new__(cls)
        out.data = np.asarray(data, dtype=np.float64)
        out.grad = None
        out.requires_grad = False
        out.node = None
        out.name = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        if self.data.size != 1:
            raise ValueError("item() requires a single-element tensor.")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def backward(self):
        backward(self)

    def __repr__(self):
        return 'Tensor(shape={}, requires_grad={})'.format(
            self.shape, self.requires_grad)

    # Operator overloads live in functional to keep the op zoo in one place.
    def __add__(self, other):
        from latentdg.nn import functional as F
        return F.add(self, other)

    def __radd__(self, other):
        from latentdg.nn import functional as F
        return F.add(other, self)

    def __sub__(self, other):
        from latentdg.nn import functional as F
        return F.sub(self, other)

    def __rsub__(self, other):
        from latentdg.nn import functional as F
        return F.sub(other, self)

    def __mul__(self, other):
        from latentdg.nn import functional as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from latentdg.nn import functional as F
        return F.mul(other, self)

    def __neg__(self):
        from latentdg.nn import functional as F
        return F.neg(self)

    def __matmul__(self, other):
        from latentdg.nn import functional as F
        return F.matmul(self, other)

    def __pow__(self, exponent):
        from latentdg.nn import functional as F
        return F.power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        from latentdg.nn import functional as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from latentdg.nn import functional as F
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from latentdg.nn import functional as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def exp(self):
        from latentdg.nn import functional as F
        return F.exp(self)

    def log(self):
        from latentdg.nn import functional as F
        return F.log(self)


def as_tensor(x):
    """Wraps constants as untracked tensors; tensors pass through."""
    return x if isinstance(x, Tensor) else Tensor(x)


def make_result(data, parents, backward_fn, op):
    """Creates the output tensor of an op, recording it when needed.

    Parameters
    ----------
    data : ndarray
        Output values.
    parents : sequence of Tensor
        Inputs of the op.
    backward_fn : callable
        Maps the upstream gradient to a tuple with one gradient (or None)
        per parent.
    op : str
        Op name, kept for error messages.
    """
    out = Tensor.wrap(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.node = Node(op, parents, backward_fn)
    return out


def _topological_order(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        tensor, expanded = stack.pop()
        if expanded:
            order.append(tensor)
            continue
        if id(tensor) in visited:
            continue
        visited.add(id(tensor))
        stack.append((tensor, True))
        if tensor.node is not None:
            for parent in tensor.node.parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(loss):
    """Populates ``grad`` on every tracked leaf reachable from ``loss``.

    Gradients accumulate into existing ``grad`` buffers. The graph is freed
    afterwards; a second call on the same loss raises ``GraphError``.

    Parameters
    ----------
    loss : Tensor
        Scalar produced by tracked operations.

    Raises
    ------
    GraphError
        If ``loss`` is not a scalar, is untracked, or its graph has
        already been consumed.
    """
    if not isinstance(loss, Tensor):
        raise GraphError('backward expects a Tensor, got {}'.format(type(loss)))
    if loss.data.size != 1:
        raise GraphError(
            'backward requires a scalar loss, got shape {}'.format(loss.shape))
    if not loss.requires_grad:
        raise GraphError('loss is not produced by tracked operations')
    if loss.node is not None and loss.node.consumed:
        raise GraphError('graph already consumed by a previous backward call')

    order = _topological_order(loss)
    # Checked up front so a failure leaves every leaf gradient untouched.
    for tensor in order:
        if tensor.node is not None and tensor.node.consumed:
            raise GraphError(
                "graph already consumed at op '{}'".format(tensor.node.op))
    grads = {id(loss): np.ones_like(loss.data)}

    for tensor in reversed(order):
        g = grads.pop(id(tensor), None)
        if g is None:
            continue
        node = tensor.node
        if node is None:
            tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
            continue
        parent_grads = node.backward_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg

    # Free the tape.
    for tensor in order:
        if tensor.node is not None:
            tensor.node.consumed = True
            tensor.node.backward_fn = None
