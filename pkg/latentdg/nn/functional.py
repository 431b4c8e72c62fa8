"""
Differentiable operations on ``Tensor``.

Every op validates its input shapes, computes the forward value with numpy
and records a backward closure through ``make_result``. ``forward_op``
dispatches by name for callers that build graphs from descriptions.
"""

import numpy as np
from scipy.special import logsumexp

from latentdg.exceptions import ShapeError
from latentdg.nn import _conv_kernels
from latentdg.nn.tensor import as_tensor, make_result


def _unbroadcast(grad, shape):
    """Sums ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, 'cannot broadcast shapes {} and {}'.format(
            a.shape, b.shape))


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Elementwise arithmetic.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('add', a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward_fn, 'add')


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('sub', a, b)

    def backward_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward_fn, 'sub')


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape('mul', a, b)

    def backward_fn(g):
        return (_unbroadcast(g * b.data, a.shape),
                _unbroadcast(g * a.data, b.shape))

    return make_result(a.data * b.data, (a, b), backward_fn, 'mul')


def neg(a):
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,), 'neg')


def power(a, exponent):
    """Raises ``a`` to a constant scalar power."""
    a = as_tensor(a)
    exponent = float(exponent)

    def backward_fn(g):
        return (g * exponent * a.data ** (exponent - 1),)

    return make_result(a.data ** exponent, (a,), backward_fn, 'power')


def exp(a):
    a = as_tensor(a)
    out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,), 'exp')


def log(a):
    a = as_tensor(a)
    return make_result(np.log(a.data), (a,), lambda g: (g / a.data,), 'log')


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    out = np.where(mask, a.data, 0.0)
    return make_result(out, (a,), lambda g: (g * mask,), 'relu')


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Reductions and reshaping.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(out, (a,), backward_fn, 'sum')


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    if count == 0:
        raise ShapeError('mean', 'cannot average over an empty axis')
    return mul(sum(a, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError('reshape', 'cannot reshape {} into {}'.format(
            a.shape, tuple(shape)))
    return make_result(out, (a,), lambda g: (g.reshape(a.shape),), 'reshape')


def flatten(a):
    """Flattens all but the batch dimension."""
    a = as_tensor(a)
    return reshape(a, (a.shape[0], -1))


# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~
# Layers.
# ~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~~

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError('matmul', 'cannot multiply {} by {}'.format(
            a.shape, b.shape))

    def backward_fn(g):
        return g @ b.data.T, a.data.T @ g

    return make_result(a.data @ b.data, (a, b), backward_fn, 'matmul')


def linear(x, weight, bias=None):
    """Affine map ``x @ weight.T + bias``.

    Parameters
    ----------
    x : Tensor, shape (batch, in_features)
    weight : Tensor, shape (out_features, in_features)
    bias : Tensor or None, shape (out_features,)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError('linear', 'expected 2-d input and weight, got {} '
                         'and {}'.format(x.shape, weight.shape))
    if x.shape[1] != weight.shape[1]:
        raise ShapeError('linear', 'input has {} features but weight expects '
                         '{}'.format(x.shape[1], weight.shape[1]))
    parents = [x, weight]
    out = x.data @ weight.data.T
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[0],):
            raise ShapeError('linear', 'bias has shape {} but weight has {} '
                             'outputs'.format(bias.shape, weight.shape[0]))
        out = out + bias.data
        parents.append(bias)

    def backward_fn(g):
        grads = [g @ weight.data, g.T @ x.data]
        if bias is not None:
            grads.append(g.sum(axis=0))
        return grads

    return make_result(out, parents, backward_fn, 'linear')


def conv_output_size(size, kernel, stride, padding):
    return (size + 2 * padding - kernel) // stride + 1


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-d cross-correlation with zero padding.

    Parameters
    ----------
    x : Tensor, shape (batch, channels, height, width)
    weight : Tensor, shape (filters, channels, kh, kw)
    bias : Tensor or None, shape (filters,)
    stride : int
    padding : int
        Zeros added to each spatial border.
    """
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError('conv2d', 'expected 4-d input and kernel, got {} '
                         'and {}'.format(x.shape, weight.shape))
    if stride < 1 or padding < 0:
        raise ShapeError('conv2d', 'invalid stride={} or padding={}'.format(
            stride, padding))

    N, C, H, W = x.shape
    F, Ck, kh, kw = weight.shape
    if C != Ck:
        raise ShapeError('conv2d', 'input has {} channels but kernel expects '
                         '{}'.format(C, Ck))
    Ho = conv_output_size(H, kh, stride, padding)
    Wo = conv_output_size(W, kw, stride, padding)
    if Ho < 1 or Wo < 1:
        raise ShapeError('conv2d', 'kernel {}x{} does not fit input {}x{} '
                         'with padding {}'.format(kh, kw, H, W, padding))

    xp = x.data
    if padding > 0:
        xp = np.pad(xp, ((0, 0), (0, 0), (padding, padding),
                         (padding, padding)))
    xp = np.ascontiguousarray(xp)

    cols = np.empty((N, C * kh * kw, Ho * Wo))
    _conv_kernels.im2col(xp, kh, kw, stride, cols)
    w2 = weight.data.reshape(F, -1)

    out = np.matmul(w2, cols)
    parents = [x, weight]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (F,):
            raise ShapeError('conv2d', 'bias has shape {} but kernel has {} '
                             'filters'.format(bias.shape, F))
        out += bias.data[None, :, None]
        parents.append(bias)
    out = out.reshape(N, F, Ho, Wo)

    def backward_fn(g):
        g2 = g.reshape(N, F, Ho * Wo)
        grad_w = np.tensordot(g2, cols, axes=([0, 2], [0, 2]))
        grads = [None, grad_w.reshape(weight.shape)]
        if x.requires_grad:
            grad_cols = np.ascontiguousarray(np.matmul(w2.T, g2))
            grad_xp = np.zeros(xp.shape)
            _conv_kernels.col2im(grad_cols, kh, kw, stride, Ho, Wo, grad_xp)
            if padding > 0:
                grad_xp = grad_xp[:, :, padding:-padding, padding:-padding]
            grads[0] = grad_xp
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return make_result(out, parents, backward_fn, 'conv2d')


def max_pool2d(x, kernel=2, stride=None):
    """Max pooling over non-overlapping windows.

    Trailing rows and columns that do not fill a window are dropped.
    """
    x = as_tensor(x)
    stride = kernel if stride is None else stride
    if stride != kernel:
        raise ShapeError('max_pool2d', 'only stride == kernel is supported, '
                         'got kernel={} stride={}'.format(kernel, stride))
    if x.ndim != 4:
        raise ShapeError('max_pool2d', 'expected 4-d input, got {}'.format(
            x.shape))
    N, C, H, W = x.shape
    Ho, Wo = H // kernel, W // kernel
    if Ho < 1 or Wo < 1:
        raise ShapeError('max_pool2d', 'window {} larger than input {}x{}'
                         .format(kernel, H, W))

    windows = x.data[:, :, :Ho * kernel, :Wo * kernel]
    windows = windows.reshape(N, C, Ho, kernel, Wo, kernel)
    windows = windows.transpose(0, 1, 2, 4, 3, 5).reshape(
        N, C, Ho, Wo, kernel * kernel)
    argmax = windows.argmax(axis=-1)
    out = np.take_along_axis(windows, argmax[..., None], axis=-1)[..., 0]

    def backward_fn(g):
        grad_windows = np.zeros(windows.shape)
        np.put_along_axis(grad_windows, argmax[..., None], g[..., None],
                          axis=-1)
        grad_windows = grad_windows.reshape(N, C, Ho, Wo, kernel, kernel)
        grad_windows = grad_windows.transpose(0, 1, 2, 4, 3, 5).reshape(
            N, C, Ho * kernel, Wo * kernel)
        grad = np.zeros(x.shape)
        grad[:, :, :Ho * kernel, :Wo * kernel] = grad_windows
        return (grad,)

    return make_result(out, (x,), backward_fn, 'max_pool2d')


def global_avg_pool2d(x):
    """Averages each channel over its spatial grid."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError('global_avg_pool2d', 'expected 4-d input, got {}'
                         .format(x.shape))
    return mean(x, axis=(2, 3))


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    out = x.data - logsumexp(x.data, axis=axis, keepdims=True)

    def backward_fn(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (x,), backward_fn, 'log_softmax')


def _check_labels(op, labels, n_rows, n_classes):
    labels = np.asarray(labels)
    if labels.shape != (n_rows,):
        raise ShapeError(op, 'expected {} labels, got shape {}'.format(
            n_rows, labels.shape))
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ValueError('{}: labels must be integers'.format(op))
        labels = labels.astype(int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError('{}: labels must lie in [0, {}), got range [{}, {}]'
                         .format(op, n_classes, labels.min(), labels.max()))
    return labels


def cross_entropy(logits, labels, weights=None):
    """Fused log-softmax and negative log-likelihood.

    Parameters
    ----------
    logits : Tensor, shape (batch, classes)
    labels : array of ints, shape (batch,)
    weights : array or None, shape (batch,)
        Per-sample weights. The result is ``sum(w_i * nll_i) / sum(w_i)``;
        None means uniform weights, i.e. the batch mean.

    Returns
    -------
    loss : Tensor, scalar
    """
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError('cross_entropy', 'expected 2-d logits, got {}'
                         .format(logits.shape))
    N, C = logits.shape
    labels = _check_labels('cross_entropy', labels, N, C)
    if weights is None:
        weights = np.ones(N)
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (N,):
        raise ShapeError('cross_entropy', 'expected {} weights, got shape {}'
                         .format(N, weights.shape))
    norm = weights.sum()
    if not norm > 0:
        raise ValueError('cross_entropy: weights must have a positive sum')

    logp = logits.data - logsumexp(logits.data, axis=1, keepdims=True)
    nll = -logp[np.arange(N), labels]
    out = np.dot(weights, nll) / norm

    def backward_fn(g):
        grad = np.exp(logp)
        grad[np.arange(N), labels] -= 1.0
        return (grad * (weights / norm)[:, None] * g,)

    return make_result(out, (logits,), backward_fn, 'cross_entropy')


def grl(x, lam):
    """Gradient reversal: identity forward, ``-lam * upstream`` backward.

    Parameters
    ----------
    x : Tensor
    lam : float
        Non-negative reversal scale.
    """
    x = as_tensor(x)
    lam = float(lam)
    if not lam >= 0:
        raise ValueError('grl: lambda must be non-negative, got {}'.format(lam))
    return make_result(x.data.copy(), (x,), lambda g: (-lam * g,), 'grl')


OPS = {
    'add': add,
    'sub': sub,
    'mul': mul,
    'neg': neg,
    'power': power,
    'exp': exp,
    'log': log,
    'relu': relu,
    'sum': sum,
    'mean': mean,
    'reshape': reshape,
    'flatten': flatten,
    'matmul': matmul,
    'linear': linear,
    'conv2d': conv2d,
    'max_pool2d': max_pool2d,
    'global_avg_pool2d': global_avg_pool2d,
    'log_softmax': log_softmax,
    'cross_entropy': cross_entropy,
    'grl': grl,
}


def forward_op(op_kind, inputs, attrs=None):
    """Applies the op named ``op_kind`` to ``inputs``.

    Parameters
    ----------
    op_kind : str
        Key of ``OPS``.
    inputs : sequence
        Positional tensor inputs.
    attrs : dict or None
        Keyword attributes of the op (stride, padding, axis, ...).

    Returns
    -------
    out : Tensor
    """
    try:
        fn = OPS[op_kind]
    except KeyError:
        raise ValueError('Unknown op {!r}; expected one of {}'.format(
            op_kind, sorted(OPS)))
    return fn(*inputs, **(attrs or {}))
