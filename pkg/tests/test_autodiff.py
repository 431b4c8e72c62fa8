"""Test gradients of the tensor engine against finite differences."""
import pytest
import numpy as np
import itertools

from latentdg.exceptions import GraphError, ShapeError
from latentdg.losses import (LossConfig, adversarial_loss, classification_loss,
                             compute_losses, entropy_loss)
from latentdg.model import Model, ModelConfig
from latentdg.nn import Tensor, backward, forward_op, no_grad
from latentdg.nn import functional as F

fd_step = 1e-5
rtol = 1e-4
atol = 1e-6


def numerical_grad(fn, arrays, index):
    """Central differences of scalar ``fn(*arrays)`` w.r.t. ``arrays[index]``."""
    x = arrays[index]
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        orig = x[i]
        x[i] = orig + fd_step
        plus = fn(*arrays)
        x[i] = orig - fd_step
        minus = fn(*arrays)
        x[i] = orig
        grad[i] = (plus - minus) / (2 * fd_step)
    return grad


def check_gradients(op, arrays, seed):
    """Compares backward against finite differences of ``sum(op * proj)``."""
    rs = np.random.RandomState(seed)
    out_shape = op(*[Tensor(a) for a in arrays]).shape
    proj = rs.randn(*out_shape)

    def scalar(*xs):
        with no_grad():
            return float(np.sum(op(*[Tensor(a) for a in xs]).data * proj))

    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    backward(F.sum(F.mul(op(*tensors), proj)))
    for i, t in enumerate(tensors):
        expected = numerical_grad(scalar, [a.copy() for a in arrays], i)
        np.testing.assert_allclose(t.grad, expected, rtol=rtol, atol=atol)


def _away_from_zero(rs, shape):
    x = rs.randn(*shape)
    return x + 0.1 * np.sign(x)


CASES = {
    'add': (lambda a, b: a + b, [(3, 4), (4,)]),
    'sub': (lambda a, b: a - b, [(3, 1), (3, 4)]),
    'mul': (lambda a, b: a * b, [(2, 3), (2, 3)]),
    'power': (lambda a: a ** 3, [(4,)]),
    'exp': (lambda a: F.exp(a), [(2, 3)]),
    'matmul': (lambda a, b: a @ b, [(3, 4), (4, 2)]),
    'linear': (lambda x, w, b: F.linear(x, w, b), [(3, 4), (5, 4), (5,)]),
    'relu': (lambda a: F.relu(a), [(4, 5)]),
    'mean': (lambda a: F.mean(a, axis=(1, 2)), [(2, 3, 4)]),
    'reshape': (lambda a: F.reshape(a, (6, 2)), [(3, 4)]),
    'log_softmax': (lambda a: F.log_softmax(a, axis=1), [(3, 5)]),
    'global_avg_pool2d': (lambda a: F.global_avg_pool2d(a), [(2, 3, 4, 4)]),
    'max_pool2d': (lambda a: F.max_pool2d(a, 2), [(2, 2, 4, 6)]),
    'conv2d': (lambda x, w, b: F.conv2d(x, w, b, stride=1, padding=1),
               [(2, 3, 5, 5), (4, 3, 3, 3), (4,)]),
    'conv2d_strided': (lambda x, w: F.conv2d(x, w, stride=2, padding=0),
                       [(1, 2, 7, 7), (3, 2, 3, 3)]),
}


@pytest.mark.parametrize(
    "name,seed",
    itertools.product(sorted(CASES), range(20))
)
def test_op_gradients(name, seed):
    op, shapes = CASES[name]
    rs = np.random.RandomState(seed)
    arrays = [_away_from_zero(rs, s) for s in shapes]
    check_gradients(op, arrays, seed)


def test_known_forward_values():
    np.testing.assert_array_equal(
        F.relu(Tensor(np.array([-1.0, 0.0, 2.0]))).data, [0.0, 0.0, 2.0])

    x = np.random.RandomState(0).randn(2, 3, 4, 4)
    identity = np.zeros((3, 3, 1, 1))
    identity[np.arange(3), np.arange(3)] = 1.0
    np.testing.assert_allclose(F.conv2d(Tensor(x), Tensor(identity)).data, x)

    ones = F.conv2d(Tensor(np.ones((1, 1, 5, 5))),
                    Tensor(np.ones((1, 1, 3, 3))))
    assert ones.shape == (1, 1, 3, 3)
    np.testing.assert_array_equal(ones.data, 9.0)


def test_log_gradient():
    rs = np.random.RandomState(0)
    check_gradients(lambda a: F.log(a), [rs.uniform(0.5, 2.0, (3, 3))], 0)


@pytest.mark.parametrize("seed", range(3))
def test_cross_entropy_gradient(seed):
    rs = np.random.RandomState(seed)
    labels = rs.randint(0, 4, size=5)
    weights = rs.uniform(0.5, 2.0, size=5)
    logits = rs.randn(5, 4)

    def fn(x):
        with no_grad():
            return F.cross_entropy(Tensor(x), labels, weights).item()

    t = Tensor(logits, requires_grad=True)
    backward(F.cross_entropy(t, labels, weights))
    expected = numerical_grad(fn, [logits.copy()], 0)
    np.testing.assert_allclose(t.grad, expected, rtol=rtol, atol=atol)


def test_grl_contract():
    rs = np.random.RandomState(0)
    x = rs.randn(4, 3)
    upstream = rs.randn(4, 3)
    lam = 0.37

    t = Tensor(x, requires_grad=True)
    out = F.grl(t, lam)
    assert np.array_equal(out.data, x)

    backward(F.sum(F.mul(out, upstream)))
    assert np.array_equal(t.grad, -lam * upstream)

    with pytest.raises(ValueError):
        F.grl(t, -0.1)


def _tiny_model(seed=0):
    config = ModelConfig(
        conv_blocks=((3, 3, 1, True), (4, 3, 1, True), (5, 3, 1, False)),
        tap_layers=(0, 1), num_classes=3, num_pseudo_domains=2,
        discriminator_hidden=6, image_size=8)
    return Model(config, random_state=seed)


def _extractor_grads(model, loss_fn):
    model.zero_grad()
    backward(loss_fn())
    grads = {p.name: p.grad.copy()
             for p in model.parameters('feature_extractor')}
    model.zero_grad()
    return grads


@pytest.mark.parametrize("lam", [0.0, 0.3, 0.9])
def test_composed_objective_matches_termwise_gradients(lam):
    rs = np.random.RandomState(1)
    model = _tiny_model()
    x = rs.randn(6, 3, 8, 8)
    y = rs.randint(0, 3, size=6)
    d = np.array([0, 0, 0, 0, 1, 1])
    sizes = np.array([40, 10])
    config = LossConfig()

    def composed():
        feats, _ = model.extract(x)
        total, _ = compute_losses(model.classify(feats), y, lam, config,
                                  model.discriminate(feats, lam), d, sizes)
        return total

    def cls():
        feats, _ = model.extract(x)
        return classification_loss(model.classify(feats), y)

    def ent():
        feats, _ = model.extract(x)
        return entropy_loss(model.classify(feats))

    def adv():
        feats, _ = model.extract(x)
        return adversarial_loss(model.discriminate(feats), d, sizes)

    g_total = _extractor_grads(model, composed)
    g_cls = _extractor_grads(model, cls)
    g_ent = _extractor_grads(model, ent)
    g_adv = _extractor_grads(model, adv)
    for name in g_total:
        expected = g_cls[name] + lam * g_ent[name] - lam * g_adv[name]
        np.testing.assert_allclose(g_total[name], expected, rtol=1e-7,
                                   atol=1e-9)


def test_gradient_routing_between_heads():
    rs = np.random.RandomState(4)
    model = _tiny_model(seed=1)
    x = rs.randn(4, 3, 8, 8)
    y = np.array([0, 1, 2, 0])
    d = np.array([0, 1, 1, 0])
    sizes = np.array([2, 2])

    feats, _ = model.extract(x)
    backward(adversarial_loss(model.discriminate(feats, 0.5), d, sizes))
    assert all(p.grad is None for p in model.parameters('classifier'))
    assert all(p.grad is not None
               for p in model.parameters('discriminator'))
    assert all(p.grad is not None
               for p in model.parameters('feature_extractor'))

    model.zero_grad()
    feats, _ = model.extract(x)
    backward(classification_loss(model.classify(feats), y))
    assert all(p.grad is None for p in model.parameters('discriminator'))
    assert all(p.grad is not None for p in model.parameters('classifier'))


def test_composed_objective_finite_differences():
    rs = np.random.RandomState(2)
    model = _tiny_model(seed=3)
    x = rs.randn(4, 3, 8, 8)
    y = np.array([0, 1, 2, 1])
    d = np.array([0, 1, 1, 0])
    sizes = np.array([5, 7])
    lam = 0.5

    # Without the reversal the objective is a plain sum whose gradient
    # can be checked numerically.
    def objective():
        feats, _ = model.extract(x)
        logits = model.classify(feats)
        return (classification_loss(logits, y) + lam * entropy_loss(logits)
                + adversarial_loss(model.discriminate(feats), d, sizes))

    weight = model.classifier.weight
    model.zero_grad()
    backward(objective())
    analytic = weight.grad.copy()

    def fn(w):
        weight.data = w
        with no_grad():
            return objective().item()

    original = weight.data.copy()
    expected = numerical_grad(fn, [original.copy()], 0)
    weight.data = original
    np.testing.assert_allclose(analytic, expected, rtol=rtol, atol=atol)


def test_backward_consumes_graph():
    t = Tensor(np.ones(3), requires_grad=True)
    loss = F.sum(t * 2.0)
    backward(loss)
    np.testing.assert_array_equal(t.grad, 2 * np.ones(3))
    with pytest.raises(GraphError):
        backward(loss)


def test_shared_subgraph_backward_is_atomic():
    t = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    u = Tensor(np.array([0.5, 0.5]), requires_grad=True)
    shared = t * 2.0
    first = F.sum(shared * shared)
    second = F.sum(u * 3.0 + shared)
    backward(first)
    np.testing.assert_allclose(t.grad, [8.0, -16.0])

    with pytest.raises(GraphError) as err:
        backward(second)
    assert 'mul' in str(err.value)
    assert u.grad is None
    np.testing.assert_allclose(t.grad, [8.0, -16.0])


def test_backward_errors():
    t = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(GraphError):
        backward(t * 2.0)
    with pytest.raises(GraphError):
        backward(F.sum(Tensor(np.ones(3))))
    with pytest.raises(GraphError):
        backward(np.ones(1))


def test_gradients_accumulate():
    t = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    backward(F.sum(t * t))
    backward(F.sum(t * 3.0))
    np.testing.assert_allclose(t.grad, [5.0, 7.0])


def test_no_grad_records_nothing():
    t = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        out = t * 2.0
    assert not out.requires_grad
    assert out.node is None


def test_shape_errors():
    x = Tensor(np.zeros((1, 3, 5, 5)))
    w = Tensor(np.zeros((2, 4, 3, 3)))
    with pytest.raises(ShapeError) as err:
        F.conv2d(x, w)
    assert 'channels' in str(err.value)
    with pytest.raises(ShapeError):
        F.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))
    with pytest.raises(ShapeError):
        F.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_cross_entropy_rejects_bad_labels():
    with pytest.raises(ValueError):
        F.cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))


def test_forward_op_dispatch():
    a = Tensor(np.array([1.0, -2.0]))
    np.testing.assert_array_equal(forward_op('relu', [a]).data, [1.0, 0.0])
    out = forward_op('sum', [a], {'axis': 0})
    assert out.item() == -1.0
    with pytest.raises(ValueError):
        forward_op('softplus', [a])
