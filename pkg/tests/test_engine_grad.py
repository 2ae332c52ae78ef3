"""
Analytic gradients against central differences, op by op and through small networks.
"""
import numpy as np
import pytest

from engine import functions as F
from engine.gradcheck import check_gradients
from engine.tensor import Parameter, Tensor, backward

STEP = 1e-5


def param(rng, *shape, name="p", scale=1.0):
    return Parameter(rng.standard_normal(shape) * scale, name=name)


def assert_ok(result):
    assert result.ok, "\n".join(result.failures[:5])
    assert result.checked > 0


def near_zero(*arrays, margin=10 * STEP):
    return lambda: any(np.any(np.abs(a()) < margin) for a in arrays)


def sign_flip(*arrays):
    """True when any entry of the given arrays has a different sign than at construction time."""
    base = [np.sign(a()) for a in arrays]
    return lambda: any(np.any(np.sign(a()) != s) for a, s in zip(arrays, base))


def pool_tie(x, k, floor=None):
    """True when a max-pool window has its two largest entries (above `floor`) within a few steps."""
    def guard():
        n, c, h, w = x.data.shape
        blocks = x.data.reshape(n, c, h // k, k, w // k, k).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, -1, k * k)
        top = np.sort(blocks, axis=-1)[..., -2:]
        close = top[..., 1] - top[..., 0] < 10 * STEP
        if floor is not None:
            close &= top[..., 1] > floor
        return bool(np.any(close))
    return guard


@pytest.mark.parametrize("stride,pad", [(1, 1), (2, 1), (1, 0)])
def test_conv2d_gradients(stride, pad):
    rng = np.random.default_rng(10 + stride + pad)
    x = param(rng, 2, 3, 6, 6, name="x")
    k = 4 if stride == 2 else 3
    w = param(rng, 4, 3, k, k, name="w")
    b = param(rng, 4, name="b")
    out_shape = F.conv2d(x, w, b, stride=stride, pad=pad).shape
    probe = Tensor(rng.standard_normal(out_shape))

    def loss():
        # weighted sum so every output entry carries a distinct coefficient
        y = F.conv2d(x, w, b, stride=stride, pad=pad)
        return F.tensor_sum(F.reshape(F.dense(F.reshape(y, (1, -1)), F.reshape(probe, (-1, 1)), None), (1,)))

    assert_ok(check_gradients(loss, [x, w, b]))


def test_relu_gradients_away_from_kink():
    rng = np.random.default_rng(1)
    x = param(rng, 4, 5, name="x")
    probe = Tensor(rng.standard_normal((5, 1)))
    result = check_gradients(lambda: F.tensor_sum(F.dense(F.relu(x), probe, None)), [x],
                             kink_guard=near_zero(lambda: x.data))
    assert_ok(result)


@pytest.mark.parametrize("kind", ["max", "avg"])
def test_pool_gradients(kind):
    rng = np.random.default_rng(2)
    x = param(rng, 2, 2, 4, 4, name="x")
    probe = Tensor(rng.standard_normal((8, 1)))

    def loss():
        return F.tensor_sum(F.dense(F.reshape(F.pool2d(x, kind, 2), (2, 8)), probe, None))

    guard = pool_tie(x, 2) if kind == "max" else None
    assert_ok(check_gradients(loss, [x], kink_guard=guard))


def test_dense_and_global_pool_gradients():
    rng = np.random.default_rng(3)
    x = param(rng, 3, 4, 2, 2, name="x")
    w = param(rng, 4, 2, name="w")
    b = param(rng, 2, name="b")
    target = Tensor(np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]))
    loss = lambda: F.softmax_cross_entropy(F.dense(F.global_avg_pool(x), w, b), target)
    assert_ok(check_gradients(loss, [x, w, b]))


def test_softmax_cross_entropy_gradient_is_probs_minus_target():
    logits = Parameter(np.array([[2.0, -1.0], [0.5, 0.5]]), name="logits")
    target = Tensor(np.array([[0.0, 1.0], [1.0, 0.0]]))
    backward(F.softmax_cross_entropy(logits, target))
    expected = (F.softmax(logits.data) - target.data) / 2
    np.testing.assert_allclose(logits.grad, expected, rtol=1e-12)


def test_mean_abs_diff_gradients():
    rng = np.random.default_rng(4)
    a = param(rng, 3, 4, name="a")
    b = param(rng, 3, 4, name="b")
    result = check_gradients(lambda: F.mean_abs_diff(a, b), [a, b],
                             kink_guard=near_zero(lambda: a.data - b.data))
    assert_ok(result)


def test_add_scale_mean_reshape_gradients():
    rng = np.random.default_rng(5)
    a = param(rng, 2, 6, name="a")
    b = param(rng, 2, 6, name="b")
    probe = Tensor(rng.standard_normal((12, 1)))

    def loss():
        mixed = F.add(F.scale(a, 0.3), F.scale(b, -2.0))
        return F.add(F.tensor_mean(F.dense(F.reshape(mixed, (1, 12)), probe, None)), F.tensor_mean(a))

    assert_ok(check_gradients(loss, [a, b]))


def test_gradcheck_rejects_float32():
    x = Parameter(np.ones(3, dtype=np.float32), name="x")
    with pytest.raises(ValueError):
        check_gradients(lambda: F.tensor_sum(x), [x])


def test_gradcheck_reports_a_wrong_gradient():
    x = Parameter(np.array([1.0, 2.0]), name="x")

    class Broken(F.Scale):
        @staticmethod
        def backward(ctx, grad):
            return grad * 2 * ctx.factor, None

    result = check_gradients(lambda: F.tensor_sum(Broken.apply(x, 3.0)), [x])
    assert not result.ok
    assert len(result.failures) == 2


def _conv_relu_pool_net(rng):
    w1 = param(rng, 4, 3, 3, 3, name="w1", scale=0.5)
    b1 = param(rng, 4, name="b1", scale=0.1)
    w2 = param(rng, 16, 2, name="w2", scale=0.5)
    b2 = param(rng, 2, name="b2", scale=0.1)
    x = Tensor(rng.random((2, 3, 4, 4)))
    target = Tensor(np.array([[1.0, 0.0], [0.0, 1.0]]))
    hidden = lambda: F.conv2d(x, w1, b1, pad=1)

    def loss():
        h = F.pool2d(F.relu(hidden()), "max", 2)
        return F.softmax_cross_entropy(F.dense(F.flatten(h), w2, b2), target)

    def guard():
        pre = hidden().data
        if np.any(np.abs(pre) < 10 * STEP):
            return True
        act = np.maximum(pre, 0)
        return pool_tie(Tensor(act), 2, floor=0.0)()

    return loss, [w1, b1, w2, b2], guard


def _residual_net(rng):
    w1 = param(rng, 3, 3, 3, 3, name="w1", scale=0.4)
    w2 = param(rng, 3, 3, 3, 3, name="w2", scale=0.4)
    x = Tensor(rng.random((1, 3, 5, 5)))
    ref = Tensor(rng.random((1, 3, 5, 5)))

    def pre():
        return F.conv2d(x, w1, None, pad=1)

    def loss():
        out = F.add(x, F.conv2d(F.relu(pre()), w2, None, pad=1))
        return F.mean_abs_diff(out, ref)

    def residual():
        return x.data + F.conv2d(F.relu(pre()), w2, None, pad=1).data - ref.data

    # both kinks are piecewise linear in any single weight, so no sign change means no kink crossed
    return loss, [w1, w2], sign_flip(lambda: pre().data, residual)


def _strided_avg_net(rng):
    w1 = param(rng, 2, 3, 4, 4, name="w1", scale=0.3)
    w2 = param(rng, 2, 2, name="w2")
    x = Tensor(rng.random((3, 3, 8, 8)))
    target = Tensor(np.array([[0.0, 1.0], [1.0, 0.0], [0.0, 1.0]]))

    def loss():
        h = F.pool2d(F.conv2d(x, w1, None, stride=2, pad=1), "avg", 2)
        return F.softmax_cross_entropy(F.dense(F.global_avg_pool(h), w2, None), target)

    return loss, [w1, w2], None


@pytest.mark.parametrize("builder", [_conv_relu_pool_net, _residual_net, _strided_avg_net])
def test_micro_network_gradients(builder):
    loss, params, guard = builder(np.random.default_rng(7))
    result = check_gradients(loss, params, kink_guard=guard)
    assert_ok(result)
    assert result.max_rel_error < 1e-4


def test_backward_is_deterministic():
    def grads():
        loss, params, _ = _conv_relu_pool_net(np.random.default_rng(11))
        backward(loss())
        return [p.grad.copy() for p in params]

    for first, second in zip(grads(), grads()):
        assert np.array_equal(first, second)
