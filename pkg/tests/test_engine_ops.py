"""
Forward semantics of the engine operations, SGD and Xavier initialization.
"""
import math

import numpy as np
import pytest

from engine import functions as F
from engine.optim import halving_schedule, sgd_step, xavier_bound, xavier_init
from engine.tensor import Graph, Parameter, Tensor, backward, no_grad, resolve_dtype


def naive_conv(x, w, b, stride, pad):
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for a in range(n):
        for o in range(cout):
            for i in range(ho):
                for j in range(wo):
                    window = xp[a, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[a, o, i, j] = np.sum(window * w[o]) + (b[o] if b is not None else 0.0)
    return out


@pytest.mark.parametrize("stride,pad,k", [(1, 0, 3), (1, 1, 3), (2, 1, 4), (2, 0, 2), (1, 2, 5)])
def test_conv2d_matches_direct_cross_correlation(stride, pad, k):
    rng = np.random.default_rng(stride * 10 + pad)
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((4, 3, k, k))
    b = rng.standard_normal(4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), stride=stride, pad=pad).data
    np.testing.assert_allclose(out, naive_conv(x, w, b, stride, pad), rtol=1e-12, atol=1e-12)


def test_conv2d_examples():
    """3x3 ones kernel on ones gives 9 inside and 4 at the padded corners."""
    out = F.conv2d(Tensor(np.ones((1, 1, 5, 5))), Tensor(np.ones((1, 1, 3, 3))), None, pad=1).data[0, 0]
    assert out[2, 2] == 9.0
    assert out[0, 0] == 4.0
    identity = np.zeros((1, 1, 3, 3))
    identity[0, 0, 1, 1] = 1.0
    x = np.random.default_rng(0).random((1, 1, 6, 7))
    assert np.array_equal(F.conv2d(Tensor(x), Tensor(identity), None, pad=1).data, x)


def test_conv_shape_algebra_random():
    rng = np.random.default_rng(3)
    checked = 0
    while checked < 30:
        h = int(rng.integers(1, 20))
        k = int(rng.integers(1, 6))
        stride = int(rng.integers(1, 4))
        pad = int(rng.integers(0, 3))
        span = h + 2 * pad - k
        if span < 0 or span % stride:
            with pytest.raises(ValueError):
                F.conv_output_extent(h, k, stride, pad)
            continue
        x = Tensor(rng.standard_normal((1, 2, h, h)))
        out = F.conv2d(x, Tensor(rng.standard_normal((3, 2, k, k))), None, stride=stride, pad=pad)
        assert out.shape == (1, 3, span // stride + 1, span // stride + 1)
        checked += 1


def test_conv2d_rejects_bad_shapes():
    with pytest.raises(ValueError):
        F.conv2d(Tensor(np.ones((1, 3, 8, 8))), Tensor(np.ones((4, 2, 3, 3))), None)
    with pytest.raises(ValueError):
        F.conv2d(Tensor(np.ones((1, 1, 7, 7))), Tensor(np.ones((1, 1, 4, 4))), None, stride=2, pad=1)


def test_relu_forward_and_gradient_at_zero():
    x = Tensor(np.array([-1.0, 0.0, 2.0]), requires_grad=True)
    y = F.relu(x)
    assert np.array_equal(y.data, [0.0, 0.0, 2.0])
    backward(F.tensor_sum(y))
    assert np.array_equal(x.grad, [0.0, 0.0, 1.0])


def test_max_pool_first_maximum_wins():
    x = Tensor(np.array([[[[1.0, 3.0], [3.0, 0.0]]]]), requires_grad=True)
    y = F.pool2d(x, "max", 2)
    assert y.data.item() == 3.0
    backward(F.tensor_sum(y))
    assert np.array_equal(x.grad[0, 0], [[0.0, 1.0], [0.0, 0.0]])


def test_pool_examples_and_errors():
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    assert np.array_equal(F.pool2d(Tensor(x), "avg", 2).data[0, 0], [[2.5, 4.5], [10.5, 12.5]])
    assert np.array_equal(F.pool2d(Tensor(x), "max", 2).data[0, 0], [[5.0, 7.0], [13.0, 15.0]])
    with pytest.raises(ValueError):
        F.pool2d(Tensor(np.ones((1, 1, 5, 5))), "max", 2)
    with pytest.raises(ValueError):
        F.pool2d(Tensor(x), "median", 2)


def test_softmax_cross_entropy_examples():
    target = Tensor(np.array([[1.0, 0.0]]))
    assert F.softmax_cross_entropy(Tensor(np.zeros((1, 2))), target).item() == pytest.approx(math.log(2), abs=1e-12)
    saturated = F.softmax_cross_entropy(Tensor(np.array([[30.0, -30.0]])), target).item()
    assert math.isfinite(saturated) and saturated < 1e-20
    huge = F.softmax_cross_entropy(Tensor(np.array([[-1000.0, 1000.0]])), target).item()
    assert huge == pytest.approx(2000.0)


def test_softmax_cross_entropy_rejects_malformed_targets():
    logits = Tensor(np.zeros((2, 2)))
    for bad in ([[1.0, 1.0], [0.0, 1.0]], [[0.5, 0.5], [1.0, 0.0]], [[1.0, 0.0]]):
        with pytest.raises(ValueError):
            F.softmax_cross_entropy(logits, Tensor(np.array(bad)))


def test_softmax_rows_sum_to_one():
    p = F.softmax(np.random.default_rng(1).standard_normal((50, 2)) * 20)
    assert np.all(np.abs(p.sum(axis=1) - 1.0) < 1e-9)


def test_mean_abs_diff_examples():
    rng = np.random.default_rng(2)
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
    assert F.mean_abs_diff(Tensor(a), Tensor(a)).item() == 0.0
    assert F.mean_abs_diff(Tensor(np.zeros((2, 3))), Tensor(np.full((2, 3), 0.5))).item() == 0.5
    assert F.mean_abs_diff(Tensor(a), Tensor(b)).item() == F.mean_abs_diff(Tensor(b), Tensor(a)).item()
    with pytest.raises(ValueError):
        F.mean_abs_diff(Tensor(np.zeros(3)), Tensor(np.zeros(4)))


def test_backward_simple_losses():
    x = Tensor(np.random.default_rng(4).random((2, 3)) + 0.1, requires_grad=True)
    backward(F.tensor_sum(x))
    assert np.array_equal(x.grad, np.ones((2, 3)))

    x.grad = None
    backward(F.mean_abs_diff(x, Tensor(np.zeros((2, 3)))))
    np.testing.assert_allclose(x.grad, np.full((2, 3), 1 / 6))


def test_backward_rejects_non_scalar_loss():
    x = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError):
        backward(F.scale(x, 2.0))


def test_graph_is_topological_and_shared_nodes_accumulate():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    h = F.scale(x, 3.0)
    loss = F.tensor_sum(F.add(h, h))
    graph = Graph.trace(loss)
    assert [n.fn.__name__ for n in graph] == ["Scale", "Add", "Sum"]
    assert graph.leaves() == [x]
    backward(loss, graph)
    assert np.array_equal(x.grad, [6.0, 6.0])


def test_no_grad_stops_recording():
    w = Parameter(np.ones(3), name="w")
    with no_grad():
        y = F.scale(w, 2.0)
    assert not y.requires_grad and y._node is None
    assert F.scale(w, 2.0).requires_grad


def test_sgd_step_examples():
    p = Parameter(np.array([1.0]), name="p")
    p.grad[...] = 2.0
    sgd_step([p], 0.1)
    assert p.data[0] == pytest.approx(0.8)
    assert p.grad[0] == 0.0

    q = Parameter(np.array([0.3, -0.2]), name="q")
    sgd_step([q], 0.5)
    assert np.array_equal(q.data, [0.3, -0.2])

    a = Parameter(np.array([1.0]), name="a")
    b = Parameter(np.array([1.0]), name="b")
    for _ in range(2):
        a.grad[...] = 4.0
        sgd_step([a], 0.05)
    b.grad[...] = 4.0
    sgd_step([b], 0.1)
    assert a.data[0] == pytest.approx(b.data[0], abs=1e-15)


@pytest.mark.parametrize("lr", [0.0, -0.1])
def test_sgd_step_rejects_non_positive_lr(lr):
    with pytest.raises(ValueError):
        sgd_step([Parameter(np.ones(1), name="p")], lr)


def test_halving_schedule():
    assert [halving_schedule(5e-4, e, 4) for e in (0, 3, 4, 8, 19)] == [5e-4, 5e-4, 2.5e-4, 1.25e-4, 5e-4 / 16]
    assert halving_schedule(1e-4, 31, None) == 1e-4


def test_xavier_first_generator_layer():
    bound = xavier_bound(27, 576)
    assert bound == pytest.approx(0.09975, abs=1e-5)
    w = xavier_init((64, 3, 3, 3), 27, 576, np.random.default_rng(0))
    assert np.all(np.abs(w) <= bound)
    again = xavier_init((64, 3, 3, 3), 27, 576, np.random.default_rng(0))
    assert np.array_equal(w, again)


def test_xavier_sample_mean_and_zero_fans():
    draws = xavier_init((1_000_000,), 27, 576, np.random.default_rng(1))
    assert abs(draws.mean()) < 0.005
    with pytest.raises(ValueError):
        xavier_bound(0, 10)


def test_resolve_dtype():
    assert resolve_dtype("float32") == np.float32
    with pytest.raises(ValueError):
        resolve_dtype("float16")
