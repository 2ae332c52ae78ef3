"""
Differentiable operations used by the generator, the detector zoo and the losses.

Images are laid out N x C x H x W. Convolutions and pooling are computed as a
sum over kernel offsets of strided slices, each offset contributing one GEMM;
the offset order is fixed so results are reproducible run to run.
"""
from typing import Optional, Tuple

import numpy as np

from engine.tensor import Function, Node, Tensor


def conv_output_extent(size: int, kernel: int, stride: int, pad: int) -> int:
    """Output extent of a padded, strided window; the division has to be exact."""
    span = size + 2 * pad - kernel
    if span < 0:
        raise ValueError(f"kernel {kernel} larger than padded extent {size + 2 * pad}")
    if span % stride:
        raise ValueError(f"extent {size} with kernel {kernel}, pad {pad}, stride {stride} "
                         f"does not tile exactly ({size + 2 * pad - kernel} not divisible by {stride})")
    return span // stride + 1


def _require_rank(name: str, arr: np.ndarray, rank: int) -> None:
    if arr.ndim != rank:
        raise ValueError(f"{name} must have rank {rank}, got shape {arr.shape}")


class Conv2d(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray],
                stride: int, pad: int) -> np.ndarray:
        _require_rank("conv2d input", x, 4)
        _require_rank("conv2d weight", w, 4)
        if stride < 1:
            raise ValueError(f"conv2d stride must be positive, got {stride}")
        if pad < 0:
            raise ValueError(f"conv2d pad must be non-negative, got {pad}")
        n, cin, h, wd = x.shape
        cout, wcin, kh, kw = w.shape
        if wcin != cin:
            raise ValueError(f"conv2d weight expects {wcin} input channels, input has {cin} "
                             f"(input {x.shape}, weight {w.shape})")
        if b is not None and b.shape != (cout,):
            raise ValueError(f"conv2d bias must have shape ({cout},), got {b.shape}")
        ho = conv_output_extent(h, kh, stride, pad)
        wo = conv_output_extent(wd, kw, stride, pad)

        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        # channels-last copy so every offset slice feeds a plain matmul
        xt = np.ascontiguousarray(xp.transpose(0, 2, 3, 1))
        out = np.zeros((n, ho, wo, cout), dtype=np.result_type(x, w))
        for i in range(kh):
            for j in range(kw):
                patch = xt[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride, :]
                out += patch @ w[:, :, i, j].T
        if b is not None:
            out += b
        ctx.save(xt=xt, w=w, stride=stride, pad=pad, in_shape=x.shape, out_hw=(ho, wo),
                 has_bias=b is not None)
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        xt, w, stride, pad = ctx.xt, ctx.w, ctx.stride, ctx.pad
        n, cin, h, wd = ctx.in_shape
        cout, _, kh, kw = w.shape
        ho, wo = ctx.out_hw
        need_x, need_w, need_b = ctx.needs_input_grad[:3]

        g = np.ascontiguousarray(grad.transpose(0, 2, 3, 1))
        g2 = g.reshape(-1, cout)
        dxt = np.zeros_like(xt) if need_x else None
        dw = np.zeros_like(w) if need_w else None
        for i in range(kh):
            for j in range(kw):
                rows = slice(i, i + stride * (ho - 1) + 1, stride)
                cols = slice(j, j + stride * (wo - 1) + 1, stride)
                if need_w:
                    patch = xt[:, rows, cols, :].reshape(-1, cin)
                    dw[:, :, i, j] = g2.T @ patch
                if need_x:
                    dxt[:, rows, cols, :] += g @ w[:, :, i, j]
        dx = None
        if need_x:
            dx = dxt.transpose(0, 3, 1, 2)
            if pad:
                dx = dx[:, :, pad:pad + h, pad:pad + wd]
            dx = np.ascontiguousarray(dx)
        db = g2.sum(axis=0) if (need_b and ctx.has_bias) else None
        return dx, dw, db, None, None


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor], stride: int = 1, pad: int = 0) -> Tensor:
    """
    2-D cross-correlation with zero padding of width `pad` on all four sides.

    Args:
        x: N x Cin x H x W input
        weight: Cout x Cin x kh x kw kernel (not flipped)
        bias: Cout bias, or None for no bias
        stride: positive step between windows
        pad: zero padding width

    Returns:
        N x Cout x H' x W' with H' = (H + 2*pad - kh) / stride + 1

    Raises:
        ValueError: on mismatched shapes or when the output extent is not exact.
    """
    return Conv2d.apply(x, weight, bias, int(stride), int(pad))


class ReLU(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray) -> np.ndarray:
        mask = x > 0
        ctx.save(mask=mask)
        return np.where(mask, x, 0).astype(x.dtype, copy=False)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (grad * ctx.mask,)


def relu(x: Tensor) -> Tensor:
    """Elementwise max(x, 0); the gradient at exactly 0 is 0."""
    return ReLU.apply(x)


POOL_KINDS = ("max", "avg")


class Pool2d(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray, kind: str, k: int, stride: int) -> np.ndarray:
        _require_rank("pool2d input", x, 4)
        if kind not in POOL_KINDS:
            raise ValueError(f"pool kind must be one of {POOL_KINDS}, got '{kind}'")
        if k < 1 or stride < 1:
            raise ValueError(f"pool window and stride must be positive, got k={k}, stride={stride}")
        n, c, h, w = x.shape
        ho = conv_output_extent(h, k, stride, 0)
        wo = conv_output_extent(w, k, stride, 0)

        def window(i: int, j: int) -> np.ndarray:
            return x[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]

        if kind == "avg":
            out = np.zeros((n, c, ho, wo), dtype=x.dtype)
            for i in range(k):
                for j in range(k):
                    out += window(i, j)
            out /= k * k
            argmax = None
        else:
            out = window(0, 0).copy()
            argmax = np.zeros(out.shape, dtype=np.int32)
            for i in range(k):
                for j in range(k):
                    if i == 0 and j == 0:
                        continue
                    cand = window(i, j)
                    better = cand > out  # first maximum wins on ties
                    out = np.where(better, cand, out)
                    argmax[better] = i * k + j
        ctx.save(kind=kind, k=k, stride=stride, in_shape=x.shape, out_hw=(ho, wo), argmax=argmax)
        return out

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        k, stride = ctx.k, ctx.stride
        ho, wo = ctx.out_hw
        dx = np.zeros(ctx.in_shape, dtype=grad.dtype)
        for i in range(k):
            for j in range(k):
                target = dx[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
                if ctx.kind == "avg":
                    target += grad / (k * k)
                else:
                    target += grad * (ctx.argmax == i * k + j)
        return dx, None, None, None


def pool2d(x: Tensor, kind: str, k: int, stride: Optional[int] = None) -> Tensor:
    """Max or mean over k x k windows; extents must tile exactly."""
    return Pool2d.apply(x, kind, int(k), int(stride if stride is not None else k))


class GlobalAvgPool(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray) -> np.ndarray:
        _require_rank("global_avg_pool input", x, 4)
        ctx.save(in_shape=x.shape)
        return x.mean(axis=(2, 3))

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray]:
        n, c, h, w = ctx.in_shape
        return (np.broadcast_to(grad[:, :, None, None] / (h * w), ctx.in_shape).copy(),)


def global_avg_pool(x: Tensor) -> Tensor:
    """N x C x H x W -> N x C spatial mean."""
    return GlobalAvgPool.apply(x)


class Dense(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray]) -> np.ndarray:
        _require_rank("dense input", x, 2)
        _require_rank("dense weight", w, 2)
        if x.shape[1] != w.shape[0]:
            raise ValueError(f"dense inner extents disagree: input {x.shape}, weight {w.shape}")
        if b is not None and b.shape != (w.shape[1],):
            raise ValueError(f"dense bias must have shape ({w.shape[1]},), got {b.shape}")
        ctx.save(x=x, w=w, has_bias=b is not None)
        out = x @ w
        if b is not None:
            out = out + b
        return out

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        need_x, need_w, need_b = ctx.needs_input_grad
        dx = grad @ ctx.w.T if need_x else None
        dw = ctx.x.T @ grad if need_w else None
        db = grad.sum(axis=0) if (need_b and ctx.has_bias) else None
        return dx, dw, db


def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor]) -> Tensor:
    """Affine map x @ W + b for x of shape N x F and W of shape F x K."""
    return Dense.apply(x, weight, bias)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with the row maximum subtracted first."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_one_hot(target: np.ndarray, shape: Tuple[int, ...]) -> None:
    if target.shape != shape:
        raise ValueError(f"target shape {target.shape} does not match logits {shape}")
    if not np.all((target == 0) | (target == 1)) or not np.all(target.sum(axis=1) == 1):
        raise ValueError("target must be one-hot: exactly one 1 per row, zeros elsewhere")


class SoftmaxCrossEntropy(Function):

    @staticmethod
    def forward(ctx: Node, logits: np.ndarray, target: np.ndarray) -> np.ndarray:
        _require_rank("logits", logits, 2)
        _check_one_hot(target, logits.shape)
        z = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
        log_p = z - log_norm
        n = logits.shape[0]
        ctx.save(probs=np.exp(log_p), target=target, n=n)
        return np.asarray(-(target * log_p).sum() / n, dtype=logits.dtype)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        d = (ctx.probs - ctx.target) * (grad / ctx.n)
        return d.astype(ctx.probs.dtype, copy=False), None


def softmax_cross_entropy(logits: Tensor, target: Tensor) -> Tensor:
    """Batch-mean of -sum_k t_k log softmax(logits)_k for one-hot targets."""
    return SoftmaxCrossEntropy.apply(logits, target)


class MeanAbsDiff(Function):

    @staticmethod
    def forward(ctx: Node, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.shape != b.shape:
            raise ValueError(f"mean_abs_diff shapes differ: {a.shape} vs {b.shape}")
        diff = a - b
        ctx.save(sign=np.sign(diff), n=diff.size)
        return np.asarray(np.abs(diff).sum() / diff.size, dtype=diff.dtype)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        d = ctx.sign * (grad / ctx.n)
        need_a, need_b = ctx.needs_input_grad
        return (d if need_a else None), (-d if need_b else None)


def mean_abs_diff(a: Tensor, b: Tensor) -> Tensor:
    """(1/N) * sum |a - b| over every scalar entry; subgradient 0 where a == b."""
    return MeanAbsDiff.apply(a, b)


class Add(Function):

    @staticmethod
    def forward(ctx: Node, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.shape != b.shape:
            raise ValueError(f"add shapes differ: {a.shape} vs {b.shape}")
        return a + b

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return grad, grad


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


class Scale(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray, factor: float) -> np.ndarray:
        ctx.save(factor=factor)
        return (x * factor).astype(x.dtype, copy=False)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray, None]:
        return (grad * ctx.factor).astype(grad.dtype, copy=False), None


def scale(x: Tensor, factor: float) -> Tensor:
    return Scale.apply(x, float(factor))


class Sum(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray) -> np.ndarray:
        ctx.save(in_shape=x.shape)
        return np.asarray(x.sum(), dtype=x.dtype)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.full(ctx.in_shape, grad, dtype=grad.dtype),)


def tensor_sum(x: Tensor) -> Tensor:
    return Sum.apply(x)


class Mean(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray) -> np.ndarray:
        ctx.save(in_shape=x.shape, n=x.size)
        return np.asarray(x.sum() / x.size, dtype=x.dtype)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray]:
        return (np.full(ctx.in_shape, grad / ctx.n, dtype=grad.dtype),)


def tensor_mean(x: Tensor) -> Tensor:
    return Mean.apply(x)


class Reshape(Function):

    @staticmethod
    def forward(ctx: Node, x: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        ctx.save(in_shape=x.shape)
        return x.reshape(shape)

    @staticmethod
    def backward(ctx: Node, grad: np.ndarray) -> Tuple[np.ndarray, None]:
        return grad.reshape(ctx.in_shape), None


def reshape(x: Tensor, shape: Tuple[int, ...]) -> Tensor:
    return Reshape.apply(x, tuple(int(s) for s in shape))


def flatten(x: Tensor) -> Tensor:
    """N x ... -> N x F."""
    return reshape(x, (x.shape[0], -1))


__all__ = [
    "POOL_KINDS",
    "add",
    "conv2d",
    "conv_output_extent",
    "dense",
    "flatten",
    "global_avg_pool",
    "mean_abs_diff",
    "pool2d",
    "relu",
    "reshape",
    "scale",
    "softmax",
    "softmax_cross_entropy",
    "tensor_mean",
    "tensor_sum",
]
