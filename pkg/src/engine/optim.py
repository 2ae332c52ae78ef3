"""Plain stochastic gradient descent and Xavier initialization."""
import logging
from typing import Iterable, Sequence, Tuple

import numpy as np

from engine.tensor import DEFAULT_DTYPE, Parameter

logger = logging.getLogger(__name__)


def sgd_step(params: Iterable[Parameter], lr: float) -> None:
    """
    p <- p - lr * grad(p), then zero every gradient accumulator.

    No momentum and no weight decay.

    Raises:
        ValueError: if lr is not positive.
    """
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    for p in params:
        if p.grad is None:
            continue
        p.data -= np.asarray(lr, dtype=p.data.dtype) * p.grad
        p.grad[...] = 0


def halving_schedule(base_lr: float, epoch: int, half_every: int | None) -> float:
    """Learning rate for a zero-based epoch when the rate halves every `half_every` epochs."""
    if not half_every:
        return base_lr
    return base_lr * 0.5 ** (epoch // half_every)


def xavier_bound(fan_in: int, fan_out: int) -> float:
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"xavier fans must be positive, got fan_in={fan_in}, fan_out={fan_out}")
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def xavier_init(shape: Sequence[int], fan_in: int, fan_out: int, rng: np.random.Generator,
                dtype: np.dtype = DEFAULT_DTYPE) -> np.ndarray:
    """Uniform samples on +-sqrt(6 / (fan_in + fan_out))."""
    bound = xavier_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype, copy=False)


def conv_fans(shape: Tuple[int, int, int, int]) -> Tuple[int, int]:
    """fan_in = kh*kw*Cin, fan_out = kh*kw*Cout for a Cout x Cin x kh x kw kernel."""
    cout, cin, kh, kw = shape
    return kh * kw * cin, kh * kw * cout


__all__ = ["conv_fans", "halving_schedule", "sgd_step", "xavier_bound", "xavier_init"]
