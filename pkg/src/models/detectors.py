"""
Detector zoo: four small real-vs-fake classifiers with distinct inductive biases.

Every detector takes a fixed 64 x 64 RGB input and emits two logits over the
classes {fake = 0, real = 1}.

    plainnet   3 x (conv3x3 -> ReLU -> maxpool2), 16/32/64 channels, global average, dense
    resmini    conv5x5 stem, two strided residual blocks (16->32->64), global average, dense
    hipassnet  fixed high-pass filter bank (no padding), then the plainnet body
    stridenet  3 x (conv4x4 stride 2 -> ReLU), 16/32/64 channels, flatten, dense
"""
import logging
from contextlib import contextmanager
from typing import Callable, Dict, Iterable, Iterator, List

import numpy as np

from engine import functions as F
from engine.tensor import DEFAULT_DTYPE, Tensor
from models.layers import Conv, FixedConv, Linear, Module, restore_trainable, set_trainable
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

FAKE = 0
REAL = 1
NUM_CLASSES = 2

INPUT_SIZE = 64
BODY_CHANNELS = (16, 32, 64)


def highpass_bank(dtype: np.dtype = DEFAULT_DTYPE) -> np.ndarray:
    """
    9 x 3 x 3 x 3 bank: three zero-sum kernels applied to each colour channel
    separately (4- and 8-neighbour Laplacians and the second-order cross kernel).
    """
    kernels = [
        np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], dtype=np.float64) / 4.0,
        np.array([[-1, -1, -1], [-1, 8, -1], [-1, -1, -1]], dtype=np.float64) / 8.0,
        np.array([[1, -2, 1], [-2, 4, -2], [1, -2, 1]], dtype=np.float64) / 4.0,
    ]
    bank = np.zeros((3 * len(kernels), 3, 3, 3), dtype=np.float64)
    for c in range(3):
        for j, kernel in enumerate(kernels):
            bank[c * len(kernels) + j, c] = kernel
    return bank.astype(dtype)


class DetectorNet(Module):
    input_size = INPUT_SIZE

    def __init__(self, seed: int = 0, dtype: np.dtype = DEFAULT_DTYPE):
        super().__init__(dtype)
        self.seed = seed
        self._rng = make_rng(seed, "detector", self.kind)
        self.build()
        del self._rng

    def build(self) -> None:
        raise NotImplementedError

    def conv(self, name: str, cin: int, cout: int, k: int, stride: int = 1, pad: int = 0) -> Conv:
        return self.add_layer(Conv(name, cin, cout, k, self._rng, stride=stride, pad=pad, dtype=self.dtype))

    def linear(self, name: str, fin: int, fout: int) -> Linear:
        return self.add_layer(Linear(name, fin, fout, self._rng, dtype=self.dtype))

    def check_input(self, image: Tensor) -> None:
        expected = (3, self.input_size, self.input_size)
        if image.ndim != 4 or tuple(image.shape[1:]) != expected:
            raise ValueError(f"{self.kind} expects N x {expected[0]} x {expected[1]} x {expected[2]} input, "
                             f"got shape {image.shape}; crop larger images first")

    def forward(self, image: Tensor) -> Tensor:
        self.check_input(image)
        return self.logits(self._cast_input(image))

    def logits(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class PlainNet(DetectorNet):
    kind = "plainnet"
    first_in = 3
    first_pad = 1

    def build(self) -> None:
        cin = self.first_in
        for i, cout in enumerate(BODY_CHANNELS, start=1):
            self.conv(f"conv{i}", cin, cout, 3, pad=self.first_pad if i == 1 else 1)
            cin = cout
        self.linear("fc", cin, NUM_CLASSES)

    def body(self, x: Tensor) -> Tensor:
        for i in range(1, len(BODY_CHANNELS) + 1):
            x = F.pool2d(F.relu(self.layers[f"conv{i}"](x)), "max", 2)
        return self.layers["fc"](F.global_avg_pool(x))

    def logits(self, x: Tensor) -> Tensor:
        return self.body(x)


class HipassNet(PlainNet):
    kind = "hipassnet"
    first_in = 9
    # the valid-mode filter bank trims one pixel per side; pad 2 restores 64
    first_pad = 2

    def build(self) -> None:
        self.highpass = FixedConv("highpass", highpass_bank(self.dtype), stride=1, pad=0, dtype=self.dtype)
        super().build()

    def logits(self, x: Tensor) -> Tensor:
        return self.body(self.highpass(x))


class ResMini(DetectorNet):
    kind = "resmini"

    def build(self) -> None:
        self.conv("stem", 3, BODY_CHANNELS[0], 5, pad=2)
        for i, (cin, cout) in enumerate(zip(BODY_CHANNELS[:-1], BODY_CHANNELS[1:]), start=1):
            self.conv(f"block{i}.conv1", cin, cout, 4, stride=2, pad=1)
            self.conv(f"block{i}.conv2", cout, cout, 3, pad=1)
            self.conv(f"block{i}.shortcut", cin, cout, 2, stride=2, pad=0)
        self.linear("fc", BODY_CHANNELS[-1], NUM_CLASSES)

    def logits(self, x: Tensor) -> Tensor:
        h = F.relu(self.layers["stem"](x))
        for i in range(1, len(BODY_CHANNELS)):
            r = self.layers[f"block{i}.conv2"](F.relu(self.layers[f"block{i}.conv1"](h)))
            h = F.relu(F.add(r, self.layers[f"block{i}.shortcut"](h)))
        return self.layers["fc"](F.global_avg_pool(h))


class StrideNet(DetectorNet):
    kind = "stridenet"

    def build(self) -> None:
        cin = 3
        for i, cout in enumerate(BODY_CHANNELS, start=1):
            self.conv(f"conv{i}", cin, cout, 4, stride=2, pad=1)
            cin = cout
        side = self.input_size // 2 ** len(BODY_CHANNELS)
        self.linear("fc", cin * side * side, NUM_CLASSES)

    def logits(self, x: Tensor) -> Tensor:
        for i in range(1, len(BODY_CHANNELS) + 1):
            x = F.relu(self.layers[f"conv{i}"](x))
        return self.layers["fc"](F.flatten(x))


DETECTOR_REGISTRY: Dict[str, Callable[..., DetectorNet]] = {
    cls.kind: cls for cls in (PlainNet, ResMini, HipassNet, StrideNet)
}


def build_detector(kind: str, seed: int = 0, dtype: np.dtype = DEFAULT_DTYPE) -> DetectorNet:
    """
    Xavier-initialized detector of the given kind with zero biases.

    Raises:
        KeyError: unknown kind
    """
    try:
        factory = DETECTOR_REGISTRY[kind]
    except KeyError:
        raise KeyError(f"unknown detector kind '{kind}', expected one of {sorted(DETECTOR_REGISTRY)}") from None
    d = factory(seed=seed, dtype=dtype)
    logger.debug(f"built {kind} with {d.parameter_count()} parameters (seed={seed})")
    return d


def detector_forward(d: DetectorNet, image: Tensor) -> Tensor:
    return d(image)


@contextmanager
def freeze(models: Iterable[Module]) -> Iterator[List[Module]]:
    """Disable parameter gradients for the duration of the block, then restore the previous flags."""
    models = list(models)
    previous = set_trainable(models, False)
    try:
        yield models
    finally:
        restore_trainable(previous)
