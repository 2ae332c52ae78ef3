"""Parameter-holding building blocks shared by the generator and the detector zoo."""
import copy
from typing import Dict, Iterator, List, Tuple

import numpy as np

from engine import functions as F
from engine.optim import conv_fans, xavier_init
from engine.tensor import DEFAULT_DTYPE, Parameter, Tensor


class Module:
    """Ordered collection of named layers; parameter names are `<layer>.<weight|bias>`."""

    kind: str = "module"

    def __init__(self, dtype: np.dtype = DEFAULT_DTYPE):
        self.dtype = np.dtype(dtype)
        self.layers: Dict[str, "Layer"] = {}

    def add_layer(self, layer: "Layer") -> "Layer":
        if layer.name in self.layers:
            raise ValueError(f"duplicate layer name '{layer.name}' in {self.kind}")
        self.layers[layer.name] = layer
        return layer

    def named_parameters(self) -> List[Tuple[str, Parameter]]:
        return [(p.name, p) for layer in self.layers.values() for p in layer.parameters()]

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def zero_parameters(self) -> "Module":
        for p in self.parameters():
            p.data[...] = 0
        return self

    def clone(self) -> "Module":
        return copy.deepcopy(self)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Copies of every parameter value, keyed by name."""
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def _cast_input(self, image: Tensor) -> Tensor:
        if image.dtype == self.dtype:
            return image
        return Tensor(image.data.astype(self.dtype), requires_grad=image.requires_grad)

    def forward(self, image: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, image: Tensor) -> Tensor:
        return self.forward(image)


class Layer:

    def __init__(self, name: str):
        self.name = name

    def parameters(self) -> Iterator[Parameter]:
        return iter(())


class Conv(Layer):
    """Conv layer with Xavier-uniform weights and zero biases."""

    def __init__(self, name: str, cin: int, cout: int, k: int, rng: np.random.Generator,
                 stride: int = 1, pad: int = 0, dtype: np.dtype = DEFAULT_DTYPE):
        super().__init__(name)
        shape = (cout, cin, k, k)
        fan_in, fan_out = conv_fans(shape)
        self.weight = Parameter(xavier_init(shape, fan_in, fan_out, rng, dtype), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(cout, dtype=dtype), name=f"{name}.bias")
        self.stride = stride
        self.pad = pad

    def parameters(self) -> Iterator[Parameter]:
        yield self.weight
        yield self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.pad)


class FixedConv(Layer):
    """Convolution with a constant, non-trainable kernel and no bias."""

    def __init__(self, name: str, kernel: np.ndarray, stride: int = 1, pad: int = 0,
                 dtype: np.dtype = DEFAULT_DTYPE):
        super().__init__(name)
        self.kernel = Tensor(np.asarray(kernel, dtype=dtype), name=f"{name}.kernel")
        self.stride = stride
        self.pad = pad

    def __call__(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.kernel, None, self.stride, self.pad)


class Linear(Layer):

    def __init__(self, name: str, fin: int, fout: int, rng: np.random.Generator,
                 dtype: np.dtype = DEFAULT_DTYPE):
        super().__init__(name)
        self.weight = Parameter(xavier_init((fin, fout), fin, fout, rng, dtype), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(fout, dtype=dtype), name=f"{name}.bias")

    def parameters(self) -> Iterator[Parameter]:
        yield self.weight
        yield self.bias

    def __call__(self, x: Tensor) -> Tensor:
        return F.dense(x, self.weight, self.bias)


def set_trainable(modules: List[Module], trainable: bool) -> List[Tuple[Parameter, bool]]:
    """Flip requires_grad on every parameter; returns the previous flags for restoring."""
    previous = []
    for module in modules:
        for p in module.parameters():
            previous.append((p, p.requires_grad))
            p.requires_grad = trainable
    return previous


def restore_trainable(previous: List[Tuple[Parameter, bool]]) -> None:
    for p, flag in previous:
        p.requires_grad = flag
