"""
Anti-forensic generator.

Seven 3x3 / stride-1 / zero-pad-1 convolutions, each followed by ReLU, with
channel plan 3-64-64-64-128-128-128-3 and no pooling or striding; the network
input is added to the last activated layer. The output therefore has the
input's shape for any H, W >= 1, and a generator whose parameters are all zero
is the identity map.
"""
import logging

import numpy as np

from engine import functions as F
from engine.tensor import DEFAULT_DTYPE, Tensor
from models.layers import Conv, Module
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

GENERATOR_CHANNELS = (3, 64, 64, 64, 128, 128, 128, 3)

# radius of the 15 x 15 receptive field of seven stacked 3x3 convs
RECEPTIVE_RADIUS = len(GENERATOR_CHANNELS) - 1


class GeneratorNet(Module):

    def __init__(self, seed: int = 0, final_relu: bool = True, dtype: np.dtype = DEFAULT_DTYPE):
        super().__init__(dtype)
        self.final_relu = final_relu
        self.kind = "generator" if final_relu else "generator-noact"
        rng = make_rng(seed, "generator")
        for i, (cin, cout) in enumerate(zip(GENERATOR_CHANNELS[:-1], GENERATOR_CHANNELS[1:]), start=1):
            self.add_layer(Conv(f"conv{i}", cin, cout, 3, rng, stride=1, pad=1, dtype=self.dtype))

    def forward(self, image: Tensor) -> Tensor:
        """
        Attack a batch N x 3 x H x W. The result is not clamped; clamping
        happens when attacked images are quantized to 8 bits.
        """
        if image.ndim != 4 or image.shape[1] != 3:
            raise ValueError(f"generator expects N x 3 x H x W images, got shape {image.shape}")
        x = self._cast_input(image)
        h = x
        layers = list(self.layers.values())
        for i, layer in enumerate(layers):
            h = layer(h)
            if i < len(layers) - 1 or self.final_relu:
                h = F.relu(h)
        return F.add(x, h)


def build_generator(seed: int = 0, final_relu: bool = True, dtype: np.dtype = DEFAULT_DTYPE) -> GeneratorNet:
    """Xavier-initialized generator with zero biases."""
    g = GeneratorNet(seed=seed, final_relu=final_relu, dtype=dtype)
    logger.debug(f"built {g.kind} with {g.parameter_count()} parameters (seed={seed})")
    return g


def generator_forward(g: GeneratorNet, image: Tensor) -> Tensor:
    return g(image)
