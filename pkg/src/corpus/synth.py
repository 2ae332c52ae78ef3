"""
Synthetic "real" and "GAN-like" images.

Both classes share one content model: a coarse low-pass field, a faint
fine-grained texture and a random linear gradient per channel. Real images
render it at full resolution; fakes render it at half resolution and go
through 2x nearest-neighbour upsampling plus a fixed 3x3 smoothing, which
leaves a periodic trace a small CNN can learn. Both then receive the same
Gaussian sensor noise and are clamped to [0, 1].
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from utils.image.filters import blur_per_channel, smooth_3x3

SENSOR_NOISE_SIGMA = 2.0 / 255.0
CONTENT_STD = 0.15
TEXTURE_STD = 0.05
TEXTURE_SIGMA = 0.6
GRADIENT_SLOPE = 0.3

Label = Literal["real", "fake"]
Source = Literal["native", "upsampled"]


@dataclass(frozen=True)
class ImageSample:
    pixels: np.ndarray  # 3 x H x W, float64 in [0, 1]
    label: Label
    source: Source
    seed: int

    @property
    def size(self) -> tuple:
        return self.pixels.shape[1:]


def sample_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _normalized(field: np.ndarray, std: float) -> np.ndarray:
    spread = field.std(axis=(1, 2), keepdims=True)
    return (field - field.mean(axis=(1, 2), keepdims=True)) / np.maximum(spread, 1e-12) * std


def render_content(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Smooth random content, 3 x h x w, roughly centred on a random base colour."""
    base = rng.uniform(0.3, 0.7, size=(3, 1, 1))
    coarse = blur_per_channel(rng.standard_normal((3, h, w)), sigma=max(h, w) / 8.0)
    texture = blur_per_channel(rng.standard_normal((3, h, w)), sigma=TEXTURE_SIGMA)
    slopes = rng.uniform(-GRADIENT_SLOPE, GRADIENT_SLOPE, size=(3, 2))
    ys = (np.arange(h) / max(h - 1, 1) - 0.5)[None, :, None]
    xs = (np.arange(w) / max(w - 1, 1) - 0.5)[None, None, :]
    gradient = slopes[:, 0, None, None] * ys + slopes[:, 1, None, None] * xs
    return base + _normalized(coarse, CONTENT_STD) + _normalized(texture, TEXTURE_STD) + gradient


def add_sensor_noise(pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    noisy = pixels + rng.normal(0.0, SENSOR_NOISE_SIGMA, size=pixels.shape)
    return np.clip(noisy, 0.0, 1.0)


def upsample_nearest(image: np.ndarray, factor: int = 2) -> np.ndarray:
    """C x h x w -> C x (factor*h) x (factor*w) by pixel replication."""
    return np.repeat(np.repeat(image, factor, axis=1), factor, axis=2)


def synth_real(seed: int, h: int, w: int) -> ImageSample:
    if h < 1 or w < 1:
        raise ValueError(f"image extents must be positive, got {h}x{w}")
    rng = sample_rng(seed)
    pixels = add_sensor_noise(render_content(rng, h, w), rng)
    return ImageSample(pixels=pixels, label="real", source="native", seed=int(seed))


def synth_fake(seed: int, h: int, w: int) -> ImageSample:
    """
    Raises:
        ValueError: odd extents (fakes are rendered at half resolution)
    """
    if h < 2 or w < 2 or h % 2 or w % 2:
        raise ValueError(f"fake images need even extents >= 2, got {h}x{w}")
    rng = sample_rng(seed)
    upsampled = upsample_nearest(render_content(rng, h // 2, w // 2))
    pixels = add_sensor_noise(smooth_3x3(upsampled), rng)
    return ImageSample(pixels=pixels, label="fake", source="upsampled", seed=int(seed))
