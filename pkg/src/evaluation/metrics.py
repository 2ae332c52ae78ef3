"""
Image-quality metrics on 8-bit values.

Both metrics take H x W x C arrays holding 0..255 values (normally the uint8
bytes that end up in the PNGs).
"""
import math
from typing import Iterable, Tuple

import numpy as np
from skimage.metrics import structural_similarity

PEAK = 255.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_C1 = (SSIM_K1 * PEAK) ** 2
SSIM_C2 = (SSIM_K2 * PEAK) ** 2


def _same_shape(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(255^2 / MSE) over all channels; identical images give math.inf."""
    a, b = _same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK ** 2 / mse)


def mean_psnr(values: Iterable[float]) -> Tuple[float, int]:
    """Mean over the finite values and the number of infinite ones left out."""
    values = list(values)
    finite = [v for v in values if math.isfinite(v)]
    inf_count = len(values) - len(finite)
    if not finite:
        return (math.inf if inf_count else math.nan), inf_count
    return float(np.mean(finite)), inf_count


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """
    Structural similarity with an 11 x 11 Gaussian window (sigma 1.5), evaluated
    at every position where the window fits, averaged over positions and then
    over channels.

    Raises:
        ValueError: shape mismatch or an image smaller than the window
    """
    a, b = _same_shape(a, b)
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ValueError(f"image {a.shape[0]}x{a.shape[1]} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    # sigma 1.5 with skimage's fixed truncation gives the 11-tap window; the mean skips a 5 pixel border
    return float(structural_similarity(a, b, data_range=PEAK, channel_axis=-1, gaussian_weights=True,
                                       sigma=SSIM_SIGMA, K1=SSIM_K1, K2=SSIM_K2,
                                       use_sample_covariance=False))
