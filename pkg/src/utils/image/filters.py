"""Fixed image filters used by corpus synthesis."""
import numpy as np
from scipy import ndimage

# [1, 2, 1] x [1, 2, 1] / 16
SMOOTH_3X3 = np.outer([1.0, 2.0, 1.0], [1.0, 2.0, 1.0]) / 16.0


def blur_per_channel(image: np.ndarray, sigma: float, mode: str = "reflect") -> np.ndarray:
    """Gaussian blur of a C x H x W array, channels independently."""
    return ndimage.gaussian_filter(image, sigma=(0.0, sigma, sigma), mode=mode)


def smooth_3x3(image: np.ndarray) -> np.ndarray:
    """Apply SMOOTH_3X3 to every channel of a C x H x W array, reflecting at the border."""
    return np.stack([ndimage.correlate(channel, SMOOTH_3X3, mode="reflect") for channel in image])
