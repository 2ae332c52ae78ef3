"""
8-bit RGB PNG boundary.

Inside the pipeline images are float arrays C x H x W in [0, 1]; on disk they
are 8-bit RGB PNGs. Saving clamps, then quantizes with round-half-up so the
bytes do not depend on the platform's rounding mode.
"""
import logging
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
PNG_COMPRESS_LEVEL = 6
_IHDR_END = 26
_COLOR_TYPE_RGB = 2


def quantize(pixels: np.ndarray) -> np.ndarray:
    """C x H x W floats -> H x W x C uint8, clamped to [0, 1] and rounded half up."""
    if pixels.ndim != 3 or pixels.shape[0] != 3:
        raise ValueError(f"expected a 3 x H x W image, got shape {pixels.shape}")
    scaled = np.floor(np.clip(pixels, 0.0, 1.0) * 255.0 + 0.5)
    return np.ascontiguousarray(scaled.astype(np.uint8).transpose(1, 2, 0))


def to_float(raw: np.ndarray, dtype: np.dtype = np.float64) -> np.ndarray:
    """H x W x C (or N x H x W x C) uint8 -> channels-first floats v / 255."""
    axes = (2, 0, 1) if raw.ndim == 3 else (0, 3, 1, 2)
    return np.ascontiguousarray(raw.transpose(axes).astype(dtype) / 255.0)


def save_png(pixels: np.ndarray, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(quantize(pixels), mode="RGB").save(path, format="PNG", compress_level=PNG_COMPRESS_LEVEL)
    return path


def _check_header(path: Path) -> None:
    with open(path, "rb") as f:
        head = f.read(_IHDR_END)
    if len(head) < _IHDR_END or not head.startswith(PNG_SIGNATURE) or head[12:16] != b"IHDR":
        raise ValueError(f"not a PNG file: {path}")
    bit_depth, color_type = head[24], head[25]
    if bit_depth != 8 or color_type != _COLOR_TYPE_RGB:
        raise ValueError(f"{path} is not an 8-bit RGB PNG (bit depth {bit_depth}, color type {color_type})")


def load_png_uint8(path: Union[str, Path]) -> np.ndarray:
    """
    Raw H x W x 3 bytes of an 8-bit RGB PNG.

    Raises:
        FileNotFoundError: missing file
        ValueError: unreadable, non-8-bit or non-RGB image
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"image not found: {path}")
    _check_header(path)
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "RGB":
                raise ValueError(f"{path} decodes to mode {img.mode}, expected RGB")
            return np.asarray(img, dtype=np.uint8).copy()
    except (OSError, SyntaxError) as e:
        raise ValueError(f"unreadable PNG {path}: {e}") from e


def load_png(path: Union[str, Path], dtype: np.dtype = np.float64) -> np.ndarray:
    """3 x H x W floats in [0, 1]."""
    return to_float(load_png_uint8(path), dtype)


def random_crop(image: np.ndarray, size: int, rng: np.random.Generator) -> Tuple[np.ndarray, Tuple[int, int]]:
    """
    Uniformly placed size x size window of a C x H x W image.

    Returns:
        (crop, (top, left))
    """
    h, w = image.shape[-2:]
    if size < 1 or size > h or size > w:
        raise ValueError(f"crop size {size} does not fit a {h}x{w} image")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return image[..., top:top + size, left:left + size].copy(), (top, left)
