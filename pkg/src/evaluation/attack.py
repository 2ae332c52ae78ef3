"""Applying a trained generator to images held in memory or on disk."""
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from tqdm import tqdm

from corpus.png_io import load_png, save_png
from engine.tensor import Tensor, no_grad
from models.generator import RECEPTIVE_RADIUS, GeneratorNet

logger = logging.getLogger(__name__)


def attack_images(generator: GeneratorNet, images: np.ndarray, batch: int = 64) -> np.ndarray:
    """N x 3 x H x W -> attacked float images (not clamped)."""
    if images.ndim != 4:
        raise ValueError(f"expected N x 3 x H x W images, got shape {images.shape}")
    out = np.empty(images.shape, dtype=generator.dtype)
    with no_grad():
        for start in range(0, len(images), batch):
            chunk = Tensor(images[start:start + batch].astype(generator.dtype, copy=False))
            out[start:start + batch] = generator(chunk).data
    return out


def attack_tiled(generator: GeneratorNet, image: np.ndarray, tile: int,
                 margin: int = RECEPTIVE_RADIUS) -> np.ndarray:
    """
    Attack a 3 x H x W image tile by tile. Each tile is run with `margin`
    pixels of surrounding context and only its core is kept, so with a margin
    of at least the generator's receptive radius the result matches attacking
    the whole image at once.
    """
    if tile < 1:
        raise ValueError(f"tile size must be positive, got {tile}")
    if margin < 0:
        raise ValueError(f"margin must be non-negative, got {margin}")
    _, h, w = image.shape
    out = np.empty(image.shape, dtype=generator.dtype)
    with no_grad():
        for top in range(0, h, tile):
            for left in range(0, w, tile):
                bottom, right = min(top + tile, h), min(left + tile, w)
                y0, x0 = max(top - margin, 0), max(left - margin, 0)
                y1, x1 = min(bottom + margin, h), min(right + margin, w)
                window = Tensor(image[None, :, y0:y1, x0:x1].astype(generator.dtype, copy=False))
                attacked = generator(window).data[0]
                out[:, top:bottom, left:right] = attacked[:, top - y0:bottom - y0, left - x0:right - x0]
    return out


def attack_to_png(generator: GeneratorNet, inputs: List[Union[str, Path]], out_dir: Union[str, Path],
                  tile: Optional[int] = None, progress: bool = True) -> List[Path]:
    """Attack each PNG (any size) and write the result under the same file name in `out_dir`."""
    out_dir = Path(out_dir)
    written = []
    for path in tqdm(inputs, desc="attack", unit="img", disable=not progress, leave=False):
        path = Path(path)
        image = load_png(path, dtype=generator.dtype)
        if tile is None:
            attacked = attack_images(generator, image[None])[0]
        else:
            attacked = attack_tiled(generator, image, tile)
        written.append(save_png(attacked, out_dir / path.name))
    logger.info(f"attacked {len(written)} images into {out_dir}")
    return written
