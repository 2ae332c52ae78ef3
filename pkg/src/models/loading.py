from pathlib import Path
from typing import Union

import numpy as np

from engine.tensor import DEFAULT_DTYPE
from models.checkpoint import load_checkpoint, read_checkpoint
from models.detectors import DETECTOR_REGISTRY, build_detector
from models.generator import build_generator
from models.layers import Module


def load_model(path: Union[str, Path], dtype: np.dtype = DEFAULT_DTYPE) -> Module:
    """Build the model named by a checkpoint's kind tag and fill it from the file."""
    kind = read_checkpoint(path).kind
    if kind in ("generator", "generator-noact"):
        model: Module = build_generator(final_relu=kind == "generator", dtype=dtype)
    elif kind in DETECTOR_REGISTRY:
        model = build_detector(kind, dtype=dtype)
    else:
        raise KeyError(f"checkpoint {path} has unknown model kind '{kind}'")
    return load_checkpoint(path, model)
