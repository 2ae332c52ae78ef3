"""
Generator objective: L_G = alpha * L_p + L_c.

L_p is the mean absolute pixel difference between the input and the attacked
image. L_c is the softmax cross-entropy of a frozen detector's logits against
the "real" class, or a beta-weighted sum of such terms over an ensemble.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from engine import functions as F
from engine.tensor import Tensor
from models.detectors import NUM_CLASSES, REAL, DetectorNet
from training.ensemble import EnsembleSpec


def one_hot(labels: np.ndarray, dtype: np.dtype = np.float64) -> Tensor:
    labels = np.asarray(labels, dtype=np.int64)
    target = np.zeros((len(labels), NUM_CLASSES), dtype=dtype)
    target[np.arange(len(labels)), labels] = 1.0
    return Tensor(target)


def real_targets(n: int, dtype: np.dtype = np.float64) -> Tensor:
    return one_hot(np.full(n, REAL), dtype)


def perceptual_loss(image: Tensor, attacked: Tensor) -> Tensor:
    if image.shape != attacked.shape:
        raise ValueError(f"perceptual loss needs equal shapes, got {image.shape} and {attacked.shape}")
    return F.mean_abs_diff(image, attacked)


def classification_loss_whitebox(victim: DetectorNet, attacked: Tensor) -> Tensor:
    logits = victim(attacked)
    return F.softmax_cross_entropy(logits, real_targets(len(logits.data), logits.dtype))


def classification_loss_ensemble(ensemble: Union[EnsembleSpec, Sequence[DetectorNet]],
                                 beta: Optional[Sequence[float]], attacked: Tensor) -> Tensor:
    """
    sum_s beta_s * L_c(detector_s).

    `ensemble` is an EnsembleSpec or a bare list of detectors; with a spec,
    `beta=None` takes the spec's own weights.

    Raises:
        ValueError: empty ensemble or len(beta) != len(detectors)
    """
    if isinstance(ensemble, EnsembleSpec):
        detectors = ensemble.detectors
        beta = ensemble.beta if beta is None else beta
    else:
        detectors = ensemble
    if beta is None:
        raise ValueError("beta weights are required for a bare list of detectors")
    if not detectors:
        raise ValueError("ensemble loss needs at least one detector")
    if len(beta) != len(detectors):
        raise ValueError(f"{len(beta)} beta weights for {len(detectors)} detectors")
    total = None
    for detector, weight in zip(detectors, beta):
        term = F.scale(classification_loss_whitebox(detector, attacked), float(weight))
        total = term if total is None else F.add(total, term)
    return total


def generator_loss_terms(alpha: float, image: Tensor, attacked: Tensor, classification: Tensor) -> Tuple[Tensor, Tensor]:
    """(L_G, L_p)."""
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    lp = perceptual_loss(image, attacked)
    return F.add(F.scale(lp, float(alpha)), classification), lp


def generator_loss(alpha: float, image: Tensor, attacked: Tensor, classification: Tensor) -> Tensor:
    return generator_loss_terms(alpha, image, attacked, classification)[0]
