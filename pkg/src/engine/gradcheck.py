"""
Central finite-difference gradient checks.

Used by the test suite and by `main.py selfcheck`. Checks run in float64.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Sequence

import numpy as np

from engine.tensor import Tensor, backward

logger = logging.getLogger(__name__)


@dataclass
class GradCheckResult:
    max_rel_error: float = 0.0
    checked: int = 0
    skipped: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_gradients(loss_fn: Callable[[], Tensor], tensors: Sequence[Tensor], step: float = 1e-5,
                    tol: float = 1e-4, max_entries: int | None = None,
                    kink_guard: Callable[[], bool] | None = None,
                    rng: np.random.Generator | None = None) -> GradCheckResult:
    """
    Compare analytic gradients of `loss_fn()` against central differences.

    Args:
        loss_fn: rebuilds the scalar loss from the current tensor values
        tensors: leaves to perturb; their `.grad` is overwritten
        step: finite-difference step
        tol: accepted relative error
        max_entries: check a random subset of this many entries per tensor
        kink_guard: returns True when the current point sits within a
            tolerance of a ReLU / absolute-value kink; such entries are skipped
        rng: generator used to pick the subset

    Returns:
        GradCheckResult with the worst relative error seen.
    """
    for t in tensors:
        if t.data.dtype != np.float64:
            raise ValueError(f"gradient checks need float64 tensors, got {t.data.dtype}")
        t.grad = np.zeros_like(t.data)
    loss = loss_fn()
    backward(loss)
    result = GradCheckResult()
    rng = rng or np.random.default_rng(0)

    for ti, t in enumerate(tensors):
        analytic = t.grad.copy()
        flat = t.data.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            indices = rng.choice(flat.size, size=max_entries, replace=False)
        for idx in indices:
            orig = flat[idx]
            flat[idx] = orig + step
            plus = loss_fn().item()
            flat[idx] = orig - step
            minus = loss_fn().item()
            flat[idx] = orig
            if kink_guard is not None:
                flat[idx] = orig + step
                near_kink = kink_guard()
                flat[idx] = orig - step
                near_kink = near_kink or kink_guard()
                flat[idx] = orig
                if near_kink:
                    result.skipped += 1
                    continue
            numeric = (plus - minus) / (2 * step)
            a = float(analytic.reshape(-1)[idx])
            err = relative_error(a, numeric)
            result.checked += 1
            result.max_rel_error = max(result.max_rel_error, err)
            if err > tol:
                result.failures.append(f"tensor {t.name or ti} entry {int(idx)}: analytic {a:.6e} "
                                       f"numeric {numeric:.6e} rel {err:.2e}")
    if result.failures:
        logger.warning(f"gradient check failed on {len(result.failures)} of {result.checked} entries")
    return result


__all__ = ["GradCheckResult", "check_gradients", "relative_error"]
