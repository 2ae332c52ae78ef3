"""
Fast invariant suite behind `main.py selfcheck`.

Each check returns a short detail string and raises AssertionError when the
invariant does not hold; `run_selfcheck` collects the outcomes.
"""
import logging
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Tuple

import numpy as np

from engine import functions as F
from engine.gradcheck import check_gradients
from engine.tensor import Parameter, Tensor
from evaluation.metrics import psnr, ssim
from models.checkpoint import load_checkpoint, save_checkpoint
from models.detectors import DETECTOR_REGISTRY, build_detector
from models.generator import build_generator
from training.losses import classification_loss_ensemble, classification_loss_whitebox

logger = logging.getLogger(__name__)

GENERATOR_PARAMETERS = 448_131


@dataclass
class CheckOutcome:
    name: str
    ok: bool
    detail: str


def check_op_gradients() -> str:
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((2, 2, 6, 6)), requires_grad=True)
    w = Parameter(rng.standard_normal((3, 2, 3, 3)) * 0.3, name="w")
    b = Parameter(rng.standard_normal(3) * 0.1, name="b")
    fc = Parameter(rng.standard_normal((3, 2)) * 0.3, name="fc")
    target = Tensor(np.eye(2)[[0, 1]])

    def loss():
        h = F.pool2d(F.conv2d(x, w, b, stride=1, pad=1), "avg", 2)
        logits = F.dense(F.global_avg_pool(F.add(h, F.scale(h, 0.5))), fc, None)
        return F.softmax_cross_entropy(logits, target)

    result = check_gradients(loss, [x, w, b, fc])
    assert result.ok, f"gradient mismatch: {result.failures[:3]}"
    return f"{result.checked} entries, max rel err {result.max_rel_error:.2e}"


def check_generator_structure() -> str:
    g = build_generator(seed=0)
    count = g.parameter_count()
    assert count == GENERATOR_PARAMETERS, f"generator has {count} parameters"
    image = np.random.default_rng(1).random((1, 3, 17, 9))
    zero = g.clone().zero_parameters()
    out = zero(Tensor(image)).data
    assert np.array_equal(out, image), "zero-parameter generator is not the identity"
    assert g(Tensor(image)).shape == image.shape, "generator changed the image shape"
    return f"{count} parameters, identity and shape preserved"


def check_detector_zoo() -> str:
    counts = {kind: build_detector(kind, seed=0).parameter_count() for kind in DETECTOR_REGISTRY}
    assert len(set(counts.values())) == len(counts), f"parameter counts collide: {counts}"
    hp = build_detector("hipassnet", seed=0)
    response = hp.highpass(Tensor(np.full((1, 3, 8, 8), 0.7))).data
    assert np.allclose(response, 0.0, atol=1e-12), "high-pass bank responds to a constant image"
    return ", ".join(f"{k}={v}" for k, v in counts.items())


def check_metrics() -> str:
    a = np.full((16, 16, 3), 100, dtype=np.uint8)
    b = a + 1
    value = psnr(a, b)
    assert abs(value - 48.1308) < 1e-3, f"psnr of unit difference is {value}"
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    assert ssim(img, img) == 1.0, "ssim of identical images is not 1"
    return f"psnr={value:.4f} dB, ssim(identical)=1"


def check_checkpoint_roundtrip() -> str:
    d = build_detector("plainnet", seed=3, dtype=np.float32)
    with tempfile.TemporaryDirectory() as tmp:
        path = save_checkpoint(d, Path(tmp) / "plainnet.afgn")
        restored = load_checkpoint(path, build_detector("plainnet", seed=4, dtype=np.float32))
    for (name, p), (_, q) in zip(d.named_parameters(), restored.named_parameters()):
        assert np.array_equal(p.data, q.data), f"{name} changed in the round trip"
    return f"{len(d.named_parameters())} tensors bit-equal"


def check_ensemble_reduction() -> str:
    d = build_detector("stridenet", seed=5)
    x = Tensor(np.random.default_rng(6).random((2, 3, 64, 64)))
    single = classification_loss_whitebox(d, x).item()
    ensemble = classification_loss_ensemble([d], [1.0], x).item()
    assert single == ensemble, f"S=1 ensemble loss {ensemble} != white-box loss {single}"
    return f"L_c={single:.6f}"


CHECKS: List[Tuple[str, Callable[[], str]]] = [
    ("op gradients", check_op_gradients),
    ("generator structure", check_generator_structure),
    ("detector zoo", check_detector_zoo),
    ("metrics", check_metrics),
    ("checkpoint round trip", check_checkpoint_roundtrip),
    ("ensemble reduction", check_ensemble_reduction),
]


def run_selfcheck() -> List[CheckOutcome]:
    outcomes = []
    for name, check in CHECKS:
        try:
            outcomes.append(CheckOutcome(name, True, check()))
        except AssertionError as e:
            outcomes.append(CheckOutcome(name, False, str(e)))
        level = logging.INFO if outcomes[-1].ok else logging.ERROR
        logger.log(level, f"selfcheck {name}: {'ok' if outcomes[-1].ok else 'FAILED'} ({outcomes[-1].detail})")
    return outcomes
