"""
Shared fixtures: a tiny corpus built once per session, stub detectors, and
the `--runslow` switch for desk-scale acceptance runs.
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# src/ holds the importable packages
SRC = Path(__file__).resolve().parent.parent / "src"
sys.path.insert(0, str(SRC))

from corpus.builder import build_corpus  # noqa: E402
from engine.tensor import Tensor  # noqa: E402
from utils.config.run_config import CorpusSpec  # noqa: E402

GOLDEN = Path(__file__).resolve().parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale acceptance tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale acceptance run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


TINY_SPEC = dict(master_seed=7, image_size=64, d_real=12, d_fake=12, a_fake=6, eval_real=6, eval_fake=6,
                 probe_count=2, probe_size=128)


@pytest.fixture(scope="session")
def tiny_spec() -> CorpusSpec:
    return CorpusSpec(**TINY_SPEC)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory, tiny_spec):
    return build_corpus(tiny_spec, tmp_path_factory.mktemp("corpus"), progress=False)


class StubDetector:
    """Detector stand-in: labels an image real when its mean exceeds `threshold`."""

    def __init__(self, input_size: int = 16, threshold: float = 0.5):
        self.input_size = input_size
        self.threshold = threshold
        self.calls = 0

    def __call__(self, x: Tensor) -> Tensor:
        self.calls += 1
        assert x.shape[-2:] == (self.input_size, self.input_size)
        real = x.data.mean(axis=(1, 2, 3)) > self.threshold
        logits = np.stack([np.where(real, -1.0, 1.0), np.where(real, 1.0, -1.0)], axis=1)
        return Tensor(logits)


@pytest.fixture
def stub_detector():
    return StubDetector
