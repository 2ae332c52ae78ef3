"""
Training loops for detector pretraining and attack training.

Both loops are plain minibatch SGD over a seeded permutation of the split.
Images larger than a detector's nominal input are randomly cropped to it at
every step. One log row is kept per epoch:

    epoch,loss_total,loss_perceptual,loss_classification,lr,elapsed_s
"""
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from corpus.builder import A_SPLIT, D_SPLITS, Corpus
from engine import functions as F
from engine.optim import halving_schedule, sgd_step
from engine.tensor import Tensor, backward, resolve_dtype
from evaluation.scoring import fit_to_input
from models.checkpoint import save_checkpoint
from models.detectors import DetectorNet, build_detector, freeze
from models.generator import GeneratorNet
from models.layers import Module
from training.ensemble import EnsembleSpec
from training.losses import (
    classification_loss_ensemble,
    classification_loss_whitebox,
    generator_loss_terms,
    one_hot,
)
from utils.config.run_config import TrainConfig
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "loss_total", "loss_perceptual", "loss_classification", "lr", "elapsed_s"]


@dataclass
class EpochStats:
    epoch: int
    loss_total: float
    loss_perceptual: float
    loss_classification: float
    lr: float
    elapsed_s: float


def log_frame(rows: List[EpochStats]) -> pd.DataFrame:
    return pd.DataFrame([vars(r) for r in rows], columns=LOG_COLUMNS)


def _batches(n: int, batch: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch):
        yield order[start:start + batch]


def train_detector(kind: str, corpus: Corpus, cfg: TrainConfig,
                   detector: Optional[DetectorNet] = None) -> Tuple[DetectorNet, pd.DataFrame]:
    """
    Train a zoo detector from scratch on the D-set.

    Raises:
        ValueError: the D-set lacks one of the classes
    """
    dtype = resolve_dtype(cfg.precision)
    images, labels = corpus.labeled(D_SPLITS, dtype)
    if len(np.unique(labels)) < 2:
        raise ValueError(f"D-set needs both real and fake images, got {len(images)} images of one class")
    model = detector if detector is not None else build_detector(kind, seed=cfg.seed, dtype=dtype)
    rng = make_rng(cfg.seed, "train-detector", kind)
    rows: List[EpochStats] = []
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        lr = halving_schedule(cfg.lr, epoch, cfg.lr_half_every)
        loss_sum, correct = 0.0, 0
        steps = tqdm(list(_batches(len(images), cfg.batch, rng)), desc=f"{kind} epoch {epoch + 1}",
                     unit="batch", disable=not cfg.progress, leave=False)
        for idx in steps:
            x = Tensor(fit_to_input(images[idx], model.input_size, rng))
            logits = model(x)
            loss = F.softmax_cross_entropy(logits, one_hot(labels[idx], logits.dtype))
            backward(loss)
            sgd_step(model.parameters(), lr)
            loss_sum += loss.item() * len(idx)
            correct += int(np.sum(np.argmax(logits.data, axis=1) == labels[idx]))
        mean_loss = loss_sum / len(images)
        rows.append(EpochStats(epoch=epoch + 1, loss_total=mean_loss, loss_perceptual=0.0,
                               loss_classification=mean_loss, lr=lr,
                               elapsed_s=time.perf_counter() - started))
        logger.info(f"{kind} epoch {epoch + 1}/{cfg.epochs}: loss={mean_loss:.5f} "
                    f"train_acc={correct / len(images):.4f} lr={lr:.2e}")
    return model, log_frame(rows)


def train_attack(generator: GeneratorNet, target: Union[DetectorNet, EnsembleSpec], corpus: Corpus,
                 cfg: TrainConfig) -> Tuple[GeneratorNet, pd.DataFrame]:
    """
    Minimize alpha * L_p + L_c over the fake-only A-set. Target detectors are
    frozen for the whole run and never updated.

    Raises:
        ValueError: empty A-set
    """
    dtype = resolve_dtype(cfg.precision)
    images = corpus.images(A_SPLIT, dtype)
    if len(images) == 0:
        raise ValueError("A-set is empty; attack training needs fake images")
    if isinstance(target, EnsembleSpec):
        detectors = list(target.detectors)
    else:
        detectors = [target]
    input_size = detectors[0].input_size
    rng = make_rng(cfg.seed, "train-attack")
    rows: List[EpochStats] = []
    started = time.perf_counter()
    with freeze(detectors):
        for epoch in range(cfg.epochs):
            lr = halving_schedule(cfg.lr, epoch, cfg.lr_half_every)
            sums = np.zeros(3)
            steps = tqdm(list(_batches(len(images), cfg.batch, rng)), desc=f"attack epoch {epoch + 1}",
                         unit="batch", disable=not cfg.progress, leave=False)
            for idx in steps:
                x = Tensor(fit_to_input(images[idx], input_size, rng))
                attacked = generator(x)
                if isinstance(target, EnsembleSpec):
                    lc = classification_loss_ensemble(target, None, attacked)
                else:
                    lc = classification_loss_whitebox(target, attacked)
                total, lp = generator_loss_terms(cfg.alpha, x, attacked, lc)
                backward(total)
                sgd_step(generator.parameters(), lr)
                sums += np.array([total.item(), lp.item(), lc.item()]) * len(idx)
            means = sums / len(images)
            rows.append(EpochStats(epoch=epoch + 1, loss_total=means[0], loss_perceptual=means[1],
                                   loss_classification=means[2], lr=lr,
                                   elapsed_s=time.perf_counter() - started))
            logger.info(f"attack epoch {epoch + 1}/{cfg.epochs}: L_G={means[0]:.5f} L_p={means[1]:.5f} "
                        f"L_c={means[2]:.5f} lr={lr:.2e}")
    return generator, log_frame(rows)


def write_run_artifacts(out_dir: Union[str, Path], name: str, model: Module, log: pd.DataFrame,
                        cfg: TrainConfig) -> List[Path]:
    """<name>.afgn checkpoint, <name>_log.csv and the <name>.json run configuration."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt = save_checkpoint(model, out_dir / f"{name}.afgn")
    log_path = out_dir / f"{name}_log.csv"
    log.to_csv(log_path, index=False, lineterminator="\n")
    run_path = out_dir / f"{name}.json"
    run = cfg.run_json()
    run["out_dir"] = str(out_dir)
    run_path.write_text(json.dumps(run, indent=2) + "\n", encoding="utf-8")
    return [ckpt, log_path, run_path]
