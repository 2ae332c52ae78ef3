"""Alpha selection: one shortened attack run per candidate, pick the largest alpha that still fools the victim."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import pandas as pd

from corpus.builder import Corpus
from corpus.png_io import quantize, to_float
from engine.tensor import resolve_dtype
from evaluation.metrics import mean_psnr, psnr
from evaluation.scoring import attack_success_rate, quantized_attack
from models.detectors import DetectorNet
from models.generator import GeneratorNet, build_generator
from training.trainer import train_attack
from utils.config.run_config import TrainConfig
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["alpha", "asr", "mean_psnr_db", "epochs"]


@dataclass
class GridResult:
    table: pd.DataFrame
    selected_alpha: float
    floor: float


def select_alpha(table: pd.DataFrame, floor: float) -> float:
    """
    Largest alpha whose ASR reaches `floor`. When none does, the alpha with the
    best ASR (larger alpha on ties).
    """
    if table.empty:
        raise ValueError("cannot select alpha from an empty grid")
    qualifying = table[table["asr"] >= floor]
    if not qualifying.empty:
        return float(qualifying["alpha"].max())
    best = table["asr"].max()
    return float(table[table["asr"] == best]["alpha"].max())


def evaluate_candidate(generator: GeneratorNet, victim: DetectorNet, corpus: Corpus, seed: int,
                       batch: int) -> Tuple[float, float]:
    """(ASR, mean PSNR) of a generator on the Eval-set fakes."""
    fakes = corpus.images("eval_fake", generator.dtype)
    attacked_u8 = quantized_attack(generator, fakes, batch)
    asr = attack_success_rate(victim, to_float(attacked_u8), batch, make_rng(seed, "grid-asr"))
    mean_db, _ = mean_psnr(psnr(quantize(o), a) for o, a in zip(fakes, attacked_u8))
    return asr, mean_db


def alpha_grid_search(alphas: Sequence[float], victim: DetectorNet, corpus: Corpus, cfg: TrainConfig,
                      epochs: Optional[int] = None, floor: float = 0.9, eval_batch: int = 64) -> GridResult:
    """
    Train one generator per alpha from the same initialization and report the
    table alpha, asr, mean_psnr_db, epochs.

    Raises:
        ValueError: empty alpha list
    """
    alphas = [float(a) for a in alphas]
    if not alphas:
        raise ValueError("alpha grid search needs at least one candidate")
    epochs = epochs or cfg.epochs
    dtype = resolve_dtype(cfg.precision)
    rows = []
    for alpha in alphas:
        run_cfg = cfg.model_copy(update={"alpha": alpha, "epochs": epochs})
        generator = build_generator(seed=cfg.seed, final_relu=cfg.final_relu, dtype=dtype)
        generator, _ = train_attack(generator, victim, corpus, run_cfg)
        asr, mean_db = evaluate_candidate(generator, victim, corpus, cfg.seed, eval_batch)
        rows.append({"alpha": alpha, "asr": asr, "mean_psnr_db": mean_db, "epochs": epochs})
        logger.info(f"alpha={alpha:g}: asr={asr:.4f} psnr={mean_db:.2f} ({epochs} epochs)")
    table = pd.DataFrame(rows, columns=GRID_COLUMNS)
    selected = select_alpha(table, floor)
    logger.info(f"selected alpha={selected:g} (floor {floor})")
    return GridResult(table=table, selected_alpha=selected, floor=floor)
