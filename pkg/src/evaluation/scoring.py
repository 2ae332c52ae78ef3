"""
Detector-side measurements: predictions, ASR, accuracy, the transfer matrix
and the block-alignment probe.

Detectors only need an `input_size` attribute and to map an N x 3 x S x S
tensor to N x 2 logits; larger images get one uniformly random S x S crop.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from corpus.png_io import quantize, random_crop, to_float
from engine.tensor import Tensor, no_grad
from evaluation.attack import attack_images
from evaluation.metrics import mean_psnr, psnr, ssim
from evaluation.report import MetricsReport, MetricsRow
from models.detectors import FAKE, REAL, DetectorNet
from models.generator import GeneratorNet
from utils.seeding import make_rng

logger = logging.getLogger(__name__)

UNATTACKED = "unattacked"


def fit_to_input(images: np.ndarray, size: int, rng: Optional[np.random.Generator]) -> np.ndarray:
    """Random size x size crop of each image; images already at `size` pass through."""
    h, w = images.shape[-2:]
    if h < size or w < size:
        raise ValueError(f"images {h}x{w} are smaller than the detector input {size}x{size}")
    if h == size and w == size:
        return images
    if rng is None:
        raise ValueError(f"images {h}x{w} need cropping to {size}x{size} but no rng was given")
    return np.stack([random_crop(img, size, rng)[0] for img in images])


def predict(detector: DetectorNet, images: np.ndarray, batch: int = 64,
            rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Predicted class per image (argmax of the logits, ties to FAKE)."""
    images = fit_to_input(images, detector.input_size, rng)
    preds = np.empty(len(images), dtype=np.int64)
    with no_grad():
        for start in range(0, len(images), batch):
            logits = detector(Tensor(images[start:start + batch])).data
            preds[start:start + batch] = np.argmax(logits, axis=1)
    return preds


def attack_success_rate(victim: DetectorNet, attacked: np.ndarray, batch: int = 64,
                        rng: Optional[np.random.Generator] = None) -> float:
    """
    Fraction of attacked fakes the victim labels real. Pass images that went
    through 8-bit quantization.

    Raises:
        ValueError: empty set
    """
    if len(attacked) == 0:
        raise ValueError("attack_success_rate needs at least one image")
    return float(np.mean(predict(victim, attacked, batch, rng) == REAL))


def accuracy(detector: DetectorNet, images: np.ndarray, labels: np.ndarray, batch: int = 64,
             rng: Optional[np.random.Generator] = None) -> float:
    labels = np.asarray(labels)
    if len(images) == 0:
        raise ValueError("accuracy needs at least one image")
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    if set(np.unique(labels)) != {FAKE, REAL}:
        raise ValueError("accuracy needs both real and fake images")
    return float(np.mean(predict(detector, images, batch, rng) == labels))


def recall(detector: DetectorNet, fakes: np.ndarray, batch: int = 64,
           rng: Optional[np.random.Generator] = None) -> float:
    """Fraction of (unattacked) fakes flagged fake."""
    if len(fakes) == 0:
        raise ValueError("recall needs at least one image")
    return float(np.mean(predict(detector, fakes, batch, rng) == FAKE))


@dataclass
class AttackEntry:
    """A generator under evaluation; `generator=None` stands for the unattacked images."""
    name: str
    generator: Optional[GeneratorNet]
    trained_against: Tuple[str, ...] = ()

    @property
    def white_box_victim(self) -> Optional[str]:
        return self.trained_against[0] if len(self.trained_against) == 1 else None

    def scenario(self, victim: str) -> str:
        """baseline, white-box, ensemble-member (victim was one of several targets) or zero-knowledge."""
        if self.generator is None:
            return "baseline"
        if victim not in self.trained_against:
            return "zero-knowledge"
        return "white-box" if len(self.trained_against) == 1 else "ensemble-member"


@dataclass
class QualityStats:
    mean_psnr_db: float
    inf_psnr_count: int
    mean_ssim: float


def image_quality(originals: np.ndarray, attacked: np.ndarray) -> QualityStats:
    """PSNR / SSIM between two N x H x W x 3 uint8 stacks."""
    psnrs = [psnr(a, b) for a, b in zip(originals, attacked)]
    mean_db, inf_count = mean_psnr(psnrs)
    ssims = [ssim(a, b) for a, b in zip(originals, attacked)]
    return QualityStats(mean_psnr_db=mean_db, inf_psnr_count=inf_count, mean_ssim=float(np.mean(ssims)))


def quantized_attack(generator: Optional[GeneratorNet], images: np.ndarray, batch: int = 64) -> np.ndarray:
    """Attack and quantize to N x H x W x 3 uint8, the bytes that would be written as PNG."""
    attacked = images if generator is None else attack_images(generator, images, batch)
    return np.stack([quantize(img) for img in attacked])


def transfer_matrix(attacks: Sequence[AttackEntry], victims: Dict[str, DetectorNet], eval_fakes: np.ndarray,
                    seed: int = 0, batch: int = 64, source: str = "eval_fake",
                    progress: bool = True) -> MetricsReport:
    """
    One report row per (attack, victim) cell: ASR of the quantized attacked
    fakes plus image quality against the unattacked fakes.

    Raises:
        ValueError: no attacks, no victims or no images
    """
    if not attacks or not victims:
        raise ValueError("transfer_matrix needs at least one attack and one victim")
    if len(eval_fakes) == 0:
        raise ValueError("transfer_matrix needs evaluation images")
    originals = np.stack([quantize(img) for img in eval_fakes])
    rows: List[MetricsRow] = []
    for entry in tqdm(attacks, desc="attacks", unit="attack", disable=not progress, leave=False):
        attacked_u8 = quantized_attack(entry.generator, eval_fakes, batch)
        quality = image_quality(originals, attacked_u8)
        attacked = to_float(attacked_u8)
        for victim_name, victim in victims.items():
            rng = make_rng(seed, "asr", entry.name, victim_name)
            asr = attack_success_rate(victim, attacked, batch, rng)
            rows.append(MetricsRow(victim=victim_name, attack=entry.name, scenario=entry.scenario(victim_name),
                                   source=source, asr=asr, mean_psnr_db=quality.mean_psnr_db,
                                   inf_psnr_count=quality.inf_psnr_count, mean_ssim=quality.mean_ssim,
                                   n_images=len(eval_fakes)))
            logger.info(f"{entry.name} vs {victim_name}: asr={asr:.4f} psnr={quality.mean_psnr_db:.2f} "
                        f"ssim={quality.mean_ssim:.4f}")
    return MetricsReport(rows=rows)


@dataclass
class ProbeResult:
    victim: str
    attack: str
    per_draw: List[float] = field(default_factory=list)
    aligned_asr: float = 0.0

    @property
    def mean_asr(self) -> float:
        return float(np.mean(self.per_draw))

    @property
    def spread(self) -> float:
        return float(max(self.per_draw) - min(self.per_draw))

    def as_row(self) -> Dict[str, object]:
        return {"victim": self.victim, "attack": self.attack, "probe_asr": self.mean_asr,
                "probe_asr_min": min(self.per_draw), "probe_asr_max": max(self.per_draw),
                "aligned_asr": self.aligned_asr, "draws": len(self.per_draw)}


def block_alignment_probe(victim: DetectorNet, generator: GeneratorNet, large_fakes: np.ndarray,
                          draws: int = 10, seed: int = 0, batch: int = 64, victim_name: str = "",
                          attack_name: str = "") -> ProbeResult:
    """
    Attack each full-size fake once, then classify one random victim-sized crop
    per image, repeated over `draws` crop draws. The aligned ASR crops first and
    attacks the crop, the block-aligned reference.

    Raises:
        ValueError: probe images not larger than the victim input, or no images
    """
    if len(large_fakes) == 0:
        raise ValueError("block_alignment_probe needs probe images")
    size = victim.input_size
    h, w = large_fakes.shape[-2:]
    if h <= size or w <= size:
        raise ValueError(f"probe images {h}x{w} must be larger than the victim input {size}x{size}")
    attacked = to_float(quantized_attack(generator, large_fakes, batch))
    result = ProbeResult(victim=victim_name, attack=attack_name)
    for draw in range(draws):
        rng = make_rng(seed, "probe", victim_name, attack_name, draw)
        result.per_draw.append(attack_success_rate(victim, attacked, batch, rng))
    crop_rng = make_rng(seed, "probe-aligned", victim_name, attack_name)
    crops = fit_to_input(large_fakes, size, crop_rng)
    result.aligned_asr = attack_success_rate(victim, to_float(quantized_attack(generator, crops, batch)), batch)
    logger.info(f"probe {attack_name} vs {victim_name}: mean={result.mean_asr:.4f} spread={result.spread:.4f} "
                f"aligned={result.aligned_asr:.4f}")
    return result
