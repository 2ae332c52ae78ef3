"""
Run configuration

One JSON document (config/desk_config.json) configures the whole pipeline.
CLI flags override individual keys; the resolved config is snapshotted into
every run manifest.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

logger = logging.getLogger(__name__)

DETECTOR_KINDS = ("plainnet", "resmini", "hipassnet", "stridenet")

DEFAULT_ALPHA_GRID = [1.0] + [float(a) for a in range(20, 201, 20)]

# keys of the per-run JSON written next to every trained checkpoint
RUN_JSON_KEYS = ("stage", "arch", "seed", "lr", "epochs", "lr_half_every", "batch", "alpha", "beta",
                 "ensemble", "victim", "corpus_dir", "out_dir")


class CorpusSpec(BaseModel):
    """Sizes of the synthetic corpus splits (desk scale)."""
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(default=0, ge=0, description="seed feeding every per-sample seed")
    image_size: int = Field(default=64, ge=2, description="extent of D/A/Eval images")
    d_real: int = Field(default=4000, ge=0)
    d_fake: int = Field(default=4000, ge=0)
    a_fake: int = Field(default=4000, ge=0)
    eval_real: int = Field(default=500, ge=0)
    eval_fake: int = Field(default=500, ge=0)
    probe_count: int = Field(default=200, ge=0, description="large fakes for the block-alignment probe")
    probe_size: int = Field(default=128, ge=2)

    @model_validator(mode="after")
    def _even_sizes(self) -> "CorpusSpec":
        for name in ("image_size", "probe_size"):
            if getattr(self, name) % 2:
                raise ValueError(f"{name} must be even (fakes are rendered at half resolution)")
        return self


class TrainConfig(BaseModel):
    """Hyperparameters of one training run (detector pretraining or attack training)."""
    model_config = ConfigDict(extra="forbid")

    stage: Literal["detector", "attack"]
    arch: Optional[str] = Field(default=None, description="detector kind or 'generator'")
    seed: int = Field(default=0, ge=0)
    lr: float = Field(gt=0)
    epochs: int = Field(gt=0)
    lr_half_every: Optional[int] = Field(default=None, gt=0, description="halve lr every k epochs")
    batch: int = Field(gt=0)
    alpha: float = Field(default=20.0, ge=0, description="perceptual-loss weight")
    beta: List[float] = Field(default_factory=list, description="ensemble weights, uniform if empty")
    ensemble: List[str] = Field(default_factory=list)
    victim: Optional[str] = None
    final_relu: bool = Field(default=True, description="ReLU on the generator's last conv")
    corpus_dir: Optional[str] = None
    out_dir: Optional[str] = None
    precision: Literal["float64", "float32"] = "float32"
    progress: bool = True

    @model_validator(mode="after")
    def _check_targets(self) -> "TrainConfig":
        if self.ensemble:
            if not self.beta:
                self.beta = [1.0 / len(self.ensemble)] * len(self.ensemble)
            if len(self.beta) != len(self.ensemble):
                raise ValueError(f"beta has {len(self.beta)} weights for an ensemble of {len(self.ensemble)}")
            if any(b < 0 for b in self.beta):
                raise ValueError("beta weights must be non-negative")
            if not math.isclose(sum(self.beta), 1.0, abs_tol=1e-9):
                raise ValueError(f"beta weights must sum to 1, got {sum(self.beta)}")
            if self.victim is not None and self.victim in self.ensemble:
                raise ValueError(f"victim '{self.victim}' must not be part of the training ensemble")
            if len(set(self.ensemble)) != len(self.ensemble):
                raise ValueError(f"ensemble lists a detector twice: {self.ensemble}")
        elif self.beta:
            raise ValueError("beta given without an ensemble")
        return self

    @property
    def scenario(self) -> str:
        return "zero-knowledge" if self.ensemble else "white-box"

    def run_json(self) -> Dict[str, Any]:
        data = self.model_dump()
        return {key: data[key] for key in RUN_JSON_KEYS}


def detector_defaults(**overrides: Any) -> TrainConfig:
    """lr 5e-4 halved every 4 epochs, 20 epochs, batch 32."""
    base = dict(stage="detector", lr=5e-4, epochs=20, lr_half_every=4, batch=32, alpha=0.0)
    base.update(overrides)
    return TrainConfig(**base)


def attack_defaults(**overrides: Any) -> TrainConfig:
    """Constant lr 1e-4 for 32 epochs, batch 16, alpha 20."""
    base = dict(stage="attack", arch="generator", lr=1e-4, epochs=32, lr_half_every=None, batch=16,
                alpha=20.0)
    base.update(overrides)
    return TrainConfig(**base)


class EvalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch: int = Field(default=64, gt=0)
    crop_draws: int = Field(default=10, gt=0, description="random-crop repeats in the block probe")
    asr_floor: float = Field(default=0.9, ge=0, le=1, description="alpha selection threshold")
    alpha_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    grid_epochs: int = Field(default=8, gt=0, description="reduced epoch budget per grid candidate")
    tile: Optional[int] = Field(default=None, gt=0, description="tile size for tiled attacks")


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0)
    corpus_dir: str = "output/corpus"
    out_dir: str = "output"
    precision: Literal["float64", "float32"] = "float32"
    log_level: str = "INFO"
    progress: bool = True
    workers: int = Field(default=1, ge=1)
    archs: List[str] = Field(default_factory=lambda: list(DETECTOR_KINDS))
    always_exclude: List[str] = Field(default_factory=list,
                                      description="detectors never used in a training ensemble")
    corpus: CorpusSpec = Field(default_factory=CorpusSpec)
    detector: TrainConfig = Field(default_factory=detector_defaults)
    attack: TrainConfig = Field(default_factory=attack_defaults)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def _propagate(self) -> "PipelineConfig":
        unknown = [a for a in self.archs + self.always_exclude if a not in DETECTOR_KINDS]
        if unknown:
            raise ValueError(f"unknown detector kinds {unknown}, expected {list(DETECTOR_KINDS)}")
        if self.detector.stage != "detector" or self.attack.stage != "attack":
            raise ValueError("'detector' and 'attack' sections must have stage detector / attack")
        # the single `seed` key drives everything
        self.corpus.master_seed = self.seed
        for section in (self.detector, self.attack):
            section.seed = self.seed
            section.precision = self.precision
            section.progress = self.progress
            section.corpus_dir = self.corpus_dir
        return self

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def _set_dotted(target: Dict[str, Any], dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = target
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ValueError(f"cannot override '{dotted}': '{key}' is not a section")
    node[keys[-1]] = value


def load_pipeline_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """
    Read the JSON config (defaults when `path` is None) and apply overrides.

    Args:
        path: JSON file
        overrides: dotted keys (e.g. "attack.alpha") to values; None values are ignored

    Raises:
        FileNotFoundError: missing config file
        ValueError / pydantic.ValidationError: invalid content
    """
    data: Dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise FileNotFoundError(f"config file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError(f"config root must be a JSON object: {config_path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, key, value)
    for section in ("detector", "attack"):
        if section in data:
            defaults = detector_defaults() if section == "detector" else attack_defaults()
            merged = defaults.model_dump()
            merged.update(data[section])
            data[section] = merged
    config = PipelineConfig(**data)
    logger.debug(f"resolved config: {config.snapshot()}")
    return config


__all__ = [
    "CorpusSpec",
    "DEFAULT_ALPHA_GRID",
    "DETECTOR_KINDS",
    "EvalConfig",
    "PipelineConfig",
    "TrainConfig",
    "attack_defaults",
    "detector_defaults",
    "load_pipeline_config",
]
