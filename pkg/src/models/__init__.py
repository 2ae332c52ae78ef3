"""
Networks: the anti-forensic generator, the detector zoo, and their checkpoints.
"""
from models.checkpoint import Checkpoint, load_checkpoint, read_checkpoint, save_checkpoint
from models.detectors import (
    DETECTOR_REGISTRY,
    FAKE,
    REAL,
    DetectorNet,
    build_detector,
    detector_forward,
    freeze,
)
from models.generator import GeneratorNet, build_generator, generator_forward
from models.layers import Module
from models.loading import load_model

__all__ = [
    "Checkpoint",
    "DETECTOR_REGISTRY",
    "DetectorNet",
    "FAKE",
    "GeneratorNet",
    "Module",
    "REAL",
    "build_detector",
    "build_generator",
    "detector_forward",
    "freeze",
    "generator_forward",
    "load_checkpoint",
    "load_model",
    "read_checkpoint",
    "save_checkpoint",
]
