from evaluation.attack import attack_images, attack_tiled, attack_to_png
from evaluation.metrics import mean_psnr, psnr, ssim
from evaluation.report import MetricsReport, MetricsRow, render_directory, render_markdown
from evaluation.scoring import (
    UNATTACKED,
    AttackEntry,
    ProbeResult,
    accuracy,
    attack_success_rate,
    block_alignment_probe,
    predict,
    recall,
    transfer_matrix,
)

__all__ = [
    "AttackEntry",
    "MetricsReport",
    "MetricsRow",
    "ProbeResult",
    "UNATTACKED",
    "accuracy",
    "attack_images",
    "attack_success_rate",
    "attack_tiled",
    "attack_to_png",
    "block_alignment_probe",
    "mean_psnr",
    "predict",
    "psnr",
    "recall",
    "render_directory",
    "render_markdown",
    "ssim",
    "transfer_matrix",
]
