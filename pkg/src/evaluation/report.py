"""
Result tables: report/baseline/probe CSVs and the markdown summary.

The summary mirrors the layout of published attack tables: one row per
victim, ASR and image-quality columns, and an "Avg." row holding the
arithmetic mean of each column.
"""
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel, Field, field_validator

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["victim", "attack", "scenario", "source", "asr", "mean_psnr_db", "inf_psnr_count",
                  "mean_ssim", "n_images"]
BASELINE_COLUMNS = ["victim", "accuracy", "recall", "n_images"]
PROBE_COLUMNS = ["victim", "attack", "probe_asr", "probe_asr_min", "probe_asr_max", "aligned_asr", "draws"]

REPORT_FILE = "report.csv"
BASELINE_FILE = "baseline.csv"
PROBE_FILE = "probe.csv"
SUMMARY_FILE = "summary.md"

FLOAT_FORMAT = "%.6f"


class MetricsRow(BaseModel):
    victim: str
    attack: str
    scenario: str
    source: str
    asr: float = Field(ge=0.0, le=1.0)
    mean_psnr_db: float
    inf_psnr_count: int = Field(ge=0)
    mean_ssim: float = Field(ge=-1.0, le=1.0)
    n_images: int = Field(gt=0)

    @field_validator("mean_psnr_db")
    @classmethod
    def _psnr_range(cls, v: float) -> float:
        if math.isnan(v) or v < 0:
            raise ValueError(f"mean PSNR must be >= 0 or inf, got {v}")
        return v


class BaselineRow(BaseModel):
    victim: str
    accuracy: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    n_images: int = Field(gt=0)


class MetricsReport(BaseModel):
    rows: List[MetricsRow] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=REPORT_COLUMNS)

    def grid(self, value: str = "asr") -> pd.DataFrame:
        """attack x victim table of one column."""
        return self.to_frame().pivot(index="attack", columns="victim", values=value)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _require_columns(frame: pd.DataFrame, columns: Sequence[str], source: str) -> None:
    for column in columns:
        if column not in frame.columns:
            raise ValueError(f"{source} is missing column '{column}'")


def read_report_csv(path: Union[str, Path], columns: Sequence[str] = REPORT_COLUMNS) -> pd.DataFrame:
    frame = pd.read_csv(path)
    _require_columns(frame, columns, str(path))
    return frame


def collect(root: Union[str, Path], name: str, columns: Sequence[str]) -> Optional[pd.DataFrame]:
    """Concatenate every `name` file under `root`; None when there is none."""
    paths = sorted(Path(root).rglob(name))
    if not paths:
        return None
    return pd.concat([read_report_csv(p, columns) for p in paths], ignore_index=True)


def _fmt(value: float, digits: int) -> str:
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    if isinstance(value, float) and math.isnan(value):
        return "-"
    return f"{value:.{digits}f}"


def _column_mean(values: pd.Series) -> float:
    finite = [float(v) for v in values if math.isfinite(float(v))]
    return sum(finite) / len(finite) if finite else math.nan


def column_averages(rows: pd.DataFrame, columns: Sequence[str]) -> Dict[str, float]:
    """Arithmetic mean of each column over its finite cells."""
    return {column: _column_mean(rows[column]) for column in columns}


def _markdown_table(header: List[str], body: List[List[str]]) -> List[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    return lines


def scenario_table(frame: pd.DataFrame, scenario: str) -> List[str]:
    rows = frame[frame["scenario"] == scenario].sort_values(["victim", "attack"])
    if rows.empty:
        return [f"_no {scenario} results_"]
    body = [[r.victim, r.attack, _fmt(r.asr, 4), _fmt(r.mean_psnr_db, 2), _fmt(r.mean_ssim, 4)]
            for r in rows.itertuples()]
    avg = column_averages(rows, ["asr", "mean_psnr_db", "mean_ssim"])
    body.append(["Avg.", "", _fmt(avg["asr"], 4), _fmt(avg["mean_psnr_db"], 2), _fmt(avg["mean_ssim"], 4)])
    return _markdown_table(["Victim", "Attack", "ASR", "M_PSNR (dB)", "M_SSIM"], body)


def probe_table(frame: pd.DataFrame) -> List[str]:
    rows = frame.sort_values(["victim", "attack"])
    body = [[r.victim, r.attack, _fmt(r.probe_asr, 4), _fmt(r.probe_asr_max - r.probe_asr_min, 4),
             _fmt(r.aligned_asr, 4)] for r in rows.itertuples()]
    spreads = rows["probe_asr_max"] - rows["probe_asr_min"]
    body.append(["Avg.", "", _fmt(_column_mean(rows["probe_asr"]), 4), _fmt(_column_mean(spreads), 4),
                 _fmt(_column_mean(rows["aligned_asr"]), 4)])
    return _markdown_table(["Victim", "Attack", "Random-crop ASR", "Spread", "Aligned ASR"], body)


def baseline_table(frame: pd.DataFrame) -> List[str]:
    rows = frame.sort_values("victim")
    body = [[r.victim, _fmt(r.accuracy, 4), _fmt(r.recall, 4), str(int(r.n_images))] for r in rows.itertuples()]
    body.append(["Avg.", _fmt(_column_mean(rows["accuracy"]), 4), _fmt(_column_mean(rows["recall"]), 4), ""])
    return _markdown_table(["Detector", "Accuracy", "Recall", "Images"], body)


def render_markdown(report: pd.DataFrame, probe: Optional[pd.DataFrame] = None,
                    baseline: Optional[pd.DataFrame] = None, notes: Sequence[str] = ()) -> str:
    _require_columns(report, REPORT_COLUMNS, "report")
    lines = ["# Attack results", ""]
    if baseline is not None and not baseline.empty:
        lines += ["## Baseline detectors", ""] + baseline_table(baseline) + [""]
    lines += ["## White-box", ""] + scenario_table(report, "white-box") + [""]
    lines += ["## Zero-knowledge", ""] + scenario_table(report, "zero-knowledge") + [""]
    if probe is not None and not probe.empty:
        lines += ["## Block alignment", ""] + probe_table(probe) + [""]
    for note in notes:
        lines.append(f"> {note}")
    return "\n".join(lines).rstrip() + "\n"


def render_directory(root: Union[str, Path]) -> str:
    """
    Markdown summary of every report under `root`.

    Raises:
        ValueError: no report.csv found, or a CSV missing a required column
    """
    report = collect(root, REPORT_FILE, REPORT_COLUMNS)
    if report is None or report.empty:
        raise ValueError(f"no reports found in {root}")
    probe = collect(root, PROBE_FILE, PROBE_COLUMNS)
    baseline = collect(root, BASELINE_FILE, BASELINE_COLUMNS)
    notes = []
    grid = sorted(Path(root).rglob("alpha_grid.csv"))
    if grid:
        notes.append(f"alpha grid search ran with a reduced epoch budget ({len(grid)} table(s))")
    return render_markdown(report, probe, baseline, notes)


def frame_from_rows(rows: List[Dict[str, object]], columns: Sequence[str]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=list(columns))
