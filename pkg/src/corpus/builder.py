"""
Corpus construction and loading.

Every split owns a contiguous range of a single global index space; a
sample's seed is derived from (master seed, global index), so samples are
reproducible one by one and can be generated in any order or process.
"""
import json
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from corpus.png_io import load_png_uint8, save_png, to_float
from corpus.synth import synth_fake, synth_real
from utils.config.run_config import CorpusSpec
from utils.seeding import derive_seed

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["index", "label", "source", "seed", "path"]
CORPUS_INFO = "corpus.json"

D_SPLITS = ("d_real", "d_fake")
A_SPLIT = "a_fake"
EVAL_SPLITS = ("eval_real", "eval_fake")
PROBE_SPLIT = "probe_fake"


@dataclass(frozen=True)
class SplitDef:
    name: str
    label: str
    count: int
    size: int
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.count

    def seed_for(self, master: int, index: int) -> int:
        if not 0 <= index < self.count:
            raise IndexError(f"index {index} outside split {self.name} of {self.count} samples")
        return derive_seed(master, "sample", self.start + index)


def split_defs(spec: CorpusSpec) -> List[SplitDef]:
    """Split layout for a spec: D-set, A-set, Eval-set and the probe set, back to back."""
    plan = [
        ("d_real", "real", spec.d_real, spec.image_size),
        ("d_fake", "fake", spec.d_fake, spec.image_size),
        (A_SPLIT, "fake", spec.a_fake, spec.image_size),
        ("eval_real", "real", spec.eval_real, spec.image_size),
        ("eval_fake", "fake", spec.eval_fake, spec.image_size),
        (PROBE_SPLIT, "fake", spec.probe_count, spec.probe_size),
    ]
    defs, start = [], 0
    for name, label, count, size in plan:
        defs.append(SplitDef(name=name, label=label, count=count, size=size, start=start))
        start += count
    return defs


def check_disjoint(defs: Iterable[SplitDef]) -> None:
    """
    Raises:
        ValueError: two splits share a name or overlapping index ranges
    """
    defs = sorted(defs, key=lambda d: (d.start, d.stop))
    names = [d.name for d in defs]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate split names: {names}")
    for prev, cur in zip(defs, defs[1:]):
        if cur.count and prev.count and cur.start < prev.stop:
            raise ValueError(f"splits {prev.name} [{prev.start}, {prev.stop}) and {cur.name} "
                             f"[{cur.start}, {cur.stop}) overlap")


def _clear_previous(root: Path, defs: Iterable[SplitDef]) -> None:
    """Remove split folders and manifests of the new layout and of any corpus already at `root`."""
    names = {d.name for d in defs}
    info_path = root / CORPUS_INFO
    if info_path.is_file():
        names.update(d["name"] for d in json.loads(info_path.read_text(encoding="utf-8"))["splits"])
        info_path.unlink()
    for name in sorted(names):
        if (root / name).is_dir():
            shutil.rmtree(root / name)
            logger.info(f"removed previous split folder {root / name}")
        (root / f"{name}.csv").unlink(missing_ok=True)


def _render(task: Tuple[str, int, int, Path]) -> None:
    label, seed, size, path = task
    synth = synth_real if label == "real" else synth_fake
    save_png(synth(seed, size, size).pixels, path)


def _write_split(split: SplitDef, master: int, root: Path, workers: int, progress: bool) -> pd.DataFrame:
    rows, tasks = [], []
    for index in range(split.count):
        seed = split.seed_for(master, index)
        rel = f"{split.name}/{index:05d}.png"
        rows.append({"index": index, "label": split.label,
                     "source": "native" if split.label == "real" else "upsampled",
                     "seed": seed, "path": rel})
        tasks.append((split.label, seed, split.size, root / rel))
    bar = tqdm(total=len(tasks), desc=split.name, unit="img", disable=not progress, leave=False)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for _ in pool.map(_render, tasks, chunksize=max(1, len(tasks) // (4 * workers))):
                bar.update()
    else:
        for task in tasks:
            _render(task)
            bar.update()
    bar.close()
    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(root / f"{split.name}.csv", index=False, lineterminator="\n")
    logger.info(f"split {split.name}: {split.count} {split.label} images at {split.size}x{split.size}")
    return manifest


def build_corpus(spec: CorpusSpec, out_dir: Union[str, Path], workers: int = 1, progress: bool = True,
                 defs: Optional[List[SplitDef]] = None) -> "Corpus":
    """
    Generate every split as PNGs plus one manifest CSV per split.
    Splits left by an earlier build in `out_dir` are removed first.

    Raises:
        ValueError: overlapping split definitions
    """
    defs = defs if defs is not None else split_defs(spec)
    check_disjoint(defs)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    _clear_previous(root, defs)
    for split in defs:
        _write_split(split, spec.master_seed, root, workers, progress)
    info = {"spec": spec.model_dump(), "splits": [vars(d) for d in defs]}
    (root / CORPUS_INFO).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return Corpus(root)


class Corpus:
    """Read access to a built corpus; decoded images are cached as uint8."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        info_path = self.root / CORPUS_INFO
        if not info_path.is_file():
            raise FileNotFoundError(f"no corpus at {self.root} ({CORPUS_INFO} missing)")
        info = json.loads(info_path.read_text(encoding="utf-8"))
        self.spec = CorpusSpec(**info["spec"])
        self.splits: Dict[str, SplitDef] = {d["name"]: SplitDef(**d) for d in info["splits"]}
        self._cache: Dict[str, np.ndarray] = {}

    def manifest(self, split: str) -> pd.DataFrame:
        if split not in self.splits:
            raise KeyError(f"unknown split '{split}', corpus has {sorted(self.splits)}")
        return pd.read_csv(self.root / f"{split}.csv", dtype={"seed": "uint64"})

    def paths(self, split: str) -> List[Path]:
        return [self.root / p for p in self.manifest(split)["path"]]

    def raw(self, split: str) -> np.ndarray:
        """N x H x W x 3 uint8."""
        if split not in self._cache:
            paths = self.paths(split)
            if not paths:
                size = self.splits[split].size
                self._cache[split] = np.zeros((0, size, size, 3), dtype=np.uint8)
            else:
                self._cache[split] = np.stack([load_png_uint8(p) for p in paths])
        return self._cache[split]

    def images(self, split: str, dtype: np.dtype = np.float64) -> np.ndarray:
        """N x 3 x H x W floats in [0, 1]."""
        return to_float(self.raw(split), dtype)

    def labeled(self, splits: Iterable[str], dtype: np.dtype = np.float64) -> Tuple[np.ndarray, np.ndarray]:
        """Stack splits into (images, labels) with labels 1 for real and 0 for fake."""
        images, labels = [], []
        for split in splits:
            batch = self.images(split, dtype)
            images.append(batch)
            labels.append(np.full(len(batch), 1 if self.splits[split].label == "real" else 0, dtype=np.int64))
        return np.concatenate(images), np.concatenate(labels)
