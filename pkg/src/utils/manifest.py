"""
Run manifests.

Every command writes exactly one `run_manifest.json` into its output
directory: what ran, with which resolved config, on which build, and what it
produced.
"""
import json
import logging
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

MANIFEST_NAME = "run_manifest.json"
UNKNOWN_BUILD = "unknown"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def build_id(search_from: Optional[Union[str, Path]] = None) -> str:
    """`git describe --always --dirty` of the checkout holding this code, or "unknown"."""
    try:
        import git
        repo = git.Repo(search_from or Path(__file__).resolve().parent, search_parent_directories=True)
        return repo.git.describe("--always", "--dirty", "--tags")
    except Exception as e:
        logger.debug(f"no git build id: {e}")
        return UNKNOWN_BUILD


class RunManifest(BaseModel):
    command: str
    argv: List[str] = Field(default_factory=list)
    config_path: Optional[str] = None
    config: Dict[str, Any] = Field(default_factory=dict)
    build_id: str = UNKNOWN_BUILD
    started_at: str = Field(default_factory=utc_now)
    finished_at: Optional[str] = None
    outputs: List[str] = Field(default_factory=list)

    def finish(self, outputs: List[Union[str, Path]]) -> "RunManifest":
        self.outputs = sorted(str(p) for p in outputs)
        self.finished_at = utc_now()
        return self


def manifest_path(out_dir: Union[str, Path]) -> Path:
    return Path(out_dir) / MANIFEST_NAME


def ensure_writable(out_dir: Union[str, Path], force: bool) -> None:
    """
    Raises:
        FileExistsError: a manifest already exists and `force` is off
    """
    path = manifest_path(out_dir)
    if path.exists() and not force:
        raise FileExistsError(f"{path} already exists; pass --force to overwrite")


def write_manifest(manifest: RunManifest, out_dir: Union[str, Path]) -> Path:
    """Atomic write: temp file in the same directory, then rename."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = manifest_path(out_dir)
    fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{MANIFEST_NAME}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(manifest.model_dump(), f, indent=2)
            f.write("\n")
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return target
