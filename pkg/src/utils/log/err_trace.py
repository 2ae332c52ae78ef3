import logging
import sys
import traceback
from pathlib import Path
from typing import List, Optional

# src/, the root of every package in this project
SRC_ROOT = Path(__file__).resolve().parents[2]


def _in_project(filename: str) -> bool:
    path = Path(filename).resolve()
    return path.is_relative_to(SRC_ROOT) and path.name != "err_trace.py"


def extract_core_stack(lines_num: int = 5, exc: Optional[BaseException] = None) -> List[str]:
    """
    Trimmed traceback of `exc` (default: the exception being handled) keeping
    only the last `lines_num` frames from this project, then the exception line.
    """
    if exc is None:
        exc = sys.exc_info()[1]
    if exc is None or exc.__traceback__ is None:
        return ["no exception in flight"]

    frames = traceback.extract_tb(exc.__traceback__)
    own = [fr for fr in frames if _in_project(fr.filename)] or list(frames)
    if lines_num > 0:
        own = own[-lines_num:]

    out = ["Traceback (most recent call last, project frames only):"]
    for fr in own:
        rel = Path(fr.filename).resolve()
        shown = rel.relative_to(SRC_ROOT) if rel.is_relative_to(SRC_ROOT) else rel.name
        out.append(f"  {shown}:{fr.lineno} in {fr.name}")
        if fr.line:
            out.append(f"    {fr.line.strip()}")
    out.extend(ln.rstrip("\n") for ln in traceback.format_exception_only(type(exc), exc))
    return out


def one_line_error(exc: BaseException) -> str:
    """Single machine-parsable line: `error: <Type>: <message>` with newlines folded."""
    message = " ".join(str(exc).split())
    return f"error: {type(exc).__name__}: {message}"


def log_failure(logger: logging.Logger, exc: BaseException, what: str) -> None:
    """ERROR line for the failure, the trimmed stack at DEBUG."""
    logger.error(f"{what} failed: {one_line_error(exc)}")
    for line in extract_core_stack(exc=exc):
        logger.debug(line)
