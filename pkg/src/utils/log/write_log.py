import json
import logging
import logging.handlers
from contextvars import ContextVar
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from utils.log.config import (
    FALLBACK_LOG_DIR,
    LOG_BACKUP_COUNT,
    LOG_FILE_NAME,
    LOG_LEVEL,
    LOG_MAX_BYTES,
)


@dataclass(frozen=True)
class RunContext:
    run_id: str = ""
    command: str = ""
    stage: str = ""


run_context: ContextVar[Optional[RunContext]] = ContextVar('run_context', default=None)

_STANDARD_ATTRS = {
    'name', 'msg', 'args', 'created', 'filename', 'funcName', 'levelname', 'levelno', 'lineno',
    'module', 'msecs', 'message', 'pathname', 'process', 'processName', 'relativeCreated',
    'thread', 'threadName', 'exc_info', 'exc_text', 'stack_info', 'taskName',
    'run_id', 'command', 'stage',
}


class ContextFilter(logging.Filter):

    def filter(self, record: logging.LogRecord) -> bool:
        ctx = run_context.get()
        record.run_id = ctx.run_id if ctx else ''
        record.command = ctx.command if ctx else ''
        record.stage = ctx.stage if ctx else ''
        return True


class PILNoiseFilter(logging.Filter):
    """Drops PIL's per-chunk debug chatter that floods DEBUG runs."""

    def filter(self, record: logging.LogRecord) -> bool:
        return not (record.name.startswith('PIL') and record.levelno < logging.INFO)


class JsonFormatter(logging.Formatter):

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            'message': record.getMessage(),
            'timestamp': self.formatTime(record, self.datefmt),
            'level': record.levelname,
            'logger': record.name,
            'run_id': getattr(record, 'run_id', ''),
            'command': getattr(record, 'command', ''),
            'stage': getattr(record, 'stage', ''),
            'lineno': record.lineno,
            'funcName': record.funcName,
        }
        if record.exc_info:
            log_data['exc_info'] = self.formatException(record.exc_info)

        # structured extras passed through `extra={...}`
        for key, value in record.__dict__.items():
            if key not in _STANDARD_ATTRS and not key.startswith('_'):
                log_data[key] = value

        return json.dumps(log_data, ensure_ascii=False, default=str)


PLAIN_FORMAT = '%(asctime)s %(levelname)s [run_id=%(run_id)s] [%(command)s] %(name)s:%(lineno)d %(message)s'


def setup_logging(
    log_file: Optional[str] = None,
    max_bytes: int = LOG_MAX_BYTES,
    backup_count: int = LOG_BACKUP_COUNT,
    log_level: str = LOG_LEVEL,
    use_json_format: bool = True,
    console_output: bool = True
) -> str:
    """
    Configure the root logger: rotating JSON file log plus a plain console log.

    Args:
        log_file: target file; defaults to FALLBACK_LOG_DIR/run.log
        max_bytes: rotation threshold
        backup_count: rotated files kept
        log_level: level name
        use_json_format: JSON lines in the file, plain text otherwise
        console_output: also log to stderr

    Returns:
        the log file path in use
    """
    if log_file is None:
        FALLBACK_LOG_DIR.mkdir(parents=True, exist_ok=True)
        log_file = str(FALLBACK_LOG_DIR / LOG_FILE_NAME)
    else:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)

    level = getattr(logging, log_level.upper(), logging.INFO)
    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in list(root_logger.handlers):
        root_logger.removeHandler(handler)
        handler.close()

    context_filter = ContextFilter()
    noise_filter = PILNoiseFilter()

    file_handler = logging.handlers.RotatingFileHandler(
        filename=log_file,
        maxBytes=max_bytes,
        backupCount=backup_count,
        encoding='utf-8'
    )
    file_handler.setLevel(level)
    if use_json_format:
        file_handler.setFormatter(JsonFormatter())
    else:
        file_handler.setFormatter(logging.Formatter(fmt=PLAIN_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
    file_handler.addFilter(context_filter)
    file_handler.addFilter(noise_filter)
    root_logger.addHandler(file_handler)

    if console_output:
        console_handler = logging.StreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter(fmt=PLAIN_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
        console_handler.addFilter(context_filter)
        console_handler.addFilter(noise_filter)
        root_logger.addHandler(console_handler)

    logging.getLogger(__name__).debug(f"Logging configured: file={log_file}, max_bytes={max_bytes}, "
                                      f"backup_count={backup_count}")
    return log_file


__all__ = ['setup_logging', 'run_context', 'RunContext', 'ContextFilter', 'JsonFormatter']
