"""
Logging defaults
"""
from pathlib import Path

LOG_LEVEL = "INFO"

LOG_FILE_NAME = "run.log"

LOG_MAX_BYTES = 100 * 1024 * 1024  # 100MB

LOG_BACKUP_COUNT = 5

# used before a command has an output directory
FALLBACK_LOG_DIR = Path("/tmp/afgen/logs")
