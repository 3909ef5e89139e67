"""
Logging configuration for the fractional tunneling simulator.

IMPORTANT: Do NOT use emojis or Unicode symbols in log messages (no Greek letters either,
write alpha, Gamma). Keep log messages plain text only.
"""
import logging
import sys
from pathlib import Path

LOG_FILE_NAME = "fractional_tunneling.log"

# Modules whose per-step chatter stays in the log file only
QUIET_ON_CONSOLE = ("tunneling.prop", "tunneling.groundstate")

try:
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    if hasattr(sys.stderr, "reconfigure"):
        sys.stderr.reconfigure(encoding="utf-8")
except Exception:
    pass


class ConsoleLogFilter(logging.Filter):
    """Hide INFO/DEBUG records from the propagation and ground-state modules on the console"""
    def filter(self, record):
        if record.levelno >= logging.WARNING:
            return True
        if record.name.startswith(QUIET_ON_CONSOLE):
            return False
        return True


def setup_logging(log_file: Path | str | None = None, verbose: bool = False):
    """Configure root logger with file and console handlers (idempotent per log file)"""
    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)

    for handler in list(root_logger.handlers):
        if getattr(handler, "_tunneling_handler", False):
            root_logger.removeHandler(handler)
            handler.close()

    if log_file is not None:
        log_file = Path(log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        file_handler._tunneling_handler = True
        root_logger.addHandler(file_handler)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not verbose:
        console_handler.addFilter(ConsoleLogFilter())
    console_handler.setFormatter(logging.Formatter('%(asctime)s - %(levelname)s - %(message)s'))
    console_handler._tunneling_handler = True
    root_logger.addHandler(console_handler)

    return root_logger
