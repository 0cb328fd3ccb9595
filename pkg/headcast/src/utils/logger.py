import logging
import logging.config
import os
import sys
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv
from pythonjsonlogger import jsonlogger

load_dotenv()

# Constants
FORMATTER_JSON = "json"
FORMATTER_DETAILED = "detailed"
DEFAULT_MAX_BYTES = 10 * 1024 * 1024  # 10MB
DEFAULT_BACKUP_COUNT = 5
DEFAULT_LOGGER_NAME = "headcast"
DEFAULT_LOG_DIR = Path(__file__).resolve().parent.parent.parent.parent / "logs"
LOG_DIR_ENV = "LOG_DIR"
LOG_LEVEL_ENV = "LOG_LEVEL"


class StderrHandler(logging.StreamHandler):
    """Stream handler bound to whatever sys.stderr is when a record is emitted."""

    def __init__(self, level: int = logging.NOTSET):
        logging.Handler.__init__(self, level)

    @property
    def stream(self):  # type: ignore[override]
        return sys.stderr


class LoggerConfigurator:
    """
    Configures the ``headcast`` logger: a rotating JSON file handler for runs that
    are replayed later and a detailed console handler on stderr.

    stdout is never a logging target; ``predict`` streams rows and the other
    commands print report paths there.
    """

    def __init__(
        self,
        log_dir: Optional[str] = None,
        log_level: Optional[str] = None,
        file_logging: bool = True,
        log_file_name_pattern: str = "%Y-%m-%d_%H-%M-%S",
        max_bytes: int = DEFAULT_MAX_BYTES,
        backup_count: int = DEFAULT_BACKUP_COUNT,
    ):
        """
        Args:
            log_dir: Directory for log files. $LOG_DIR wins over this value.
            log_level: Logger level name. $LOG_LEVEL wins over this value.
            file_logging: Attach the JSON file handler.
            log_file_name_pattern: DateTime pattern for log file names.
            max_bytes: Maximum size of each log file.
            backup_count: Number of rotated files to keep.
        """
        self.log_dir = os.getenv(LOG_DIR_ENV) or log_dir or str(DEFAULT_LOG_DIR)
        self.log_level = (os.getenv(LOG_LEVEL_ENV) or log_level or "INFO").upper()
        self.file_logging = file_logging
        self.log_file_name_pattern = log_file_name_pattern
        self.max_bytes = max_bytes
        self.backup_count = backup_count
        self.log_file: Optional[str] = None

        self._configure_logging()

    @classmethod
    def from_config(cls, section: Mapping[str, Any]) -> "LoggerConfigurator":
        """Build from the ``logging`` section of config.yaml (keys are all optional)."""
        return cls(
            log_dir=section.get("log_dir"),
            log_level=section.get("level"),
            file_logging=bool(section.get("file_logging", True)),
            max_bytes=int(section.get("max_bytes", DEFAULT_MAX_BYTES)),
            backup_count=int(section.get("backup_count", DEFAULT_BACKUP_COUNT)),
        )

    @staticmethod
    def _formatters() -> Dict[str, Dict[str, Any]]:
        return {
            FORMATTER_DETAILED: {
                "format": "[%(asctime)s] [%(levelname)s] %(name)s - %(module)s:%(lineno)d - %(message)s"
            },
            FORMATTER_JSON: {
                "()": jsonlogger.JsonFormatter,
                "format": "%(asctime)s %(name)s %(levelname)s %(module)s %(lineno)d %(message)s",
            },
        }

    def _handlers(self) -> Dict[str, Dict[str, Any]]:
        handlers: Dict[str, Dict[str, Any]] = {
            "console": {
                "level": self.log_level,
                "()": StderrHandler,
                "formatter": FORMATTER_DETAILED,
            },
        }
        if self.file_logging:
            self.log_file = self._get_log_file_path()
            handlers["file"] = {
                "level": self.log_level,
                "class": "logging.handlers.RotatingFileHandler",
                "filename": self.log_file,
                "maxBytes": self.max_bytes,
                "backupCount": self.backup_count,
                "encoding": "utf8",
                "formatter": FORMATTER_JSON,
            }
        return handlers

    def _get_log_file_path(self) -> str:
        """Generate and ensure the log file path exists."""
        try:
            log_path = Path(self.log_dir) / f"{datetime.now().strftime(self.log_file_name_pattern)}.log"
            log_path.parent.mkdir(parents=True, exist_ok=True)
            return str(log_path)
        except OSError:
            fallback_path = Path.home() / "logs" / "headcast.log"
            fallback_path.parent.mkdir(parents=True, exist_ok=True)
            print(f"Warning: Could not create log directory {self.log_dir}. Using fallback: {fallback_path}",
                  file=sys.stderr)
            return str(fallback_path)

    def _configure_logging(self) -> None:
        """Apply the configuration; fall back to a plain stderr handler if it fails."""
        handlers = self._handlers()
        try:
            logging.config.dictConfig({
                "version": 1,
                "disable_existing_loggers": False,
                "formatters": self._formatters(),
                "handlers": handlers,
                "loggers": {
                    DEFAULT_LOGGER_NAME: {
                        "handlers": list(handlers),
                        "level": self.log_level,
                        "propagate": False,
                    }
                },
            })
        except Exception as e:
            print(f"Failed to configure advanced logging: {e}", file=sys.stderr)
            logging.basicConfig(
                level=getattr(logging, self.log_level, logging.INFO),
                format="[%(asctime)s] %(name)s - %(levelname)s - %(message)s",
                handlers=[logging.StreamHandler(sys.stderr)],
            )

    @staticmethod
    def get_logger(name: str = DEFAULT_LOGGER_NAME) -> logging.Logger:
        return logging.getLogger(name)


def configure_logging(section: Optional[Mapping[str, Any]] = None) -> logging.Logger:
    """
    Re-apply the logger configuration from a config section. The module-level
    ``logger`` object stays valid: only its handlers and level change.
    """
    global logger_configurator
    logger_configurator = LoggerConfigurator.from_config(section or {})
    return logger_configurator.get_logger()


try:
    logger_configurator = LoggerConfigurator()
    logger = logger_configurator.get_logger()
except Exception as e:
    print(f"Failed to initialize logger configurator: {e}", file=sys.stderr)
    logging.basicConfig(level=logging.INFO)
    logger = logging.getLogger(DEFAULT_LOGGER_NAME)
    logger.error(f"Using fallback logger due to configuration error: {e}")
