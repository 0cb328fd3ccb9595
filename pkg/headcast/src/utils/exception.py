"""
Errors raised by headcast.

Every failure surfaces as a HeadcastException carrying an ``error_type`` tag,
a context dict and the process exit code the CLI returns for it:

    TrackParseError         malformed track text; ``context["line"]`` is 1-based  (exit 1)
    TrackReadError          a track file could not be read                        (exit 1)
    OutputError             a report or prediction file could not be written      (exit 1)
    ConfigurationError      bad config value or an empty input set                (exit 1)
    InvalidArgument         a rejected argument value                             (exit 1)
    FileNotFound, YAMLReadError, EmptyYAML                                        (exit 1)
    DegenerateOrientation   a forward axis too close to vertical to give a yaw    (exit 1)
    NumericDegeneracy       a numerically singular innovation covariance          (exit 1)
    DegenerateSample        all paired differences zero, or no scorable frames    (exit 2)
    SampleTooLarge          exact enumeration asked for beyond its size limit     (exit 1)
"""
import logging
import sys
from typing import Any, Dict, Optional

# same "headcast" logger that headcast.src.utils.logger configures
logger = logging.getLogger("headcast")

EXIT_CONFIG_OR_IO = 1
EXIT_DEGENERATE_STATISTICS = 2


class HeadcastException(Exception):
    """
    Attributes:
        error (Exception): The underlying exception.
        error_type (str): One of the tags listed in the module docstring.
        context (Dict): Where it happened (line, path, weight, group, ...).
        exit_code (int): Exit code the CLI returns for this error.
        message (str): Multi-line message built from the above.
    """

    def __init__(
            self,
            error: Exception,
            error_type: Optional[str] = None,
            context: Optional[Dict[str, Any]] = None,
            exit_code: int = EXIT_CONFIG_OR_IO,
            log_immediately: bool = False,
    ):
        self.error = error
        self.context = context or {}
        self.error_type = error_type if error_type else type(error).__name__
        self.exit_code = exit_code
        self.message = self._format_error_message(sys.exc_info()[2])

        super().__init__(self.message)

        if log_immediately:
            self.log_error()

    def _format_error_message(self, traceback: Any) -> str:
        lines = [f"Error Type: {self.error_type}"]
        if traceback is not None:
            # raised while handling another exception: point at where that one came from
            lines.append(f"File: {traceback.tb_frame.f_code.co_filename}")
            lines.append(f"Line Number: {traceback.tb_lineno}")
        lines.append(f"Error Message: {self.error}")
        lines.append(f"Exit Code: {self.exit_code}")
        if self.context:
            lines.append("Context:")
            lines.extend(f"  {key}: {value}" for key, value in self.context.items())
        return "\n".join(lines)

    def log_error(self, level: int = logging.ERROR) -> None:
        logger.log(level, self.message)

    def __str__(self) -> str:
        return self.message


def invalid_argument(message: str, **context: Any) -> HeadcastException:
    """InvalidArgument for a rejected input value."""
    return HeadcastException(error=ValueError(message), error_type="InvalidArgument", context=context)


def configuration_error(message: str, **context: Any) -> HeadcastException:
    """ConfigurationError for an invalid config value or an empty input set."""
    return HeadcastException(error=ValueError(message), error_type="ConfigurationError", context=context)
