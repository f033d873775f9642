# biaslab/error_log_handler.py
import logging
import sys
from typing import Optional, TextIO

from biaslab.errors import BiasLabError, InvariantViolationError

ERROR_LOGGER_NAME = "biaslab.cli.errors"


class ErrorPrefixHandler(logging.Handler):
    """
    A logging handler that writes each error record as a single
    machine-parsable line on standard error:

        ERROR:<exit code>:<ErrorKind>: <message>

    The exception attached to the record (logger.error(..., exc_info=e) or
    extra={"error": e}) decides the exit code and the kind.
    """

    def __init__(self, stream: Optional[TextIO] = None):
        super().__init__(level=logging.ERROR)
        self.stream = stream

    @staticmethod
    def _error_of(record: logging.LogRecord) -> Optional[BaseException]:
        error = getattr(record, "error", None)
        if error is None and record.exc_info:
            error = record.exc_info[1]
        return error

    def emit(self, record: logging.LogRecord):
        error = self._error_of(record)
        if isinstance(error, BiasLabError):
            code, kind, message = error.exit_code, error.kind, error.message
        else:
            # Anything that is not a BiasLabError is a bug on our side.
            code = InvariantViolationError.exit_code
            kind = type(error).__name__ if error is not None else "Internal"
            message = str(error) if error is not None else record.getMessage()

        # Keep the contract of one line per error.
        line = f"ERROR:{code}:{kind}: {' '.join(str(message).split())}"
        stream = self.stream or sys.stderr
        try:
            stream.write(line + "\n")
            stream.flush()
        except Exception:
            self.handleError(record)


def get_error_logger(stream: Optional[TextIO] = None) -> logging.Logger:
    # Dedicated logger: never propagates, so the root handlers cannot duplicate the line.
    logger = logging.getLogger(ERROR_LOGGER_NAME)
    logger.propagate = False
    for handler in list(logger.handlers):
        if isinstance(handler, ErrorPrefixHandler):
            logger.removeHandler(handler)
    logger.addHandler(ErrorPrefixHandler(stream))
    logger.setLevel(logging.ERROR)
    return logger
