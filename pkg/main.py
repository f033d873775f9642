# In main.py
import asyncio
import logging
import sys
from typing import Optional, Sequence

from config import config
from biaslab.errors import BiasLabError, InvariantViolationError
from biaslab.error_log_handler import get_error_logger
from biaslab.handlers import CommandHandlers

# 1. --- Basic Logging Configuration ---
logging.basicConfig(
    level=config.LOG_LEVEL, format="%(asctime)s - %(name)s - [%(levelname)s] - %(message)s"
)
logger = logging.getLogger(__name__)


async def main(argv: Optional[Sequence[str]] = None) -> int:
    # 2. --- Error line handler: ERROR:<code>:<Kind>: message on stderr ---
    error_logger = get_error_logger()
    handlers = CommandHandlers()

    try:
        command = handlers.parse(argv)
        output = await handlers.dispatch(command)
        handlers.emit(output, command.options)
        return output.exit_code

    except BiasLabError as e:
        error_logger.error(e.message, extra={"error": e})
        return e.exit_code
    except Exception as e:
        logger.error(f"An unexpected error occurred: {e}", exc_info=True)
        error_logger.error(str(e), extra={"error": e})
        return InvariantViolationError.exit_code


def run(argv: Optional[Sequence[str]] = None) -> int:
    return asyncio.run(main(argv))


if __name__ == "__main__":
    try:
        sys.exit(run())
    except KeyboardInterrupt:
        print("\nInterrupted.", file=sys.stderr)
        sys.exit(130)
