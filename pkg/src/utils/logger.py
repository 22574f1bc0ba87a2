"""
Logging utility for the graph Fujita toolkit
"""
import logging
import os
import sys
from typing import Optional

from ..config import Config


def setup_logger(name: str, log_file: Optional[str] = None, level: Optional[str] = None) -> logging.Logger:
    """Setup logger with console and (optionally) file handlers"""
    logger = logging.getLogger(name)

    level_name = (level or Config.LOG_LEVEL).upper()
    logger.setLevel(getattr(logging, level_name, logging.INFO))

    detailed_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    console_formatter = logging.Formatter(
        '%(levelname)s - %(message)s'
    )

    # Avoid adding a second console handler if the logger is already set up
    if not any(getattr(h, '_toolkit_console', False) for h in logger.handlers):
        # stdout carries the one-line run summary, so logs go to stderr
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(logger.level)
        console_handler.setFormatter(console_formatter)
        console_handler._toolkit_console = True
        logger.addHandler(console_handler)

    if log_file:
        try:
            os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
            for handler in list(logger.handlers):
                if isinstance(handler, logging.FileHandler):
                    logger.removeHandler(handler)
                    handler.close()

            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(detailed_formatter)
            logger.addHandler(file_handler)

        except OSError as e:
            # If file logging fails, just continue with console logging
            logger.warning("Could not setup file logging: %s", e)

    return logger
