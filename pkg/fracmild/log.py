import logging

from rich.console import Console
from rich.logging import RichHandler

ROOT = "fracmild"


def get_logger(name: str) -> logging.Logger:
    if name.startswith(ROOT):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT}.{name}")


def setup_logging(level: str = "WARNING") -> None:
    # stdout belongs to the command output, json included
    logger = logging.getLogger(ROOT)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=Console(stderr=True), show_path=False, rich_tracebacks=False
        )
        handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
        logger.addHandler(handler)
    logger.setLevel(level.upper())
