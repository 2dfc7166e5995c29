import sys
from pathlib import Path

from loguru import logger


def setup_logging(level: str = "INFO", log_dir: str | Path | None = None):
    logger.remove()

    # Console
    logger.add(
        sys.stderr,
        level=level,
        serialize=False,
        backtrace=False,
        diagnose=False,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | "
        "{extra[run_id]} | {message}",
    )

    # Rotated JSON file per run dir
    if log_dir is not None:
        logger.add(
            Path(log_dir) / "nssm-unc.log",
            level=level,
            rotation="10 MB",
            retention="7 days",
            compression="zip",
            serialize=True,
        )

    logger.configure(extra={"run_id": "-"})
    return logger
