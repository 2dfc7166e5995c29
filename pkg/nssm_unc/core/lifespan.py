from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from loguru import logger
from prometheus_client import REGISTRY, write_to_textfile

from nssm_unc.core.logging import setup_logging


@contextmanager
def run_lifespan(run_dir: str | Path, level: str = "INFO") -> Iterator[Path]:
    """Sets up logging for one CLI invocation and dumps metrics on the way out."""
    run_path = Path(run_dir)
    run_path.mkdir(parents=True, exist_ok=True)
    setup_logging(level=level, log_dir=run_path / "logs")

    try:
        yield run_path
    finally:
        try:
            write_to_textfile(str(run_path / "metrics.prom"), REGISTRY)
        except OSError as e:
            logger.error(f"Failed to write metrics textfile: {e}")
        logger.complete()
