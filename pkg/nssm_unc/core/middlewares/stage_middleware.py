import time
from collections.abc import Callable
from typing import TypeVar

from loguru import logger

from nssm_unc.core.exceptions import NssmUncError
from nssm_unc.core.metrics import STAGE_DURATION
from nssm_unc.core.run_id import generate_run_id, get_run_id_from_env

T = TypeVar("T")


def run_stage(stage: str, handler: Callable[[], T]) -> T:
    """Runs one pipeline stage with a bound run id, timing and status logging.

    Domain errors are logged as one line and re-raised for the CLI to turn into
    an exit code; anything else is logged with its traceback.
    """
    start_time = time.perf_counter()
    run_id = get_run_id_from_env() or generate_run_id()

    with logger.contextualize(run_id=run_id):
        logger.info(f"STAGE {stage}")
        try:
            result = handler()
        except NssmUncError as e:
            duration = time.perf_counter() - start_time
            STAGE_DURATION.labels(stage=stage, status="error").observe(duration)
            logger.error(
                f"STAGE {stage} status=error category={e.category} "
                f"duration={duration:.3f}s detail={e.detail}"
            )
            raise
        except Exception:
            duration = time.perf_counter() - start_time
            STAGE_DURATION.labels(stage=stage, status="error").observe(duration)
            logger.exception(f"STAGE {stage} status=error duration={duration:.3f}s")
            raise
        else:
            duration = time.perf_counter() - start_time
            STAGE_DURATION.labels(stage=stage, status="ok").observe(duration)
            logger.info(f"STAGE {stage} status=ok duration={duration:.3f}s")
            return result
