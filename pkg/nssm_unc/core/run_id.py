import os
import uuid

RUN_ID_ENV = "NSSM_UNC_RUN_ID"


def generate_run_id() -> str:
    return uuid.uuid4().hex[:12]


def get_run_id_from_env() -> str | None:
    run_id = os.environ.get(RUN_ID_ENV)
    return run_id.strip() if run_id else None
