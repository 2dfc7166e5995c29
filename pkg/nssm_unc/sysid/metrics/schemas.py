from pydantic import Field

from nssm_unc.shared.schemas.base import BaseSchema


class EvalReport(BaseSchema):
    signal_id: str
    fit: float = Field(..., le=100.0)
    coverage: float = Field(..., ge=0.0, le=100.0)
    surprise: float = Field(..., ge=0.0)
    rmse: float = Field(..., ge=0.0)
    n_steps: int = Field(..., ge=1)


class ReferenceRow(BaseSchema):
    """Published figures for one test scenario, printed next to measured rows"""

    signal_id: str
    fit: float
    coverage: float
    surprise: float
