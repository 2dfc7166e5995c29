from dataclasses import dataclass
from typing import Literal, Self

import numpy as np
from pydantic import Field, model_validator

from nssm_unc.shared.schemas.base import BaseSchema

# sigma_e = 5 mV read as a standard deviation
DEFAULT_BETA = 1.0 / (5e-3) ** 2


class TrainConfig(BaseSchema):
    batch_size: int = Field(default=256, ge=1)
    subseq_len: int = Field(default=256, ge=2)
    epochs_adam: int = Field(default=120, ge=0)
    epochs_refine: int = Field(default=4, ge=0)
    refine_iters: int = Field(default=20, ge=1)
    refine_method: Literal["lbfgs", "gd"] = "lbfgs"
    lbfgs_memory: int = Field(default=20, ge=1)
    lr: float = Field(default=1e-3, gt=0)
    washout: int = Field(default=64, ge=0)
    tau: float = Field(default=1e-2, ge=0)
    beta: float = Field(default=DEFAULT_BETA, gt=0)
    estimate_beta: bool = False
    seed: int = 0

    @model_validator(mode="after")
    def check_washout(self) -> Self:
        if not self.subseq_len > self.washout:
            raise ValueError(
                f"subseq_len ({self.subseq_len}) must exceed washout ({self.washout})"
            )
        return self


@dataclass(frozen=True, eq=False)
class NllResult:
    value: float
    e_lik: float
    e_prio: float
    grad: np.ndarray | None = None


@dataclass(frozen=True)
class TraceEntry:
    epoch: int
    phase: str  # init, adam, lbfgs, gd
    nll: float


@dataclass(frozen=True, eq=False)
class TrainReport:
    theta_map: np.ndarray
    nll_trace: list[TraceEntry]
    best_nll: float
    wall_time: float
    config: TrainConfig
    beta: float
    beta_estimated: float | None = None
