from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Self

import numpy as np
from pydantic import Field, model_validator

from nssm_unc.shared.schemas.base import BaseSchema

DEFAULT_FS = 51200.0


class NonlinearityVariant(str, Enum):
    STANDARD = "standard"  # elu(z) = e^z - 1 (z <= 0), z (z > 0)
    LITERAL = "literal"  # e^(z - 1) (z <= 0), 0 (z > 0), as printed


class MultisineConfig(BaseSchema):
    n_samples: int = Field(..., ge=2)
    fs: float = Field(default=DEFAULT_FS, gt=0)
    band_lo: float = Field(..., ge=0)
    band_hi: float = Field(..., gt=0)
    target_std: float = Field(..., gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def check_band(self) -> Self:
        if not self.band_lo < self.band_hi:
            raise ValueError(f"band_lo ({self.band_lo}) must be below band_hi ({self.band_hi})")
        if self.band_hi > self.fs / 2:
            raise ValueError(f"band_hi ({self.band_hi} Hz) exceeds Nyquist ({self.fs / 2} Hz)")
        return self


@dataclass(eq=False)
class LtiFilter:
    """Direct-form difference equation y_k = sum b_i u_{k-i} - sum a_j y_{k-j}.

    ``zi`` is the delay-line state carried between successive ``apply`` calls.
    """

    b: np.ndarray
    a: np.ndarray
    name: str = ""
    zi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self.b = np.asarray(self.b, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        if self.a.size == 0 or self.a[0] != 1.0:
            raise ValueError("denominator must be monic (a[0] == 1)")

    @property
    def order(self) -> int:
        return max(self.a.size, self.b.size) - 1


# Printed coefficients at fs = 51.2 kHz
G1 = (
    [0.010252, 0.030757, 0.030757, 0.010252],
    [1.0, -2.151941, 1.744729, -0.510767],
)
G2 = (
    [0.008706, -0.004596, -0.004596, 0.008706],
    [1.0, -2.574867, 2.235716, -0.652629],
)


def g1_filter() -> LtiFilter:
    return LtiFilter(b=G1[0], a=G1[1], name="G1")


def g2_filter() -> LtiFilter:
    return LtiFilter(b=G2[0], a=G2[1], name="G2")


@dataclass(frozen=True, eq=False)
class Dataset:
    u: np.ndarray
    y: np.ndarray
    fs: float
    sigma_e: float
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.u.shape != self.y.shape or self.u.ndim != 1:
            raise ValueError(f"u and y must be equal-length 1-D sequences ({self.u.shape}, {self.y.shape})")
        if self.sigma_e < 0:
            raise ValueError("sigma_e must be non-negative")

    def __len__(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True, eq=False)
class FrequencyResponse:
    freq_hz: np.ndarray
    magnitude: np.ndarray
    phase_deg: np.ndarray

    @property
    def magnitude_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(self.magnitude, 1e-300))
