from dataclasses import dataclass, replace
from typing import Self

import numpy as np

from nssm_unc.core.exceptions import NumericalError


@dataclass(frozen=True, eq=False)
class UncertainPrediction:
    """Diagonal of the linearized posterior predictive for one input sequence.

    var_total = var_epistemic + 1/beta at every step; the interval is
    y_mean +/- multiplier * sqrt(var_total).
    """

    y_mean: np.ndarray
    var_epistemic: np.ndarray
    var_total: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    beta: float
    interval_multiplier: float = 3.0

    def __post_init__(self) -> None:
        n = self.y_mean.shape
        for name in ("var_epistemic", "var_total", "lo", "hi"):
            if getattr(self, name).shape != n:
                raise ValueError(f"{name} must have shape {n}")

    def __len__(self) -> int:
        return self.y_mean.shape[0]

    def tail(self, start: int) -> Self:
        """Steps ``start:``, same beta and multiplier"""
        window = slice(start, None)
        return replace(
            self,
            y_mean=self.y_mean[window],
            var_epistemic=self.var_epistemic[window],
            var_total=self.var_total[window],
            lo=self.lo[window],
            hi=self.hi[window],
        )

    @property
    def std_epistemic(self) -> np.ndarray:
        return np.sqrt(self.var_epistemic)

    @property
    def std_total(self) -> np.ndarray:
        return np.sqrt(self.var_total)

    @property
    def surprise(self) -> float:
        """Epistemic output std relative to nominal output magnitude, in percent.

        Needs no measured output.
        """
        nominal = float(np.sum(np.abs(self.y_mean)))
        if nominal == 0.0:
            raise NumericalError("undefined surprise (zero nominal energy)")
        return 100.0 * float(np.sum(self.std_epistemic)) / nominal
