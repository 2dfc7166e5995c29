from collections.abc import Iterator
from typing import Protocol, Self

import numpy as np


class OutputSensitivityModel(Protocol):
    """Anything that yields noise-free outputs and their parameter gradients.

    Shapes use a leading batch axis: `u` is `[B, N, n_u]`, `x0` is `[B, n_x]`
    and `s0` is `[B, n_x, n_theta]`. `output_gradient_steps` yields, for each
    step k, `(y_k [B], dy_k/dtheta [B, n_theta])`.
    """

    @property
    def n_theta(self) -> int: ...

    @property
    def theta(self) -> np.ndarray: ...

    def with_theta(self, theta: np.ndarray) -> Self: ...

    def simulate_outputs(
        self, u: np.ndarray, x0: np.ndarray | None = None
    ) -> np.ndarray: ...

    def output_gradient_steps(
        self,
        u: np.ndarray,
        x0: np.ndarray | None = None,
        s0: np.ndarray | None = None,
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]: ...
