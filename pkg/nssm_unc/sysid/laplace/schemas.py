from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class LaplacePosterior:
    """Gaussian N(theta_map, H^-1) stored through the lower Cholesky factor of H.

    H = tau I + beta sum_k g_k g_k^T with g_k = dy_k/dtheta (Gauss-Newton). The
    data term is also a finite-sample Fisher information, so with tau = 0 the
    same factor gives frequentist confidence regions for the ML estimate.
    The covariance H^-1 is never formed; every use goes through triangular solves.
    """

    theta_map: np.ndarray
    tau: float
    beta: float
    chol_H: np.ndarray
    jitter: float = 0.0
    washout: int = 0
    n_data_steps: int = 0

    def __post_init__(self) -> None:
        n = self.theta_map.shape[0]
        if self.chol_H.shape != (n, n):
            raise ValueError(f"factor must be {n} x {n}, got {self.chol_H.shape}")
        if self.beta <= 0:
            raise ValueError("beta must be positive")

    @property
    def n_theta(self) -> int:
        return self.theta_map.shape[0]

    def precision(self) -> np.ndarray:
        """Reconstructs H (tests and diagnostics only)"""
        return self.chol_H @ self.chol_H.T
