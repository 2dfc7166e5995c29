"""First-order and quasi-Newton optimizers on flat parameter vectors."""

from collections import deque
from collections.abc import Callable

import numpy as np
from loguru import logger

from nssm_unc.core.exceptions import SimulationDivergedError

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


class Adam:
    def __init__(
        self,
        n_params: int,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0

        # Moments
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1

        # Biased moment estimates
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2

        # Bias correction
        m_corrected = self.m / (1 - self.beta1**self.t)
        v_corrected = self.v / (1 - self.beta2**self.t)

        return theta - self.lr * m_corrected / (np.sqrt(v_corrected) + self.epsilon)


def _backtrack(
    fun: Objective,
    theta: np.ndarray,
    f: float,
    direction: np.ndarray,
    slope: float,
    t: float,
    c1: float,
    shrink: float,
    max_backtracks: int,
) -> tuple[np.ndarray, float, np.ndarray, float] | None:
    """Armijo backtracking; a diverging trial point counts as an infinite objective."""
    for _ in range(max_backtracks):
        candidate = theta + t * direction
        try:
            f_new, g_new = fun(candidate)
        except SimulationDivergedError:
            f_new, g_new = np.inf, None
        if np.isfinite(f_new) and f_new <= f + c1 * t * slope:
            return candidate, f_new, g_new, t
        t *= shrink
    return None


class Lbfgs:
    """Limited-memory BFGS with two-loop recursion and backtracking line search.

    Memory persists across ``minimize`` calls so refinement epochs continue
    the same curvature estimate.
    """

    def __init__(
        self,
        memory: int = 20,
        c1: float = 1e-4,
        shrink: float = 0.5,
        max_backtracks: int = 30,
        tol_grad: float = 1e-7,
        tol_change: float = 1e-12,
    ):
        self.s_hist: deque[np.ndarray] = deque(maxlen=memory)
        self.y_hist: deque[np.ndarray] = deque(maxlen=memory)
        self.c1 = c1
        self.shrink = shrink
        self.max_backtracks = max_backtracks
        self.tol_grad = tol_grad
        self.tol_change = tol_change
        self.n_evals = 0

    def reset(self) -> None:
        self.s_hist.clear()
        self.y_hist.clear()

    def direction(self, grad: np.ndarray) -> np.ndarray:
        q = grad.copy()
        alphas = []
        for s, y in zip(reversed(self.s_hist), reversed(self.y_hist), strict=True):
            alpha = (s @ q) / (y @ s)
            q -= alpha * y
            alphas.append(alpha)

        if self.s_hist:
            s, y = self.s_hist[-1], self.y_hist[-1]
            q *= (y @ s) / (y @ y)

        pairs = zip(self.s_hist, self.y_hist, strict=True)
        for (s, y), alpha in zip(pairs, reversed(alphas), strict=True):
            b = (y @ q) / (y @ s)
            q += s * (alpha - b)
        return -q

    def minimize(
        self, fun: Objective, theta: np.ndarray, max_iter: int
    ) -> tuple[np.ndarray, float]:
        def counted(x: np.ndarray) -> tuple[float, np.ndarray]:
            self.n_evals += 1
            return fun(x)

        f, g = counted(theta)
        for it in range(max_iter):
            if np.max(np.abs(g)) <= self.tol_grad:
                break

            d = self.direction(g)
            slope = g @ d
            if not slope < 0:
                # not a descent direction: drop the curvature pairs
                self.reset()
                d = -g
                slope = g @ d

            t = 1.0 if self.s_hist else min(1.0, 1.0 / np.sum(np.abs(g)))
            step = _backtrack(
                counted, theta, f, d, slope, t, self.c1, self.shrink, self.max_backtracks
            )
            if step is None:
                logger.warning(f"L-BFGS line search failed at iteration {it}; stopping")
                break
            theta_new, f_new, g_new, _ = step

            s_vec = theta_new - theta
            y_vec = g_new - g
            if y_vec @ s_vec > 1e-10:
                self.s_hist.append(s_vec)
                self.y_hist.append(y_vec)

            converged = abs(f - f_new) <= self.tol_change * max(1.0, abs(f))
            theta, f, g = theta_new, f_new, g_new
            if converged:
                break
        return theta, f


class GradientDescent:
    """Full-batch steepest descent with the same backtracking line search."""

    def __init__(self, c1: float = 1e-4, shrink: float = 0.5, max_backtracks: int = 30):
        self.c1 = c1
        self.shrink = shrink
        self.max_backtracks = max_backtracks
        self.t = None
        self.n_evals = 0

    def minimize(
        self, fun: Objective, theta: np.ndarray, max_iter: int
    ) -> tuple[np.ndarray, float]:
        def counted(x: np.ndarray) -> tuple[float, np.ndarray]:
            self.n_evals += 1
            return fun(x)

        f, g = counted(theta)
        for it in range(max_iter):
            slope = -(g @ g)
            if slope == 0.0:
                break
            t = 2.0 * self.t if self.t is not None else min(1.0, 1.0 / np.sum(np.abs(g)))
            step = _backtrack(
                counted, theta, f, -g, slope, t, self.c1, self.shrink, self.max_backtracks
            )
            if step is None:
                logger.warning(f"gradient descent line search failed at iteration {it}")
                break
            theta, f, g, self.t = step
        return theta, f
