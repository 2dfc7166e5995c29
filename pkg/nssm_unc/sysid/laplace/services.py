"""
Laplace approximation of the parameter posterior at theta_MAP.

Only the Gauss-Newton term of the Hessian is accumulated; the residual-weighted
second-derivative term is never computed.
"""

from collections.abc import Iterable

import numpy as np
from loguru import logger
from scipy import linalg

from nssm_unc.core.exceptions import NumericalError
from nssm_unc.core.metrics import JITTER_RETRIES
from nssm_unc.shared.interfaces.sensitivity_model import OutputSensitivityModel
from nssm_unc.sysid.datagen.schemas import Dataset
from nssm_unc.sysid.laplace.schemas import LaplacePosterior

JITTER_REL = 1e-8
JITTER_ESCALATIONS = 3
GRAM_CHUNK = 256


class LaplaceService:
    @staticmethod
    def accumulate_gram(rows: Iterable[np.ndarray], n_theta: int, chunk: int = GRAM_CHUNK) -> np.ndarray:
        """sum_k g_k g_k^T over gradient rows, in fixed order.

        Rows are stacked into chunks for a BLAS product; chunk results are added
        with Kahan compensation.
        """
        total = np.zeros((n_theta, n_theta))
        compensation = np.zeros((n_theta, n_theta))
        pending: list[np.ndarray] = []

        def flush() -> None:
            nonlocal total, compensation
            if not pending:
                return
            G = np.vstack(pending)
            block = G.T @ G - compensation
            updated = total + block
            compensation = (updated - total) - block
            total = updated
            pending.clear()

        for row in rows:
            pending.append(np.atleast_2d(row))
            if len(pending) == chunk:
                flush()
        flush()
        return total

    @staticmethod
    def factorize(H: np.ndarray) -> tuple[np.ndarray, float]:
        """Lower Cholesky factor of H, with escalating diagonal jitter on failure"""
        if not np.isfinite(H).all():
            raise NumericalError("precision matrix contains non-finite entries")
        try:
            return linalg.cholesky(H, lower=True), 0.0
        except linalg.LinAlgError:
            pass

        n = H.shape[0]
        jitter = JITTER_REL * np.trace(H) / n
        for attempt in range(JITTER_ESCALATIONS + 1):
            if jitter > 0:
                JITTER_RETRIES.inc()
                logger.warning(f"Cholesky failed; retrying with jitter {jitter:.3g} (attempt {attempt + 1})")
                try:
                    return linalg.cholesky(H + jitter * np.eye(n), lower=True), jitter
                except linalg.LinAlgError:
                    pass
            jitter *= 10.0

        eig_min = float(linalg.eigvalsh(H, subset_by_index=[0, 0])[0])
        raise NumericalError(
            f"precision matrix is not positive definite (smallest eigenvalue ~ {eig_min:.3e})"
        )

    @staticmethod
    def from_precision(
        theta_map: np.ndarray,
        H: np.ndarray,
        tau: float,
        beta: float,
        washout: int = 0,
        n_data_steps: int = 0,
    ) -> LaplacePosterior:
        chol_H, jitter = LaplaceService.factorize(H)
        return LaplacePosterior(
            theta_map=np.array(theta_map, dtype=np.float64),
            tau=tau,
            beta=beta,
            chol_H=chol_H,
            jitter=jitter,
            washout=washout,
            n_data_steps=n_data_steps,
        )

    @staticmethod
    def gn_precision(
        model: OutputSensitivityModel,
        data: Dataset | np.ndarray,
        tau: float,
        beta: float,
        washout: int,
    ) -> LaplacePosterior:
        """H = tau I + beta sum_k g_k g_k^T over post-washout steps, then factorized.

        ``model`` must hold theta_MAP; ``data`` is the training set (only its
        input is used) or a bare input sequence.
        """
        u = data.u if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
        if u.ndim == 1:
            u = u[:, None]
        n_steps = u.shape[0]
        n_theta = model.n_theta

        if n_steps > washout:

            def rows() -> Iterable[np.ndarray]:
                for k, (_, g_k) in enumerate(model.output_gradient_steps(u[None])):
                    if k >= washout:
                        yield g_k

            gram = LaplaceService.accumulate_gram(rows(), n_theta)
        else:
            gram = np.zeros((n_theta, n_theta))

        n_data_steps = max(n_steps - washout, 0)
        H = beta * gram + tau * np.eye(n_theta)
        logger.info(
            f"GN precision accumulated over {n_data_steps} steps "
            f"(n_theta={n_theta}, tau={tau:g}, beta={beta:g})"
        )
        return LaplaceService.from_precision(
            model.theta, H, tau, beta, washout=washout, n_data_steps=n_data_steps
        )

    @staticmethod
    def posterior_quadform(post: LaplacePosterior, g: np.ndarray) -> float:
        """g^T H^-1 g as |L^-1 g|^2; never negative"""
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (post.n_theta,):
            raise ValueError(f"expected a vector of length {post.n_theta}, got {g.shape}")
        z = linalg.solve_triangular(post.chol_H, g, lower=True)
        return float(z @ z)

    @staticmethod
    def posterior_quadform_rows(post: LaplacePosterior, G: np.ndarray) -> np.ndarray:
        """Row-wise g_k^T H^-1 g_k for a ``[m, n_theta]`` block"""
        Z = linalg.solve_triangular(post.chol_H, np.asarray(G, dtype=np.float64).T, lower=True)
        return np.sum(Z**2, axis=0)
