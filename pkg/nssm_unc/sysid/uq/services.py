"""
Linearized posterior predictive distribution.

The output map is linearized around theta_MAP, so the predictive covariance is
J P J^T + I/beta with J the stacked output gradients. Only its diagonal is
formed, one triangular solve per chunk of gradient rows.
"""

from pathlib import Path

import numpy as np
from loguru import logger

from nssm_unc.core.exceptions import ProvenanceError
from nssm_unc.core.metrics import ARTIFACTS_WRITTEN
from nssm_unc.shared.interfaces.sensitivity_model import OutputSensitivityModel
from nssm_unc.sysid.laplace.schemas import LaplacePosterior
from nssm_unc.sysid.laplace.services import LaplaceService
from nssm_unc.sysid.uq.schemas import UncertainPrediction
from nssm_unc.utils.tables import read_csv_table, write_csv_table

PREDICTION_COLUMNS = ("y_mean", "std_epistemic", "std_total", "lo", "hi")
SOLVE_CHUNK = 512


class UncertaintyService:
    @staticmethod
    def check_compatible(model: OutputSensitivityModel, post: LaplacePosterior) -> None:
        if model.n_theta != post.n_theta:
            raise ProvenanceError(
                f"posterior has {post.n_theta} parameters, model has {model.n_theta}"
            )
        if not np.array_equal(model.theta, post.theta_map):
            raise ProvenanceError("posterior was not built at the model's parameters")

    @staticmethod
    def predict_with_uncertainty(
        model: OutputSensitivityModel,
        post: LaplacePosterior,
        u_star: np.ndarray,
        interval_multiplier: float = 3.0,
    ) -> UncertainPrediction:
        """Nominal simulation from the zero state plus per-step predictive variances"""
        UncertaintyService.check_compatible(model, post)
        u = np.asarray(u_star, dtype=np.float64)
        if not np.isfinite(u).all():
            raise ValueError("input sequence contains non-finite samples")
        if u.ndim == 1:
            u = u[:, None]

        n_steps = u.shape[0]
        y_mean = np.empty(n_steps)
        var_epi = np.empty(n_steps)
        rows: list[np.ndarray] = []
        done = 0

        def flush() -> None:
            nonlocal done
            if rows:
                block = np.vstack(rows)
                var_epi[done : done + block.shape[0]] = LaplaceService.posterior_quadform_rows(
                    post, block
                )
                done += block.shape[0]
                rows.clear()

        for k, (y_k, g_k) in enumerate(model.output_gradient_steps(u[None])):
            y_mean[k] = y_k[0]
            rows.append(g_k[0])
            if len(rows) == SOLVE_CHUNK:
                flush()
        flush()

        var_total = var_epi + 1.0 / post.beta
        half_width = interval_multiplier * np.sqrt(var_total)
        return UncertainPrediction(
            y_mean=y_mean,
            var_epistemic=var_epi,
            var_total=var_total,
            lo=y_mean - half_width,
            hi=y_mean + half_width,
            beta=post.beta,
            interval_multiplier=interval_multiplier,
        )

    @staticmethod
    def surprise_index(pred: UncertainPrediction) -> float:
        return pred.surprise

    # ==============================================================
    # EXPORT
    # ==============================================================

    @staticmethod
    def save_prediction(
        pred: UncertainPrediction,
        path: str | Path,
        u: np.ndarray,
        y_true: np.ndarray | None = None,
    ) -> Path:
        """CSV `k,u[,y_true],y_mean,std_epistemic,std_total,lo,hi`"""
        u = np.asarray(u, dtype=np.float64).reshape(len(pred), -1)[:, 0]
        header = ["k", "u"]
        columns = [np.arange(len(pred)), u]
        if y_true is not None:
            header.append("y_true")
            columns.append(np.asarray(y_true, dtype=np.float64))
        header.extend(PREDICTION_COLUMNS)
        columns.extend([pred.y_mean, pred.std_epistemic, pred.std_total, pred.lo, pred.hi])

        out = write_csv_table(path, header, columns)
        ARTIFACTS_WRITTEN.labels(kind="prediction").inc()
        logger.info(f"prediction saved: {out} (N={len(pred)})")
        return out

    @staticmethod
    def load_prediction(path: str | Path, with_truth: bool = True) -> dict[str, np.ndarray]:
        header = ["k", "u"] + (["y_true"] if with_truth else []) + list(PREDICTION_COLUMNS)
        return read_csv_table(path, header)
