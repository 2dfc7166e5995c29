"""
MAP estimation of the model parameters.

The objective is the negative log posterior without its additive constant,

    E(theta) = beta/2 * sum_k (y_k - yhat_k(theta))^2 + tau/2 * |theta|^2,

summed over post-washout steps. Gradients come from the forward sensitivity
recursion; no reverse-mode pass is involved.
"""

import time

import numpy as np
from loguru import logger

from nssm_unc.core.exceptions import ConfigError, NumericalError, SimulationDivergedError
from nssm_unc.core.metrics import EPOCH_DURATION, OPTIMIZER_STEPS, TRAIN_NLL
from nssm_unc.shared.interfaces.sensitivity_model import OutputSensitivityModel
from nssm_unc.sysid.datagen.schemas import Dataset
from nssm_unc.sysid.trainer.optim import Adam, GradientDescent, Lbfgs
from nssm_unc.sysid.trainer.schemas import NllResult, TraceEntry, TrainConfig, TrainReport

Batch = Dataset | tuple[np.ndarray, np.ndarray]


def _as_batch(data: Batch) -> tuple[np.ndarray, np.ndarray]:
    """``(u [B, N, n_u], y [B, N])`` from a dataset, one sequence or a batch."""
    if isinstance(data, Dataset):
        u, y = data.u, data.y
    else:
        u, y = data
    u = np.asarray(u, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y[None]
        u = u[None]
    if u.ndim == 2:
        u = u[..., None]
    if u.shape[:2] != y.shape:
        raise ValueError(f"input {u.shape} and output {y.shape} do not line up")
    return u, y


class TrainerService:
    # ==============================================================
    # OBJECTIVE
    # ==============================================================

    @staticmethod
    def nll(
        model: OutputSensitivityModel,
        data: Batch,
        tau: float,
        beta: float,
        washout: int,
        x0: np.ndarray | None = None,
        s0: np.ndarray | None = None,
        lik_scale: float = 1.0,
        with_grad: bool = True,
        batch_id: str = "",
    ) -> NllResult:
        """E_lik + E_prio and its gradient over theta.

        ``lik_scale`` rescales the likelihood term so a minibatch estimates the
        full-dataset objective.
        """
        u, y = _as_batch(data)
        if y.shape[1] <= washout:
            raise ValueError(f"sequence length {y.shape[1]} must exceed washout {washout}")

        theta = model.theta
        e_prio = 0.5 * tau * float(theta @ theta)

        try:
            if not with_grad:
                y_hat = model.simulate_outputs(u, x0)
                residual = (y_hat - y)[:, washout:]
                e_lik = 0.5 * beta * lik_scale * float(np.sum(residual**2))
                return NllResult(value=e_lik + e_prio, e_lik=e_lik, e_prio=e_prio)

            sq_sum = 0.0
            grad = np.zeros(model.n_theta)
            for k, (y_hat_k, g_k) in enumerate(model.output_gradient_steps(u, x0, s0)):
                if k < washout:
                    continue
                r = y_hat_k - y[:, k]
                sq_sum += float(r @ r)
                grad += r @ g_k
        except SimulationDivergedError as e:
            raise SimulationDivergedError(e.step, batch_id or "nll evaluation") from e

        e_lik = 0.5 * beta * lik_scale * sq_sum
        grad = beta * lik_scale * grad + tau * theta
        return NllResult(value=e_lik + e_prio, e_lik=e_lik, e_prio=e_prio, grad=grad)

    @staticmethod
    def residual_beta(model: OutputSensitivityModel, ds: Dataset, washout: int) -> float:
        """Noise precision re-estimated as 1 / mean squared post-washout residual"""
        u, y = _as_batch(ds)
        residual = (model.simulate_outputs(u) - y)[:, washout:]
        mse = float(np.mean(residual**2))
        if not mse > 0:
            raise NumericalError("cannot estimate beta from zero residuals")
        return 1.0 / mse

    # ==============================================================
    # TRAINING
    # ==============================================================

    @staticmethod
    def subsequence_batches(
        n_samples: int, cfg: TrainConfig, rng: np.random.Generator
    ) -> list[np.ndarray]:
        """All contiguous windows of ``subseq_len`` in seeded random order, grouped"""
        starts = rng.permutation(n_samples - cfg.subseq_len + 1)
        return [
            starts[i : i + cfg.batch_size] for i in range(0, starts.size, cfg.batch_size)
        ]

    @staticmethod
    def train_map(
        ds: Dataset, model_init: OutputSensitivityModel, cfg: TrainConfig
    ) -> TrainReport:
        """Adam over minibatches of sub-sequences, then full-batch refinement.

        Every sub-sequence starts from the zero state and drops its first
        ``washout`` residuals. Returns the theta with the lowest full-dataset
        objective seen.
        """
        n_samples = len(ds)
        if n_samples < cfg.subseq_len:
            raise ConfigError(
                f"dataset length {n_samples} shorter than subseq_len {cfg.subseq_len}"
            )

        start_time = time.perf_counter()
        rng = np.random.default_rng(cfg.seed)
        window = np.arange(cfg.subseq_len)
        n_lik_full = n_samples - cfg.washout

        def full_objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
            res = TrainerService.nll(
                model_init.with_theta(theta), ds, cfg.tau, cfg.beta, cfg.washout,
                batch_id="full batch",
            )
            return res.value, res.grad

        def full_value(theta: np.ndarray) -> float:
            return TrainerService.nll(
                model_init.with_theta(theta), ds, cfg.tau, cfg.beta, cfg.washout,
                with_grad=False, batch_id="full batch",
            ).value

        theta = np.array(model_init.theta, dtype=np.float64)
        best_nll = full_value(theta)
        best_theta = theta.copy()
        trace = [TraceEntry(epoch=0, phase="init", nll=best_nll)]
        logger.info(f"init nll={best_nll:.6g} n_theta={theta.size} N={n_samples}")

        def record(epoch: int, phase: str, value: float, candidate: np.ndarray) -> None:
            nonlocal best_nll, best_theta
            if not np.isfinite(value):
                raise NumericalError(f"non-finite full-dataset loss after {phase} epoch {epoch}")
            trace.append(TraceEntry(epoch=epoch, phase=phase, nll=value))
            TRAIN_NLL.set(value)
            if value < best_nll:
                best_nll, best_theta = value, candidate.copy()

        # --- Adam over minibatches ---
        adam = Adam(theta.size, lr=cfg.lr)
        epoch = 0
        for _ in range(cfg.epochs_adam):
            epoch += 1
            epoch_start = time.perf_counter()
            batches = TrainerService.subsequence_batches(n_samples, cfg, rng)
            for b, starts in enumerate(batches):
                idx = starts[:, None] + window
                lik_scale = n_lik_full / (starts.size * (cfg.subseq_len - cfg.washout))
                res = TrainerService.nll(
                    model_init.with_theta(theta),
                    (ds.u[idx], ds.y[idx]),
                    cfg.tau,
                    cfg.beta,
                    cfg.washout,
                    lik_scale=lik_scale,
                    batch_id=f"epoch {epoch} batch {b}",
                )
                if not np.isfinite(res.value) or not np.isfinite(res.grad).all():
                    raise NumericalError(f"non-finite loss at epoch {epoch} batch {b}")
                theta = adam.step(theta, res.grad)
                OPTIMIZER_STEPS.labels(phase="adam").inc()
                logger.debug(f"epoch {epoch} batch {b} nll={res.value:.6g}")

            value = full_value(theta)
            record(epoch, "adam", value, theta)
            EPOCH_DURATION.labels(phase="adam").observe(time.perf_counter() - epoch_start)
            logger.info(f"adam epoch {epoch}/{cfg.epochs_adam} nll={value:.6g}")

        # --- full-batch refinement ---
        if cfg.epochs_refine:
            refiner = (
                Lbfgs(memory=cfg.lbfgs_memory)
                if cfg.refine_method == "lbfgs"
                else GradientDescent()
            )
            theta = best_theta.copy()
            for _ in range(cfg.epochs_refine):
                epoch += 1
                epoch_start = time.perf_counter()
                evals_before = refiner.n_evals
                theta, value = refiner.minimize(full_objective, theta, cfg.refine_iters)
                OPTIMIZER_STEPS.labels(phase=cfg.refine_method).inc(
                    refiner.n_evals - evals_before
                )
                record(epoch, cfg.refine_method, value, theta)
                EPOCH_DURATION.labels(phase=cfg.refine_method).observe(
                    time.perf_counter() - epoch_start
                )
                logger.info(
                    f"{cfg.refine_method} epoch {epoch - cfg.epochs_adam}/{cfg.epochs_refine}"
                    f" nll={value:.6g}"
                )

        beta_estimated = None
        if cfg.estimate_beta:
            beta_estimated = TrainerService.residual_beta(
                model_init.with_theta(best_theta), ds, cfg.washout
            )
            logger.info(f"beta re-estimated from residuals: {beta_estimated:.6g}")

        wall_time = time.perf_counter() - start_time
        logger.info(f"training done: best nll={best_nll:.6g} wall={wall_time:.1f}s")
        return TrainReport(
            theta_map=best_theta,
            nll_trace=trace,
            best_nll=best_nll,
            wall_time=wall_time,
            config=cfg,
            beta=cfg.beta,
            beta_estimated=beta_estimated,
        )
