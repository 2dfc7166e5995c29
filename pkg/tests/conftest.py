from collections.abc import Iterator
from pathlib import Path
from typing import Self

import numpy as np
import pytest
from loguru import logger

from nssm_unc.models.state_space import NeuralSSModel


class LinearInParamsModel:
    """y_k = phi_k . theta with the regressors phi_k given as the input.

    Memoryless and linear in theta, so posterior quantities have closed forms.
    """

    def __init__(self, theta: np.ndarray):
        self._theta = np.array(theta, dtype=np.float64)

    @property
    def n_theta(self) -> int:
        return self._theta.shape[0]

    @property
    def theta(self) -> np.ndarray:
        return self._theta

    def with_theta(self, theta: np.ndarray) -> Self:
        return type(self)(theta)

    def _regressors(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 2:
            u = u[..., None]
        assert u.shape[-1] == self.n_theta
        return u

    def simulate_outputs(self, u: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        return self._regressors(u) @ self._theta

    def output_gradient_steps(
        self, u: np.ndarray, x0: np.ndarray | None = None, s0: np.ndarray | None = None
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        phi = self._regressors(u)
        for k in range(phi.shape[1]):
            yield phi[:, k] @ self._theta, phi[:, k]


@pytest.fixture(autouse=True)
def _release_log_sinks() -> Iterator[None]:
    """CLI runs attach sinks to captured streams and run dirs; drop them after each test"""
    yield
    logger.remove()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def make_tiny_model(
    rng: np.random.Generator, n_x: int = 2, n_hidden: int = 3, bypass: bool = True
) -> NeuralSSModel:
    return NeuralSSModel.create(n_x=n_x, n_hidden=n_hidden, has_linear_bypass=bypass, rng=rng)


@pytest.fixture
def tiny_model(rng: np.random.Generator) -> NeuralSSModel:
    return make_tiny_model(rng)


@pytest.fixture
def tiny_config(tmp_path: Path) -> Path:
    """User config for a pipeline run that finishes in seconds"""
    path = tmp_path / "tiny.toml"
    path.write_text(
        f"""
seed = 7

[data]
n_train = 400
n_test = 300
bode_points = 64

[model]
n_x = 2
n_hidden = 4

[train]
batch_size = 32
subseq_len = 40
epochs_adam = 1
epochs_refine = 1
refine_iters = 3
washout = 8

[eval]
max_workers = 2

[paths]
run_dir = "{(tmp_path / "run").as_posix()}"
"""
    )
    return path


@pytest.fixture
def linear_model_cls() -> type[LinearInParamsModel]:
    return LinearInParamsModel


@pytest.fixture
def model_factory():
    return make_tiny_model
