"""Neural state-space model

    x_{k+1} = F(x_k, u_k; theta)
    y_k     = G(x_k; theta)

with forward sensitivity propagation of s_k = dx_k/dtheta

    s_{k+1}      = J^fx_k s_k + J^ftheta_k
    dy_k/dtheta  = J^gx_k s_k + J^gtheta_k

and a naive backend that rebuilds the unrolled prefix for every output step.
"""

from collections.abc import Generator, Iterator
from dataclasses import dataclass, field
from typing import Literal, Self

import numpy as np

from nssm_unc.core.exceptions import SimulationDivergedError
from nssm_unc.core.metrics import SIM_STEPS
from nssm_unc.models.mlp import (
    MlpSpec,
    ParamSlice,
    forward_jacobians_weights,
    forward_weights,
    init_params,
)


@dataclass(frozen=True, eq=False)
class SensitivityState:
    s: np.ndarray

    @classmethod
    def zeros(cls, model: "NeuralSSModel") -> Self:
        return cls(np.zeros((model.n_x, model.n_theta)))

    def check(self, model: "NeuralSSModel") -> None:
        if self.s.shape[-2:] != (model.n_x, model.n_theta):
            raise ValueError(
                f"sensitivity must be {model.n_x} x {model.n_theta}, got {self.s.shape}"
            )


@dataclass(frozen=True, eq=False)
class SimOutput:
    y_mean: np.ndarray
    x_traj: np.ndarray | None = None
    y_grads: np.ndarray | None = None
    x_final: np.ndarray | None = None
    s_final: SensitivityState | None = None


@dataclass(frozen=True, eq=False)
class NeuralSSModel:
    n_x: int
    n_u: int
    f_spec: MlpSpec
    g_spec: MlpSpec
    theta: np.ndarray = field(repr=False)
    n_y: int = 1

    def __post_init__(self) -> None:
        if self.n_y != 1:
            raise ValueError("only single-output models are supported (n_y = 1)")
        if (self.f_spec.n_in, self.f_spec.n_out) != (self.n_x + self.n_u, self.n_x):
            raise ValueError("F must map (x, u) to the next state")
        if (self.g_spec.n_in, self.g_spec.n_out) != (self.n_x, self.n_y):
            raise ValueError("G must map the state to the output")
        theta = np.array(self.theta, dtype=np.float64)
        if theta.shape != (self.f_spec.param_count + self.g_spec.param_count,):
            raise ValueError(
                f"theta must have length {self.f_spec.param_count + self.g_spec.param_count}"
                f", got shape {theta.shape}"
            )
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def create(
        cls,
        n_x: int = 6,
        n_u: int = 1,
        n_hidden: int = 15,
        has_linear_bypass: bool = True,
        theta: np.ndarray | None = None,
        rng: np.random.Generator | None = None,
    ) -> Self:
        """Builds the F/G specs; theta defaults to a seeded random init (zeros without rng)."""
        f_spec = MlpSpec(
            n_in=n_x + n_u, n_out=n_x, n_hidden=n_hidden, has_linear_bypass=has_linear_bypass
        )
        g_spec = MlpSpec(
            n_in=n_x, n_out=1, n_hidden=n_hidden, has_linear_bypass=has_linear_bypass
        )
        if theta is None:
            if rng is None:
                theta = np.zeros(f_spec.param_count + g_spec.param_count)
            else:
                theta = np.concatenate(
                    [init_params(f_spec, rng), init_params(g_spec, rng)]
                )
        return cls(n_x=n_x, n_u=n_u, f_spec=f_spec, g_spec=g_spec, theta=theta)

    @property
    def n_theta(self) -> int:
        return self.theta.shape[0]

    @property
    def f_slice(self) -> ParamSlice:
        return ParamSlice(0, self.f_spec)

    @property
    def g_slice(self) -> ParamSlice:
        return ParamSlice(self.f_spec.param_count, self.g_spec)

    def with_theta(self, theta: np.ndarray) -> Self:
        return type(self)(
            n_x=self.n_x, n_u=self.n_u, f_spec=self.f_spec, g_spec=self.g_spec, theta=theta
        )

    # -------- simulation --------
    def simulate(self, u: np.ndarray, x0: np.ndarray | None = None) -> SimOutput:
        return simulate(self, u, x0)

    def simulate_with_sensitivities(
        self,
        u: np.ndarray,
        x0: np.ndarray | None = None,
        s0: SensitivityState | np.ndarray | None = None,
    ) -> SimOutput:
        return simulate_with_sensitivities(self, u, x0, s0)

    def output_grads_naive(
        self,
        u: np.ndarray,
        x0: np.ndarray | None = None,
        method: Literal["relinearize", "fd"] = "relinearize",
    ) -> np.ndarray:
        return output_grads_naive(self, u, x0, method=method)

    # -------- OutputSensitivityModel protocol (batched) --------
    def simulate_outputs(self, u: np.ndarray, x0: np.ndarray | None = None) -> np.ndarray:
        u_b, x0_b = _batch_inputs(self, u, x0, batched=True)
        y, _, _ = _run_plain(self, u_b, x0_b)
        return y

    def output_gradient_steps(
        self,
        u: np.ndarray,
        x0: np.ndarray | None = None,
        s0: np.ndarray | None = None,
    ) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        u_b, x0_b = _batch_inputs(self, u, x0, batched=True)
        s0_b = None if s0 is None else np.broadcast_to(s0, (u_b.shape[0], self.n_x, self.n_theta))
        for _, _, y_k, grad_k in _sensitivity_stream(self, u_b, x0_b, s0_b):
            yield y_k, grad_k


def _batch_inputs(
    model: NeuralSSModel, u: np.ndarray, x0: np.ndarray | None, batched: bool
) -> tuple[np.ndarray, np.ndarray]:
    """Normalizes ``u`` to ``[B, N, n_u]`` and ``x0`` to ``[B, n_x]``."""
    u = np.asarray(u, dtype=np.float64)
    if batched:
        if u.ndim == 2 and model.n_u == 1:
            u = u[..., None]
        if u.ndim != 3:
            raise ValueError(f"batched input must be [B, N, n_u], got shape {u.shape}")
    else:
        if u.ndim == 1 and model.n_u == 1:
            u = u[:, None]
        if u.ndim != 2:
            raise ValueError(f"input must be [N, n_u], got shape {u.shape}")
        u = u[None]
    if u.shape[-1] != model.n_u:
        raise ValueError(f"input has {u.shape[-1]} channels, model expects {model.n_u}")
    if u.shape[1] < 1:
        raise ValueError("input sequence must have at least one sample")

    n_batch = u.shape[0]
    if x0 is None:
        x0_b = np.zeros((n_batch, model.n_x))
    else:
        x0_b = np.broadcast_to(np.asarray(x0, dtype=np.float64), (n_batch, model.n_x)).copy()
    return u, x0_b


def _run_plain(
    model: NeuralSSModel, u: np.ndarray, x0: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n_batch, n_steps, _ = u.shape
    wf = model.f_slice.unpack(model.theta)
    wg = model.g_slice.unpack(model.theta)

    y = np.empty((n_batch, n_steps))
    x_traj = np.empty((n_batch, n_steps, model.n_x))
    x = x0
    for k in range(n_steps):
        if not np.isfinite(x).all():
            raise SimulationDivergedError(k)
        x_traj[:, k] = x
        y[:, k] = forward_weights(wg, x)[:, 0]
        x = forward_weights(wf, np.concatenate([x, u[:, k]], axis=-1))
    if not np.isfinite(x).all():
        raise SimulationDivergedError(n_steps)
    SIM_STEPS.labels(backend="plain").inc(n_batch * n_steps)
    return y, x_traj, x


_Stream = Generator[
    tuple[int, np.ndarray, np.ndarray, np.ndarray], None, tuple[np.ndarray, np.ndarray]
]


def _sensitivity_stream(
    model: NeuralSSModel, u: np.ndarray, x0: np.ndarray, s0: np.ndarray | None
) -> _Stream:
    """Yields ``(k, x_k, y_k, dy_k/dtheta)`` per step; returns ``(x_N, s_N)``.

    F does not depend on G's parameters, so while the G-columns of s are zero
    only the F-columns are propagated.
    """
    n_batch, n_steps, _ = u.shape
    n_x, n_theta = model.n_x, model.n_theta
    n_f = model.f_spec.param_count
    wf = model.f_slice.unpack(model.theta)
    wg = model.g_slice.unpack(model.theta)

    if s0 is None:
        width = n_f
        s = np.zeros((n_batch, n_x, width))
    else:
        width = n_theta if np.any(s0[..., n_f:]) else n_f
        s = np.array(s0[..., :width], dtype=np.float64)

    x = x0
    for k in range(n_steps):
        if not np.isfinite(x).all():
            raise SimulationDivergedError(k)
        y_k, J_gx, J_gtheta = forward_jacobians_weights(model.g_spec, wg, x)
        grad = np.zeros((n_batch, n_theta))
        grad[:, :width] = (J_gx @ s)[:, 0, :]
        grad[:, n_f:] += J_gtheta[:, 0, :]
        yield k, x, y_k[:, 0], grad

        x_next, J_fxu, J_ftheta = forward_jacobians_weights(
            model.f_spec, wf, np.concatenate([x, u[:, k]], axis=-1)
        )
        s = J_fxu[..., :n_x] @ s
        s[..., :n_f] += J_ftheta
        x = x_next

    if not np.isfinite(x).all():
        raise SimulationDivergedError(n_steps)
    SIM_STEPS.labels(backend="recursive").inc(n_batch * n_steps)

    s_full = np.zeros((n_batch, n_x, n_theta))
    s_full[..., :width] = s
    return x, s_full


def simulate(model: NeuralSSModel, u: np.ndarray, x0: np.ndarray | None = None) -> SimOutput:
    """Noise-free simulation of one input sequence ``[N, n_u]`` (or ``[N]`` when n_u = 1)."""
    u_b, x0_b = _batch_inputs(model, u, x0, batched=False)
    y, x_traj, x_final = _run_plain(model, u_b, x0_b)
    return SimOutput(y_mean=y[0], x_traj=x_traj[0], x_final=x_final[0])


def simulate_with_sensitivities(
    model: NeuralSSModel,
    u: np.ndarray,
    x0: np.ndarray | None = None,
    s0: SensitivityState | np.ndarray | None = None,
) -> SimOutput:
    """Simulation plus ``dy_k/dtheta`` for every step, in O(N (n_x + n_y) n_theta)."""
    u_b, x0_b = _batch_inputs(model, u, x0, batched=False)
    if s0 is None:
        state = SensitivityState.zeros(model)
    elif isinstance(s0, SensitivityState):
        state = s0
    else:
        state = SensitivityState(np.asarray(s0, dtype=np.float64))
    state.check(model)
    s0_b = state.s.reshape(1, model.n_x, model.n_theta)

    n_steps = u_b.shape[1]
    y = np.empty(n_steps)
    x_traj = np.empty((n_steps, model.n_x))
    y_grads = np.empty((n_steps, model.n_theta))

    stream = _sensitivity_stream(model, u_b, x0_b, s0_b)
    while True:
        try:
            k, x_k, y_k, grad_k = next(stream)
        except StopIteration as stop:
            x_final, s_final = stop.value
            break
        x_traj[k] = x_k[0]
        y[k] = y_k[0]
        y_grads[k] = grad_k[0]

    return SimOutput(
        y_mean=y,
        x_traj=x_traj,
        y_grads=y_grads,
        x_final=x_final[0],
        s_final=SensitivityState(s_final[0]),
    )


def output_grads_naive(
    model: NeuralSSModel,
    u: np.ndarray,
    x0: np.ndarray | None = None,
    method: Literal["relinearize", "fd"] = "relinearize",
    fd_step: float = 1e-6,
) -> np.ndarray:
    """Reference ``[N, n_theta]`` output gradients for small N.

    ``relinearize`` rebuilds the unrolled prefix 0..k for every output k and
    sweeps a vector-Jacobian product back through it, O(N^2) overall.
    ``fd`` uses central differences over theta, one simulation pair per parameter.
    """
    u_b, x0_b = _batch_inputs(model, u, x0, batched=False)
    n_steps = u_b.shape[1]
    n_x, n_theta, n_f = model.n_x, model.n_theta, model.f_spec.param_count

    if method == "fd":
        grads = np.empty((n_steps, n_theta))
        for i in range(n_theta):
            bump = np.zeros(n_theta)
            bump[i] = fd_step
            y_plus, _, _ = _run_plain(model.with_theta(model.theta + bump), u_b, x0_b)
            y_minus, _, _ = _run_plain(model.with_theta(model.theta - bump), u_b, x0_b)
            grads[:, i] = (y_plus[0] - y_minus[0]) / (2.0 * fd_step)
        return grads

    if method != "relinearize":
        raise ValueError(f"unknown naive method {method!r}")

    wf = model.f_slice.unpack(model.theta)
    wg = model.g_slice.unpack(model.theta)
    grads = np.zeros((n_steps, n_theta))
    for k in range(n_steps):
        # fresh forward pass over the prefix, keeping every linearization
        x = x0_b[0]
        linearizations = []
        for j in range(k):
            if not np.isfinite(x).all():
                raise SimulationDivergedError(j)
            x_next, J_fxu, J_ftheta = forward_jacobians_weights(
                model.f_spec, wf, np.concatenate([x, u_b[0, j]])
            )
            linearizations.append((J_fxu[:, :n_x], J_ftheta))
            x = x_next
        if not np.isfinite(x).all():
            raise SimulationDivergedError(k)

        _, J_gx, J_gtheta = forward_jacobians_weights(model.g_spec, wg, x)
        row = grads[k]
        row[n_f:] = J_gtheta[0]
        adjoint = J_gx[0]
        for J_fx, J_ftheta in reversed(linearizations):
            row[:n_f] += adjoint @ J_ftheta
            adjoint = adjoint @ J_fx
    SIM_STEPS.labels(backend="naive").inc(n_steps * (n_steps + 1) // 2)
    return grads
