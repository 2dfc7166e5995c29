"""One-hidden-layer tanh networks with a direct linear bypass.

Flat parameter layout of one network, relative to the start of its slice:

    [W1 (n_hidden x n_in) row-major | b1 | W2 (n_out x n_hidden) row-major | b2 |
     A (n_out x n_in) row-major]

The bypass ``A`` carries no bias and is absent when ``has_linear_bypass`` is off.
All functions accept inputs with arbitrary leading batch axes (``[..., n_in]``).
"""

from dataclasses import dataclass

import numpy as np
from pydantic import Field

from nssm_unc.shared.schemas.base import BaseSchema


class MlpSpec(BaseSchema):
    n_in: int = Field(..., ge=1)
    n_out: int = Field(..., ge=1)
    n_hidden: int = Field(default=15, ge=1)
    has_linear_bypass: bool = True

    @property
    def param_count(self) -> int:
        count = self.n_hidden * (self.n_in + 1) + self.n_out * (self.n_hidden + 1)
        if self.has_linear_bypass:
            count += self.n_out * self.n_in
        return count


@dataclass(frozen=True)
class MlpWeights:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    A: np.ndarray | None


@dataclass(frozen=True)
class ParamSlice:
    """Where one network's parameters live inside the flat parameter vector."""

    offset: int
    spec: MlpSpec

    @property
    def stop(self) -> int:
        return self.offset + self.spec.param_count

    def view(self, theta: np.ndarray) -> np.ndarray:
        if self.stop > theta.shape[-1]:
            raise ValueError(
                f"slice [{self.offset}:{self.stop}) exceeds parameter vector of "
                f"length {theta.shape[-1]}"
            )
        return theta[self.offset : self.stop]

    def unpack(self, theta: np.ndarray) -> MlpWeights:
        return unpack_params(self.spec, self.view(theta))


def unpack_params(spec: MlpSpec, params: np.ndarray) -> MlpWeights:
    """Splits a flat slice into weight views (no copies)."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.param_count,):
        raise ValueError(
            f"expected {spec.param_count} parameters, got shape {params.shape}"
        )
    n_h, n_i, n_o = spec.n_hidden, spec.n_in, spec.n_out
    pos = 0
    W1 = params[pos : pos + n_h * n_i].reshape(n_h, n_i)
    pos += n_h * n_i
    b1 = params[pos : pos + n_h]
    pos += n_h
    W2 = params[pos : pos + n_o * n_h].reshape(n_o, n_h)
    pos += n_o * n_h
    b2 = params[pos : pos + n_o]
    pos += n_o
    A = params[pos : pos + n_o * n_i].reshape(n_o, n_i) if spec.has_linear_bypass else None
    return MlpWeights(W1=W1, b1=b1, W2=W2, b2=b2, A=A)


def pack_params(spec: MlpSpec, weights: MlpWeights) -> np.ndarray:
    parts = [weights.W1.ravel(), weights.b1, weights.W2.ravel(), weights.b2]
    if spec.has_linear_bypass:
        if weights.A is None:
            raise ValueError("spec has a linear bypass but weights.A is None")
        parts.append(weights.A.ravel())
    packed = np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])
    if packed.shape != (spec.param_count,):
        raise ValueError(f"weights do not match spec ({packed.size} != {spec.param_count})")
    return packed


def init_params(
    spec: MlpSpec, rng: np.random.Generator, bypass_scale: float = 0.1
) -> np.ndarray:
    """Zero biases, uniform Glorot weights, bypass shrunk by ``bypass_scale``."""

    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=(fan_out, fan_in))

    weights = MlpWeights(
        W1=glorot(spec.n_hidden, spec.n_in),
        b1=np.zeros(spec.n_hidden),
        W2=glorot(spec.n_out, spec.n_hidden),
        b2=np.zeros(spec.n_out),
        A=bypass_scale * glorot(spec.n_out, spec.n_in) if spec.has_linear_bypass else None,
    )
    return pack_params(spec, weights)


def _check_input(spec: MlpSpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != spec.n_in:
        raise ValueError(f"expected input with last axis {spec.n_in}, got shape {x.shape}")
    return x


def forward_weights(w: MlpWeights, x: np.ndarray) -> np.ndarray:
    out = np.tanh(x @ w.W1.T + w.b1) @ w.W2.T + w.b2
    if w.A is not None:
        out = out + x @ w.A.T
    return out


def forward_jacobians_weights(
    spec: MlpSpec, w: MlpWeights, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Output, input Jacobian and parameter Jacobian sharing one hidden pass."""
    n_h, n_i, n_o = spec.n_hidden, spec.n_in, spec.n_out
    batch = x.shape[:-1]

    hidden = np.tanh(x @ w.W1.T + w.b1)
    out = hidden @ w.W2.T + w.b2

    # d out / d pre-activation; tanh' = 1 - tanh^2
    D = w.W2 * (1.0 - hidden**2)[..., None, :]
    J_x = D @ w.W1

    eye = np.eye(n_o)
    blocks = [
        (D[..., :, :, None] * x[..., None, None, :]).reshape(*batch, n_o, n_h * n_i),
        D,
        (eye[:, :, None] * hidden[..., None, None, :]).reshape(*batch, n_o, n_o * n_h),
        np.broadcast_to(eye, (*batch, n_o, n_o)),
    ]
    if w.A is not None:
        out = out + x @ w.A.T
        J_x = J_x + w.A
        blocks.append(
            (eye[:, :, None] * x[..., None, None, :]).reshape(*batch, n_o, n_o * n_i)
        )
    return out, J_x, np.concatenate(blocks, axis=-1)


def mlp_forward(spec: MlpSpec, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    """W2 tanh(W1 x + b1) + b2 + A x."""
    return forward_weights(unpack_params(spec, params), _check_input(spec, x))


def mlp_jacobians(
    spec: MlpSpec, params: np.ndarray, x: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(d out/d x, d out/d params)``; parameter columns follow the slice layout."""
    _, J_x, J_theta = forward_jacobians_weights(
        spec, unpack_params(spec, params), _check_input(spec, x)
    )
    return J_x, J_theta
