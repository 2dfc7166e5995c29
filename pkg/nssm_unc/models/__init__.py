from nssm_unc.models.mlp import MlpSpec, MlpWeights, ParamSlice, mlp_forward, mlp_jacobians
from nssm_unc.models.state_space import (
    NeuralSSModel,
    SensitivityState,
    SimOutput,
    output_grads_naive,
    simulate,
    simulate_with_sensitivities,
)

__all__ = [
    "MlpSpec",
    "MlpWeights",
    "NeuralSSModel",
    "ParamSlice",
    "SensitivityState",
    "SimOutput",
    "mlp_forward",
    "mlp_jacobians",
    "output_grads_naive",
    "simulate",
    "simulate_with_sensitivities",
]
