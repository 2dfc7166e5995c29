# metrics.py
from prometheus_client import Counter, Gauge, Histogram

# ============================================================
# SIMULATION
# ============================================================

SIM_STEPS = Counter(
    "nssm_unc_sim_steps_total",
    "Simulated time steps (summed over the batch axis)",
    ["backend"],  # plain, recursive, naive
)

# ============================================================
# TRAINING
# ============================================================

OPTIMIZER_STEPS = Counter(
    "nssm_unc_optimizer_steps_total",
    "Parameter updates applied",
    ["phase"],  # adam, lbfgs, gd
)

EPOCH_DURATION = Histogram(
    "nssm_unc_epoch_duration_seconds",
    "Wall time per training epoch",
    ["phase"],
    buckets=[0.5, 1, 2.5, 5, 10, 25, 50, 100, 250],
)

TRAIN_NLL = Gauge(
    "nssm_unc_train_nll",
    "Full-dataset negative log posterior at the last evaluation",
)

# ============================================================
# LAPLACE
# ============================================================

JITTER_RETRIES = Counter(
    "nssm_unc_cholesky_jitter_retries_total",
    "Diagonal jitter escalations while factorizing the precision",
)

# ============================================================
# PIPELINE
# ============================================================

STAGE_DURATION = Histogram(
    "nssm_unc_stage_duration_seconds",
    "Wall time per CLI stage",
    ["stage", "status"],
    buckets=[0.1, 1, 5, 15, 60, 300, 900, 1800, 3600],
)

ARTIFACTS_WRITTEN = Counter(
    "nssm_unc_artifacts_written_total",
    "Artifacts written to disk",
    ["kind"],  # dataset, bode, model, trace, posterior, prediction, report, figure
)
