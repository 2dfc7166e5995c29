"""
PNG figures rendered from the CSV artifacts (no interactive display).
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from nssm_unc.core.metrics import ARTIFACTS_WRITTEN  # noqa: E402


def _save(fig: plt.Figure, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    ARTIFACTS_WRITTEN.labels(kind="figure").inc()
    return path


def plot_bode(tables: dict[str, dict[str, np.ndarray]], path: Path) -> Path:
    fig, (ax_mag, ax_phase) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for name, table in tables.items():
        ax_mag.plot(table["freq_hz"] / 1e3, table["magnitude_db"], label=name)
        ax_phase.plot(table["freq_hz"] / 1e3, table["phase_deg"], label=name)
    ax_mag.set_ylabel("magnitude (dB)")
    ax_mag.legend()
    ax_mag.grid(True)
    ax_phase.set_ylabel("phase (deg)")
    ax_phase.set_xlabel("frequency (kHz)")
    ax_phase.grid(True)
    return _save(fig, path)


def plot_static_nonlinearity(x: np.ndarray, f: np.ndarray, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(x, f)
    ax.set_xlabel("x")
    ax.set_ylabel("f(x)")
    ax.grid(True)
    return _save(fig, path)


def plot_prediction(
    table: dict[str, np.ndarray], fs: float, sigma_e: float, multiplier: float, title: str, path: Path
) -> Path:
    """Measured vs nominal output with interval; error with bands; input"""
    t = table["k"] / fs * 1e3
    y_mean = table["y_mean"]
    fig, (ax_y, ax_e, ax_u) = plt.subplots(3, 1, figsize=(9, 8), sharex=True)

    if "y_true" in table:
        ax_y.plot(t, table["y_true"], "k", lw=0.8, label="measured")
    ax_y.plot(t, y_mean, "b", lw=0.8, label="nominal")
    ax_y.fill_between(t, table["lo"], table["hi"], color="b", alpha=0.25, label="interval")
    ax_y.set_ylabel("y (V)")
    ax_y.set_title(title)
    ax_y.legend(loc="upper right")

    if "y_true" in table:
        ax_e.plot(t, table["y_true"] - y_mean, "r", lw=0.8, label="error")
    half = multiplier * table["std_total"]
    ax_e.fill_between(t, -half, half, color="b", alpha=0.25, label="interval")
    ax_e.fill_between(
        t, -multiplier * sigma_e, multiplier * sigma_e, color="g", alpha=0.3, label="noise"
    )
    ax_e.set_ylabel("error (V)")
    ax_e.legend(loc="upper right")

    ax_u.plot(t, table["u"], "k", lw=0.8)
    ax_u.set_ylabel("u (V)")
    ax_u.set_xlabel("time (ms)")
    for ax in (ax_y, ax_e, ax_u):
        ax.grid(True)
    return _save(fig, path)
