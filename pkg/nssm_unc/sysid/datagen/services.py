"""
Synthetic Wiener-Hammerstein data generation.

Includes:
- random-phase multisine excitation with a flat in-band spectrum
- LTI blocks G1/G2 as difference equations, static nonlinearity in between
- additive white measurement noise on the output
- Bode and static-nonlinearity tables
- CSV + JSON-sidecar dataset persistence
"""

import json
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger
from scipy import signal

from nssm_unc.core.exceptions import ArtifactIOError, ConfigError, DatasetFormatError
from nssm_unc.core.metrics import ARTIFACTS_WRITTEN
from nssm_unc.sysid.datagen.schemas import (
    DEFAULT_FS,
    Dataset,
    FrequencyResponse,
    LtiFilter,
    MultisineConfig,
    NonlinearityVariant,
    g1_filter,
    g2_filter,
)
from nssm_unc.utils.tables import read_csv_table, write_csv_table

DATASET_HEADER = ("k", "u", "y")
NONLINEARITY_GAIN = -10.0 / 11.0


class WhDataService:
    """Wiener-Hammerstein generator and dataset I/O"""

    # ==============================================================
    # EXCITATION
    # ==============================================================

    @staticmethod
    def excited_bins(cfg: MultisineConfig) -> np.ndarray:
        """DFT bins (DC and Nyquist excluded) whose frequency lies in the band"""
        k = np.arange(1, (cfg.n_samples - 1) // 2 + 1)
        freq = k * cfg.fs / cfg.n_samples
        return k[(freq >= cfg.band_lo) & (freq <= cfg.band_hi)]

    @staticmethod
    def multisine(cfg: MultisineConfig) -> np.ndarray:
        """Unit magnitude on every in-band bin, seeded uniform phases, rescaled to target_std"""
        bins = WhDataService.excited_bins(cfg)
        if bins.size == 0:
            raise ConfigError(
                f"no DFT bins in [{cfg.band_lo}, {cfg.band_hi}] Hz at N={cfg.n_samples}, "
                f"fs={cfg.fs}"
            )

        rng = np.random.default_rng(cfg.seed)
        phases = rng.uniform(0.0, 2.0 * np.pi, size=bins.size)
        spectrum = np.zeros(cfg.n_samples // 2 + 1, dtype=np.complex128)
        spectrum[bins] = np.exp(1j * phases)

        u = np.fft.irfft(spectrum, n=cfg.n_samples)
        return u * (cfg.target_std / np.std(u))

    # ==============================================================
    # SYSTEM BLOCKS
    # ==============================================================

    @staticmethod
    def lti_apply(lti: LtiFilter, u: np.ndarray) -> np.ndarray:
        """Runs the difference equation, continuing from the filter's delay line"""
        zi = lti.zi if lti.zi is not None else np.zeros(lti.order)
        y, lti.zi = signal.lfilter(lti.b, lti.a, u, zi=zi)
        return y

    @staticmethod
    def static_nonlinearity(
        x: np.ndarray, variant: NonlinearityVariant | str = NonlinearityVariant.STANDARD
    ) -> np.ndarray:
        """f(x) = elu(-(10/11) x), applied sample-wise"""
        z = NONLINEARITY_GAIN * np.asarray(x, dtype=np.float64)
        negative = np.minimum(z, 0.0)
        if NonlinearityVariant(variant) is NonlinearityVariant.LITERAL:
            return np.where(z <= 0.0, np.exp(negative - 1.0), 0.0)
        return np.where(z <= 0.0, np.expm1(negative), z)

    @staticmethod
    def wh_simulate(
        u: np.ndarray,
        sigma_e: float,
        seed: int,
        variant: NonlinearityVariant | str = NonlinearityVariant.STANDARD,
        fs: float = DEFAULT_FS,
        metadata: dict[str, Any] | None = None,
    ) -> Dataset:
        """y = G2(f(G1(u))) + e, filters from zero state, e ~ N(0, sigma_e^2)"""
        u = np.asarray(u, dtype=np.float64)
        if not np.isfinite(u).all():
            raise ValueError("input sequence contains non-finite samples")
        if sigma_e < 0:
            raise ValueError("sigma_e must be non-negative")

        x1 = WhDataService.lti_apply(g1_filter(), u)
        x2 = WhDataService.static_nonlinearity(x1, variant)
        y_clean = WhDataService.lti_apply(g2_filter(), x2)

        rng = np.random.default_rng(seed)
        y = y_clean + sigma_e * rng.standard_normal(u.shape[0])

        meta = {"noise_seed": seed, "nonlinearity_variant": NonlinearityVariant(variant).value}
        meta.update(metadata or {})
        return Dataset(u=u, y=y, fs=fs, sigma_e=float(sigma_e), metadata=meta)

    # ==============================================================
    # TABLES
    # ==============================================================

    @staticmethod
    def frequency_response(lti: LtiFilter, n_points: int, fs: float) -> FrequencyResponse:
        """Transfer function on the unit circle, n_points from DC to Nyquist"""
        if n_points < 2:
            raise ValueError("n_points must be at least 2")
        freq = np.linspace(0.0, fs / 2.0, n_points)
        freq, h = signal.freqz(lti.b, lti.a, worN=freq, fs=fs)
        return FrequencyResponse(
            freq_hz=freq,
            magnitude=np.abs(h),
            phase_deg=np.degrees(np.unwrap(np.angle(h))),
        )

    @staticmethod
    def static_nonlinearity_table(
        variant: NonlinearityVariant | str = NonlinearityVariant.STANDARD,
        x_range: tuple[float, float] = (-2.0, 2.0),
        n_points: int = 401,
    ) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(x_range[0], x_range[1], n_points)
        return x, WhDataService.static_nonlinearity(x, variant)

    @staticmethod
    def save_frequency_response(resp: FrequencyResponse, path: str | Path) -> Path:
        out = write_csv_table(
            path,
            ("freq_hz", "magnitude_db", "phase_deg"),
            (resp.freq_hz, resp.magnitude_db, resp.phase_deg),
        )
        ARTIFACTS_WRITTEN.labels(kind="bode").inc()
        return out

    # ==============================================================
    # PERSISTENCE
    # ==============================================================

    @staticmethod
    def sidecar_path(path: str | Path) -> Path:
        return Path(path).with_suffix(".json")

    @staticmethod
    def dataset_save(ds: Dataset, path: str | Path) -> Path:
        """CSV `k,u,y` plus a JSON metadata sidecar next to it"""
        path = Path(path)
        write_csv_table(path, DATASET_HEADER, (np.arange(len(ds)), ds.u, ds.y))

        sidecar = {"fs": ds.fs, "sigma_e": ds.sigma_e, **ds.metadata}
        try:
            WhDataService.sidecar_path(path).write_text(
                json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
            )
        except OSError as e:
            raise ArtifactIOError(f"cannot write sidecar for {path}: {e}") from e

        ARTIFACTS_WRITTEN.labels(kind="dataset").inc()
        logger.info(f"dataset saved: {path} (N={len(ds)})")
        return path

    @staticmethod
    def dataset_load(path: str | Path) -> Dataset:
        path = Path(path)
        table = read_csv_table(path, DATASET_HEADER)

        k = table["k"]
        expected = np.arange(k.shape[0])
        if not np.array_equal(k, expected):
            bad = int(np.flatnonzero(k != expected)[0])
            raise DatasetFormatError(
                str(path), bad + 2, f"sample index {k[bad]:g} out of order", field="k"
            )

        sidecar_path = WhDataService.sidecar_path(path)
        try:
            meta = json.loads(sidecar_path.read_text())
        except OSError as e:
            raise ArtifactIOError(f"cannot read sidecar {sidecar_path}: {e}") from e
        except json.JSONDecodeError as e:
            raise DatasetFormatError(str(sidecar_path), e.lineno, e.msg) from e

        for key in ("fs", "sigma_e"):
            if key not in meta:
                raise DatasetFormatError(str(sidecar_path), 1, "missing key", field=key)
        fs = float(meta.pop("fs"))
        sigma_e = float(meta.pop("sigma_e"))
        return Dataset(u=table["u"], y=table["y"], fs=fs, sigma_e=sigma_e, metadata=meta)
