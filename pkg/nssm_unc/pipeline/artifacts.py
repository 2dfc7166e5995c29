"""
On-disk artifacts of a pipeline run.

Includes:
- run directory layout
- model artifact: JSON header with theta as base64 little-endian float64
- NLL trace CSV
- posterior artifact: JSON header plus the packed lower-triangular factor
"""

import base64
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from loguru import logger

from nssm_unc.core.exceptions import ArtifactIOError, DatasetFormatError, MissingStageError
from nssm_unc.core.metrics import ARTIFACTS_WRITTEN
from nssm_unc.models.mlp import MlpSpec
from nssm_unc.models.state_space import NeuralSSModel
from nssm_unc.shared.services.provenance import ProvenanceManager
from nssm_unc.sysid.laplace.schemas import LaplacePosterior
from nssm_unc.sysid.trainer.schemas import TraceEntry
from nssm_unc.utils.tables import write_csv_table

MODEL_FORMAT = "nssm-unc/model@1"
POSTERIOR_FORMAT = "nssm-unc/posterior@1"
_F8 = np.dtype("<f8")


@dataclass(frozen=True)
class RunLayout:
    root: Path

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def model_dir(self) -> Path:
        return self.root / "model"

    @property
    def posterior_dir(self) -> Path:
        return self.root / "posterior"

    @property
    def eval_dir(self) -> Path:
        return self.root / "eval"

    @property
    def figures_dir(self) -> Path:
        return self.root / "figures"

    @property
    def log_dir(self) -> Path:
        return self.root / "logs"

    def dataset(self, name: str) -> Path:
        return self.data_dir / f"{name}.csv"

    def bode(self, block: str) -> Path:
        return self.data_dir / f"bode_{block.lower()}.csv"

    @property
    def nonlinearity_table(self) -> Path:
        return self.data_dir / "static_nonlinearity.csv"

    @property
    def model(self) -> Path:
        return self.model_dir / "model.json"

    @property
    def nll_trace(self) -> Path:
        return self.model_dir / "nll_trace.csv"

    @property
    def posterior_header(self) -> Path:
        return self.posterior_dir / "posterior.json"

    @property
    def posterior_factor(self) -> Path:
        return self.posterior_dir / "posterior.bin"

    def prediction(self, name: str) -> Path:
        return self.eval_dir / f"pred_{name}.csv"

    @property
    def report_csv(self) -> Path:
        return self.eval_dir / "report.csv"

    @property
    def report_json(self) -> Path:
        return self.eval_dir / "report.json"

    @property
    def summary_csv(self) -> Path:
        return self.eval_dir / "summary.csv"


def require(path: Path, stage: str) -> Path:
    """Raises MissingStageError naming the stage that produces ``path``"""
    if not path.is_file():
        raise MissingStageError(stage, str(path))
    return path


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}") from e
    return path


def read_json(path: Path) -> dict[str, Any]:
    try:
        return json.loads(path.read_text())
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise DatasetFormatError(str(path), e.lineno, e.msg) from e


def _field(header: dict[str, Any], key: str, path: Path) -> Any:
    if key not in header:
        raise DatasetFormatError(str(path), 1, "missing key", field=key)
    return header[key]


# ============================================================
# MODEL
# ============================================================


def encode_theta(theta: np.ndarray) -> str:
    return base64.b64encode(np.asarray(theta, dtype=_F8).tobytes()).decode("ascii")


def decode_theta(text: str, n_theta: int, path: Path) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except ValueError as e:
        raise DatasetFormatError(str(path), 1, f"bad base64: {e}", field="theta_b64") from e
    if len(raw) != n_theta * _F8.itemsize:
        raise DatasetFormatError(
            str(path), 1, f"expected {n_theta} float64 values", field="theta_b64"
        )
    return np.frombuffer(raw, dtype=_F8).astype(np.float64)


def save_model(model: NeuralSSModel, path: Path, header: dict[str, Any]) -> Path:
    payload = {
        "format": MODEL_FORMAT,
        "n_x": model.n_x,
        "n_u": model.n_u,
        "n_y": model.n_y,
        "n_theta": model.n_theta,
        "specs": {
            "f": model.f_spec.model_dump(),
            "g": model.g_spec.model_dump(),
        },
        "theta_b64": encode_theta(model.theta),
        **header,
    }
    write_json(path, payload)
    ARTIFACTS_WRITTEN.labels(kind="model").inc()
    logger.info(f"model saved: {path} (n_theta={model.n_theta})")
    return path


def load_model(path: Path) -> tuple[NeuralSSModel, dict[str, Any]]:
    header = read_json(path)
    if _field(header, "format", path) != MODEL_FORMAT:
        raise DatasetFormatError(str(path), 1, f"unknown format {header['format']!r}")
    specs = _field(header, "specs", path)
    n_theta = int(_field(header, "n_theta", path))
    theta = decode_theta(_field(header, "theta_b64", path), n_theta, path)
    try:
        model = NeuralSSModel(
            n_x=int(_field(header, "n_x", path)),
            n_u=int(_field(header, "n_u", path)),
            f_spec=MlpSpec(**specs["f"]),
            g_spec=MlpSpec(**specs["g"]),
            theta=theta,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetFormatError(str(path), 1, f"inconsistent model header: {e}") from e
    return model, header


def save_trace(trace: list[TraceEntry], path: Path) -> Path:
    """`epoch,nll`; epochs run on through the refinement phase"""
    out = write_csv_table(
        path, ("epoch", "nll"), ([e.epoch for e in trace], [e.nll for e in trace])
    )
    ARTIFACTS_WRITTEN.labels(kind="trace").inc()
    return out


# ============================================================
# POSTERIOR
# ============================================================


def save_posterior(
    post: LaplacePosterior, header_path: Path, factor_path: Path, header: dict[str, Any]
) -> Path:
    """Row-major packed lower triangle of chol_H as little-endian float64"""
    rows, cols = np.tril_indices(post.n_theta)
    payload = post.chol_H[rows, cols].astype(_F8).tobytes()
    try:
        factor_path.parent.mkdir(parents=True, exist_ok=True)
        factor_path.write_bytes(payload)
    except OSError as e:
        raise ArtifactIOError(f"cannot write {factor_path}: {e}") from e

    write_json(
        header_path,
        {
            "format": POSTERIOR_FORMAT,
            "n_theta": post.n_theta,
            "tau": post.tau,
            "beta": post.beta,
            "washout": post.washout,
            "jitter": post.jitter,
            "n_data_steps": post.n_data_steps,
            "theta_map_b64": encode_theta(post.theta_map),
            "factor_file": factor_path.name,
            "factor_sha256": ProvenanceManager.hash_bytes(payload),
            **header,
        },
    )
    ARTIFACTS_WRITTEN.labels(kind="posterior").inc()
    logger.info(f"posterior saved: {header_path} + {factor_path.name}")
    return header_path


def load_posterior(header_path: Path) -> tuple[LaplacePosterior, dict[str, Any]]:
    header = read_json(header_path)
    if _field(header, "format", header_path) != POSTERIOR_FORMAT:
        raise DatasetFormatError(str(header_path), 1, f"unknown format {header['format']!r}")
    n = int(_field(header, "n_theta", header_path))
    factor_path = header_path.parent / _field(header, "factor_file", header_path)
    try:
        payload = factor_path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"cannot read {factor_path}: {e}") from e

    ProvenanceManager.verify(
        _field(header, "factor_sha256", header_path),
        ProvenanceManager.hash_bytes(payload),
        "posterior factor",
    )
    if len(payload) != n * (n + 1) // 2 * _F8.itemsize:
        raise DatasetFormatError(str(factor_path), 1, f"expected packed {n} x {n} factor")

    chol_H = np.zeros((n, n))
    chol_H[np.tril_indices(n)] = np.frombuffer(payload, dtype=_F8)
    post = LaplacePosterior(
        theta_map=decode_theta(_field(header, "theta_map_b64", header_path), n, header_path),
        tau=float(_field(header, "tau", header_path)),
        beta=float(_field(header, "beta", header_path)),
        chol_H=chol_H,
        jitter=float(header.get("jitter", 0.0)),
        washout=int(header.get("washout", 0)),
        n_data_steps=int(header.get("n_data_steps", 0)),
    )
    return post, header
