"""
Evaluation statistics for simulated outputs and their credible intervals.
"""

from collections.abc import Sequence
from pathlib import Path

import numpy as np

from nssm_unc.core.exceptions import NumericalError
from nssm_unc.core.metrics import ARTIFACTS_WRITTEN
from nssm_unc.sysid.metrics.schemas import EvalReport, ReferenceRow
from nssm_unc.sysid.uq.schemas import UncertainPrediction
from nssm_unc.utils.tables import write_csv_table

REPORT_HEADER = ("signal", "fit", "coverage", "surprise")

# Published FIT / coverage / surprise for the four test multisines
PUBLISHED_REFERENCE = (
    ReferenceRow(signal_id="signal1", fit=98.1, coverage=99.2, surprise=0.33),
    ReferenceRow(signal_id="signal2", fit=97.7, coverage=98.6, surprise=0.43),
    ReferenceRow(signal_id="signal3", fit=93.9, coverage=96.1, surprise=2.10),
    ReferenceRow(signal_id="signal4", fit=87.8, coverage=80.6, surprise=4.03),
)


def _pair(a: np.ndarray, b: np.ndarray, min_len: int = 1) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"sequences must be 1-D with equal length ({a.shape}, {b.shape})")
    if a.shape[0] < min_len:
        raise ValueError(f"need at least {min_len} samples, got {a.shape[0]}")
    return a, b


class MetricsService:
    @staticmethod
    def fit_index(y_true: np.ndarray, y_pred: np.ndarray) -> float:
        """100 (1 - |y - yhat| / |y - mean(y)|), root-sum-square norms"""
        y_true, y_pred = _pair(y_true, y_pred, min_len=2)
        spread = float(np.linalg.norm(y_true - y_true.mean()))
        if spread == 0.0:
            raise NumericalError("FIT undefined (zero variance)")
        return 100.0 * (1.0 - float(np.linalg.norm(y_true - y_pred)) / spread)

    @staticmethod
    def coverage(y_true: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
        """Percentage of steps with lo <= y <= hi (bounds count as inside)"""
        y_true, lo = _pair(y_true, lo)
        _, hi = _pair(y_true, hi)
        inside = (lo <= y_true) & (y_true <= hi)
        return 100.0 * float(np.count_nonzero(inside)) / y_true.shape[0]

    @staticmethod
    def rmse(y_true: np.ndarray, y_pred: np.ndarray) -> float:
        y_true, y_pred = _pair(y_true, y_pred)
        return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))

    @staticmethod
    def evaluate(
        y_true: np.ndarray, pred: UncertainPrediction, signal_id: str, transient: int = 0
    ) -> EvalReport:
        """All statistics over steps ``transient:``; the prediction itself is untouched"""
        y_true = np.asarray(y_true, dtype=np.float64)
        if y_true.shape != pred.y_mean.shape:
            raise ValueError(
                f"measured output {y_true.shape} does not match prediction {pred.y_mean.shape}"
            )
        if not 0 <= transient < y_true.shape[0]:
            raise ValueError(f"transient {transient} leaves no samples")

        y = y_true[transient:]
        kept = pred.tail(transient)
        surprise = kept.surprise

        return EvalReport(
            signal_id=signal_id,
            fit=MetricsService.fit_index(y, kept.y_mean),
            coverage=MetricsService.coverage(y, kept.lo, kept.hi),
            surprise=surprise,
            rmse=MetricsService.rmse(y, kept.y_mean),
            n_steps=y.shape[0],
        )

    @staticmethod
    def save_report_csv(reports: Sequence[EvalReport], path: str | Path) -> Path:
        """One row per signal: `signal,fit,coverage,surprise`"""
        out = write_csv_table(
            path,
            REPORT_HEADER,
            (
                [r.signal_id for r in reports],
                [r.fit for r in reports],
                [r.coverage for r in reports],
                [r.surprise for r in reports],
            ),
        )
        ARTIFACTS_WRITTEN.labels(kind="report").inc()
        return out

    @staticmethod
    def ordering_warnings(reports: Sequence[EvalReport]) -> list[str]:
        """Qualitative checks against the published trends; never fatal"""
        by_id = {r.signal_id: r for r in reports}
        ids = [f"signal{i}" for i in range(1, 5)]
        if not all(i in by_id for i in ids):
            return ["report does not hold all four test signals; ordering checks skipped"]
        s1, s2, s3, s4 = (by_id[i] for i in ids)

        warnings = []
        if not s1.fit > s3.fit > s4.fit:
            warnings.append(
                f"FIT not decreasing signal1 > signal3 > signal4 "
                f"({s1.fit:.1f}, {s3.fit:.1f}, {s4.fit:.1f})"
            )
        if not s1.surprise < s2.surprise < s3.surprise < s4.surprise:
            warnings.append(
                "surprise not increasing signal1 < signal2 < signal3 < signal4 "
                f"({s1.surprise:.2f}, {s2.surprise:.2f}, {s3.surprise:.2f}, {s4.surprise:.2f})"
            )
        if s4.surprise < 3.0 * s1.surprise:
            warnings.append(
                f"surprise separation below 3x ({s4.surprise:.2f} vs {s1.surprise:.2f})"
            )
        if s4.coverage > s1.coverage - 5.0:
            warnings.append(
                f"coverage contrast below 5 points ({s1.coverage:.1f} vs {s4.coverage:.1f})"
            )
        return warnings
