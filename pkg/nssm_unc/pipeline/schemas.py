"""
Experiment configuration validated from the merged dynaconf settings.
"""

from pathlib import Path
from typing import Any, Self

from pydantic import Field, model_validator

from nssm_unc.shared.schemas.base import BaseSchema
from nssm_unc.shared.services.provenance import ProvenanceManager
from nssm_unc.sysid.datagen.schemas import DEFAULT_FS, MultisineConfig, NonlinearityVariant
from nssm_unc.sysid.trainer.schemas import TrainConfig

# Seed offsets from the global seed
TRAIN_SIGNAL_SEED = 0
TRAIN_NOISE_SEED = 1
TEST_SEED_STRIDE = 10
INIT_SEED = 100
TRAIN_ORDER_SEED = 101


class SignalSpec(BaseSchema):
    band_lo: float = Field(..., ge=0)
    band_hi: float = Field(..., gt=0)
    target_std: float = Field(..., gt=0)


class DataSection(BaseSchema):
    fs: float = Field(default=DEFAULT_FS, gt=0)
    n_train: int = Field(default=10000, ge=2)
    n_test: int = Field(default=10000, ge=2)
    sigma_e: float = Field(default=5e-3, ge=0)
    nonlinearity_variant: NonlinearityVariant = NonlinearityVariant.STANDARD
    train_signal: SignalSpec
    test_signals: tuple[SignalSpec, ...] = Field(..., min_length=1)
    bode_points: int = Field(default=4096, ge=2)

    @model_validator(mode="after")
    def check_bands(self) -> Self:
        for name, spec in self.signal_specs().items():
            if not spec.band_lo < spec.band_hi:
                raise ValueError(f"{name}: band_lo must be below band_hi")
            if spec.band_hi > self.fs / 2:
                raise ValueError(
                    f"{name}: band_hi {spec.band_hi} Hz exceeds Nyquist {self.fs / 2} Hz"
                )
        return self

    def signal_specs(self) -> dict[str, SignalSpec]:
        """``train`` followed by ``signal1..signalM``"""
        signals: dict[str, SignalSpec] = {"train": self.train_signal}
        signals.update({f"signal{i}": s for i, s in enumerate(self.test_signals, start=1)})
        return signals

    def multisine(self, name: str, seed: int) -> MultisineConfig:
        if name == "train":
            spec, n, offset = self.train_signal, self.n_train, TRAIN_SIGNAL_SEED
        else:
            index = int(name.removeprefix("signal"))
            spec, n = self.test_signals[index - 1], self.n_test
            offset = TEST_SEED_STRIDE * index
        return MultisineConfig(n_samples=n, fs=self.fs, seed=seed + offset, **spec.model_dump())

    def noise_seed(self, name: str, seed: int) -> int:
        if name == "train":
            return seed + TRAIN_NOISE_SEED
        return seed + TEST_SEED_STRIDE * int(name.removeprefix("signal")) + 1

    @property
    def test_names(self) -> list[str]:
        return [f"signal{i}" for i in range(1, len(self.test_signals) + 1)]


class ModelSection(BaseSchema):
    n_x: int = Field(default=6, ge=1)
    n_u: int = Field(default=1, ge=1, le=1)  # datasets carry a single input channel
    n_hidden: int = Field(default=15, ge=1)
    has_linear_bypass: bool = True


class EvalSection(BaseSchema):
    interval_multiplier: float = Field(default=3.0, gt=0)
    transient: int = Field(default=0, ge=0)
    max_workers: int = Field(default=4, ge=1)


class PathsSection(BaseSchema):
    run_dir: Path = Path("runs/default")


class ExperimentConfig(BaseSchema):
    project_name: str = "nssm-unc"
    version: str = "0.1.0"
    log_level: str = "INFO"
    seed: int = 42
    data: DataSection
    model: ModelSection = ModelSection()
    train: TrainConfig
    eval: EvalSection = EvalSection()
    paths: PathsSection = PathsSection()

    @model_validator(mode="before")
    @classmethod
    def fill_train_defaults(cls, values: Any) -> Any:
        """beta from the known noise level, training seed from the global seed"""
        if not isinstance(values, dict):
            return values
        values = dict(values)
        train = dict(values.get("train") or {})
        seed = int(values.get("seed", 42))
        sigma_e = float((values.get("data") or {}).get("sigma_e", 5e-3))
        if "beta" not in train:
            if sigma_e <= 0:
                raise ValueError("data.sigma_e = 0 needs an explicit train.beta")
            train["beta"] = 1.0 / sigma_e**2
        train.setdefault("seed", seed + TRAIN_ORDER_SEED)
        values["train"] = train
        return values

    def section_hash(self, *sections: str) -> str:
        """Hash of the named sections plus the global seed"""
        payload = {name: getattr(self, name).model_dump(mode="json") for name in sections}
        payload["seed"] = self.seed
        return ProvenanceManager.hash_data(payload)

    @property
    def data_hash(self) -> str:
        return self.section_hash("data")

    @property
    def training_hash(self) -> str:
        return self.section_hash("data", "model", "train")
