"""
End-to-end experiment stages.

Includes:
- config loading (bundled profile + user file + seed override)
- generate / train / laplace / evaluate / report / plot
- upstream hash checks between stages
"""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from nssm_unc.core.config import load_settings, log_active_profile
from nssm_unc.core.exceptions import ConfigError
from nssm_unc.models.state_space import NeuralSSModel
from nssm_unc.pipeline import plots
from nssm_unc.pipeline.artifacts import (
    RunLayout,
    load_model,
    load_posterior,
    read_json,
    require,
    save_model,
    save_posterior,
    save_trace,
    write_json,
)
from nssm_unc.pipeline.schemas import INIT_SEED, ExperimentConfig
from nssm_unc.shared.services.provenance import ProvenanceManager
from nssm_unc.sysid.datagen.schemas import Dataset, g1_filter, g2_filter
from nssm_unc.sysid.datagen.services import WhDataService
from nssm_unc.sysid.laplace.services import LaplaceService
from nssm_unc.sysid.metrics.schemas import EvalReport
from nssm_unc.sysid.metrics.services import PUBLISHED_REFERENCE, MetricsService
from nssm_unc.sysid.trainer.services import TrainerService
from nssm_unc.sysid.uq.services import UncertaintyService
from nssm_unc.utils.tables import read_csv_table, write_csv_table

BODE_HEADER = ("freq_hz", "magnitude_db", "phase_deg")
# NSSM_UNC_RUN_ID / NSSM_UNC_PROFILE surface as settings too
ENV_CONTROL_KEYS = {"run_id", "profile"}


def _validation_summary(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        where = ".".join(str(p) for p in err["loc"]) or "config"
        parts.append(f"{where}: {err['msg']}")
    return "; ".join(parts)


class PipelineService:
    # ==============================================================
    # CONFIG
    # ==============================================================

    @staticmethod
    def load_config(
        config_path: str | Path | None = None, fast: bool = False, seed: int | None = None
    ) -> ExperimentConfig:
        """Bundled defaults, `fast` profile, user file, then ``--seed``; validated"""
        raw = load_settings(config_path, fast=fast)
        log_active_profile(raw, fast)

        known = set(ExperimentConfig.model_fields)
        unknown = sorted(set(raw) - known - ENV_CONTROL_KEYS)
        if unknown:
            logger.warning(f"ignoring unknown top-level settings: {', '.join(unknown)}")
        raw = {key: value for key, value in raw.items() if key in known}
        if seed is not None:
            raw["seed"] = seed

        try:
            return ExperimentConfig.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(_validation_summary(e)) from e

    @staticmethod
    def _load_verified_dataset(cfg: ExperimentConfig, layout: RunLayout, name: str) -> Dataset:
        path = require(layout.dataset(name), "generate")
        ds = WhDataService.dataset_load(path)
        ProvenanceManager.verify(
            ds.metadata.get("config_hash"), cfg.data_hash, f"dataset {name} config"
        )
        return ds

    # ==============================================================
    # STAGES
    # ==============================================================

    @staticmethod
    def cmd_generate(cfg: ExperimentConfig) -> list[Path]:
        """Training set, test sets, Bode tables of G1/G2 and the nonlinearity table"""
        layout = RunLayout(cfg.paths.run_dir)
        data = cfg.data
        written = []

        for name, spec in data.signal_specs().items():
            ms = data.multisine(name, cfg.seed)
            u = WhDataService.multisine(ms)
            ds = WhDataService.wh_simulate(
                u,
                data.sigma_e,
                seed=data.noise_seed(name, cfg.seed),
                variant=data.nonlinearity_variant,
                fs=data.fs,
                metadata={
                    "signal": name,
                    "seed": ms.seed,
                    "band": [spec.band_lo, spec.band_hi],
                    "std": spec.target_std,
                    "n_samples": ms.n_samples,
                    "config_hash": cfg.data_hash,
                },
            )
            written.append(WhDataService.dataset_save(ds, layout.dataset(name)))

        for lti in (g1_filter(), g2_filter()):
            resp = WhDataService.frequency_response(lti, data.bode_points, data.fs)
            written.append(WhDataService.save_frequency_response(resp, layout.bode(lti.name)))

        x, f = WhDataService.static_nonlinearity_table(data.nonlinearity_variant)
        written.append(write_csv_table(layout.nonlinearity_table, ("x", "f"), (x, f)))

        logger.info(f"generate: {len(written)} files under {layout.data_dir}")
        return written

    @staticmethod
    def cmd_train(cfg: ExperimentConfig) -> Path:
        layout = RunLayout(cfg.paths.run_dir)
        ds = PipelineService._load_verified_dataset(cfg, layout, "train")

        model_init = NeuralSSModel.create(
            n_x=cfg.model.n_x,
            n_u=cfg.model.n_u,
            n_hidden=cfg.model.n_hidden,
            has_linear_bypass=cfg.model.has_linear_bypass,
            rng=np.random.default_rng(cfg.seed + INIT_SEED),
        )
        report = TrainerService.train_map(ds, model_init, cfg.train)

        save_trace(report.nll_trace, layout.nll_trace)
        return save_model(
            model_init.with_theta(report.theta_map),
            layout.model,
            header={
                "train_config": cfg.train.model_dump(mode="json"),
                "seed": cfg.seed,
                "config_hash": cfg.training_hash,
                "dataset_hash": ProvenanceManager.hash_file(layout.dataset("train")),
                "beta": report.beta,
                "beta_estimated": report.beta_estimated,
                "nll_final": report.best_nll,
                "wall_time": report.wall_time,
            },
        )

    @staticmethod
    def cmd_laplace(cfg: ExperimentConfig) -> Path:
        layout = RunLayout(cfg.paths.run_dir)
        model_path = require(layout.model, "train")
        ds = PipelineService._load_verified_dataset(cfg, layout, "train")
        model, header = load_model(model_path)

        ProvenanceManager.verify(header.get("config_hash"), cfg.training_hash, "model config")
        dataset_hash = ProvenanceManager.hash_file(layout.dataset("train"))
        ProvenanceManager.verify(header.get("dataset_hash"), dataset_hash, "training dataset")

        beta = header.get("beta_estimated") or header["beta"]
        post = LaplaceService.gn_precision(model, ds, cfg.train.tau, beta, cfg.train.washout)
        return save_posterior(
            post,
            layout.posterior_header,
            layout.posterior_factor,
            header={
                "seed": cfg.seed,
                "config_hash": cfg.training_hash,
                "dataset_hash": dataset_hash,
                "model_hash": ProvenanceManager.hash_file(model_path),
            },
        )

    @staticmethod
    def cmd_evaluate(cfg: ExperimentConfig) -> list[EvalReport]:
        """Predictions with intervals for every test signal, run concurrently"""
        layout = RunLayout(cfg.paths.run_dir)
        post_path = require(layout.posterior_header, "laplace")
        model_path = require(layout.model, "train")

        post, post_header = load_posterior(post_path)
        model, model_header = load_model(model_path)
        ProvenanceManager.verify(model_header.get("config_hash"), cfg.training_hash, "model config")
        ProvenanceManager.verify(
            post_header.get("config_hash"), cfg.training_hash, "posterior config"
        )
        ProvenanceManager.verify(
            post_header.get("model_hash"), ProvenanceManager.hash_file(model_path), "model"
        )

        datasets = {
            name: PipelineService._load_verified_dataset(cfg, layout, name)
            for name in cfg.data.test_names
        }

        def evaluate_one(name: str) -> EvalReport:
            ds = datasets[name]
            pred = UncertaintyService.predict_with_uncertainty(
                model, post, ds.u, interval_multiplier=cfg.eval.interval_multiplier
            )
            UncertaintyService.save_prediction(pred, layout.prediction(name), ds.u, ds.y)
            report = MetricsService.evaluate(ds.y, pred, name, transient=cfg.eval.transient)
            logger.info(
                f"{name}: fit={report.fit:.2f} coverage={report.coverage:.1f} "
                f"surprise={report.surprise:.3f}"
            )
            return report

        workers = min(cfg.eval.max_workers, len(datasets))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(evaluate_one, datasets))

        MetricsService.save_report_csv(reports, layout.report_csv)
        write_json(
            layout.report_json,
            {
                "reports": [r.model_dump() for r in reports],
                "provenance": {
                    "seed": cfg.seed,
                    "config_hash": cfg.training_hash,
                    "model_hash": post_header["model_hash"],
                    "posterior_hash": ProvenanceManager.hash_file(post_path),
                    "test_hashes": {
                        name: ProvenanceManager.hash_file(layout.dataset(name))
                        for name in datasets
                    },
                    "interval_multiplier": cfg.eval.interval_multiplier,
                    "transient": cfg.eval.transient,
                },
            },
        )
        return reports

    @staticmethod
    def cmd_report(cfg: ExperimentConfig, console: Console | None = None) -> list[EvalReport]:
        """Measured rows beside the published ones, plus trend checks"""
        layout = RunLayout(cfg.paths.run_dir)
        payload = read_json(require(layout.report_json, "evaluate"))
        reports = [EvalReport(**r) for r in payload["reports"]]
        reference = {row.signal_id: row for row in PUBLISHED_REFERENCE}

        table = Table(title="FIT / coverage / surprise")
        for column in ("signal", "source", "FIT %", "coverage %", "surprise %", "RMSE (mV)"):
            table.add_column(column, justify="left" if column in ("signal", "source") else "right")
        for r in reports:
            table.add_row(
                r.signal_id, "measured", f"{r.fit:.1f}", f"{r.coverage:.1f}",
                f"{r.surprise:.2f}", f"{1e3 * r.rmse:.2f}",
            )
            if (ref := reference.get(r.signal_id)) is not None:
                table.add_row(
                    "", "published", f"{ref.fit:.1f}", f"{ref.coverage:.1f}",
                    f"{ref.surprise:.2f}", "",
                )
        (console or Console()).print(table)

        nan = float("nan")
        refs = [reference.get(r.signal_id) for r in reports]
        write_csv_table(
            layout.summary_csv,
            ("signal", "fit", "coverage", "surprise", "ref_fit", "ref_coverage", "ref_surprise"),
            (
                [r.signal_id for r in reports],
                [r.fit for r in reports],
                [r.coverage for r in reports],
                [r.surprise for r in reports],
                [ref.fit if ref else nan for ref in refs],
                [ref.coverage if ref else nan for ref in refs],
                [ref.surprise if ref else nan for ref in refs],
            ),
        )

        for warning in MetricsService.ordering_warnings(reports):
            logger.warning(warning)
        return reports

    @staticmethod
    def cmd_plot(cfg: ExperimentConfig) -> list[Path]:
        layout = RunLayout(cfg.paths.run_dir)
        bode = {
            block: read_csv_table(require(layout.bode(block), "generate"), BODE_HEADER)
            for block in ("G1", "G2")
        }
        figures = [plots.plot_bode(bode, layout.figures_dir / "bode.png")]

        nl = read_csv_table(require(layout.nonlinearity_table, "generate"), ("x", "f"))
        figures.append(
            plots.plot_static_nonlinearity(
                nl["x"], nl["f"], layout.figures_dir / "static_nonlinearity.png"
            )
        )

        for name in cfg.data.test_names:
            table = UncertaintyService.load_prediction(require(layout.prediction(name), "evaluate"))
            figures.append(
                plots.plot_prediction(
                    table,
                    fs=cfg.data.fs,
                    sigma_e=cfg.data.sigma_e,
                    multiplier=cfg.eval.interval_multiplier,
                    title=name,
                    path=layout.figures_dir / f"pred_{name}.png",
                )
            )
        logger.info(f"plot: {len(figures)} figures under {layout.figures_dir}")
        return figures
