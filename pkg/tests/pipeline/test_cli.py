from pathlib import Path

import pytest

from nssm_unc.main import build_parser, main
from nssm_unc.pipeline.artifacts import RunLayout

STAGES = ("generate", "train", "laplace", "evaluate", "report", "plot")


def _run(stage: str, config: Path, *extra: str) -> int:
    return main([stage, "--config", str(config), *extra])


@pytest.fixture
def layout(tiny_config: Path) -> RunLayout:
    return RunLayout(tiny_config.parent / "run")


def test_every_stage_is_registered():
    parser = build_parser()
    for stage in STAGES:
        args = parser.parse_args([stage, "--fast", "--seed", "3"])
        assert args.stage == stage
        assert args.fast is True and args.seed == 3


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        build_parser().parse_args(["--version"])
    assert exc.value.code == 0
    assert "nssm-unc" in capsys.readouterr().out


def test_full_pipeline_on_tiny_config(tiny_config, layout, capsys):
    for stage in STAGES:
        assert _run(stage, tiny_config) == 0, stage

    for name in ("train", "signal1", "signal2", "signal3", "signal4"):
        assert layout.dataset(name).is_file()
    assert layout.bode("G2").is_file() and layout.nonlinearity_table.is_file()
    assert layout.model.is_file() and layout.nll_trace.is_file()
    assert layout.posterior_header.is_file() and layout.posterior_factor.is_file()

    lines = layout.report_csv.read_text().splitlines()
    assert lines[0] == "signal,fit,coverage,surprise"
    assert [line.split(",")[0] for line in lines[1:]] == ["signal1", "signal2", "signal3", "signal4"]

    summary = layout.summary_csv.read_text().splitlines()
    assert summary[0] == "signal,fit,coverage,surprise,ref_fit,ref_coverage,ref_surprise"
    assert summary[1].endswith(",98.1,99.2,0.33")
    assert "FIT / coverage / surprise" in capsys.readouterr().out

    figures = sorted(p.name for p in layout.figures_dir.glob("*.png"))
    assert "bode.png" in figures and "pred_signal4.png" in figures
    assert (layout.root / "metrics.prom").is_file()


def test_evaluate_without_posterior_exits_missing_stage(tiny_config, capsys):
    assert _run("evaluate", tiny_config) == 8
    assert "error[missing-stage]" in capsys.readouterr().err


def test_generate_is_deterministic(tiny_config, layout):
    assert _run("generate", tiny_config) == 0
    first = {p.name: p.read_bytes() for p in layout.data_dir.iterdir()}
    assert _run("generate", tiny_config) == 0
    second = {p.name: p.read_bytes() for p in layout.data_dir.iterdir()}
    assert first == second


def test_train_refuses_data_from_another_seed(tiny_config, capsys):
    assert _run("generate", tiny_config) == 0
    assert _run("train", tiny_config, "--seed", "8") == 7
    assert "error[provenance]" in capsys.readouterr().err


def test_invalid_config_exits_with_config_error(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text("[train]\nsubseq_len = 16\nwashout = 16\n")
    assert _run("generate", path) == 2
    assert "error[config]" in capsys.readouterr().err


def _variant(config: Path, name: str, old: str, new: str) -> Path:
    text = config.read_text()
    assert old in text
    path = config.parent / name
    path.write_text(text.replace(old, new))
    return path


def test_evaluate_refuses_posterior_from_older_config(tiny_config, layout, capsys):
    for stage in ("generate", "train", "laplace"):
        assert _run(stage, tiny_config) == 0, stage
    sharper_prior = _variant(tiny_config, "tau.toml", "washout = 8\n", "washout = 8\ntau = 50.0\n")

    assert _run("evaluate", sharper_prior) == 7
    assert "error[provenance]" in capsys.readouterr().err
    assert not layout.report_json.exists()

    assert _run("evaluate", tiny_config) == 0


def test_same_config_and_seed_reproduce_report(tiny_config, layout):
    other_run = tiny_config.parent / "run_again"
    again = _variant(
        tiny_config, "again.toml", f'"{layout.root.as_posix()}"', f'"{other_run.as_posix()}"'
    )
    for stage in ("generate", "train", "laplace", "evaluate"):
        assert _run(stage, tiny_config) == 0, stage
        assert _run(stage, again) == 0, stage

    assert layout.report_csv.read_bytes() == RunLayout(other_run).report_csv.read_bytes()
