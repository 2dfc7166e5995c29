import json

import pytest
from numpy.testing import assert_array_equal

from nssm_unc.core.exceptions import DatasetFormatError, MissingStageError, ProvenanceError
from nssm_unc.pipeline.artifacts import (
    RunLayout,
    load_model,
    load_posterior,
    require,
    save_model,
    save_posterior,
    save_trace,
)
from nssm_unc.sysid.laplace.services import LaplaceService
from nssm_unc.sysid.trainer.schemas import TraceEntry


def _posterior(tiny_model, rng):
    return LaplaceService.gn_precision(tiny_model, rng.standard_normal(30), tau=0.5, beta=20.0, washout=2)


def test_run_layout_paths(tmp_path):
    layout = RunLayout(tmp_path)
    assert layout.dataset("signal3") == tmp_path / "data" / "signal3.csv"
    assert layout.bode("G1") == tmp_path / "data" / "bode_g1.csv"
    assert layout.prediction("signal1") == tmp_path / "eval" / "pred_signal1.csv"
    assert layout.posterior_factor.name == "posterior.bin"


def test_require_names_producing_stage(tmp_path):
    with pytest.raises(MissingStageError) as exc:
        require(tmp_path / "model.json", "train")
    assert exc.value.exit_code == 8
    assert "nssm-unc train" in exc.value.detail


def test_model_artifact_keeps_exact_parameters(tmp_path, tiny_model):
    path = save_model(tiny_model, tmp_path / "model.json", header={"seed": 3})
    loaded, header = load_model(path)

    assert_array_equal(loaded.theta, tiny_model.theta)
    assert loaded.f_spec == tiny_model.f_spec and loaded.g_spec == tiny_model.g_spec
    assert header["seed"] == 3
    assert header["format"] == "nssm-unc/model@1"


def test_model_artifact_with_wrong_format_rejected(tmp_path, tiny_model):
    path = save_model(tiny_model, tmp_path / "model.json", header={})
    payload = json.loads(path.read_text())
    payload["format"] = "something-else"
    path.write_text(json.dumps(payload))
    with pytest.raises(DatasetFormatError):
        load_model(path)


def test_model_artifact_with_truncated_theta_rejected(tmp_path, tiny_model):
    path = save_model(tiny_model, tmp_path / "model.json", header={})
    payload = json.loads(path.read_text())
    payload["n_theta"] += 1
    path.write_text(json.dumps(payload))
    with pytest.raises(DatasetFormatError) as exc:
        load_model(path)
    assert exc.value.field == "theta_b64"


def test_posterior_artifact_restores_factor(tmp_path, tiny_model, rng):
    post = _posterior(tiny_model, rng)
    layout = RunLayout(tmp_path)
    save_posterior(post, layout.posterior_header, layout.posterior_factor, header={"seed": 1})

    loaded, header = load_posterior(layout.posterior_header)
    assert_array_equal(loaded.chol_H, post.chol_H)
    assert_array_equal(loaded.theta_map, post.theta_map)
    assert (loaded.tau, loaded.beta, loaded.washout) == (0.5, 20.0, 2)
    assert layout.posterior_factor.stat().st_size == 8 * post.n_theta * (post.n_theta + 1) // 2
    assert header["seed"] == 1


def test_tampered_posterior_factor_refused(tmp_path, tiny_model, rng):
    post = _posterior(tiny_model, rng)
    layout = RunLayout(tmp_path)
    save_posterior(post, layout.posterior_header, layout.posterior_factor, header={})

    raw = bytearray(layout.posterior_factor.read_bytes())
    raw[0] ^= 0xFF
    layout.posterior_factor.write_bytes(bytes(raw))
    with pytest.raises(ProvenanceError):
        load_posterior(layout.posterior_header)


def test_trace_csv(tmp_path):
    trace = [TraceEntry(0, "init", 2.5), TraceEntry(1, "adam", 1.25), TraceEntry(2, "lbfgs", 1.0)]
    path = save_trace(trace, tmp_path / "nll_trace.csv")
    assert path.read_text().splitlines() == ["epoch,nll", "0,2.5", "1,1.25", "2,1.0"]


def test_malformed_json_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{\n  \"format\": \n")
    with pytest.raises(DatasetFormatError):
        load_model(path)
