import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from nssm_unc.core.exceptions import SimulationDivergedError
from nssm_unc.models.mlp import MlpWeights, mlp_forward, pack_params
from nssm_unc.models.state_space import (
    NeuralSSModel,
    SensitivityState,
    output_grads_naive,
    simulate,
    simulate_with_sensitivities,
)


def _max_rel_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def test_zero_parameters_give_zero_output():
    model = NeuralSSModel.create(n_x=3, n_hidden=4)
    out = simulate(model, np.ones(10))
    assert_array_equal(out.y_mean, np.zeros(10))
    assert_array_equal(out.x_final, np.zeros(3))


def test_recursive_gradients_match_finite_differences():
    rng = np.random.default_rng(20)
    for trial in range(20):
        n_x = int(rng.integers(1, 4))
        n_hidden = int(rng.integers(1, 5))
        n_steps = int(rng.integers(5, 31))
        model = NeuralSSModel.create(n_x=n_x, n_hidden=n_hidden, rng=rng)
        u = 0.5 * rng.standard_normal(n_steps)

        recursive = simulate_with_sensitivities(model, u).y_grads
        fd = output_grads_naive(model, u, method="fd")
        assert _max_rel_error(recursive, fd) <= 1e-4, f"trial {trial}"


def test_relinearize_backend_agrees_with_recursion(tiny_model, rng):
    u = rng.standard_normal(25)
    recursive = simulate_with_sensitivities(tiny_model, u).y_grads
    naive = output_grads_naive(tiny_model, u, method="relinearize")
    assert_allclose(naive, recursive, rtol=1e-9, atol=1e-12)


def test_sensitivity_run_reproduces_plain_simulation(tiny_model, rng):
    u = rng.standard_normal(50)
    plain = simulate(tiny_model, u)
    sens = simulate_with_sensitivities(tiny_model, u)
    assert_allclose(sens.y_mean, plain.y_mean, rtol=1e-13, atol=1e-15)
    assert_allclose(sens.x_traj, plain.x_traj, rtol=1e-13, atol=1e-15)
    assert sens.y_grads.shape == (50, tiny_model.n_theta)


def test_first_output_depends_only_on_g_parameters(tiny_model, rng):
    grads = simulate_with_sensitivities(tiny_model, rng.standard_normal(5)).y_grads
    n_f = tiny_model.f_spec.param_count
    assert_array_equal(grads[0, :n_f], 0.0)
    assert np.any(grads[0, n_f:])


def test_sequence_split_with_carried_state(tiny_model, rng):
    u = rng.standard_normal(40)
    full = simulate_with_sensitivities(tiny_model, u)
    head = simulate_with_sensitivities(tiny_model, u[:15])
    tail = simulate_with_sensitivities(tiny_model, u[15:], x0=head.x_final, s0=head.s_final)

    assert_allclose(tail.y_mean, full.y_mean[15:], rtol=1e-12, atol=1e-14)
    assert_allclose(tail.y_grads, full.y_grads[15:], rtol=1e-10, atol=1e-13)
    assert_allclose(tail.s_final.s, full.s_final.s, rtol=1e-10, atol=1e-13)


def test_batched_stream_matches_single_sequences(tiny_model, rng):
    u = rng.standard_normal((3, 20))
    batched = list(tiny_model.output_gradient_steps(u))
    for b in range(3):
        single = simulate_with_sensitivities(tiny_model, u[b])
        for k, (y_k, g_k) in enumerate(batched):
            assert y_k[b] == pytest.approx(single.y_mean[k], rel=1e-12, abs=1e-15)
            assert_allclose(g_k[b], single.y_grads[k], rtol=1e-10, atol=1e-14)


def test_simulate_outputs_is_batched_simulate(tiny_model, rng):
    u = rng.standard_normal((2, 15))
    y = tiny_model.simulate_outputs(u)
    for b in range(2):
        assert_allclose(y[b], simulate(tiny_model, u[b]).y_mean, rtol=1e-13, atol=1e-15)


def test_bad_sensitivity_shape_rejected(tiny_model):
    with pytest.raises(ValueError):
        simulate_with_sensitivities(tiny_model, np.zeros(5), s0=SensitivityState(np.zeros((2, 3))))


def test_wrong_theta_length_rejected(tiny_model):
    with pytest.raises(ValueError):
        tiny_model.with_theta(np.zeros(tiny_model.n_theta + 1))


def test_theta_is_read_only(tiny_model):
    with pytest.raises(ValueError):
        tiny_model.theta[0] = 1.0


def test_unknown_naive_method_rejected(tiny_model):
    with pytest.raises(ValueError):
        output_grads_naive(tiny_model, np.zeros(3), method="adjoint")


def _exploding_model() -> NeuralSSModel:
    model = NeuralSSModel.create(n_x=2, n_hidden=2)
    f_weights = MlpWeights(
        W1=np.zeros((2, 3)),
        b1=np.zeros(2),
        W2=np.zeros((2, 2)),
        b2=np.zeros(2),
        A=np.array([[10.0, 0.0, 0.0], [0.0, 10.0, 0.0]]),
    )
    theta = np.array(model.theta)
    theta[: model.f_spec.param_count] = pack_params(model.f_spec, f_weights)
    return model.with_theta(theta)


def test_divergence_reports_first_bad_step():
    model = _exploding_model()
    with pytest.raises(SimulationDivergedError) as exc:
        simulate(model, np.zeros(400), x0=np.ones(2))
    # 10^k overflows float64 just past k = 308
    assert 300 < exc.value.step < 320

    with pytest.raises(SimulationDivergedError):
        simulate_with_sensitivities(model, np.zeros(400), x0=np.ones(2))


def _scalar_linear_model(a: float, b: float, c: float) -> NeuralSSModel:
    """x_{k+1} = a x_k + b u_k, y_k = c x_k (hidden layers switched off)"""
    model = NeuralSSModel.create(n_x=1, n_hidden=2)
    f_weights = MlpWeights(
        W1=np.zeros((2, 2)), b1=np.zeros(2), W2=np.zeros((1, 2)), b2=np.zeros(1),
        A=np.array([[a, b]]),
    )
    g_weights = MlpWeights(
        W1=np.zeros((2, 1)), b1=np.zeros(2), W2=np.zeros((1, 2)), b2=np.zeros(1),
        A=np.array([[c]]),
    )
    theta = np.concatenate(
        [pack_params(model.f_spec, f_weights), pack_params(model.g_spec, g_weights)]
    )
    return model.with_theta(theta)


def test_linear_special_case_matches_closed_form(rng):
    a, b, c, x0 = 0.8, 0.5, -1.3, 0.2
    model = _scalar_linear_model(a, b, c)
    u = rng.standard_normal(60)

    # theta columns: b2_f = 8, a = 9, b = 10 | b2_g = 17, c = 18
    expected_y = np.empty(60)
    expected_grads = np.zeros((60, model.n_theta))
    x, dx_da, dx_db, dx_dbias = x0, 0.0, 0.0, 0.0
    for k in range(60):
        expected_y[k] = c * x
        expected_grads[k, [8, 9, 10, 17, 18]] = [c * dx_dbias, c * dx_da, c * dx_db, 1.0, x]
        dx_da, dx_db, dx_dbias = x + a * dx_da, u[k] + a * dx_db, 1.0 + a * dx_dbias
        x = a * x + b * u[k]

    assert_allclose(simulate(model, u, x0=[x0]).y_mean, expected_y, rtol=1e-12, atol=1e-12)
    out = simulate_with_sensitivities(model, u, x0=[x0])
    assert_allclose(out.y_mean, expected_y, rtol=1e-12, atol=1e-12)
    assert_allclose(out.y_grads, expected_grads, rtol=1e-10, atol=1e-10)


def test_matches_step_by_step_reference(tiny_model, rng):
    u = rng.standard_normal(20)
    f, g = tiny_model.f_slice, tiny_model.g_slice
    x = np.zeros(tiny_model.n_x)
    expected = []
    for u_k in u:
        expected.append(mlp_forward(g.spec, g.view(tiny_model.theta), x)[0])
        x = mlp_forward(f.spec, f.view(tiny_model.theta), np.append(x, u_k))
    assert_allclose(simulate(tiny_model, u).y_mean, expected, rtol=1e-13, atol=1e-15)


def test_zero_state_is_a_fixed_point_under_zero_input(rng):
    # zero biases at init, so F(0, 0) = 0
    model = NeuralSSModel.create(n_x=3, n_hidden=5, rng=rng)
    out = simulate_with_sensitivities(model, np.zeros(50))
    assert_array_equal(out.x_traj, 0.0)
    assert_array_equal(out.y_mean, 0.0)
    assert np.isfinite(out.y_grads).all()
    assert np.isfinite(out.s_final.s).all()


def test_repeated_runs_are_bitwise_identical(tiny_model, rng):
    u = rng.standard_normal(30)
    x0 = rng.standard_normal(tiny_model.n_x)
    first = simulate_with_sensitivities(tiny_model, u, x0=x0)
    second = simulate_with_sensitivities(tiny_model, u, x0=x0)
    assert_array_equal(first.y_mean, second.y_mean)
    assert_array_equal(first.x_traj, second.x_traj)
    assert_array_equal(first.y_grads, second.y_grads)
    assert_array_equal(first.s_final.s, second.s_final.s)
    assert_array_equal(simulate(tiny_model, u, x0).y_mean, simulate(tiny_model, u, x0).y_mean)


def test_default_sensitivity_starts_at_zero(tiny_model, rng):
    u = rng.standard_normal(15)
    implicit = simulate_with_sensitivities(tiny_model, u)
    explicit = simulate_with_sensitivities(tiny_model, u, s0=SensitivityState.zeros(tiny_model))
    assert_array_equal(implicit.y_grads, explicit.y_grads)
    assert_array_equal(implicit.s_final.s, explicit.s_final.s)


def test_single_step_backends_agree(tiny_model):
    u = np.array([0.3])
    recursive = simulate_with_sensitivities(tiny_model, u).y_grads
    naive = output_grads_naive(tiny_model, u, method="relinearize")
    assert recursive.shape == (1, tiny_model.n_theta)
    assert_allclose(naive, recursive, rtol=1e-12, atol=1e-15)
