import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from nssm_unc.core.exceptions import ConfigError
from nssm_unc.models.state_space import simulate, simulate_with_sensitivities
from nssm_unc.sysid.datagen.schemas import Dataset
from nssm_unc.sysid.trainer.optim import Adam, GradientDescent, Lbfgs
from nssm_unc.sysid.trainer.schemas import TrainConfig
from nssm_unc.sysid.trainer.services import TrainerService


def _dataset_from(model, u, noise=0.0, rng=None) -> Dataset:
    y = simulate(model, u).y_mean
    if noise:
        y = y + noise * rng.standard_normal(y.shape)
    return Dataset(u=u, y=y, fs=1.0, sigma_e=noise)


# ==============================================================
# OBJECTIVE
# ==============================================================


def test_nll_all_zero_case(model_factory, rng):
    base = model_factory(rng)
    model = base.with_theta(np.zeros(base.n_theta))
    res = TrainerService.nll(model, (np.ones(20), np.zeros(20)), tau=3.0, beta=1.0, washout=2)
    assert res.value == 0.0
    assert_array_equal(res.grad, 0.0)


def test_nll_self_consistent_data(tiny_model, rng):
    ds = _dataset_from(tiny_model, rng.standard_normal(60))
    res = TrainerService.nll(tiny_model, ds, tau=0.0, beta=100.0, washout=5)
    assert res.e_lik == pytest.approx(0.0, abs=1e-20)
    assert_allclose(res.grad, 0.0, atol=1e-12)


def test_nll_gradient_matches_finite_differences(tiny_model, rng):
    u = rng.standard_normal(30)
    y = rng.standard_normal(30) * 0.1
    kwargs = dict(tau=0.1, beta=2.0, washout=3)
    res = TrainerService.nll(tiny_model, (u, y), **kwargs)

    h = 1e-6
    fd = np.empty(tiny_model.n_theta)
    for i in range(tiny_model.n_theta):
        e = np.zeros(tiny_model.n_theta)
        e[i] = h
        plus = TrainerService.nll(tiny_model.with_theta(tiny_model.theta + e), (u, y), with_grad=False, **kwargs)
        minus = TrainerService.nll(tiny_model.with_theta(tiny_model.theta - e), (u, y), with_grad=False, **kwargs)
        fd[i] = (plus.value - minus.value) / (2 * h)
    assert np.max(np.abs(res.grad - fd)) <= 1e-5 * np.max(np.abs(fd))


def test_nll_prior_term(tiny_model):
    res = TrainerService.nll(tiny_model, (np.zeros(10), np.zeros(10)), tau=2.0, beta=1.0, washout=0)
    assert res.e_prio == pytest.approx(float(tiny_model.theta @ tiny_model.theta))


def test_nll_rejects_short_sequences(tiny_model):
    with pytest.raises(ValueError):
        TrainerService.nll(tiny_model, (np.zeros(4), np.zeros(4)), tau=1.0, beta=1.0, washout=4)


def test_split_gradients_sum_to_full_gradient(tiny_model, rng):
    u = rng.standard_normal(40)
    y = 0.1 * rng.standard_normal(40)
    kwargs = dict(tau=0.0, beta=1.0, washout=0)

    full = TrainerService.nll(tiny_model, (u, y), **kwargs)
    head_run = simulate_with_sensitivities(tiny_model, u[:25])
    head = TrainerService.nll(tiny_model, (u[:25], y[:25]), **kwargs)
    tail = TrainerService.nll(
        tiny_model, (u[25:], y[25:]), x0=head_run.x_final, s0=head_run.s_final.s, **kwargs
    )
    assert head.value + tail.value == pytest.approx(full.value, rel=1e-12)
    assert_allclose(head.grad + tail.grad, full.grad, rtol=1e-9, atol=1e-12)


def test_nll_linear_model_closed_form(linear_model_cls, rng):
    u = rng.standard_normal(50)
    y = 1.5 * u + 0.1 * rng.standard_normal(50)
    model = linear_model_cls(np.array([0.7]))
    res = TrainerService.nll(model, (u, y), tau=0.5, beta=4.0, washout=0)

    r = 0.7 * u - y
    assert res.value == pytest.approx(2.0 * r @ r + 0.25 * 0.49, rel=1e-12)
    assert res.grad[0] == pytest.approx(4.0 * r @ u + 0.5 * 0.7, rel=1e-12)


def test_residual_beta(linear_model_cls):
    u = np.linspace(-1.0, 1.0, 20)
    model = linear_model_cls(np.array([2.0]))
    ds = Dataset(u=u, y=2.0 * u + 0.1, fs=1.0, sigma_e=0.1)
    assert TrainerService.residual_beta(model, ds, washout=4) == pytest.approx(100.0, rel=1e-10)


# ==============================================================
# OPTIMIZERS
# ==============================================================


def _quadratic(rng, n=6):
    M = rng.standard_normal((n, n))
    Q = M @ M.T + n * np.eye(n)
    b = rng.standard_normal(n)

    def fun(x):
        return 0.5 * x @ Q @ x - b @ x, Q @ x - b

    return fun, np.linalg.solve(Q, b)


def test_adam_zero_gradient_is_a_no_op():
    adam = Adam(4)
    theta = np.array([1.0, -2.0, 3.0, 0.5])
    assert_array_equal(adam.step(theta, np.zeros(4)), theta)


def test_adam_first_step_is_lr_times_sign():
    adam = Adam(3, lr=0.01)
    theta = adam.step(np.zeros(3), np.array([5.0, -0.2, 1e-3]))
    assert_allclose(theta, [-0.01, 0.01, -0.01], rtol=1e-4)


def test_lbfgs_solves_quadratic(rng):
    fun, x_star = _quadratic(rng)
    x, f = Lbfgs(memory=5).minimize(fun, np.zeros(6), max_iter=100)
    assert_allclose(x, x_star, atol=1e-5)
    assert f == pytest.approx(fun(x_star)[0], abs=1e-9)


def test_lbfgs_is_monotone(rng):
    fun, _ = _quadratic(rng)
    opt = Lbfgs()
    x = np.ones(6)
    values = [fun(x)[0]]
    for _ in range(5):
        x, f = opt.minimize(fun, x, max_iter=1)
        values.append(f)
    assert all(b <= a for a, b in zip(values, values[1:], strict=False))


def test_gradient_descent_decreases(rng):
    fun, x_star = _quadratic(rng)
    x0 = np.ones(6)
    x, f = GradientDescent().minimize(fun, x0, max_iter=50)
    assert f < fun(x0)[0]
    assert np.linalg.norm(x - x_star) < np.linalg.norm(x0 - x_star)


# ==============================================================
# TRAINING
# ==============================================================


def test_train_config_rejects_washout_beyond_window():
    with pytest.raises(ValidationError):
        TrainConfig(subseq_len=32, washout=32)


def test_subsequence_batches_cover_every_window():
    cfg = TrainConfig(batch_size=7, subseq_len=10, washout=2)
    batches = TrainerService.subsequence_batches(50, cfg, np.random.default_rng(0))
    starts = np.sort(np.concatenate(batches))
    assert_array_equal(starts, np.arange(41))
    assert all(len(b) == 7 for b in batches[:-1])


def _small_cfg(**overrides) -> TrainConfig:
    base = dict(
        batch_size=16, subseq_len=40, epochs_adam=2, epochs_refine=1,
        refine_iters=3, washout=5, tau=1e-3, beta=100.0, seed=11,
    )
    base.update(overrides)
    return TrainConfig(**base)


def test_train_from_truth_stays_put(tiny_model, rng):
    ds = _dataset_from(tiny_model, rng.standard_normal(200))
    cfg = _small_cfg(epochs_adam=0, epochs_refine=3, tau=1e-6)
    report = TrainerService.train_map(ds, tiny_model, cfg)

    values = [e.nll for e in report.nll_trace]
    assert [e.epoch for e in report.nll_trace] == [0, 1, 2, 3]
    assert all(b <= a + 1e-12 * abs(a) for a, b in zip(values, values[1:], strict=False))
    assert np.linalg.norm(report.theta_map - tiny_model.theta) < 1e-3


def test_train_is_deterministic_and_improves(model_factory, rng):
    truth = model_factory(rng)
    ds = _dataset_from(truth, rng.standard_normal(160), noise=0.01, rng=rng)
    init = model_factory(np.random.default_rng(99))
    cfg = _small_cfg()

    first = TrainerService.train_map(ds, init, cfg)
    second = TrainerService.train_map(ds, init, cfg)

    assert_array_equal(first.theta_map, second.theta_map)
    assert first.best_nll <= first.nll_trace[0].nll
    assert np.isfinite([e.nll for e in first.nll_trace]).all()
    assert [e.phase for e in first.nll_trace] == ["init", "adam", "adam", "lbfgs"]


def test_train_recovers_linear_posterior_mean(linear_model_cls, rng):
    u = rng.standard_normal(120)
    y = 0.8 * u + 0.05 * rng.standard_normal(120)
    ds = Dataset(u=u, y=y, fs=1.0, sigma_e=0.05)
    cfg = _small_cfg(epochs_adam=0, epochs_refine=1, refine_iters=50, washout=0, tau=0.5, beta=400.0)

    report = TrainerService.train_map(ds, linear_model_cls(np.zeros(1)), cfg)
    expected = 400.0 * (u @ y) / (0.5 + 400.0 * (u @ u))
    assert report.theta_map[0] == pytest.approx(expected, rel=1e-8)


def test_train_with_gradient_descent_refinement(model_factory, rng):
    truth = model_factory(rng)
    ds = _dataset_from(truth, rng.standard_normal(120))
    cfg = _small_cfg(epochs_adam=1, refine_method="gd")
    report = TrainerService.train_map(ds, model_factory(np.random.default_rng(3)), cfg)
    assert report.nll_trace[-1].phase == "gd"
    assert report.best_nll <= report.nll_trace[0].nll


def test_train_estimates_beta(tiny_model, rng):
    ds = _dataset_from(tiny_model, rng.standard_normal(200), noise=0.02, rng=rng)
    cfg = _small_cfg(epochs_adam=0, epochs_refine=1, estimate_beta=True, beta=2500.0)
    report = TrainerService.train_map(ds, tiny_model, cfg)
    assert report.beta == 2500.0
    assert report.beta_estimated == pytest.approx(2500.0, rel=0.3)


def test_train_rejects_short_dataset(tiny_model):
    ds = Dataset(u=np.zeros(20), y=np.zeros(20), fs=1.0, sigma_e=0.0)
    with pytest.raises(ConfigError):
        TrainerService.train_map(ds, tiny_model, _small_cfg())
