import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisparse import Dataset, Hyperparameters, OptConfig, gp_fit, gp_nlml, gp_predict
from multisparse.errors import ContractError, IllConditionedKernel
from multisparse.gp import LOG_2PI, factor_noisy, gp_condition, gp_predict_batch, gp_predict_uncached
from multisparse.kernel import JITTER, cov_matrix

from conftest import central_diff, random_hyper, rel_err, sine_data


def dense_nlml(data, h):
    K = cov_matrix(data.inputs, data.inputs, h)
    C = K + (h.noise_variance + JITTER * h.signal_variance) * np.eye(data.n)
    _, logdet = np.linalg.slogdet(C)
    y = data.targets
    return 0.5 * y @ np.linalg.inv(C) @ y + 0.5 * logdet + 0.5 * data.n * LOG_2PI


def test_dataset_validation():
    with pytest.raises(ContractError):
        Dataset(np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ContractError):
        Dataset(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ContractError):
        Dataset([[np.nan]], [1.0])
    assert Dataset([1.0, 2.0], [0.0, 1.0]).d == 1


def test_nlml_single_point():
    h = Hyperparameters(1.3, 0.2, [0.9])
    v, _ = gp_nlml(Dataset([[0.5]], [0.0]), h)
    expected = 0.5 * LOG_2PI + 0.5 * np.log(1.3 + 0.2 + JITTER * 1.3)
    assert v == pytest.approx(expected, rel=1e-12)


def test_nlml_zero_targets_is_logdet_only(rng):
    data = sine_data(12, 2)
    zero = Dataset(data.inputs, np.zeros(12))
    h = random_hyper(rng, 2)
    K = cov_matrix(data.inputs, data.inputs, h)
    C = K + (h.noise_variance + JITTER * h.signal_variance) * np.eye(12)
    v, _ = gp_nlml(zero, h)
    assert v == pytest.approx(0.5 * np.linalg.slogdet(C)[1] + 6 * LOG_2PI, rel=1e-10)


def test_nlml_matches_dense_inverse(rng):
    for n in (5, 40, 100):
        data = sine_data(n, 3, seed=n)
        h = random_hyper(rng, 3)
        assert gp_nlml(data, h)[0] == pytest.approx(dense_nlml(data, h), rel=1e-6)


@pytest.mark.parametrize("ard", [True, False])
def test_nlml_gradient(rng, ard):
    data = sine_data(15, 2, seed=3)
    h = random_hyper(rng, 2 if ard else 1)
    _, g = gp_nlml(data, h)
    num = central_diff(lambda t: gp_nlml(data, Hyperparameters.from_log(t), grad=False)[0],
                       h.to_log())
    assert rel_err(g, num) < 1e-5


def test_single_point_prediction():
    h = Hyperparameters(2.0, 0.5, [1.0])
    model = gp_condition(Dataset([[0.3]], [1.7]), h, center=False)
    p = gp_predict(model, [0.3])
    assert p.mean == pytest.approx(2.0 * 1.7 / (2.0 + 0.5 + JITTER * 2.0), rel=1e-12)


def test_far_query_reverts_to_prior():
    data = sine_data(30, 2)
    h = Hyperparameters(1.5, 0.1, [0.5, 0.5])
    model = gp_condition(data, h, center=False)
    p = gp_predict(model, [100.0, -100.0])
    assert abs(p.mean) < 1e-6
    assert p.variance == pytest.approx(1.5, abs=1e-6)


def test_noise_free_interpolation():
    data = sine_data(10, 1, noise=0.0)
    h = Hyperparameters(1.0, 1e-12, [1.0])
    model = gp_condition(data, h, center=False)
    mu, _ = gp_predict_batch(model, data.inputs)
    np.testing.assert_allclose(mu, data.targets, atol=1e-4)


def test_cached_factor_and_alpha(rng):
    data = sine_data(50, 2)
    h = random_hyper(rng, 2)
    model = gp_condition(data, h)
    C = (cov_matrix(data.inputs, data.inputs, h)
         + (h.noise_variance + JITTER * h.signal_variance) * np.eye(50))
    L = model.chol_factor
    assert np.linalg.norm(L @ L.T - C) / np.linalg.norm(C) < 1e-6
    resid = C @ model.alpha - (data.targets - model.y_mean)
    assert np.max(np.abs(resid)) < 1e-8


def test_cached_and_uncached_agree(rng):
    data = sine_data(60, 3)
    model = gp_condition(data, random_hyper(rng, 3))
    for x in rng.uniform(-3, 3, size=(10, 3)):
        a, b = gp_predict(model, x), gp_predict_uncached(model, x)
        assert a.mean == pytest.approx(b.mean, abs=1e-10)
        assert a.variance == pytest.approx(b.variance, abs=1e-10)


def test_variance_bounded_by_prior(rng):
    data = sine_data(40, 2)
    h = random_hyper(rng, 2)
    model = gp_condition(data, h)
    _, var = gp_predict_batch(model, rng.uniform(-4, 4, size=(200, 2)))
    assert np.all(var >= 0) and np.all(var <= h.signal_variance + 1e-8)


def test_mean_is_linear_in_targets(rng):
    data = sine_data(25, 2)
    y2 = rng.standard_normal(25)
    h = random_hyper(rng, 2)
    Xq = rng.uniform(-3, 3, size=(15, 2))

    def mean(y):
        return gp_predict_batch(gp_condition(Dataset(data.inputs, y), h, center=False), Xq)[0]

    a, b = 1.7, -0.4
    np.testing.assert_allclose(mean(a * data.targets + b * y2),
                               a * mean(data.targets) + b * mean(y2), atol=1e-8)


def test_fit_recovers_noise_level():
    rng = np.random.default_rng(5)
    X = np.sort(rng.uniform(-5, 5, size=(200, 1)), axis=0)
    true = Hyperparameters(1.0, 0.04, [1.0])
    K = cov_matrix(X, X, true) + 0.04 * np.eye(200)
    y = np.linalg.cholesky(K) @ rng.standard_normal(200)
    model = gp_fit(Dataset(X, y), opt_cfg=OptConfig(seed=0))
    assert 0.02 < model.hyper.noise_variance < 0.08
    assert model.info["nlml"] <= model.info["nlml_init"]


def test_fit_from_optimum_stays_put():
    data = sine_data(60, 1)
    first = gp_fit(data, opt_cfg=OptConfig(restarts=0, gtol=1e-9))
    again = gp_fit(data, init=first.hyper, opt_cfg=OptConfig(restarts=0, gtol=1e-5))
    assert again.info["nit"] <= 1
    np.testing.assert_allclose(again.hyper.to_log(), first.hyper.to_log(), atol=1e-6)


def test_constant_targets_shrink_signal():
    rng = np.random.default_rng(2)
    X = rng.uniform(-2, 2, size=(40, 2))
    cfg = OptConfig(var_floor=1e-6, seed=0)
    model = gp_fit(Dataset(X, np.full(40, 3.0)), opt_cfg=cfg)
    assert model.hyper.signal_variance < 1e-2 * cfg.var_floor
    assert gp_predict(model, [0.1, 0.2]).mean == pytest.approx(3.0)


def test_failed_factorization_names_hyperparameters():
    h = Hyperparameters(1.0, 0.1, [1.0])
    with pytest.raises(IllConditionedKernel) as err:
        factor_noisy(-10.0 * np.eye(3), h)
    assert err.value.hyper is h
    assert "1" in str(err.value)


def test_query_dimension_checked():
    model = gp_condition(sine_data(10, 2), Hyperparameters(1.0, 0.1, [1.0]))
    with pytest.raises(ContractError):
        gp_predict(model, [0.0, 0.0, 0.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_predictions_invariant_to_row_order(n, seed):
    data = sine_data(n, 2, seed=seed)
    perm = np.random.default_rng(seed).permutation(n)
    h = Hyperparameters(1.0, 0.1, [1.0, 0.7])
    Xq = np.random.default_rng(seed + 1).uniform(-3, 3, size=(5, 2))
    a = gp_predict_batch(gp_condition(data, h), Xq)
    b = gp_predict_batch(gp_condition(data.subset(perm), h), Xq)
    np.testing.assert_allclose(a[0], b[0], atol=1e-8)
    np.testing.assert_allclose(a[1], b[1], atol=1e-8)
