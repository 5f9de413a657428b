"""Exact GP regression with cached Cholesky factor and alpha vector."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from multisparse._optim import OptConfig, hyper_bounds, minimize_restarts
from multisparse.errors import ContractError, IllConditionedKernel
from multisparse.kernel import JITTER, Hyperparameters, cov_matrix, default_hyper

__all__ = ["Dataset", "Prediction", "TrainedGP", "OptConfig", "gp_nlml", "gp_fit",
           "gp_condition", "gp_predict", "gp_predict_batch", "gp_predict_uncached"]

LOG_2PI = np.log(2 * np.pi)


@dataclass(frozen=True)
class Dataset:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.targets, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.size or X.shape[1] < 1:
            raise ContractError(f"inputs {X.shape} and targets {y.shape} do not match")
        if y.size < 1:
            raise ContractError("dataset must contain at least one point")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ContractError("dataset contains non-finite values")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "targets", y)

    @property
    def n(self):
        return self.targets.size

    @property
    def d(self):
        return self.inputs.shape[1]

    def subset(self, idx):
        return Dataset(self.inputs[idx], self.targets[idx])


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


def factor_noisy(K, h):
    """Lower Cholesky factor of ``K + (sn2 + jitter) I``; ``K`` is overwritten."""
    K[np.diag_indices_from(K)] += h.noise_variance + JITTER * h.signal_variance
    try:
        return cholesky(K, lower=True, overwrite_a=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedKernel(f"Cholesky failed for {h!r}", h) from exc


def gp_nlml(data, h, grad=True):
    """Negative log marginal likelihood of the targets as given (no centering).

    Returns ``(value, grad)`` where the gradient is taken w.r.t. the packed
    log-hyperparameters (see :mod:`multisparse.kernel`).
    """
    X, y = data.inputs, data.targets
    n = y.size
    ls = h.scales_for(data.d)
    K = cov_matrix(X, X, h)
    L = factor_noisy(K.copy(), h)
    alpha = cho_solve((L, True), y, check_finite=False)
    value = 0.5 * y @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * LOG_2PI
    if not grad:
        return value, None

    W = cho_solve((L, True), np.eye(n), check_finite=False)
    W -= np.outer(alpha, alpha)
    sf2, sn2 = h.signal_variance, h.noise_variance
    g_sf = 0.5 * (np.sum(W * K) + JITTER * sf2 * np.trace(W))
    g_sn = 0.5 * sn2 * np.trace(W)
    M = W * K
    # sum_ij M_ij (x_ik - x_jk)^2 = 2 (rowsum(M) . x_k^2 - x_k' M x_k) for symmetric M
    per_dim = (M.sum(axis=1) @ X ** 2 - np.sum(X * (M @ X), axis=0)) / ls ** 2
    g_ls = np.array([per_dim.sum()]) if h.isotropic else per_dim
    return value, np.concatenate([[g_sf, g_sn], g_ls])


@dataclass(frozen=True)
class TrainedGP:
    data: Dataset
    hyper: Hyperparameters
    chol_factor: np.ndarray
    alpha: np.ndarray
    y_mean: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    def predict_mean(self, X):
        Ks = cov_matrix(np.atleast_2d(X), self.data.inputs, self.hyper)
        return Ks @ self.alpha + self.y_mean

    def predict(self, X):
        return gp_predict_batch(self, X)


def gp_condition(data, h, center=True, info=None):
    """Build the cached posterior for fixed hyperparameters."""
    y_mean = float(np.mean(data.targets)) if center else 0.0
    L = factor_noisy(cov_matrix(data.inputs, data.inputs, h), h)
    alpha = cho_solve((L, True), data.targets - y_mean, check_finite=False)
    return TrainedGP(data, h, L, alpha, y_mean, dict(info or {}))


def gp_fit(data, init=None, opt_cfg=None, ard=True):
    """Optimize hyperparameters by NLML and cache the posterior."""
    cfg = opt_cfg or OptConfig()
    y_mean = float(np.mean(data.targets)) if cfg.center else 0.0
    centered = Dataset(data.inputs, data.targets - y_mean)
    h0 = init or default_hyper(data.inputs, centered.targets, ard=ard)
    h0.scales_for(data.d)

    def objective(theta):
        return gp_nlml(centered, Hyperparameters.from_log(theta))

    theta0 = h0.to_log()
    nlml0 = objective(theta0)[0] if cfg.max_iter > 0 else None
    bounds = hyper_bounds(theta0.size - 2, cfg)
    theta, f, info = minimize_restarts(objective, theta0, bounds, cfg, theta0.size)
    info.update(nlml_init=nlml0, nlml=f)
    return gp_condition(data, Hyperparameters.from_log(theta), center=cfg.center, info=info)


def gp_predict_batch(model, X):
    """Posterior means and latent variances at each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.data.d:
        raise ContractError(f"query dimension {X.shape[1]} != {model.data.d}")
    Ks = cov_matrix(X, model.data.inputs, model.hyper)
    mean = Ks @ model.alpha + model.y_mean
    V = solve_triangular(model.chol_factor, Ks.T, lower=True, check_finite=False)
    var = model.hyper.signal_variance - np.sum(V ** 2, axis=0)
    return mean, np.maximum(var, 0.0)


def gp_predict(model, x_star):
    m, v = gp_predict_batch(model, np.atleast_1d(x_star)[None, :])
    return Prediction(float(m[0]), float(v[0]))


def gp_predict_uncached(model, x_star):
    """Prediction that re-solves the full linear system (no alpha reuse)."""
    data, h = model.data, model.hyper
    x = np.atleast_1d(np.asarray(x_star, dtype=float))[None, :]
    L = factor_noisy(cov_matrix(data.inputs, data.inputs, h), h)
    ks = cov_matrix(data.inputs, x, h)[:, 0]
    sol = cho_solve((L, True), np.column_stack([data.targets - model.y_mean, ks]),
                    check_finite=False)
    mean = ks @ sol[:, 0] + model.y_mean
    var = h.signal_variance - ks @ sol[:, 1]
    return Prediction(float(mean), float(max(var, 0.0)))
