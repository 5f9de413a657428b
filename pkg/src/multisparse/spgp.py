"""Sparse pseudo-input GP (FITC).

The covariance of the targets is ``Q_nn + diag(Lambda) + sn2 I`` with
``Q_nn = K_nm K_m^-1 K_mn`` and ``Lambda = diag(K_nn - Q_nn)``. Everything is
evaluated in O(n m^2) through the factorizations

    K_m = L L^T,   V = L^-1 K_mn,   A = I + V G^-1 V^T = La La^T,

where ``G = diag(Lambda + sn2)``. The pseudo covariance ``Q_m = K_m + K_mn G^-1 K_nm``
equals ``L A L^T``.

The predictive mean is ``k_m*^T Q_m^-1 K_mn G^-1 y``; the ``K_mn`` factor is
required for the shapes to agree.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from multisparse._optim import OptConfig, hyper_bounds, minimize_restarts
from multisparse.errors import ContractError, DegeneratePseudoSet, IllConditionedKernel
from multisparse.gp import LOG_2PI, Dataset, Prediction
from multisparse.kernel import JITTER, Hyperparameters, cov_matrix, default_hyper


def _tri(L, B, trans=False):
    return solve_triangular(L, B, lower=True, trans="T" if trans else "N", check_finite=False)


def _factor_pseudo(Z, h):
    Kmm = cov_matrix(Z, Z, h)
    Kmm[np.diag_indices_from(Kmm)] += JITTER * h.signal_variance
    try:
        return Kmm, cholesky(Kmm, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePseudoSet(f"pseudo-input covariance is singular under {h!r}", h) from exc


def _coincidences(X, Z):
    """Pairs ``(i, j)`` where training row ``i`` is pseudo-input ``j``.

    Repeated rows are matched in order, so ``Z = X`` pairs every row with itself.
    """
    slots = {}
    for j, z in enumerate(Z):
        slots.setdefault(z.tobytes(), []).append(j)
    if not slots:
        return np.zeros(0, int), np.zeros(0, int)
    used = {}
    rows, cols = [], []
    for i, x in enumerate(X):
        key = x.tobytes()
        js = slots.get(key)
        if js is not None:
            k = used.get(key, 0)
            if k < len(js):
                rows.append(i)
                cols.append(js[k])
                used[key] = k + 1
    return np.array(rows, int), np.array(cols, int)


def _fitc_terms(X, Z, h):
    # The jitter acts as a white-noise kernel term: it sits on the K_m diagonal,
    # on K_nm wherever a training input is a pseudo-input, and on k(x, x).
    # With Z = X this makes the FITC covariance the exact (jittered) GP covariance.
    eps = JITTER * h.signal_variance
    Kmm, L = _factor_pseudo(Z, h)
    Knm = cov_matrix(X, Z, h)
    Knm[_coincidences(X, Z)] += eps
    V = _tri(L, Knm.T)
    lam_raw = h.signal_variance + eps - np.sum(V ** 2, axis=0)
    lam = np.maximum(lam_raw, 0.0)
    g = lam + h.noise_variance
    Vs = V / np.sqrt(g)
    A = Vs @ Vs.T
    A[np.diag_indices_from(A)] += 1.0
    try:
        La = cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedKernel(f"FITC inner factorization failed for {h!r}", h) from exc
    return Kmm, Knm, L, V, lam_raw, lam, g, La


def spgp_nlml(data, pseudo, h, grad=True):
    """FITC negative log marginal likelihood.

    Returns ``(value, grad_log_hyper, grad_pseudo)``; the gradients are ``None``
    when ``grad`` is false.
    """
    X, y = data.inputs, data.targets
    Z = np.atleast_2d(np.asarray(pseudo, dtype=float))
    if Z.shape[1] != data.d:
        raise ContractError(f"pseudo-inputs have dimension {Z.shape[1]}, data {data.d}")
    n, m = X.shape[0], Z.shape[0]
    if m > n:
        raise ContractError(f"m={m} pseudo-inputs exceed n={n} points")
    ls = h.scales_for(data.d)
    sn2, sf2 = h.noise_variance, h.signal_variance
    Kmm, Knm, L, V, lam_raw, lam, g, La = _fitc_terms(X, Z, h)

    yg = y / g
    gam = _tri(La, V @ yg)
    logdet = np.sum(np.log(g)) + 2.0 * np.sum(np.log(np.diag(La)))
    value = 0.5 * (y @ yg - gam @ gam) + 0.5 * logdet + 0.5 * n * LOG_2PI
    if not grad:
        return value, None, None

    # S = C^-1 - alpha alpha^T is never formed; only its products with B and its diagonal.
    U = _tri(La, V / g)
    alpha = yg - U.T @ gam
    s = 1.0 / g - np.sum(U ** 2, axis=0) - alpha ** 2
    s_lam = np.where(lam_raw > 0, s, 0.0)
    B = _tri(L, V, trans=True)
    BS = B / g - (B @ U.T) @ U
    Ba = B @ alpha
    BS -= np.outer(Ba, alpha)
    BSB = BS @ B.T
    Gnm = 2.0 * BS.T - 2.0 * s_lam[:, None] * B.T
    Gmm = -BSB + (B * s_lam) @ B.T
    Gmm = 0.5 * (Gmm + Gmm.T)

    P = Gnm * Knm
    R = Gmm * Kmm
    g_sf = 0.5 * (np.sum(P) + np.sum(R) + sf2 * (1.0 + JITTER) * np.sum(s_lam))
    g_sn = 0.5 * sn2 * np.sum(s)

    PX = P.T @ X
    cP, rP = P.sum(axis=0), P.sum(axis=1)
    RZ = R @ Z
    rR = R.sum(axis=1)
    l2 = ls ** 2
    per_dim = (rP @ X ** 2 - 2.0 * np.sum(PX * Z, axis=0) + cP @ Z ** 2
               + 2.0 * (rR @ Z ** 2 - np.sum(Z * RZ, axis=0))) / l2
    per_dim *= 0.5
    g_ls = np.array([per_dim.sum()]) if h.isotropic else per_dim
    g_Z = 0.5 * ((PX - cP[:, None] * Z) + 2.0 * (RZ - rR[:, None] * Z)) / l2
    return value, np.concatenate([[g_sf, g_sn], g_ls]), g_Z


@dataclass(frozen=True)
class TrainedSPGP:
    """Fitted FITC model.

    ``chol_m`` factors ``K_m`` (with jitter); ``chol_m @ chol_a`` factors ``Q_m``.
    ``weights`` is the cached length-m vector so that a mean costs one kernel row.
    """

    data: Dataset
    pseudo: np.ndarray
    hyper: Hyperparameters
    chol_m: np.ndarray
    chol_a: np.ndarray
    lam: np.ndarray
    weights: np.ndarray
    y_mean: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    @property
    def m(self):
        return self.pseudo.shape[0]

    def predict_mean(self, X):
        return cov_matrix(np.atleast_2d(X), self.pseudo, self.hyper) @ self.weights + self.y_mean

    def predict(self, X):
        return spgp_predict_batch(self, X)


def _solve_weights(X, y, Z, h):
    _, _, L, V, _, lam, g, La = _fitc_terms(X, Z, h)
    gam = _tri(La, V @ (y / g))
    w = _tri(L, _tri(La, gam, trans=True), trans=True)
    return L, La, lam, w


def spgp_condition(data, pseudo, h, center=True, info=None):
    """Cache the FITC posterior for fixed pseudo-inputs and hyperparameters."""
    Z = np.array(pseudo, dtype=float, ndmin=2)
    y_mean = float(np.mean(data.targets)) if center else 0.0
    L, La, lam, w = _solve_weights(data.inputs, data.targets - y_mean, Z, h)
    return TrainedSPGP(data, Z, h, L, La, lam, w, y_mean, dict(info or {}))


def spgp_fit(data, m, init=None, opt_cfg=None, optimize_pseudo=True, pseudo_init=None,
             ard=True):
    """Jointly optimize hyperparameters and pseudo-input locations.

    Initial pseudo-inputs are a seeded uniform random subset of the training
    inputs (kept in data order) unless ``pseudo_init`` is given.
    """
    cfg = opt_cfg or OptConfig()
    n, d = data.n, data.d
    if not 1 <= m <= n:
        raise ContractError(f"need 1 <= m <= n, got m={m}, n={n}")
    if pseudo_init is None:
        idx = np.sort(np.random.default_rng(cfg.seed).choice(n, size=m, replace=False))
        Z0 = data.inputs[idx].copy()
    else:
        Z0 = np.array(pseudo_init, dtype=float, ndmin=2)
        if Z0.shape != (m, d):
            raise ContractError(f"pseudo_init shape {Z0.shape} != {(m, d)}")
    y_mean = float(np.mean(data.targets)) if cfg.center else 0.0
    centered = Dataset(data.inputs, data.targets - y_mean)
    h0 = init or default_hyper(data.inputs, centered.targets, ard=ard)
    h0.scales_for(d)
    theta0 = h0.to_log()
    nh = theta0.size

    if optimize_pseudo:
        def objective(x):
            f, gh, gz = spgp_nlml(centered, x[nh:].reshape(m, d), Hyperparameters.from_log(x[:nh]))
            return f, np.concatenate([gh, gz.ravel()])

        x0 = np.concatenate([theta0, Z0.ravel()])
        bounds = hyper_bounds(nh - 2, cfg) + [(None, None)] * (m * d)
    else:
        def objective(x):
            f, gh, _ = spgp_nlml(centered, Z0, Hyperparameters.from_log(x))
            return f, gh

        x0 = theta0
        bounds = hyper_bounds(nh - 2, cfg)

    nlml0 = objective(x0)[0] if cfg.max_iter > 0 else None
    x, f, info = minimize_restarts(objective, x0, bounds, cfg, nh)
    info.update(nlml_init=nlml0, nlml=f)
    Z = x[nh:].reshape(m, d) if optimize_pseudo else Z0
    return spgp_condition(data, Z, Hyperparameters.from_log(x[:nh]), center=cfg.center, info=info)


def spgp_predict_batch(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.data.d:
        raise ContractError(f"query dimension {X.shape[1]} != {model.data.d}")
    Ks = cov_matrix(model.pseudo, X, model.hyper)
    mean = Ks.T @ model.weights + model.y_mean
    V1 = _tri(model.chol_m, Ks)
    V2 = _tri(model.chol_a, V1)
    h = model.hyper
    var = h.signal_variance - np.sum(V1 ** 2, axis=0) + np.sum(V2 ** 2, axis=0) + h.noise_variance
    return mean, np.maximum(var, h.noise_variance)


def spgp_predict(model, x_star):
    m, v = spgp_predict_batch(model, np.atleast_1d(x_star)[None, :])
    return Prediction(float(m[0]), float(v[0]))


def spgp_predict_uncached(model, x_star):
    """Mean prediction that rebuilds the O(n m^2) factorizations first."""
    d = model.data
    w = _solve_weights(d.inputs, d.targets - model.y_mean, model.pseudo, model.hyper)[3]
    x = np.atleast_1d(np.asarray(x_star, dtype=float))[None, :]
    return float(cov_matrix(x, model.pseudo, model.hyper)[0] @ w + model.y_mean)
