"""Squared-exponential (Gaussian) kernel with ARD length-scales.

Hyperparameters are optimized in log-space. The packed log vector used by
every regressor is ``[log sf2, log sn2, log l_1, ..., log l_L]`` where ``L`` is
1 (isotropic) or ``d`` (ARD).
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from multisparse.errors import ContractError

# diagonal jitter, relative to the signal variance
JITTER = 1e-8


@dataclass(frozen=True)
class Hyperparameters:
    signal_variance: float
    noise_variance: float
    length_scales: np.ndarray

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float)).copy()
        ls.setflags(write=False)
        object.__setattr__(self, "length_scales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        if ls.ndim != 1 or ls.size == 0:
            raise ContractError("length_scales must be a non-empty vector")
        if not (self.signal_variance > 0 and self.noise_variance > 0 and np.all(ls > 0)):
            raise ContractError(f"hyperparameters must be strictly positive: {self}")

    @property
    def isotropic(self):
        return self.length_scales.size == 1

    def scales_for(self, d):
        """Length-scale vector broadcast to input dimension ``d``."""
        if self.isotropic:
            return np.full(d, self.length_scales[0])
        if self.length_scales.size != d:
            raise ContractError(
                f"{self.length_scales.size} length-scales for {d}-dimensional inputs")
        return self.length_scales

    def to_log(self):
        return np.concatenate([[np.log(self.signal_variance), np.log(self.noise_variance)],
                               np.log(self.length_scales)])

    @classmethod
    def from_log(cls, theta):
        theta = np.asarray(theta, dtype=float)
        return cls(np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2:]))

    def replace(self, **kw):
        fields = dict(signal_variance=self.signal_variance,
                      noise_variance=self.noise_variance,
                      length_scales=self.length_scales)
        fields.update(kw)
        return Hyperparameters(**fields)

    def __repr__(self):
        ls = np.array2string(self.length_scales, precision=4)
        return (f"Hyperparameters(signal_variance={self.signal_variance:.6g}, "
                f"noise_variance={self.noise_variance:.6g}, length_scales={ls})")


def default_hyper(X, y, ard=True):
    """Data-driven starting point: target variance, 10% noise, input spread."""
    X = np.atleast_2d(X)
    var = float(np.var(y)) if np.size(y) > 1 else 1.0
    if not np.isfinite(var) or var <= 1e-12:
        var = 1.0
    spread = np.std(X, axis=0) if X.shape[0] > 1 else np.ones(X.shape[1])
    spread = np.where(spread > 1e-8, spread, 1.0)
    ls = spread if ard else np.array([float(np.mean(spread))])
    return Hyperparameters(var, 0.1 * var, ls)


def _as_points(X, d=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if d is None or X.size == d else X[:, None]
    if X.ndim != 2:
        raise ContractError(f"expected a matrix of input points, got shape {X.shape}")
    return X


def _check_dims(X, X2, h):
    if X.shape[1] != X2.shape[1]:
        raise ContractError(f"input dimension mismatch: {X.shape[1]} vs {X2.shape[1]}")
    return h.scales_for(X.shape[1])


def scaled_sqdist(X, X2, ls):
    """Squared distances after dividing each coordinate by its length-scale."""
    return cdist(X / ls, X2 / ls, "sqeuclidean")


def cov_matrix(X, X2, h):
    """Covariance between two point sets, shape ``(len(X), len(X2))``."""
    X = _as_points(X)
    X2 = _as_points(X2, X.shape[1])
    if X.shape[0] == 0 or X2.shape[0] == 0:
        return np.zeros((X.shape[0], X2.shape[0]))
    ls = _check_dims(X, X2, h)
    D = scaled_sqdist(X, X2, ls)
    D *= -0.5
    np.exp(D, out=D)
    D *= h.signal_variance
    return D


def se_kernel(x, x2, h):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.ndim != 1:
        raise ContractError(f"point shapes differ: {x.shape} vs {x2.shape}")
    ls = h.scales_for(x.size)
    r2 = np.sum(((x - x2) / ls) ** 2)
    return h.signal_variance * float(np.exp(-0.5 * r2))


def se_kernel_grad(x, x2, h):
    """Gradient of ``k(x, x2)`` w.r.t. the packed log-hyperparameters and ``x2``.

    Returns ``(d_log_theta, d_x2)``. The noise entry is zero since the noise
    only enters covariances on the diagonal of training matrices.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    k = se_kernel(x, x2, h)
    ls = h.scales_for(x.size)
    diff = x - x2
    per_dim = k * diff ** 2 / ls ** 2
    d_ls = np.array([per_dim.sum()]) if h.isotropic else per_dim
    d_theta = np.concatenate([[k, 0.0], d_ls])
    d_x2 = k * diff / ls ** 2
    return d_theta, d_x2
