"""Partitioning of a dataset into local models and Gaussian-kernel model ranking."""

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import KMeans

from multisparse.errors import ContractError

STRATEGIES = ("random", "kmeans")
# weights summing below this fall back to the single nearest model
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class LocalModelSpec:
    member_indices: np.ndarray
    center: np.ndarray
    size: int


@dataclass(frozen=True)
class Partition:
    models: list
    strategy: str
    M: int

    @property
    def centers(self):
        return np.stack([s.center for s in self.models])


def _spec(X, idx):
    idx = np.sort(np.asarray(idx, dtype=np.int64))
    return LocalModelSpec(idx, X[idx].mean(axis=0), int(idx.size))


def partition(X, target_size_p, strategy="random", seed=0):
    """Split the rows of ``X`` into ``ceil(n / p)`` disjoint local models.

    ``random`` shuffles and chunks into near-equal sizes; ``kmeans`` assigns
    by Lloyd's iterations (capped at 100). Member indices are stored sorted.
    ``p > n`` yields a single model.
    """
    X = np.atleast_2d(np.asarray(getattr(X, "inputs", X), dtype=float))
    n = X.shape[0]
    if target_size_p < 1:
        raise ContractError(f"target size must be >= 1, got {target_size_p}")
    if strategy not in STRATEGIES:
        raise ContractError(f"unknown partition strategy {strategy!r}")
    M = max(1, math.ceil(n / target_size_p))
    if M == 1:
        return Partition([_spec(X, np.arange(n))], strategy, 1)
    if strategy == "random":
        perm = np.random.default_rng(seed).permutation(n)
        chunks = np.array_split(perm, M)
    else:
        km = KMeans(n_clusters=M, n_init=1, max_iter=100, random_state=seed).fit(X)
        chunks = [np.flatnonzero(km.labels_ == j) for j in range(M)]
        chunks = [c for c in chunks if c.size]
    models = [_spec(X, c) for c in chunks]
    return Partition(models, strategy, len(models))


def log_model_distance(x_star, centers, length_scales):
    """Log of the Gaussian-kernel closeness for one query against many centers.

    ``length_scales`` has one row per center (ARD or a single column).
    """
    x = np.asarray(x_star, dtype=float)
    C = np.atleast_2d(centers)
    ls = np.asarray(length_scales, dtype=float)
    if ls.ndim == 1:
        ls = ls[:, None]
    return -0.5 * np.sum(((x - C) / ls) ** 2, axis=-1)


def model_distance(x_star, model_center, length_scale):
    """``exp(-|x* - c|^2 / (2 l l))``; with ARD the norm is scaled per dimension."""
    ls = np.atleast_1d(np.asarray(length_scale, dtype=float))
    if np.any(ls <= 0):
        raise ContractError("length-scale must be positive")
    diff = np.atleast_1d(np.asarray(x_star, dtype=float) - np.asarray(model_center, dtype=float))
    return float(np.exp(-0.5 * np.sum((diff / ls) ** 2)))


@dataclass(frozen=True)
class Neighbors:
    indices: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray
    clamped: bool = False

    def __iter__(self):
        return iter(zip(self.indices.tolist(), self.weights.tolist()))

    def __len__(self):
        return self.indices.size


def nearest_models(x_star, centers, per_model_length_scales, N):
    """Top-N models by descending weight; ties go to the lower model index."""
    C = getattr(centers, "centers", centers)
    C = np.atleast_2d(C)
    M = C.shape[0]
    if N < 1:
        raise ContractError(f"N must be >= 1, got {N}")
    clamped = N > M
    N = min(N, M)
    logd = log_model_distance(x_star, C, per_model_length_scales)
    order = np.lexsort((np.arange(M), -logd))[:N]
    return Neighbors(order, np.exp(logd[order]), logd[order], clamped)


@dataclass(frozen=True)
class WeightedPrediction:
    """Distance-weighted blend of per-model predictions.

    ``per_model`` holds ``(model index, mean, weight)`` triples. The variance
    is a diagnostic weighted average of per-model variances, not a posterior.
    """

    mean: float
    per_model: list
    variance_heuristic: float
    fallback: bool = False
    clamped: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def variance(self):
        return self.variance_heuristic


def blend(neighbors, means, variances):
    """Weighted mean over the selected models with the underflow fallback."""
    w = neighbors.weights
    total = w.sum()
    fallback = not total > UNDERFLOW
    if fallback:
        w = np.zeros_like(w)
        w[0] = 1.0
        total = 1.0
    mean = float(w @ means / total)
    var = float(w @ variances / total)
    per_model = [(int(i), float(mu), float(wi)) for i, mu, wi in zip(neighbors.indices, means, w)]
    return WeightedPrediction(mean, per_model, var, fallback, neighbors.clamped)
