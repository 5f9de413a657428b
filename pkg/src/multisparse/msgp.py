"""Multi-sparse GP: per-cluster FITC models blended over the N nearest clusters.

Each cluster keeps its own hyperparameters and pseudo-inputs. A query is
scored against every cluster center with that cluster's own length-scales,
the N best are kept, and their sparse means are averaged with the kernel
weights.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from multisparse._optim import OptConfig
from multisparse.cluster import WeightedPrediction, blend, nearest_models, partition
from multisparse.errors import ContractError, IllConditionedKernel, OptimizationFailed
from multisparse.kernel import default_hyper
from multisparse.spgp import spgp_condition, spgp_fit, spgp_predict_batch, spgp_predict_uncached

log = logging.getLogger(__name__)

MSGPPrediction = WeightedPrediction


@dataclass(frozen=True)
class TrainedMSGP:
    partition: object
    per_model: list
    neighbor_count: int = 5
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        # padded stacks for the vectorized mean path; zero weights cancel padding
        d = self.per_model[0].data.d
        M = len(self.per_model)
        umax = max(s.m for s in self.per_model)
        Z = np.zeros((M, umax, d))
        W = np.zeros((M, umax))
        for j, s in enumerate(self.per_model):
            Z[j, :s.m] = s.pseudo
            W[j, :s.m] = s.weights
        stacks = dict(
            centers=self.partition.centers,
            ls=np.stack([s.hyper.scales_for(d) for s in self.per_model]),
            sf2=np.array([s.hyper.signal_variance for s in self.per_model]),
            y_mean=np.array([s.y_mean for s in self.per_model]),
            Z=Z, W=W,
        )
        object.__setattr__(self, "_stacks", stacks)

    @property
    def M(self):
        return len(self.per_model)

    @property
    def d(self):
        return self.per_model[0].data.d

    def predict_mean(self, X, N=None):
        return msgp_predict_mean(self, X, N)


def _fit_cluster(sub, u, init, cfg, optimize_pseudo):
    if sub.n < 2:
        h = init or default_hyper(sub.inputs, sub.targets)
        return spgp_condition(sub, sub.inputs, h, center=cfg.center,
                              info={"flag": "too-few-points"})
    u = min(u, sub.n)
    try:
        return spgp_fit(sub, u, init=init, opt_cfg=cfg, optimize_pseudo=optimize_pseudo)
    except (OptimizationFailed, IllConditionedKernel) as exc:
        log.warning("cluster optimization failed (%s); keeping initial hyperparameters", exc)
        h = init or default_hyper(sub.inputs, sub.targets - np.mean(sub.targets))
        idx = np.sort(np.random.default_rng(cfg.seed).choice(sub.n, size=u, replace=False))
        return spgp_condition(sub, sub.inputs[idx], h, center=cfg.center,
                              info={"flag": "optimization-failed", "error": str(exc)})


def msgp_fit(data, p, u, strategy="random", seed=0, opt_cfg=None, optimize_pseudo=True,
             init=None, neighbor_count=5):
    """Partition the data and fit an independent FITC model on every cluster.

    Cluster ``i`` uses optimizer/pseudo-input seed ``opt_cfg.seed + i``.
    """
    cfg = opt_cfg or OptConfig()
    if not 1 <= u <= p:
        raise ContractError(f"need 1 <= u <= p, got u={u}, p={p}")
    part = partition(data.inputs, p, strategy, seed)
    per_model = []
    flags = {}
    for i, spec in enumerate(part.models):
        sub = data.subset(spec.member_indices)
        model = _fit_cluster(sub, u, init, cfg.replace(seed=cfg.seed + i), optimize_pseudo)
        if "flag" in model.info:
            flags[i] = model.info["flag"]
        per_model.append(model)
    info = {"flags": flags, "nlml": [m.info.get("nlml") for m in per_model],
            "nlml_init": [m.info.get("nlml_init") for m in per_model]}
    return TrainedMSGP(part, per_model, min(neighbor_count, part.M), info)


def _neighbors(model, x, N):
    N = model.neighbor_count if N is None else N
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != model.d:
        raise ContractError(f"query dimension {x.size} != {model.d}")
    st = model._stacks
    return x, nearest_models(x, st["centers"], st["ls"], N)


def msgp_predict(model, x_star, N=None):
    x, nb = _neighbors(model, x_star, N)
    means, variances = np.empty(len(nb)), np.empty(len(nb))
    for k, j in enumerate(nb.indices):
        mu, var = spgp_predict_batch(model.per_model[j], x[None, :])
        means[k], variances[k] = mu[0], var[0]
    return blend(nb, means, variances)


def msgp_batch_predict(model, X_star, N=None):
    return [msgp_predict(model, x, N) for x in np.atleast_2d(X_star)]


def msgp_predict_uncached(model, x_star, N=None):
    """Mean that refactorizes each selected cluster (no cached weight vectors)."""
    x, nb = _neighbors(model, x_star, N)
    means = np.array([spgp_predict_uncached(model.per_model[j], x) for j in nb.indices])
    return blend(nb, means, np.zeros_like(means)).mean


def msgp_predict_mean(model, X, N=None):
    """Vectorized weighted means using the cached per-cluster weight vectors.

    Same selection and weighting as :func:`msgp_predict`; costs O(M d + N u d)
    per query.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.d:
        raise ContractError(f"query dimension {X.shape[1]} != {model.d}")
    st = model._stacks
    M = model.M
    N = min(model.neighbor_count if N is None else N, M)
    logd = -0.5 * np.sum(((X[:, None, :] - st["centers"][None]) / st["ls"][None]) ** 2, axis=-1)
    if N < M:
        # stable descending order, ties to the lower index
        order = np.argsort(-logd, axis=1, kind="stable")[:, :N]
    else:
        order = np.argsort(-logd, axis=1, kind="stable")
    rows = np.arange(X.shape[0])[:, None]
    w = np.exp(logd[rows, order])
    Z = st["Z"][order]                         # (Q, N, u, d)
    ls = st["ls"][order][:, :, None, :]
    r2 = np.sum(((X[:, None, None, :] - Z) / ls) ** 2, axis=-1)
    k = st["sf2"][order][:, :, None] * np.exp(-0.5 * r2)
    mu = np.einsum("qnu,qnu->qn", k, st["W"][order]) + st["y_mean"][order]
    total = w.sum(axis=1)
    under = ~(total > 1e-300)
    if np.any(under):
        w[under] = 0.0
        w[under, 0] = 1.0
        total = w.sum(axis=1)
    return np.sum(w * mu, axis=1) / total
