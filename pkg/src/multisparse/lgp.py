"""Local GP baseline: one exact GP per cluster, shared global hyperparameters."""

from dataclasses import dataclass, field

import numpy as np

from multisparse._optim import OptConfig
from multisparse.cluster import blend, nearest_models, partition
from multisparse.errors import ContractError
from multisparse.gp import gp_condition, gp_fit, gp_predict_batch, gp_predict_uncached


@dataclass(frozen=True)
class TrainedLGP:
    partition: object
    per_model: list
    global_hyper: object
    neighbor_count: int = 5
    info: dict = field(default_factory=dict, compare=False)

    @property
    def M(self):
        return len(self.per_model)

    def predict_mean(self, X):
        X = np.atleast_2d(X)
        return np.array([lgp_predict(self, x).mean for x in X])


def lgp_fit(data, p, strategy="random", seed=0, hyper_subsample_size=None, init=None,
            opt_cfg=None, neighbor_count=5):
    """Fit global hyperparameters on a random subsample, then condition each cluster.

    The subsample defaults to ``min(n, 1000)`` points; when it covers the whole
    dataset the rows are used in their original order.
    """
    cfg = opt_cfg or OptConfig()
    n = data.n
    s = min(n, 1000) if hyper_subsample_size is None else int(hyper_subsample_size)
    if not 1 <= s <= n:
        raise ContractError(f"hyper_subsample_size must lie in [1, {n}], got {s}")
    if s == n:
        sub = data
    else:
        idx = np.sort(np.random.default_rng(seed).choice(n, size=s, replace=False))
        sub = data.subset(idx)
    global_model = gp_fit(sub, init=init, opt_cfg=cfg)
    h = global_model.hyper
    part = partition(data.inputs, p, strategy, seed)
    per_model = [gp_condition(data.subset(spec.member_indices), h, center=cfg.center)
                 for spec in part.models]
    info = {"global": global_model.info, "subsample": s}
    return TrainedLGP(part, per_model, h, min(neighbor_count, part.M), info)


def _neighbors(model, x, N):
    N = model.neighbor_count if N is None else N
    ls = np.tile(model.global_hyper.length_scales, (model.M, 1))
    return nearest_models(x, model.partition.centers, ls, N)


def lgp_predict(model, x_star, N=None):
    """Weighted average of the N nearest cluster GPs (variance is heuristic)."""
    x = np.atleast_1d(np.asarray(x_star, dtype=float))
    nb = _neighbors(model, x, N)
    means, variances = np.empty(len(nb)), np.empty(len(nb))
    for k, j in enumerate(nb.indices):
        mu, var = gp_predict_batch(model.per_model[j], x[None, :])
        means[k], variances[k] = mu[0], var[0]
    return blend(nb, means, variances)


def lgp_predict_uncached(model, x_star, N=None):
    x = np.atleast_1d(np.asarray(x_star, dtype=float))
    nb = _neighbors(model, x, N)
    preds = [gp_predict_uncached(model.per_model[j], x) for j in nb.indices]
    return blend(nb, np.array([p.mean for p in preds]), np.array([p.variance for p in preds]))
