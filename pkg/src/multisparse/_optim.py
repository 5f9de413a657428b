"""Bounded quasi-Newton minimization with random restarts (shared by gp/spgp)."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from multisparse.errors import IllConditionedKernel, OptimizationFailed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptConfig:
    max_iter: int = 200
    gtol: float = 1e-5
    restarts: int = 3
    seed: int = 0
    # lower bound on the noise variance; signal variance may go 1e4 lower
    var_floor: float = 1e-8
    center: bool = True
    restart_scale: float = 1.0

    def replace(self, **kw):
        d = dict(self.__dict__)
        d.update(kw)
        return OptConfig(**d)


def hyper_bounds(n_ls, cfg):
    lo_f, lo_n = np.log(cfg.var_floor * 1e-4), np.log(cfg.var_floor)
    hi_var = np.log(1e8)
    return ([(lo_f, hi_var), (lo_n, hi_var)]
            + [(np.log(1e-4), np.log(1e6))] * n_ls)


class _Tracked:
    """Objective wrapper remembering the best finite evaluation."""

    def __init__(self, fun):
        self.fun = fun
        self.best_x = None
        self.best_f = np.inf
        self.last_finite = None
        self.n_eval = 0

    def __call__(self, x):
        self.n_eval += 1
        try:
            f, g = self.fun(x)
        except IllConditionedKernel:
            return np.inf, np.zeros_like(x)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            return np.inf, np.zeros_like(x)
        self.last_finite = x.copy()
        if f < self.best_f:
            self.best_f, self.best_x = f, x.copy()
        return f, g


def minimize_restarts(fun, x0, bounds, cfg, n_perturb):
    """Minimize ``fun`` (returning value and gradient) from ``x0`` plus restarts.

    Restarts perturb the first ``n_perturb`` coordinates (the log-hyperparameters)
    with Gaussian noise of scale ``cfg.restart_scale``. Returns
    ``(x, f, info)`` for the best finite run.
    """
    x0 = np.asarray(x0, dtype=float)
    lo = np.array([b[0] if b[0] is not None else -np.inf for b in bounds])
    hi = np.array([b[1] if b[1] is not None else np.inf for b in bounds])
    x0 = np.clip(x0, lo, hi)
    if cfg.max_iter <= 0:
        f, _ = fun(x0)
        return x0, f, {"nit": 0, "restarts": 0, "message": "optimization disabled"}

    rng = np.random.default_rng(cfg.seed)
    best = None
    last_iterate = None
    for r in range(cfg.restarts + 1):
        start = x0.copy()
        if r > 0:
            start[:n_perturb] += cfg.restart_scale * rng.standard_normal(n_perturb)
            start = np.clip(start, lo, hi)
        tracked = _Tracked(fun)
        res = minimize(tracked, start, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": cfg.max_iter, "gtol": cfg.gtol, "ftol": 1e-12})
        if tracked.last_finite is not None:
            last_iterate = tracked.last_finite
        if tracked.best_x is None:
            log.warning("restart %d produced no finite objective", r)
            continue
        x, f = (res.x, float(res.fun)) if np.isfinite(res.fun) else (tracked.best_x, tracked.best_f)
        log.debug("restart %d: f=%.6g nit=%d (%s)", r, f, res.nit, res.message)
        if best is None or f < best[1]:
            best = (x, f, {"nit": int(res.nit), "restarts": r, "message": str(res.message)})
    if best is None:
        raise OptimizationFailed("no finite objective value in any restart", last_iterate)
    return best
