"""Training-size sweep of per-query prediction latency for the four regressors.

Cached latency uses the stored weight vectors (a kernel row times a vector);
uncached latency rebuilds every factorization a query depends on. The exact GP
has no cheap uncached path, so at large ``n`` only a few repeats fit the
budget; the count actually used is recorded with each cell.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from multisparse._optim import OptConfig
from multisparse.gp import Dataset, gp_condition, gp_fit, gp_predict_uncached
from multisparse.lgp import lgp_fit, lgp_predict_uncached
from multisparse.msgp import msgp_fit, msgp_predict_uncached
from multisparse.spgp import spgp_condition, spgp_predict_uncached

log = logging.getLogger(__name__)

METHODS = ("gp", "spgp", "lgp", "msgp")

COMPLEXITY = {
    "gp": {"train": "O(n^3)", "predict_cached": "O(n)", "predict_uncached": "O(n^3)"},
    "spgp": {"train": "O(n m^2)", "predict_cached": "O(m)", "predict_uncached": "O(n m^2)"},
    "lgp": {"train": "O(n p^2)", "predict_cached": "O(M d + N p)",
            "predict_uncached": "O(M d + N p^3)"},
    "msgp": {"train": "O(n u^2)", "predict_cached": "O(M d + N u)",
             "predict_uncached": "O(M d + N p u^2)"},
}


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple = (3000, 6000, 12000)
    methods: tuple = METHODS
    p: int = 250
    u: int = 50
    N: int = 5
    spgp_ratio: float = 0.1
    n_queries: int = 1000
    uncached_budget_s: float = 20.0
    uncached_max_repeats: int = 50
    timeout_s: float = 300.0
    hyper_subsample: int = 1000
    cached: bool = True
    uncached: bool = True
    seed: int = 0
    opt: OptConfig = field(default_factory=lambda: OptConfig(max_iter=50, restarts=0))


@dataclass
class BenchCell:
    method: str
    n: int
    sizes: dict
    train_s: float = None
    cached_ms: float = None
    uncached_ms: float = None
    uncached_repeats: int = 0
    status: str = "ok"
    note: str = ""


@dataclass
class BenchReport:
    cells: list
    complexity: dict
    config: dict
    nmse: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True, default=_json_default)

    def table(self):
        lines = [f"{'method':6s} {'n':>6s} {'train_s':>9s} {'cached_ms':>10s} "
                 f"{'uncached_ms':>12s}  status"]
        for c in self.cells:
            lines.append(f"{c.method:6s} {c.n:6d} {_fmt(c.train_s, 9)} {_fmt(c.cached_ms, 10)} "
                         f"{_fmt(c.uncached_ms, 12)}  {c.status}")
        return "\n".join(lines)


def _fmt(x, w):
    return f"{x:{w}.4g}" if x is not None else " " * (w - 1) + "-"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def synthetic_dataset(n, d=9, seed=0, noise=0.05):
    """Smooth nonlinear target on a d-dim box, standing in for flight logs."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-3.0, 3.0, size=(n, d))
    w = rng.standard_normal(d) / np.sqrt(d)
    y = np.sin(X @ w) + 0.5 * np.cos(X[:, 0]) * np.tanh(X[:, 1]) + noise * rng.standard_normal(n)
    return Dataset(X, y)


def median_latency(fn, Q):
    times = np.empty(len(Q))
    for i, q in enumerate(Q):
        t = time.perf_counter()
        fn(q)
        times[i] = time.perf_counter() - t
    return float(np.median(times))


def uncached_latency(fn, Q, budget, max_repeats, timeout):
    """Median over as many queries as fit the budget (at least one).

    Returns ``(median, repeats)``, or ``(None, 1)`` if one query exceeds the timeout.
    """
    times = []
    start = time.perf_counter()
    for q in Q[:max_repeats]:
        t = time.perf_counter()
        fn(q)
        times.append(time.perf_counter() - t)
        if times[0] > timeout:
            return None, 1
        if time.perf_counter() - start > budget:
            break
    return float(np.median(times)), len(times)


class _Trainer:
    """Fits each method at one size; GP-type hyperparameters come from a subsample."""

    def __init__(self, cfg):
        self.cfg = cfg
        self._hyper = {}

    def global_hyper(self, data):
        key = data.n
        if key not in self._hyper:
            s = min(data.n, self.cfg.hyper_subsample)
            idx = np.sort(np.random.default_rng(self.cfg.seed).choice(data.n, s, replace=False))
            self._hyper[key] = gp_fit(data.subset(idx), opt_cfg=self.cfg.opt).hyper
        return self._hyper[key]

    def fit(self, method, data):
        cfg = self.cfg
        if method == "gp":
            return gp_condition(data, self.global_hyper(data)), {"n": data.n}
        if method == "spgp":
            m = max(1, int(round(cfg.spgp_ratio * data.n)))
            h = self.global_hyper(data)
            # pseudo-inputs are a random subset and hyperparameters come from the
            # subsample: optimizing 10% of 12k pseudo-inputs is far outside a desk budget
            idx = np.sort(np.random.default_rng(cfg.seed).choice(data.n, m, replace=False))
            model = spgp_condition(data, data.inputs[idx], h)
            return model, {"n": data.n, "m": m}
        if method == "lgp":
            model = lgp_fit(data, cfg.p, seed=cfg.seed, opt_cfg=cfg.opt, neighbor_count=cfg.N,
                            hyper_subsample_size=min(data.n, cfg.hyper_subsample))
            return model, {"n": data.n, "p": cfg.p, "M": model.M, "N": model.neighbor_count}
        if method == "msgp":
            model = msgp_fit(data, cfg.p, cfg.u, seed=cfg.seed, opt_cfg=cfg.opt,
                             neighbor_count=cfg.N)
            return model, {"n": data.n, "p": cfg.p, "u": cfg.u, "M": model.M,
                           "N": model.neighbor_count}
        raise ValueError(f"unknown method {method!r}")


UNCACHED = {
    "gp": gp_predict_uncached,
    "spgp": spgp_predict_uncached,
    "lgp": lgp_predict_uncached,
    "msgp": msgp_predict_uncached,
}


def run_bench(cfg=None, master=None):
    """Train and time every (method, size) cell.

    ``master`` is subsampled (first ``n`` rows of a seeded shuffle) for each
    size; a synthetic 9-d dataset is generated when it is omitted.
    """
    cfg = cfg or BenchConfig()
    sizes = tuple(int(s) for s in cfg.sizes)
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    if master is None:
        master = synthetic_dataset(max(sizes), seed=cfg.seed)
    if master.n < max(sizes):
        raise ValueError(f"master dataset has {master.n} rows, need {max(sizes)}")
    order = np.random.default_rng(cfg.seed).permutation(master.n)
    rng = np.random.default_rng(cfg.seed + 1)
    lo, hi = master.inputs.min(axis=0), master.inputs.max(axis=0)
    Q = rng.uniform(lo, hi, size=(cfg.n_queries, master.d))
    trainer = _Trainer(cfg)
    cells = []
    for n in sizes:
        data = master.subset(np.sort(order[:n]))
        for method in cfg.methods:
            cell = BenchCell(method, n, {})
            cells.append(cell)
            t = time.perf_counter()
            model, cell.sizes = trainer.fit(method, data)
            cell.train_s = time.perf_counter() - t
            if cell.train_s > cfg.timeout_s:
                cell.status, cell.note = "skipped", "training exceeded timeout"
                continue
            if cfg.cached:
                cell.cached_ms = 1e3 * median_latency(lambda q: model.predict_mean(q[None, :]), Q)
            if cfg.uncached:
                med, reps = uncached_latency(lambda q: UNCACHED[method](model, q), Q,
                                              cfg.uncached_budget_s, cfg.uncached_max_repeats,
                                              cfg.timeout_s)
                cell.uncached_repeats = reps
                if med is None:
                    cell.status, cell.note = "skipped", "uncached query exceeded timeout"
                else:
                    cell.uncached_ms = 1e3 * med
            log.info("%s n=%d train %.2fs cached %s ms uncached %s ms", method, n, cell.train_s,
                     cell.cached_ms, cell.uncached_ms)
    conf = asdict(cfg)
    return BenchReport(cells, {m: COMPLEXITY[m] for m in cfg.methods}, conf)


def cell(report, method, n):
    for c in report.cells:
        if c.method == method and c.n == n:
            return c
    raise KeyError((method, n))
