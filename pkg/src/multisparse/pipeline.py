"""Generate, train, simulate: the pieces shared by the CLI, scripts and tests.

Data files are CSV with one header row; column names carry units. Floats are
written with ``%.17g`` so a file reloads to the exact same doubles.
"""

import time
from dataclasses import dataclass, fields, replace

import numpy as np

from multisparse._optim import OptConfig
from multisparse.errors import ConfigError
from multisparse.gp import Dataset, gp_condition, gp_fit
from multisparse.lgp import lgp_fit
from multisparse.msgp import msgp_fit
from multisparse.quadsim import ResidualModel, residual_targets, simulate, tracking_nmse
from multisparse.spgp import spgp_fit

AXES = ("x", "y", "z")
INPUT_COLUMNS = ([f"r_{a}_m" for a in AXES] + [f"v_{a}_m_per_s" for a in AXES]
                 + [f"Omega_{a}_rad_per_s" for a in AXES])
TARGET_COLUMNS = [f"force_res_{a}_N" for a in AXES] + [f"torque_res_{a}_N_m" for a in AXES]
DATA_COLUMNS = ["t_s"] + INPUT_COLUMNS + TARGET_COLUMNS
LOG_COLUMNS = (["t_s"] + [f"r_{a}_m" for a in AXES] + [f"r_d_{a}_m" for a in AXES]
               + [f"v_{a}_m_per_s" for a in AXES] + [f"Omega_{a}_rad_per_s" for a in AXES]
               + [f"R_{i}{j}" for i in range(1, 4) for j in range(1, 4)]
               + ["F_N"] + [f"M_{a}_N_m" for a in AXES])
METHODS = ("gp", "spgp", "lgp", "msgp")


@dataclass(frozen=True)
class MethodConfig:
    """Per-method sizes and optimizer settings.

    Ratios follow the desk-scale defaults: SPGP uses a tenth of the data as
    pseudo-inputs, MSGP a fifth of each cluster.
    """

    spgp_ratio: float = 0.1
    p: int = 250
    u_ratio: float = 0.2
    N: int = 5
    lgp_p: int = 250
    strategy: str = "random"
    gp_subsample: int = 1000
    optimize_pseudo: bool = True
    max_iter: int = 100
    restarts: int = 0

    def __post_init__(self):
        for name in ("spgp_ratio", "u_ratio"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        for name in ("p", "N", "lgp_p", "gp_subsample"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.max_iter < 0 or self.restarts < 0:
            raise ConfigError("max_iter and restarts must be non-negative")

    @property
    def u(self):
        return max(1, int(round(self.u_ratio * self.p)))

    def opt(self, seed):
        return OptConfig(max_iter=self.max_iter, restarts=self.restarts, seed=seed)

    def sizes(self, method, n):
        if method == "gp":
            return {"n": n}
        if method == "spgp":
            return {"n": n, "m": spgp_size(self, n)}
        if method == "lgp":
            return {"n": n, "p": self.lgp_p, "N": self.N}
        return {"n": n, "p": self.p, "u": self.u, "N": self.N}


def spgp_size(cfg, n):
    return min(n, max(1, int(round(cfg.spgp_ratio * n))))


def method_config_from_dict(doc):
    known = {f.name for f in fields(MethodConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown method config keys: {sorted(unknown)}")
    try:
        return replace(MethodConfig(), **doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


# ---- data files

def _write_csv(path, columns, table):
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(columns), comments="")


def _read_csv(path, columns):
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if header != list(columns):
        raise ConfigError(f"{path}: unexpected header {header[:4]}...")
    if table.size == 0:
        table = table.reshape(0, len(columns))
    return table


def write_dataset(path, t, Q, Y):
    _write_csv(path, DATA_COLUMNS, np.column_stack([t, Q, Y]))


def read_dataset(path):
    """Returns ``(t, Q, Y)`` with ``Q`` n x 9 and ``Y`` n x 6."""
    tab = _read_csv(path, DATA_COLUMNS)
    return tab[:, 0], tab[:, 1:10], tab[:, 10:16]


def write_log(path, log):
    n = len(log)
    _write_csv(path, LOG_COLUMNS, np.column_stack([
        log.t, log.r, log.r_d, log.v, log.Omega, log.R.reshape(n, 9), log.F, log.M]))


def read_log(path):
    """Returns a dict of arrays keyed ``t``, ``r``, ``r_d``, ``v``, ``Omega``, ``R``, ``F``, ``M``."""
    tab = _read_csv(path, LOG_COLUMNS)
    return {"t": tab[:, 0], "r": tab[:, 1:4], "r_d": tab[:, 4:7], "v": tab[:, 7:10],
            "Omega": tab[:, 10:13], "R": tab[:, 13:22].reshape(-1, 3, 3), "F": tab[:, 22],
            "M": tab[:, 23:26]}


# ---- pipeline stages

def generate(scenario, seed=None):
    """Nominal closed loop under the scenario; returns ``(log, Q, Y)``."""
    seed = scenario.seed if seed is None else seed
    log = simulate(**scenario.sim_kwargs())
    Q, Y = residual_targets(log, scenario.params, scenario.noise_sigma,
                            np.random.default_rng(seed))
    return log, Q, Y


def fit_regressor(method, data, cfg, seed=0):
    if method == "gp":
        # hyperparameters from a subsample, posterior on all points
        if data.n > cfg.gp_subsample:
            idx = np.sort(np.random.default_rng(seed).choice(data.n, cfg.gp_subsample,
                                                             replace=False))
            sub = gp_fit(data.subset(idx), opt_cfg=cfg.opt(seed))
            return gp_condition(data, sub.hyper, info=sub.info)
        return gp_fit(data, opt_cfg=cfg.opt(seed))
    if method == "spgp":
        return spgp_fit(data, spgp_size(cfg, data.n), opt_cfg=cfg.opt(seed),
                        optimize_pseudo=cfg.optimize_pseudo)
    if method == "lgp":
        return lgp_fit(data, cfg.lgp_p, cfg.strategy, seed,
                       hyper_subsample_size=min(data.n, cfg.gp_subsample),
                       opt_cfg=cfg.opt(seed), neighbor_count=cfg.N)
    if method == "msgp":
        return msgp_fit(data, cfg.p, cfg.u, cfg.strategy, seed, opt_cfg=cfg.opt(seed),
                        optimize_pseudo=cfg.optimize_pseudo, neighbor_count=cfg.N)
    raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")


def _nlml_pair(model):
    info = model.info
    if "global" in info:
        info = info["global"]
    pair = info.get("nlml_init"), info.get("nlml")
    if isinstance(pair[1], list):
        # cluster ensembles report the summed per-cluster objective
        return tuple(None if not v or None in v else float(np.sum(v)) for v in pair)
    return pair


def train_residual(method, Q, Y, cfg=None, seed=0, report=None):
    """Six independent regressors, one per residual channel.

    ``report`` (a callable taking one string) receives a line per channel.
    """
    cfg = cfg or MethodConfig()
    Q, Y = np.asarray(Q, float), np.asarray(Y, float)
    if Y.ndim != 2 or Y.shape[1] != 6 or Q.shape[0] != Y.shape[0]:
        raise ConfigError(f"need n x 9 inputs and n x 6 targets, got {Q.shape}, {Y.shape}")
    regs, channels, walls = [], [], []
    t_all = time.perf_counter()
    for j in range(6):
        t = time.perf_counter()
        model = fit_regressor(method, Dataset(Q, Y[:, j]), cfg, seed)
        wall = time.perf_counter() - t
        before, after = _nlml_pair(model)
        channels.append({"column": TARGET_COLUMNS[j], "nlml_init": before, "nlml": after})
        walls.append(wall)
        if report is not None:
            report(f"{method} {TARGET_COLUMNS[j]}: nlml {_num(before)} -> {_num(after)} "
                   f"({wall:.2f} s)")
        regs.append(model)
    info = {"channels": channels, "sizes": cfg.sizes(method, Q.shape[0]), "seed": seed,
            "timing": {"train_s": time.perf_counter() - t_all, "channel_s": walls}}
    return ResidualModel(regs, method, info)


def _num(x):
    return "n/a" if x is None else f"{x:.6g}"


def evaluate(scenario, model=None):
    """Closed loop with an optional residual model; returns ``(log, nmse or None)``."""
    log = simulate(**scenario.sim_kwargs(), residual_model=model)
    if len(log) == 0:
        return log, None
    return log, tracking_nmse(log.t, log.r, log.r_d, scenario.trim)
