"""Closed-loop simulation, residual-target extraction, and tracking NMSE."""

import logging
from dataclasses import dataclass, field

import numpy as np

from multisparse.errors import ContractError, SimulationDiverged
from multisparse.quadsim.control import (Gains, TrajectoryConfig, augmented_controller,
                                         flat_to_desired, geometric_controller)
from multisparse.quadsim.dynamics import (NO_DISTURBANCE, ControlInput, QuadParams, QuadState,
                                          accelerations, nominal_accelerations, rk4_step)

log = logging.getLogger(__name__)

# position magnitude treated as divergence
DIVERGENCE_RADIUS = 1e3


@dataclass
class SimLog:
    """Per-control-step record of the closed loop (zero-order-hold inputs)."""

    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    F: np.ndarray
    M: np.ndarray
    r_d: np.ndarray
    v_dot: np.ndarray
    Omega_dot: np.ndarray
    max_orthonormality_error: float = 0.0
    max_det_error: float = 0.0
    diverged_at: float = None

    def __len__(self):
        return self.t.size

    @property
    def q(self):
        return np.hstack([self.r, self.v, self.Omega])

    def state(self, k):
        return QuadState(self.r[k], self.v[k], self.R[k], self.Omega[k])

    def input(self, k):
        return ControlInput(self.F[k], self.M[k])


def _empty_log():
    z = np.zeros
    return SimLog(z(0), z((0, 3)), z((0, 3)), z((0, 3, 3)), z((0, 3)), z(0), z((0, 3)),
                  z((0, 3)), z((0, 3)), z((0, 3)))


@dataclass
class ResidualModel:
    """Six scalar regressors predicting ``[force residual (3), torque residual (3)]``.

    Each regressor only needs ``predict_mean(Q) -> array``.
    """

    regressors: list
    method: str = "unknown"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.regressors) != 6:
            raise ContractError(f"need 6 regressors, got {len(self.regressors)}")

    def predict(self, q):
        q = np.atleast_2d(q)
        return np.array([float(np.ravel(r.predict_mean(q))[0]) for r in self.regressors])

    def predict_many(self, Q):
        return np.column_stack([np.ravel(r.predict_mean(Q)) for r in self.regressors])


def simulate(traj=None, params=None, gains=None, schedule=NO_DISTURBANCE, t0=0.0, tf=16.0,
             dt=1e-3, control_dt=1e-2, residual_model=None, augmentation="feedforward",
             initial_state=None, check_every_step=False):
    """Run the tracking loop and log one row per control update.

    ``augmentation`` selects how a residual model enters: ``"feedforward"``
    cancels the predicted force/torque inside the controller, ``"literal"``
    applies :func:`augmented_controller` on top of the nominal input.
    On divergence a :class:`SimulationDiverged` carrying ``partial_log`` is raised.
    """
    traj = traj or TrajectoryConfig()
    params = params or QuadParams()
    gains = gains or Gains()
    if not dt > 0 or control_dt < dt:
        raise ContractError("need 0 < dt <= control_dt")
    if augmentation not in ("feedforward", "literal"):
        raise ContractError(f"unknown augmentation {augmentation!r}")
    n_ctrl = max(0, int(round((tf - t0) / control_dt)))
    n_sub = int(round(control_dt / dt))
    h = control_dt / n_sub
    if n_ctrl == 0:
        return _empty_log()

    if initial_state is None:
        des0 = flat_to_desired(t0, traj, params.g)
        initial_state = QuadState(des0.r.copy(), des0.v.copy(), des0.R.copy(), np.zeros(3))
    r, v, R, W = (np.array(initial_state.r, float), np.array(initial_state.v, float),
                  np.array(initial_state.R, float), np.array(initial_state.Omega, float))

    rec = {k: [] for k in ("t", "r", "v", "R", "W", "F", "M", "rd", "vd", "wd")}
    max_orth = max_det = 0.0
    t = t0
    try:
        for k in range(n_ctrl):
            t = t0 + k * control_dt
            des = flat_to_desired(t, traj, params.g)
            state = QuadState(r, v, R, W)
            residual = None
            if residual_model is not None and augmentation == "feedforward":
                mu = residual_model.predict(state.q())
                residual = (mu[:3], mu[3:])
            u = geometric_controller(state, des, gains, params, residual=residual)
            if residual_model is not None and augmentation == "literal":
                u = augmented_controller(u, state, residual_model.regressors, params)
            vdot, wdot = accelerations(r, v, R, W, u.F, u.M, params, schedule, t)
            for key, val in (("t", t), ("r", r), ("v", v), ("R", R), ("W", W), ("F", u.F),
                             ("M", u.M), ("rd", des.r), ("vd", vdot), ("wd", wdot)):
                rec[key].append(val)
            for j in range(n_sub):
                r, v, R, W = rk4_step(r, v, R, W, u.F, u.M, params, schedule, t + j * h, h)
                if check_every_step:
                    max_orth = max(max_orth, np.linalg.norm(R.T @ R - np.eye(3)))
                    max_det = max(max_det, abs(np.linalg.det(R) - 1.0))
            max_orth = max(max_orth, np.linalg.norm(R.T @ R - np.eye(3)))
            max_det = max(max_det, abs(np.linalg.det(R) - 1.0))
            if np.linalg.norm(r) > DIVERGENCE_RADIUS:
                raise SimulationDiverged(f"position left the {DIVERGENCE_RADIUS} m ball", t)
    except SimulationDiverged as exc:
        partial = _pack(rec, max_orth, max_det)
        partial.diverged_at = exc.t if exc.t is not None else t
        exc.partial_log = partial
        raise
    return _pack(rec, max_orth, max_det)


def _pack(rec, max_orth, max_det):
    if not rec["t"]:
        return _empty_log()
    a = {k: np.array(v) for k, v in rec.items()}
    return SimLog(a["t"], a["r"], a["v"], a["R"], a["W"], a["F"], a["M"], a["rd"], a["vd"],
                  a["wd"], float(max_orth), float(max_det))


def residual_targets(sim_log, params, noise_sigma=0.0, rng=None):
    """Regression inputs ``q = [r, v, Omega]`` (n x 9) and residual targets (n x 6).

    Targets are ``[m (v_meas' - v_nom'), J (Omega_meas' - Omega_nom')]`` where the
    nominal accelerations use the unperturbed model with the logged input.
    Optional zero-mean Gaussian noise of std ``noise_sigma`` is added per channel.
    """
    n = len(sim_log)
    Y = np.empty((n, 6))
    for k in range(n):
        vdot_nom, wdot_nom = nominal_accelerations(sim_log.state(k), sim_log.input(k), params)
        Y[k, :3] = params.m * (sim_log.v_dot[k] - vdot_nom)
        Y[k, 3:] = params.J @ (sim_log.Omega_dot[k] - wdot_nom)
    if noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        Y = Y + noise_sigma * rng.standard_normal(Y.shape)
    return sim_log.q, Y


def tracking_nmse(t, r, r_d, trim=2.0):
    """Per-axis squared tracking error normalized by the reference variance.

    Returns ``None`` when no samples survive trimming.
    """
    t = np.asarray(t)
    keep = t >= (t[0] + trim) if t.size else np.zeros(0, bool)
    if not np.any(keep):
        return None
    e = r[keep] - r_d[keep]
    ref = r_d[keep] - r_d[keep].mean(axis=0)
    denom = np.sum(ref ** 2, axis=0)
    denom = np.where(denom > 0, denom, 1.0)
    return np.sum(e ** 2, axis=0) / denom
