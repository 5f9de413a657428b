"""Reference trajectory, geometric SE(3) tracking controller, learned corrections."""

import logging
from dataclasses import dataclass, field

import numpy as np

from multisparse.errors import ContractError, DegenerateFlatness
from multisparse.quadsim.dynamics import E3, ControlInput
from multisparse.quadsim.so3 import attitude_error, hat, rotation_angle, vee_skew

log = logging.getLogger(__name__)

# finite-difference step for the desired body rates
FD_STEP = 1e-5
# a rotation larger than this between neighboring FD samples is a reference jump
JUMP_ANGLE = 0.1


def _diag(x):
    x = np.asarray(x, dtype=float)
    return np.diag(x) if x.ndim == 2 else x


@dataclass(frozen=True)
class Gains:
    """Diagonal gains stored as 3-vectors."""

    k_r: np.ndarray = field(default_factory=lambda: np.array([5.0, 5.0, 5.0]))
    k_v: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5, 2.0]))
    k_R: np.ndarray = field(default_factory=lambda: np.array([30.0, 30.0, 30.0]))
    k_Omega: np.ndarray = field(default_factory=lambda: np.array([5.0, 10.0, 20.0]))

    def __post_init__(self):
        for name in ("k_r", "k_v", "k_R", "k_Omega"):
            k = np.broadcast_to(_diag(getattr(self, name)), (3,)).astype(float)
            if np.any(k <= 0):
                raise ContractError(f"gain {name} must be positive")
            object.__setattr__(self, name, k)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Sinusoidal position reference ``A_i sin(w_i t)``; yaw = atan2(y_d, x_d)."""

    amplitude: tuple = (4.0, 5.0, 2.0)
    frequency: tuple = (0.8, 0.4, 0.4)

    def position(self, t):
        A, w = np.asarray(self.amplitude, float), np.asarray(self.frequency, float)
        return A * np.sin(w * t), A * w * np.cos(w * t), -A * w ** 2 * np.sin(w * t)


@dataclass(frozen=True)
class Desired:
    r: np.ndarray
    v: np.ndarray
    a: np.ndarray
    R: np.ndarray
    Omega: np.ndarray
    Omega_dot: np.ndarray
    yaw: float


def attitude_from_force(b3, yaw):
    """Rotation with third column ``b3`` and first column pointing along ``yaw``."""
    b1c = np.array([np.cos(yaw), np.sin(yaw), 0.0])
    b2 = np.cross(b3, b1c)
    nb2 = np.linalg.norm(b2)
    if nb2 < 1e-9:
        raise DegenerateFlatness("heading is parallel to the thrust axis")
    b2 /= nb2
    return np.column_stack([np.cross(b2, b3), b2, b3])


def _nearest_heading(yaw, R):
    """``yaw`` or ``yaw + pi``, whichever is closer to the body heading of ``R``.

    The position-derived heading flips by pi whenever the reference passes the
    origin; tracking it literally would demand a half turn in yaw.
    """
    b1 = R[:, 0]
    if np.cos(yaw) * b1[0] + np.sin(yaw) * b1[1] < 0:
        return float(yaw + np.pi)
    return float(yaw)


def _flat_attitude(t, traj, g):
    p, _, a = traj.position(t)
    yaw = float(np.arctan2(p[1], p[0]))
    f = g * E3 - a
    nf = np.linalg.norm(f)
    if nf < 1e-6:
        raise DegenerateFlatness(f"desired acceleration cancels gravity at t={t}")
    return attitude_from_force(f / nf, yaw), yaw


def _rate(Ra, Rb, dt):
    """Body rate taking ``Ra`` to ``Rb`` over ``dt`` (first order in the gap)."""
    return vee_skew(0.5 * (Ra + Rb).T @ (Rb - Ra)) / dt


def flat_to_desired(t, traj, g=9.81, h=FD_STEP):
    """Desired tuple with analytic position derivatives and FD body rates.

    Body rates come from differencing the reference attitude. If the heading
    jumps inside the stencil (atan2 branch switch when the reference passes
    through the origin) a one-sided stencil on the smooth side is used.
    """
    r, v, a = traj.position(t)
    offsets = np.arange(-2, 3)
    Rs = [_flat_attitude(t + k * h, traj, g)[0] for k in offsets]
    R, yaw = Rs[2], _flat_attitude(t, traj, g)[1]
    jumps = [rotation_angle(Rs[i].T @ Rs[i + 1]) > JUMP_ANGLE for i in range(4)]
    if not any(jumps):
        W = [_rate(Rs[i], Rs[i + 2], 2 * h) for i in range(3)]
        Om, Omd = W[1], (W[2] - W[0]) / (2 * h)
    elif not any(jumps[2:]):
        W0, W1 = _rate(Rs[2], Rs[3], h), _rate(Rs[3], Rs[4], h)
        Om, Omd = W0, (W1 - W0) / h
    elif not any(jumps[:2]):
        W0, W1 = _rate(Rs[1], Rs[2], h), _rate(Rs[0], Rs[1], h)
        Om, Omd = W0, (W0 - W1) / h
    else:
        Om, Omd = np.zeros(3), np.zeros(3)
    # rates are expressed in the body frame of R_d
    return Desired(r, v, a, R, Om, Omd, yaw)


def geometric_controller(state, desired, gains, params, residual=None, attitude="force"):
    """Thrust and moment of the SE(3) tracking law for the z-down plant.

    ``residual`` is an optional learned ``(force, torque)`` pair in the units of
    the regression targets; it is cancelled through the commanded force vector
    (which also tilts the commanded attitude) and the moment. With
    ``attitude="force"`` the commanded attitude is rebuilt from the commanded
    force and the reference yaw; ``"given"`` uses ``desired.R`` directly.
    """
    m, J, g = params.m, params.J, params.g
    R, W = state.R, state.Omega
    e_r = state.r - desired.r
    e_v = state.v - desired.v
    A = -gains.k_r * e_r - gains.k_v * e_v - m * g * E3 + m * desired.a
    tau = np.zeros(3)
    if residual is not None:
        A = A - residual[0]
        tau = np.asarray(residual[1], dtype=float)
    F = float(-A @ (R @ E3))
    if attitude == "force":
        nA = np.linalg.norm(A)
        Rc = (attitude_from_force(-A / nA, _nearest_heading(desired.yaw, R))
              if nA > 1e-9 else desired.R)
    elif attitude == "given":
        Rc = desired.R
    else:
        raise ContractError(f"unknown attitude mode {attitude!r}")
    e_R = attitude_error(R, Rc)
    # reference rates mapped through the world frame, so a heading flip of Rc
    # relative to desired.R does not corrupt the feedforward
    RtRd = R.T @ desired.R
    e_W = W - RtRd @ desired.Omega
    M = (-gains.k_R * e_R - gains.k_Omega * e_W + np.cross(W, J @ W)
         - J @ (hat(W) @ RtRd @ desired.Omega - RtRd @ desired.Omega_dot) - tau)
    return ControlInput(F, M)


def augmented_controller(nominal, state, models, params):
    """Learned correction exactly as the literal contraction.

    ``F - m [mu1 mu2 mu3] R e3`` and ``M - J [mu4 mu5 mu6]``. Falls back to the
    nominal input if any regressor raises.
    """
    try:
        mu = np.array([float(np.ravel(mdl.predict_mean(state.q()[None, :]))[0])
                       for mdl in models])
    except Exception as exc:  # noqa: BLE001 - any regressor failure degrades to nominal
        log.warning("regressor failed (%s); using nominal input", exc)
        return nominal
    F = nominal.F - params.m * float(mu[:3] @ (state.R @ E3))
    M = nominal.M - params.J @ mu[3:]
    return ControlInput(F, M)
