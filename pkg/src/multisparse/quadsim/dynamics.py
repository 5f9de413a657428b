"""Rigid-body quadrotor dynamics on SE(3) with scheduled disturbances.

Sign convention follows ``m v' = m g e3 - F R e3``: gravity points along
+e3 and thrust along -R e3 (z down).
"""

from dataclasses import dataclass, field

import numpy as np

from multisparse.errors import ContractError, SimulationDiverged
from multisparse.quadsim.so3 import expm_so3, hat, orthonormality_error, project_so3

E3 = np.array([0.0, 0.0, 1.0])
# orthonormality drift tolerated before the polar re-projection kicks in
REPROJECT_TOL = 1e-9


@dataclass(frozen=True)
class QuadState:
    r: np.ndarray
    v: np.ndarray
    R: np.ndarray
    Omega: np.ndarray

    @classmethod
    def hover(cls, r=(0.0, 0.0, 0.0)):
        return cls(np.array(r, dtype=float), np.zeros(3), np.eye(3), np.zeros(3))

    def q(self):
        """Regression input ``[r, v, Omega]``."""
        return np.concatenate([self.r, self.v, self.Omega])


@dataclass(frozen=True)
class QuadParams:
    m: float = 1.25
    J: np.ndarray = field(default_factory=lambda: np.diag([1.1, 1.1, 2.2]))
    g: float = 9.81

    def __post_init__(self):
        J = np.asarray(self.J, dtype=float)
        if J.ndim == 1:
            J = np.diag(J)
        object.__setattr__(self, "J", J)
        if not self.m > 0:
            raise ContractError("mass must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ContractError("inertia must be symmetric positive definite")


@dataclass(frozen=True)
class ControlInput:
    F: float
    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "F", float(self.F))
        object.__setattr__(self, "M", np.asarray(self.M, dtype=float).reshape(3))


def _check_steps(steps, name):
    steps = sorted(steps, key=lambda s: s[0])
    for a, b in zip(steps, steps[1:]):
        if b[0] < a[1]:
            raise ContractError(f"overlapping {name} intervals {a[:2]} and {b[:2]}")
    for s in steps:
        if s[1] < s[0]:
            raise ContractError(f"{name} interval ends before it starts: {s[:2]}")
    return tuple(steps)


def _lookup(steps, t):
    """Interval ``(t_start, t_end]``; an exact start time also matches."""
    for s in steps:
        if s[0] < t <= s[1]:
            return s
    for s in steps:
        if t == s[0]:
            return s
    return None


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Mass multipliers, additive inertia diagonals, and a constant wind (in g)."""

    mass_steps: tuple = ()
    inertia_steps: tuple = ()
    wind: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        ms = [(float(a), float(b), float(c)) for a, b, c in self.mass_steps]
        js = [(float(a), float(b), np.asarray(c, dtype=float).reshape(3))
              for a, b, c in self.inertia_steps]
        object.__setattr__(self, "mass_steps", _check_steps(ms, "mass"))
        object.__setattr__(self, "inertia_steps", _check_steps(js, "inertia"))
        object.__setattr__(self, "wind", np.asarray(self.wind, dtype=float).reshape(3))

    def mass(self, params, t):
        s = _lookup(self.mass_steps, t)
        return params.m * (s[2] if s else 1.0)

    def inertia(self, params, t):
        s = _lookup(self.inertia_steps, t)
        return params.J + np.diag(s[2]) if s else params.J

    def check_horizon(self, t0, tf):
        for name, steps in (("mass", self.mass_steps), ("inertia", self.inertia_steps)):
            for s in steps:
                if s[0] < t0 or s[1] > tf:
                    raise ContractError(f"{name} interval {s[:2]} outside [{t0}, {tf}]")


NO_DISTURBANCE = DisturbanceSchedule()


def accelerations(r, v, R, W, F, M, params, schedule, t):
    """Linear and angular accelerations of the perturbed plant."""
    m = schedule.mass(params, t)
    J = schedule.inertia(params, t)
    vdot = params.g * E3 - (F / m) * (R @ E3) + params.g * schedule.wind
    wdot = np.linalg.solve(J, M - np.cross(W, J @ W))
    return vdot, wdot


@dataclass(frozen=True)
class StateDerivative:
    r_dot: np.ndarray
    v_dot: np.ndarray
    R_dot: np.ndarray
    Omega_dot: np.ndarray


def true_dynamics(state, u, params, schedule=NO_DISTURBANCE, t=0.0):
    vdot, wdot = accelerations(state.r, state.v, state.R, state.Omega, u.F, u.M,
                               params, schedule, t)
    return StateDerivative(state.v.copy(), vdot, state.R @ hat(state.Omega), wdot)


def nominal_accelerations(state, u, params):
    """Accelerations predicted by the unperturbed model (no wind, nominal m, J)."""
    vdot = params.g * E3 - (u.F / params.m) * (state.R @ E3)
    W = state.Omega
    wdot = np.linalg.solve(params.J, u.M - np.cross(W, params.J @ W))
    return vdot, wdot


def rk4_step(r, v, R, W, F, M, params, schedule, t, dt):
    """Classical RK4 on (r, v, Omega); R advanced by the exponential map.

    Stage rotations are ``R exp(hat(Omega_i) c_i dt)``; the final update uses
    the RK4-weighted average body rate.
    """
    def f(rr, vv, RR, WW, tt):
        a, b = accelerations(rr, vv, RR, WW, F, M, params, schedule, tt)
        return vv, a, b

    h2 = 0.5 * dt
    dr1, dv1, dw1 = f(r, v, R, W, t)
    W2 = W + h2 * dw1
    dr2, dv2, dw2 = f(r + h2 * dr1, v + h2 * dv1, R @ expm_so3(W * h2), W2, t + h2)
    W3 = W + h2 * dw2
    dr3, dv3, dw3 = f(r + h2 * dr2, v + h2 * dv2, R @ expm_so3(W2 * h2), W3, t + h2)
    W4 = W + dt * dw3
    dr4, dv4, dw4 = f(r + dt * dr3, v + dt * dv3, R @ expm_so3(W3 * dt), W4, t + dt)

    r_new = r + dt / 6.0 * (dr1 + 2 * dr2 + 2 * dr3 + dr4)
    v_new = v + dt / 6.0 * (dv1 + 2 * dv2 + 2 * dv3 + dv4)
    W_new = W + dt / 6.0 * (dw1 + 2 * dw2 + 2 * dw3 + dw4)
    W_avg = (W + 2 * W2 + 2 * W3 + W4) / 6.0
    R_new = R @ expm_so3(W_avg * dt)
    if orthonormality_error(R_new) > REPROJECT_TOL:
        R_new = project_so3(R_new)
    if not (np.all(np.isfinite(r_new)) and np.all(np.isfinite(v_new))
            and np.all(np.isfinite(W_new)) and np.all(np.isfinite(R_new))):
        raise SimulationDiverged(f"non-finite state at t={t + dt:.6f}", t)
    return r_new, v_new, R_new, W_new


def step(state, u, params, schedule=NO_DISTURBANCE, t=0.0, dt=1e-3):
    if not dt > 0:
        raise ContractError("dt must be positive")
    r, v, R, W = rk4_step(state.r, state.v, state.R, state.Omega, u.F, u.M,
                          params, schedule, t, dt)
    return QuadState(r, v, R, W)
