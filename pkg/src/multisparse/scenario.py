"""Scenario files: TOML with units spelled out in the key names.

Example::

    name = "wind_train"
    seed = 0

    [time]
    t0_s = 0.0
    tf_s = 16.0
    dt_s = 0.001
    control_dt_s = 0.01
    trim_s = 2.0

    [trajectory]
    amplitude_m = [4.0, 5.0, 2.0]
    frequency_rad_per_s = [0.8, 0.4, 0.4]

    [params]
    mass_kg = 1.25
    inertia_diag_kg_m2 = [1.1, 1.1, 2.2]
    gravity_m_per_s2 = 9.81

    [gains]
    k_r = [5.0, 5.0, 5.0]
    k_v = [0.5, 0.5, 2.0]
    k_R = [30.0, 30.0, 30.0]
    k_Omega = [5.0, 10.0, 20.0]

    [disturbance]
    wind_g = [0.17, 0.18, 0.16]

    [[disturbance.mass_steps]]
    t_start_s = 2.0
    t_end_s = 6.0
    multiplier = 1.15

    [[disturbance.inertia_steps]]
    t_start_s = 2.0
    t_end_s = 6.0
    add_diag_kg_m2 = [0.02, 0.02, 0.02]

    [noise]
    target_sigma = 0.001

All sections are optional; omitted keys take the defaults shown.
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from multisparse.errors import ConfigError, ContractError
from multisparse.quadsim import DisturbanceSchedule, Gains, QuadParams, TrajectoryConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class Scenario:
    name: str = "nominal"
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    schedule: DisturbanceSchedule = field(default_factory=DisturbanceSchedule)
    t0: float = 0.0
    tf: float = 16.0
    dt: float = 1e-3
    control_dt: float = 1e-2
    trim: float = 2.0
    gains: Gains = field(default_factory=Gains)
    params: QuadParams = field(default_factory=QuadParams)
    noise_sigma: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.tf < self.t0:
            raise ConfigError(f"tf={self.tf} precedes t0={self.t0}")
        if not 0 < self.dt <= self.control_dt:
            raise ConfigError("need 0 < dt <= control_dt")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be non-negative")
        try:
            self.schedule.check_horizon(self.t0, self.tf)
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc

    def sim_kwargs(self):
        return dict(traj=self.trajectory, params=self.params, gains=self.gains,
                    schedule=self.schedule, t0=self.t0, tf=self.tf, dt=self.dt,
                    control_dt=self.control_dt)


def _vec3(d, key, default):
    val = d.get(key, default)
    arr = np.asarray(val, dtype=float)
    if arr.shape != (3,):
        raise ConfigError(f"{key} must be a list of three numbers, got {val!r}")
    return arr


def scenario_from_dict(doc):
    try:
        tm = doc.get("time", {})
        tr = doc.get("trajectory", {})
        pr = doc.get("params", {})
        gn = doc.get("gains", {})
        ds = doc.get("disturbance", {})
        nz = doc.get("noise", {})
        mass_steps = [(s["t_start_s"], s["t_end_s"], s["multiplier"])
                      for s in ds.get("mass_steps", [])]
        inertia_steps = [(s["t_start_s"], s["t_end_s"], _vec3(s, "add_diag_kg_m2", None))
                         for s in ds.get("inertia_steps", [])]
        schedule = DisturbanceSchedule(mass_steps, inertia_steps,
                                       _vec3(ds, "wind_g", [0.0, 0.0, 0.0]))
        d = Gains()
        return Scenario(
            name=str(doc.get("name", "scenario")),
            trajectory=TrajectoryConfig(tuple(_vec3(tr, "amplitude_m", [4.0, 5.0, 2.0])),
                                        tuple(_vec3(tr, "frequency_rad_per_s", [0.8, 0.4, 0.4]))),
            schedule=schedule,
            t0=float(tm.get("t0_s", 0.0)),
            tf=float(tm.get("tf_s", 16.0)),
            dt=float(tm.get("dt_s", 1e-3)),
            control_dt=float(tm.get("control_dt_s", 1e-2)),
            trim=float(tm.get("trim_s", 2.0)),
            gains=Gains(_vec3(gn, "k_r", d.k_r), _vec3(gn, "k_v", d.k_v),
                        _vec3(gn, "k_R", d.k_R), _vec3(gn, "k_Omega", d.k_Omega)),
            params=QuadParams(float(pr.get("mass_kg", 1.25)),
                              _vec3(pr, "inertia_diag_kg_m2", [1.1, 1.1, 2.2]),
                              float(pr.get("gravity_m_per_s2", 9.81))),
            noise_sigma=float(nz.get("target_sigma", 1e-3)),
            seed=int(doc.get("seed", 0)),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def load_scenario(path):
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(doc)
