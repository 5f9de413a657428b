"""Quadrotor simulator on SE(3) with a geometric tracking controller."""

from multisparse.quadsim.control import (Desired, Gains, TrajectoryConfig, augmented_controller,
                                         flat_to_desired, geometric_controller)
from multisparse.quadsim.dynamics import (ControlInput, DisturbanceSchedule, QuadParams,
                                          QuadState, step, true_dynamics)
from multisparse.quadsim.sim import (ResidualModel, SimLog, residual_targets, simulate,
                                     tracking_nmse)
from multisparse.quadsim.so3 import hat, vee
