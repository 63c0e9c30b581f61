"""Adaptive twisting sliding-mode attitude control for a small quadcopter."""

from .controllers import (AdaptiveGainState, ControlOutput, ControllerKind, Reference, SlidingConfig,
                          controller_step)
from .dynamics import AttitudeState, QuadParams, attitude_accel, state_derivative
from .errors import QuadTwistError
from .metrics import compare_controllers, step_metrics
from .scenario import ScenarioSpec, load_scenario, preset, run_scenario
from .sim import DisturbanceSource, ReferenceSchedule, RunLog, SimConfig, StepEvent, run_closed_loop

__version__ = "0.1.0"

__all__ = [
    "AdaptiveGainState", "AttitudeState", "ControlOutput", "ControllerKind", "DisturbanceSource",
    "QuadParams", "QuadTwistError", "Reference", "ReferenceSchedule", "RunLog", "ScenarioSpec",
    "SimConfig", "SlidingConfig", "StepEvent", "attitude_accel", "compare_controllers",
    "controller_step", "load_scenario", "preset", "run_closed_loop", "run_scenario",
    "state_derivative", "step_metrics",
]
