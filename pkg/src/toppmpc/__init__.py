"""Exercise recommendations for long-term type-2 diabetes control.

Simulates the exercise-augmented Topp progression model and computes
physical-activity prescriptions with a sampled-data receding-horizon
controller.
"""
__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .model import (NOMINAL_STATE, ExerciseProgram, ModelParams, State,  # noqa: E402
                    derivative)
from .integrator import (InputProfile, Outcome, StepConfig, Trajectory,  # noqa: E402
                         classify_outcome, integrate, simulate_constant)
from .mpc import MpcConfig, run_receding_horizon, solve_step  # noqa: E402
from .dosage import (DurationSchedule, control_effort, duration_from_input,  # noqa: E402
                     equivalent_input, min_feedforward_dose)
from .montecarlo import CampaignConfig, run_campaign  # noqa: E402

__all__ = [
    "BACKEND", "NOMINAL_STATE", "ExerciseProgram", "ModelParams", "State", "derivative",
    "InputProfile", "Outcome", "StepConfig", "Trajectory", "classify_outcome", "integrate",
    "simulate_constant", "MpcConfig", "run_receding_horizon", "solve_step",
    "DurationSchedule", "control_effort", "duration_from_input", "equivalent_input",
    "min_feedforward_dose", "CampaignConfig", "run_campaign",
]
