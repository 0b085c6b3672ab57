"""Hybrid physics + neural-residual battery modeling for a simulated smart grid.

Per-node battery energy follows a solar-minus-load balance; a small tanh
network learns whatever the balance misses. Training differentiates the
trajectory loss exactly through a fixed-step RK4 solver.
"""

from .dynamics import (
    DivergenceError,
    SolverSpec,
    Trajectory,
    integrate,
    rhs_physical,
    simulate_truth,
)
from .neural_residual import (
    Checkpoint,
    InputNormalizer,
    MlpParams,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
)
from .optimizer import AdamState, adam_init, adam_step
from .signals import ScenarioConfig, load_demand, net_power, solar_power
from .trainer import TrainReport, TrainingDiverged, evaluate, forecast, train
from .ude_core import LossReport, UdeSystem, loss, loss_and_grad, rhs_ude, rollout

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Checkpoint",
    "DivergenceError",
    "InputNormalizer",
    "LossReport",
    "MlpParams",
    "ScenarioConfig",
    "SolverSpec",
    "Trajectory",
    "TrainReport",
    "TrainingDiverged",
    "UdeSystem",
    "adam_init",
    "adam_step",
    "backward",
    "evaluate",
    "forecast",
    "forward",
    "init_params",
    "integrate",
    "load_checkpoint",
    "load_demand",
    "loss",
    "loss_and_grad",
    "net_power",
    "rhs_physical",
    "rhs_ude",
    "rollout",
    "save_checkpoint",
    "simulate_truth",
    "solar_power",
    "train",
    "__version__",
]
