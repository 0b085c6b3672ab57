"""Training loop, long-horizon forecasting, and trajectory metrics.

One training run: simulate the reference trajectory with the physical
model, initialize the network from a seed, then repeat loss-and-gradient
plus one Adam update for a fixed number of iterations (full-trajectory
gradient every time; no batching). The loss is recorded before each
update, so ``loss_history[0]`` is the loss at initialization.

The whole train -> forecast pipeline is a pure function of
(cfg, spec, seed, iterations, lr): rerunning it reproduces results
bit-for-bit.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dynamics import DivergenceError, SolverSpec, Trajectory, simulate_truth
from .neural_residual import DEFAULT_LAYER_SIZES, InputNormalizer, MlpParams, init_params
from .optimizer import (
    DEFAULT_BETA1,
    DEFAULT_BETA2,
    DEFAULT_EPS,
    DEFAULT_LR,
    adam_init,
    adam_step,
)
from .signals import ScenarioConfig
from .ude_core import UdeSystem, loss_and_grad, rollout

DEFAULT_ITERATIONS = 300
DEFAULT_E_SCALE = 50.0


class TrainingDiverged(RuntimeError):
    """A rollout went non-finite mid-training; carries the partial loss history."""

    def __init__(self, iteration: int, loss_history: list[float], cause: DivergenceError):
        self.iteration = iteration
        self.loss_history = loss_history
        super().__init__(f"training diverged at iteration {iteration}: {cause}")


@dataclass
class TrainReport:
    """Loss history plus the provenance needed to reproduce a run."""

    loss_history: list[float]
    final_theta: np.ndarray
    iterations: int
    lr: float
    seed: int
    sample_count: int  # nodes x sample times, for deriving a mean loss
    wall_time_seconds: float
    adam_beta1: float = DEFAULT_BETA1
    adam_beta2: float = DEFAULT_BETA2
    adam_eps: float = DEFAULT_EPS

    def __post_init__(self):
        if len(self.loss_history) != self.iterations:
            raise ValueError("loss_history length must equal iterations")
        if any(not math.isfinite(x) or x < 0.0 for x in self.loss_history):
            raise ValueError("loss_history contains non-finite or negative entries")

    def to_dict(self) -> dict:
        return {
            "loss_history": list(self.loss_history),
            "final_theta": self.final_theta.tolist(),
            "iterations": self.iterations,
            "lr": self.lr,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "wall_time_seconds": self.wall_time_seconds,
            "adam_beta1": self.adam_beta1,
            "adam_beta2": self.adam_beta2,
            "adam_eps": self.adam_eps,
        }


def default_normalizer(cfg: ScenarioConfig) -> InputNormalizer:
    """Input scales used for training: the full training window and a
    state scale matching the typical ten-day energy accumulation."""
    return InputNormalizer(t_scale=cfg.train_horizon_hours, e_scale=DEFAULT_E_SCALE)


def train(
    cfg: ScenarioConfig,
    spec: SolverSpec,
    seed: int,
    iterations: int = DEFAULT_ITERATIONS,
    lr: float = DEFAULT_LR,
    layer_sizes=DEFAULT_LAYER_SIZES,
    truth_residual=None,
    on_iteration=None,
) -> tuple[MlpParams, TrainReport]:
    """Train the residual network against the physical reference trajectory.

    ``truth_residual`` is the test hook documented on
    :func:`ude_grid.dynamics.physical_vector_field`: an optional ``r(t)``
    added to the reference dynamics so the network has a known non-zero
    target. ``on_iteration(i, loss, params)`` is called after each update,
    e.g. for periodic checkpointing.

    Raises :class:`TrainingDiverged` (with the partial loss history attached)
    if a rollout produces non-finite states.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    started = time.perf_counter()

    truth = simulate_truth(cfg, spec, cfg.train_horizon_hours, residual=truth_residual)
    norm = default_normalizer(cfg)
    params = init_params(seed, layer_sizes)
    state = adam_init(len(params.theta), lr=lr)

    loss_history: list[float] = []
    for i in range(iterations):
        sys = UdeSystem(cfg=cfg, params=params, norm=norm, spec=spec)
        try:
            report = loss_and_grad(sys, truth)
        except DivergenceError as err:
            raise TrainingDiverged(i, loss_history, err) from err
        loss_history.append(report.loss)
        state, theta = adam_step(state, params.theta, report.grad_theta)
        params = MlpParams(layer_sizes=params.layer_sizes, theta=theta)
        if on_iteration is not None:
            on_iteration(i, report.loss, params)

    report = TrainReport(
        loss_history=loss_history,
        final_theta=params.theta,
        iterations=iterations,
        lr=lr,
        seed=seed,
        sample_count=truth.n_nodes * len(truth.times),
        wall_time_seconds=time.perf_counter() - started,
    )
    return params, report


def forecast(
    params: MlpParams,
    norm: InputNormalizer,
    cfg: ScenarioConfig,
    spec: SolverSpec,
    horizon: float = 720.0,
) -> Trajectory:
    """Roll the trained system over [0, horizon]; horizon may extend well
    past the training window (inputs simply leave the normalized unit range)."""
    if horizon < cfg.train_horizon_hours:
        raise ValueError(
            f"forecast horizon {horizon} is shorter than the training window "
            f"{cfg.train_horizon_hours}"
        )
    sys = UdeSystem(cfg=cfg, params=params, norm=norm, spec=spec)
    return rollout(sys, horizon)


def evaluate(pred: Trajectory, truth: Trajectory) -> dict:
    """RMSE per node, overall RMSE, and max absolute error over all samples."""
    if pred.states.shape != truth.states.shape or not np.array_equal(pred.times, truth.times):
        raise ValueError("prediction and truth grids do not match")
    err = pred.states - truth.states
    return {
        "rmse_per_node": [float(x) for x in np.sqrt(np.mean(err**2, axis=1))],
        "rmse_total": float(np.sqrt(np.mean(err**2))),
        "max_abs_err": float(np.max(np.abs(err))),
    }
