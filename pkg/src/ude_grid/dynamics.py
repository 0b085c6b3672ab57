"""Battery energy-balance ODE and a fixed-step RK4 integrator.

The physical model per node is dE/dt = solar(t) - load_i(t): a pure
quadrature, since the right-hand side never reads the state. The
integrator is deliberately fixed-step so that a training pass can replay
the exact same step sequence in reverse; ``integrate_recorded`` returns
the per-step stage states that such a reverse sweep needs.

Sample times are computed as ``t0 + k * interval`` (multiplication, not
accumulation) so grids are bit-stable and every step lands exactly on
its sample boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import signals
from .signals import ScenarioConfig

_GRID_RTOL = 1e-12

VectorField = Callable[[float, np.ndarray], np.ndarray]


class DivergenceError(RuntimeError):
    """Raised when the integrator produces a non-finite state."""

    def __init__(self, step_index: int, t: float):
        self.step_index = step_index
        self.t = t
        super().__init__(f"non-finite state after step {step_index} (t = {t:g} h)")


@dataclass
class SolverSpec:
    """Fixed-step solver settings. ``method`` exists for forward compatibility."""

    step_hours: float = 0.25
    method: str = "RK4"

    def __post_init__(self):
        if self.step_hours <= 0.0:
            raise ValueError("step_hours must be strictly positive")
        if self.method != "RK4":
            raise ValueError(f"unsupported method {self.method!r}; only RK4 is available")


@dataclass
class Trajectory:
    """Per-node battery state sampled on a uniform time grid.

    ``times`` has shape (n_samples,), ``states`` has shape (n_nodes, n_samples).
    """

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("times must be a 1-D array with at least two samples")
        if self.states.ndim != 2 or self.states.shape[1] != len(self.times):
            raise ValueError(
                f"states shape {self.states.shape} does not match {len(self.times)} sample times"
            )
        diffs = np.diff(self.times)
        if not np.all(diffs > 0.0):
            raise ValueError("times must be strictly increasing")
        spacing = diffs[0]
        if np.any(np.abs(diffs - spacing) > _GRID_RTOL * abs(spacing)):
            raise ValueError("times must be uniformly spaced")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("states contain non-finite entries")

    @property
    def n_nodes(self) -> int:
        return self.states.shape[0]

    def to_csv(self, path) -> None:
        """Write ``t,node0,node1,...`` rows at full double precision."""
        with open(path, "w", newline="\n") as fh:
            header = "t," + ",".join(f"node{i}" for i in range(self.n_nodes))
            fh.write(header + "\n")
            for k, t in enumerate(self.times):
                row = [csv_number(t)] + [csv_number(x) for x in self.states[:, k]]
                fh.write(",".join(row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, "r") as fh:
            header = fh.readline().strip().split(",")
            if not header or header[0] != "t" or len(header) < 2:
                raise ValueError(f"{path}: expected header 't,node0,...', got {header}")
            rows = [line.strip().split(",") for line in fh if line.strip()]
        data = np.array([[float(x) for x in row] for row in rows])
        if data.shape[1] != len(header):
            raise ValueError(f"{path}: row width does not match header")
        return cls(times=data[:, 0], states=data[:, 1:].T)


def csv_number(x: float) -> str:
    """Format one value for CSV output: 17 significant digits, round-trip exact."""
    return format(float(x), ".17g")


@dataclass
class StageRecord:
    """Per-step data captured during a forward RK4 pass.

    ``step_starts[s]`` is the start time of step ``s``; ``stage_states[s, j]``
    is the state vector fed to stage ``j`` (j = 0..3) of that step. Together
    with the step size these reproduce the forward pass exactly, which is what
    a reverse-mode sweep through the solver replays.
    """

    step_hours: float
    steps_per_sample: int
    step_starts: np.ndarray  # (n_steps,)
    stage_states: np.ndarray  # (n_steps, 4, n_state)


def _grid_multiple(value: float, unit: float, what: str) -> int:
    m = int(round(value / unit))
    if m < 1 or abs(m * unit - value) > _GRID_RTOL * max(abs(value), 1.0):
        raise ValueError(f"{what}: {value} is not a positive integer multiple of {unit}")
    return m


def _integrate_impl(
    rhs: VectorField,
    y0: np.ndarray,
    t0: float,
    t1: float,
    spec: SolverSpec,
    sample_interval: float,
    record: bool,
) -> tuple[Trajectory, StageRecord | None]:
    if t1 <= t0:
        raise ValueError(f"t1 ({t1}) must exceed t0 ({t0})")
    y = np.array(y0, dtype=float).ravel()
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state contains non-finite entries")
    h = spec.step_hours
    m = _grid_multiple(sample_interval, h, "sample_interval vs step_hours")
    n_samples = _grid_multiple(t1 - t0, sample_interval, "horizon vs sample_interval")

    times = t0 + np.arange(n_samples + 1) * sample_interval
    states = np.empty((len(y), n_samples + 1))
    states[:, 0] = y

    n_steps = n_samples * m
    step_starts = np.empty(n_steps) if record else None
    stage_states = np.empty((n_steps, 4, len(y))) if record else None

    half_h = 0.5 * h
    step = 0
    for k in range(n_samples):
        t_anchor = times[k]
        for j in range(m):
            t = t_anchor + j * h
            k1 = rhs(t, y)
            u2 = y + half_h * k1
            k2 = rhs(t + half_h, u2)
            u3 = y + half_h * k2
            k3 = rhs(t + half_h, u3)
            u4 = y + h * k3
            k4 = rhs(t + h, u4)
            if record:
                step_starts[step] = t
                stage_states[step, 0] = y
                stage_states[step, 1] = u2
                stage_states[step, 2] = u3
                stage_states[step, 3] = u4
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(y)):
                raise DivergenceError(step, t)
            step += 1
        states[:, k + 1] = y

    traj = Trajectory(times=times, states=states)
    rec = (
        StageRecord(
            step_hours=h,
            steps_per_sample=m,
            step_starts=step_starts,
            stage_states=stage_states,
        )
        if record
        else None
    )
    return traj, rec


def integrate(
    rhs: VectorField,
    y0: np.ndarray,
    t0: float,
    t1: float,
    spec: SolverSpec,
    sample_interval: float,
) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` with classic fixed-step RK4.

    The returned trajectory holds the state at every sample time from ``t0``
    to ``t1`` inclusive. Steps align exactly with sample times; nothing is
    interpolated. ``sample_interval`` must be an integer multiple of the step
    and the horizon an integer multiple of ``sample_interval``.

    Raises :class:`DivergenceError` if any step yields a non-finite state.
    """
    traj, _ = _integrate_impl(rhs, y0, t0, t1, spec, sample_interval, record=False)
    return traj


def integrate_recorded(
    rhs: VectorField,
    y0: np.ndarray,
    t0: float,
    t1: float,
    spec: SolverSpec,
    sample_interval: float,
) -> tuple[Trajectory, StageRecord]:
    """Like :func:`integrate`, additionally returning the per-stage states.

    Same arithmetic path as :func:`integrate`, so results are bit-identical.
    """
    traj, rec = _integrate_impl(rhs, y0, t0, t1, spec, sample_interval, record=True)
    assert rec is not None
    return traj, rec


def rhs_physical(node: int, t: float, e: float, cfg: ScenarioConfig) -> float:
    """Physical charging rate of one node: solar minus load, state-free.

    ``e`` is accepted for signature compatibility with state-aware models but
    never read; the base model depends on time alone.
    """
    del e
    return signals.net_power(node, t, cfg)


def physical_vector_field(cfg: ScenarioConfig, residual=None) -> VectorField:
    """Vector field of the physical model over all nodes.

    ``residual`` is a test hook: an optional callable ``r(t)`` added to every
    node's rate, used to manufacture reference data with a known non-physical
    component. Production paths leave it None.
    """
    if residual is None:

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            del y
            return signals.net_power_all(t, cfg)

    else:

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            del y
            return signals.net_power_all(t, cfg) + residual(t)

    return rhs


def simulate_truth(
    cfg: ScenarioConfig,
    spec: SolverSpec,
    horizon: float,
    residual=None,
) -> Trajectory:
    """Simulate all nodes with the physical model alone, sampled hourly.

    Every node starts at ``cfg.initial_energy`` at t = 0. ``residual`` is the
    test hook documented on :func:`physical_vector_field`.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be strictly positive")
    y0 = np.full(cfg.n_nodes, cfg.initial_energy)
    rhs = physical_vector_field(cfg, residual=residual)
    return integrate(rhs, y0, 0.0, horizon, spec, cfg.sample_interval_hours)
