"""Closed-form solar and per-node load demand signals.

Solar is a diurnal half-sine (clamped at zero) plus a slow deterministic
sinusoidal fluctuation. Each node's load is a baseline plus morning and
evening Gaussian peaks plus a slow per-node sinusoid. All "noise" terms
are fixed sinusoids: no RNG is involved anywhere in signal generation,
so every function here is pure and thread-safe.

Time is measured in hours; power and energy are dimensionless units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

# Fallback constants for solar_power() when no config is supplied.
_DEFAULT_SOLAR_NOISE_AMP = 0.05
_DEFAULT_SOLAR_NOISE_FREQ = 0.1


def _default_phases(n_nodes: int) -> list[float]:
    # Evenly spread phases; the source model leaves them unspecified.
    return [TWO_PI * i / n_nodes for i in range(n_nodes)]


@dataclass
class ScenarioConfig:
    """All scenario constants: nodes, signal shapes, horizons, and sampling grid.

    Defaults reproduce the reference three-node setup. ``load_noise_phases``
    defaults to 2*pi*i/n_nodes, a documented convention (any per-node phases
    may be supplied instead).
    """

    n_nodes: int = 3
    base_loads: np.ndarray = field(default_factory=lambda: np.array([0.45, 0.5, 0.55]))
    peak_width_sigma: float = 1.5
    morning_peak_amp: float = 0.3
    morning_peak_hour: float = 8.0
    evening_peak_amp: float = 0.4
    evening_peak_hour: float = 19.0
    solar_noise_amp: float = 0.05
    solar_noise_freq: float = 0.1
    load_noise_amp: float = 0.02
    load_noise_freq: float = 0.07
    load_noise_phases: np.ndarray | None = None
    train_horizon_hours: float = 240.0
    forecast_horizon_hours: float = 720.0
    sample_interval_hours: float = 1.0
    initial_energy: float = 0.0

    def __post_init__(self):
        self.base_loads = np.asarray(self.base_loads, dtype=float)
        if self.load_noise_phases is None:
            self.load_noise_phases = np.array(_default_phases(self.n_nodes))
        else:
            self.load_noise_phases = np.asarray(self.load_noise_phases, dtype=float)
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if len(self.base_loads) != self.n_nodes:
            raise ValueError(
                f"base_loads has {len(self.base_loads)} entries, expected n_nodes={self.n_nodes}"
            )
        if len(self.load_noise_phases) != self.n_nodes:
            raise ValueError(
                f"load_noise_phases has {len(self.load_noise_phases)} entries, "
                f"expected n_nodes={self.n_nodes}"
            )
        if not np.all(self.base_loads > 0.0):
            raise ValueError("base_loads must be strictly positive")
        for name in (
            "peak_width_sigma",
            "train_horizon_hours",
            "forecast_horizon_hours",
            "sample_interval_hours",
        ):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be strictly positive")
        for name in (
            "morning_peak_amp",
            "evening_peak_amp",
            "solar_noise_amp",
            "load_noise_amp",
        ):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.train_horizon_hours > self.forecast_horizon_hours:
            raise ValueError("train_horizon_hours must not exceed forecast_horizon_hours")

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        """Build a config from a JSON-style dict; absent fields keep defaults.

        Unknown field names are rejected so typos surface as errors.
        """
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown scenario field(s): {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "base_loads": self.base_loads.tolist(),
            "peak_width_sigma": self.peak_width_sigma,
            "morning_peak_amp": self.morning_peak_amp,
            "morning_peak_hour": self.morning_peak_hour,
            "evening_peak_amp": self.evening_peak_amp,
            "evening_peak_hour": self.evening_peak_hour,
            "solar_noise_amp": self.solar_noise_amp,
            "solar_noise_freq": self.solar_noise_freq,
            "load_noise_amp": self.load_noise_amp,
            "load_noise_freq": self.load_noise_freq,
            "load_noise_phases": self.load_noise_phases.tolist(),
            "train_horizon_hours": self.train_horizon_hours,
            "forecast_horizon_hours": self.forecast_horizon_hours,
            "sample_interval_hours": self.sample_interval_hours,
            "initial_energy": self.initial_energy,
        }


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"time must be finite, got {t}")
    return t


def solar_power(t: float, cfg: ScenarioConfig | None = None) -> float:
    """Solar input at time ``t`` (hours): clamped diurnal half-sine plus drift.

    max(0, sin(pi*((t mod 24) - 6)/12)) + amp*sin(freq*t)

    The sinusoidal fluctuation is added after the clamp, so night-time values
    may be slightly negative (down to -amp). Shared by all nodes.
    """
    t = _check_time(t)
    if cfg is None:
        amp, freq = _DEFAULT_SOLAR_NOISE_AMP, _DEFAULT_SOLAR_NOISE_FREQ
    else:
        amp, freq = cfg.solar_noise_amp, cfg.solar_noise_freq
    half_sine = math.sin(math.pi * ((t % 24.0) - 6.0) / 12.0)
    return max(0.0, half_sine) + amp * math.sin(freq * t)


def load_demand_all(t: float, cfg: ScenarioConfig) -> np.ndarray:
    """Load demand of every node at time ``t``, as an (n_nodes,) vector.

    The Gaussian peaks repeat every 24 h; only the baseline and the slow
    sinusoid phase differ across nodes.
    """
    t = _check_time(t)
    tod = t % 24.0
    two_sigma_sq = 2.0 * cfg.peak_width_sigma**2
    peaks = cfg.morning_peak_amp * math.exp(
        -((tod - cfg.morning_peak_hour) ** 2) / two_sigma_sq
    ) + cfg.evening_peak_amp * math.exp(-((tod - cfg.evening_peak_hour) ** 2) / two_sigma_sq)
    noise = cfg.load_noise_amp * np.sin(cfg.load_noise_freq * t + cfg.load_noise_phases)
    return cfg.base_loads + peaks + noise


def load_demand(node: int, t: float, cfg: ScenarioConfig) -> float:
    """Load demand of one node at time ``t`` (hours)."""
    if not 0 <= node < cfg.n_nodes:
        raise IndexError(f"node {node} out of range for {cfg.n_nodes} nodes")
    return float(load_demand_all(t, cfg)[node])


def net_power_all(t: float, cfg: ScenarioConfig) -> np.ndarray:
    """Solar minus load for every node at time ``t``: the charging rate vector."""
    return solar_power(t, cfg) - load_demand_all(t, cfg)


def net_power(node: int, t: float, cfg: ScenarioConfig) -> float:
    """Solar minus load for one node; positive while the battery charges."""
    if not 0 <= node < cfg.n_nodes:
        raise IndexError(f"node {node} out of range for {cfg.n_nodes} nodes")
    return float(net_power_all(t, cfg)[node])
