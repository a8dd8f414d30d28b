"""Resolved model and simulation parameters in internal units.

All angular frequencies are rad/s, energies are expressed as temperatures
(kelvin, i.e. E/k_B), and the squared electron temperature xi carries K^2.
Conversion from the SI config surface happens exactly once, in
``config.load_config``; everything downstream consumes these dataclasses.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

from .constants import HBAR_OVER_KB
from .errors import ConfigError
from .floquet import PeriodicHamiltonian
from .thermo import ThermoParams


@dataclass
class ModelParams:
    """Physical parameters of the driven qubit plus calorimeter."""

    omega_q: float  # rad/s
    omega_L: float  # rad/s
    kappa: float
    g2: float
    thermo: ThermoParams

    def __post_init__(self) -> None:
        if self.omega_q <= 0 or self.omega_L <= 0:
            raise ConfigError("omega_q and omega_L must be positive")
        if self.kappa < 0:
            raise ConfigError("kappa must be non-negative")
        if self.g2 < 0:
            raise ConfigError("g2 must be non-negative")
        if self.kappa > 0 and self.g2 > 0.1 * self.kappa:
            warnings.warn(
                f"g2 = {self.g2} is not small against kappa = {self.kappa}; "
                "the weak-coupling (secular) rate treatment degrades",
                stacklevel=2,
            )

    @property
    def drive(self) -> PeriodicHamiltonian:
        return PeriodicHamiltonian(
            omega_q=self.omega_q, kappa=self.kappa, omega_L=self.omega_L
        )

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_L

    @property
    def e_q(self) -> float:
        """Qubit splitting as a temperature, K."""
        return self.omega_q * HBAR_OVER_KB

    @property
    def e_l(self) -> float:
        """Drive quantum as a temperature, K."""
        return self.omega_L * HBAR_OVER_KB

    def with_g2(self, g2: float) -> "ModelParams":
        return replace(self, g2=g2)


@dataclass
class SimConfig:
    """Time stepping, horizon, recording, and reproducibility settings."""

    dt: float
    n_steps: int
    seed: int
    n_trajectories: int
    record: str = "final-only"  # "full-path" | "final-only" | "histogram"
    downsample: int = 1
    bins: int = 100
    range: tuple[float, float] | None = None
    qubit_init: str | tuple[float, float] = "thermal"
    phonon_noise: bool = True
    n_max: int = 8
    channel_threshold: float = 1e-10
    threads: int = 1
    grid_points: int = 2048
    m_samples: int = 256
    # config-surface originals, kept so a dumped config round-trips exactly
    dt_factor: float | None = None
    horizon_periods: float | None = None

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be non-negative")
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be at least 1")
        if self.record not in ("full-path", "final-only", "histogram"):
            raise ConfigError(f"unknown record mode {self.record!r}")
        if self.downsample < 1:
            raise ConfigError("downsample must be at least 1")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if isinstance(self.qubit_init, str):
            if self.qubit_init not in ("thermal", "level0", "level1"):
                raise ConfigError(f"unknown qubit_init {self.qubit_init!r}")
        else:
            w0, w1 = self.qubit_init
            if w0 < 0 or w1 < 0 or w0 + w1 <= 0:
                raise ConfigError("qubit_init weights must be non-negative, not both zero")


def sim_config_for(
    model: ModelParams,
    horizon_periods: float,
    seed: int,
    n_trajectories: int,
    dt_factor: float = 100.0,
    **kwargs,
) -> SimConfig:
    """Build a SimConfig with dt = 1/(dt_factor*omega_q) and a period-based horizon.

    The step count is the nearest integer to horizon_periods*period/dt, so
    the simulated endpoint n_steps*dt is within half a step of the requested
    horizon; consumers needing exact time alignment should read n_steps*dt.
    """
    if dt_factor <= 0:
        raise ConfigError("dt_factor must be positive")
    if horizon_periods < 0:
        raise ConfigError("horizon_periods must be non-negative")
    dt = 1.0 / (dt_factor * model.omega_q)
    n_steps = round(horizon_periods * model.period / dt)
    return SimConfig(
        dt=dt,
        n_steps=n_steps,
        seed=seed,
        n_trajectories=n_trajectories,
        dt_factor=dt_factor,
        horizon_periods=horizon_periods,
        **kwargs,
    )
