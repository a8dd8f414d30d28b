"""Calorimeter temperature dynamics in the squared-temperature variable.

The electron gas has heat capacity linear in temperature, so the energy
balance closes in xi = T_e^2: phonon coupling relaxes xi toward T_p^2,
thermal noise enters additively with its amplitude frozen at T_p, and each
qubit jump donates a fixed xi-kick proportional to the transition energy.
A reflecting boundary at xi = 0 is realized by taking |xi| after each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .constants import HBAR, HBAR_OVER_KB, K_B


@dataclass
class ThermoParams:
    """Calorimeter material and bath parameters (SI).

    sigma_v
        Electron-phonon coupling times volume, W/K^5.
    t_p
        Phonon (substrate) temperature, K.
    c
        Heat-capacity coefficient, J/K^2: the capacity at temperature T is
        c*T. Optional metadata records its microscopic decomposition into an
        electron count and per-electron coefficient.
    """

    sigma_v: float
    t_p: float
    c: float
    n_electrons: float | None = None
    gamma_e: float | None = None
    epsilon_f: float | None = None

    def __post_init__(self) -> None:
        if self.sigma_v <= 0 or self.t_p <= 0 or self.c <= 0:
            raise ValueError("sigma_v, t_p and c must all be positive")
        if self.epsilon_f is not None and self.gamma_e is not None:
            expected = math.pi**2 * K_B**2 / (4.0 * self.epsilon_f)
            if abs(self.gamma_e - expected) > 1e-12 * expected:
                raise ValueError(
                    "gamma_e inconsistent with the Sommerfeld coefficient "
                    f"pi^2 k_B^2/(4 eps_F) = {expected:.6e} J/K^2"
                )

    @property
    def c_over_kB(self) -> float:
        """Heat-capacity coefficient in units of k_B, 1/K."""
        return self.c / K_B

    @property
    def sv_over_kB(self) -> float:
        """Coupling per k_B, 1/(s K^4)."""
        return self.sigma_v / K_B

    @property
    def drift_coefficient(self) -> float:
        """sigma_v/c in 1/(s K^3); multiplies (T_p^5 - xi^{5/2})."""
        return self.sigma_v / self.c

    @property
    def kick_scale(self) -> float:
        """xi-kick per unit transition energy: (hbar*omega/k_B)/(c/k_B), K^2 per K."""
        return 1.0 / self.c_over_kB


def reflect(xi):
    """Reflecting boundary at xi = 0."""
    return np.abs(xi)


def jump_kick(xi, omega: float, params: ThermoParams):
    """Temperature-squared after absorbing one quantum hbar*omega.

    Negative omega (the qubit absorbing from the calorimeter) cools; the
    result is reflected at zero.
    """
    return reflect(xi + HBAR_OVER_KB * omega * params.kick_scale)


def phonon_drift(xi, params: ThermoParams):
    """Deterministic relaxation rate of xi in K^2/s: sigma_v*(T_p^5 - xi^{5/2})/c."""
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("xi must be non-negative")
    val = params.drift_coefficient * (params.t_p**5 - xi**2.5)
    return float(val) if val.ndim == 0 else val


def phonon_noise_amplitude(params: ThermoParams) -> float:
    """Additive noise amplitude sqrt(10*sigma_v*k_B)*T_p^3/c in K^2/sqrt(s)."""
    return math.sqrt(10.0 * params.sigma_v * K_B) * params.t_p**3 / params.c


def sigma_from_material(kappa_ep: float, m: float, k_F: float, v_s: float) -> float:
    """Electron-phonon coupling density from deformation-potential parameters.

    Sigma = 12 kappa_ep^2 zeta(5) m k_B^5 / (pi k_F v_s^2 hbar^6), W/K^5/m^3.
    """
    if min(kappa_ep, m, k_F, v_s) <= 0:
        raise ValueError("all material parameters must be positive")
    return 12.0 * kappa_ep**2 * zeta(5) * m * K_B**5 / (math.pi * k_F * v_s**2 * HBAR**6)


def euler_step(xi, drift, noise_amp, dW, kicks, dt: float):
    """One Euler-Maruyama update: reflect(xi + drift*dt + noise_amp*dW + sum(kicks)).

    ``dW`` must be drawn as Normal(0, dt); ``kicks`` is an iterable of xi
    increments (hbar*omega/c each) landed during this step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    total_kick = math.fsum(kicks) if kicks else 0.0
    return reflect(xi + drift * dt + noise_amp * dW + total_kick)


def relaxation_time_phonon(params: ThermoParams) -> float:
    """Linearized pure-phonon relaxation time of xi at xi = T_p^2.

    d(drift)/d(xi) at T_p^2 is -2.5*(sigma_v/c)*T_p^3; the return value is
    the inverse magnitude.
    """
    return 1.0 / (2.5 * params.drift_coefficient * params.t_p**3)
