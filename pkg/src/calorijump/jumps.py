"""Jump rates and conditional state updates for the driven qubit.

The qubit state lives in the two-dimensional Floquet-mode basis; between
jumps it follows a norm-preserving nonlinear drift, and jumps project it
onto the target branch (or flip the relative sign, for dephasing). Rates
follow the golden-rule spectral function of an ohmic electron bath at the
instantaneous calorimeter temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import HBAR_OVER_KB, KB_OVER_HBAR
from .errors import ConfigError, ImpossibleJumpError
from .floquet import JumpChannel

# Below this |x| = hbar*omega/(k_B T) the closed form loses digits to
# cancellation; three series terms keep the relative error under 1e-24.
_SERIES_CUT = 1e-6
# Above this |x| the thermal factor is flat zero in double precision, so the
# rates equal their T = 0 limits exactly; routing those lanes to the cold
# branch also keeps subnormal temperatures from overflowing x itself.
_COLD_CUT = 700.0


@dataclass
class QubitState:
    """Amplitudes on the two Floquet branches at the period start."""

    c0: complex
    c1: complex

    def normalized(self) -> "QubitState":
        n = math.sqrt(abs(self.c0) ** 2 + abs(self.c1) ** 2)
        if n == 0.0:
            raise ImpossibleJumpError("cannot normalize the zero state")
        return QubitState(self.c0 / n, self.c1 / n)

    @property
    def populations(self) -> tuple[float, float]:
        return abs(self.c0) ** 2, abs(self.c1) ** 2


@dataclass
class RateParams:
    """Coupling strength and per-channel transition energies.

    ``channel_energies`` holds hbar*omega_c/k_B in kelvin for each channel,
    in channel-list order.
    """

    g2: float
    channel_energies: np.ndarray

    def __post_init__(self) -> None:
        if self.g2 <= 0:
            raise ConfigError("g2 must be positive")
        self.channel_energies = np.asarray(self.channel_energies, dtype=float)

    @classmethod
    def from_channels(cls, channels: list[JumpChannel], g2: float) -> "RateParams":
        energies = np.array([ch.omega * HBAR_OVER_KB for ch in channels])
        return cls(g2=g2, channel_energies=energies)


def gamma_rate(omega, T_e, g2: float):
    """Bath spectral rate g^2 * omega * e^x/(e^x - 1), x = hbar*omega/(k_B T_e).

    Accepts scalars or broadcasting arrays of omega and T_e. Exact limits:
    omega -> 0 gives g^2 k_B T_e/hbar; T_e = 0 gives g^2*omega for emission
    and 0 for absorption. Never negative, never NaN. A single exponential of
    -|x| is evaluated, so large |x| cannot overflow.
    """
    omega = np.asarray(omega, dtype=float)
    T = np.asarray(T_e, dtype=float)
    if np.any(T < 0):
        raise ConfigError("temperature must be non-negative")

    scalar = omega.ndim == 0 and T.ndim == 0
    omega, T = np.broadcast_arrays(np.atleast_1d(omega), np.atleast_1d(T))
    shape = omega.shape
    omega = omega.ravel()
    T = T.ravel()
    out = np.empty(omega.shape, dtype=float)

    cold = (T == 0.0) | (np.abs(omega) * HBAR_OVER_KB >= _COLD_CUT * T)
    # T = 0 (or indistinguishable from it): pure spontaneous emission.
    out[cold] = g2 * np.where(omega[cold] > 0.0, omega[cold], 0.0)

    warm = ~cold
    if warm.any():
        w = omega[warm]
        t = T[warm]
        x = HBAR_OVER_KB * w / t
        ax = np.abs(x)
        e = np.exp(-ax)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = ax * np.where(x > 0.0, 1.0, e) / (1.0 - e)
        small = ax < _SERIES_CUT
        if small.any():
            xs = x[small]
            f[small] = 1.0 + xs * (0.5 + xs / 12.0)
        out[warm] = g2 * (KB_OVER_HBAR * t) * f

    return float(out[0]) if scalar else out.reshape(shape)


def channel_rates(
    state: QubitState, T_e, channels: list[JumpChannel], params: RateParams
):
    """Per-channel jump rates Gamma(omega_c, T_e) * ||A_c psi||^2.

    The squared jump norm is |amplitude|^2 weighted by the source
    population: |c0|^2 for raising, |c1|^2 for lowering, 1 for dephasing.
    """
    p0, p1 = state.populations
    occ = np.array(
        [p0 if ch.s == 1 else (p1 if ch.s == -1 else 1.0) for ch in channels]
    )
    amps2 = np.array([abs(ch.amplitude) ** 2 for ch in channels])
    omegas = np.array([ch.omega for ch in channels])
    return gamma_rate(omegas, T_e, params.g2) * amps2 * occ


def channel_weights(
    channels: list[JumpChannel], T_e, params: RateParams
) -> np.ndarray:
    """State-independent channel weights Gamma(omega_c, T_e)*|amplitude_c|^2.

    T_e may be an array; the result broadcasts to T_e.shape + (n_channels,).
    The simulator multiplies these by the source populations itself.
    """
    amps2 = np.array([abs(ch.amplitude) ** 2 for ch in channels])
    omegas = np.array([ch.omega for ch in channels])
    T = np.asarray(T_e, dtype=float)
    return gamma_rate(omegas, T[..., None], params.g2) * amps2


def drift_step(
    state: QubitState,
    T_e: float,
    channels: list[JumpChannel],
    params: RateParams,
    dt: float,
) -> QubitState:
    """One explicit Euler step of the no-jump conditional drift, renormalized.

    With w_plus/w_minus/w_zero the summed raising/lowering/dephasing weights,
    the increment is

        dc0 = (1/2)[w_plus(|c0|^2-1) + w_minus|c1|^2 + w_zero(n^2-1)] c0 dt
        dc1 = (1/2)[w_minus(|c1|^2-1) + w_plus|c0|^2 + w_zero(n^2-1)] c1 dt

    where n^2 is the squared norm; the dephasing term vanishes identically on
    normalized input and is kept for faithfulness to the generator.
    """
    if dt == 0.0:
        return state
    weights = channel_weights(channels, float(T_e), params)
    w_plus = sum(w for ch, w in zip(channels, weights) if ch.s == 1)
    w_minus = sum(w for ch, w in zip(channels, weights) if ch.s == -1)
    w_zero = sum(w for ch, w in zip(channels, weights) if ch.s == 0)
    wmax = max(w_plus, w_minus, w_zero)
    if dt * wmax >= 0.1:
        raise ConfigError("drift step too large: dt*max(rate) must stay below 0.1")
    p0 = abs(state.c0) ** 2
    p1 = abs(state.c1) ** 2
    nn = p0 + p1
    c0 = state.c0 + 0.5 * dt * (w_plus * (p0 - 1.0) + w_minus * p1 + w_zero * (nn - 1.0)) * state.c0
    c1 = state.c1 + 0.5 * dt * (w_minus * (p1 - 1.0) + w_plus * p0 + w_zero * (nn - 1.0)) * state.c1
    return QubitState(c0, c1).normalized()


def apply_jump(state: QubitState, channel: JumpChannel) -> QubitState:
    """Project the state through one jump operator and renormalize.

    Raising lands on branch 1, lowering on branch 0 (keeping the source
    amplitude's phase); dephasing flips the sign of the branch-0 amplitude.
    A zero-norm image signals a sampler bug and raises.
    """
    if channel.s == 1:
        a = abs(state.c0)
        if a < 1e-14:
            raise ImpossibleJumpError("raising jump from an empty lower branch")
        return QubitState(0.0, state.c0 / a)
    if channel.s == -1:
        a = abs(state.c1)
        if a < 1e-14:
            raise ImpossibleJumpError("lowering jump from an empty upper branch")
        return QubitState(state.c1 / a, 0.0)
    return QubitState(-state.c0, state.c1).normalized()
