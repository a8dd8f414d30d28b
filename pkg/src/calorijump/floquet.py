"""Floquet analysis of a periodically driven two-level system.

Two independent routes to the same spectrum:

* ``build_monochromatic`` solves the circularly driven qubit exactly by
  transforming to the frame co-rotating with the drive (no rotating-wave
  approximation is made; the transformation is exact for this drive).
* ``integrate_monodromy`` + ``diagonalize_monodromy`` propagate one period
  numerically and diagonalize the resulting monodromy matrix.

Both routes produce periodic mode functions on a uniform time grid, from
which ``matrix_elements`` extracts drive harmonics of the coupling operator
and ``jump_channels`` builds the discrete jump-channel table.

Basis convention: component 0 is the upper sigma_z level, so the bare ground
state is the vector (0, 1).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .constants import HBAR_OVER_KB, KB_OVER_HBAR
from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    EmptyChannelError,
    FrequencyCollisionError,
    NumericalError,
    TimeStepError,
)

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)

# Gauss-Legendre nodes (offsets within a step) and the two weight pairs of
# the commutator-free fourth-order scheme.
_CF4_C1 = 0.5 - math.sqrt(3.0) / 6.0
_CF4_C2 = 0.5 + math.sqrt(3.0) / 6.0
_CF4_A1 = (3.0 - 2.0 * math.sqrt(3.0)) / 12.0
_CF4_A2 = (3.0 + 2.0 * math.sqrt(3.0)) / 12.0


@dataclass
class PeriodicHamiltonian:
    """Drive definition.

    ``h_func``, used when ``drive_kind == "custom"``, must return H(t)/hbar
    as a 2x2 Hermitian array in rad/s; it must be periodic with the drive
    period 2*pi/omega_L.
    """

    omega_q: float
    kappa: float
    omega_L: float
    drive_kind: str = "monochromatic"
    h_func: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if self.drive_kind not in ("monochromatic", "custom"):
            raise ConfigError(f"unknown drive_kind {self.drive_kind!r}")
        if self.omega_L <= 0:
            raise ConfigError("omega_L must be positive")
        if self.drive_kind == "custom" and self.h_func is None:
            raise ConfigError("custom drive requires h_func")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega_L


@dataclass
class FloquetSpectrum:
    """Folded quasi-energies and periodic modes on a uniform time grid.

    quasi_energies
        (eps_0, eps_1) in kelvin, folded to [-E_L/2, +E_L/2) where
        E_L = hbar*omega_L/k_B.
    modes
        Complex array of shape (2, M, 2): branch, time sample, component.
        modes[r, j] is phi_{r,0}(t_j) with t_j = j*period/M.
    nu
        Spectral gap in rad/s. The analytic builder stores the rotating-frame
        splitting sqrt(Delta^2 + 4*kappa^2*omega_q^2); the monodromy route
        stores the folded eigenphase gap |eps_0 - eps_1|*k_B/hbar.
    theta
        Mixing angle (monochromatic case; None for generic numeric spectra).
    """

    quasi_energies: tuple[float, float]
    modes: np.ndarray
    times: np.ndarray
    nu: float
    theta: float | None
    params: PeriodicHamiltonian

    @property
    def gap_rad(self) -> float:
        """Signed folded transition frequency (eps_0 - eps_1)*k_B/hbar."""
        return (self.quasi_energies[0] - self.quasi_energies[1]) * KB_OVER_HBAR


@dataclass
class MatrixElements:
    """Drive harmonics D_{r,s,n} of the transverse coupling operator.

    Normalization: <phi_r(t)|sigma_x|phi_s(t)> = sum_n e^{+i n omega_L t} D_{r,s,n}.
    """

    d: np.ndarray  # (2, 2, 2*n_max+1), harmonic index n stored at n + n_max
    n_max: int

    def get(self, r: int, s: int, n: int) -> complex:
        if abs(n) > self.n_max:
            raise IndexError(f"harmonic {n} outside |n| <= {self.n_max}")
        return complex(self.d[r, s, n + self.n_max])


@dataclass
class JumpChannel:
    """One discrete jump channel.

    ``s`` is the branch change (+1 raising, -1 lowering, 0 dephasing), ``n``
    the drive-harmonic index, ``omega`` the transition frequency
    s*(eps_0-eps_1)/hbar - n*omega_L in rad/s, and ``amplitude`` the matrix
    element multiplying the jump operator.
    """

    s: int
    n: int
    omega: float
    amplitude: complex
    operator_form: str = field(default="")

    def __post_init__(self) -> None:
        if not self.operator_form:
            self.operator_form = {1: "raising", -1: "lowering", 0: "dephasing"}[self.s]


@dataclass
class Monodromy:
    """One-period propagator plus stored intra-period samples F(t_j, 0)."""

    matrix: np.ndarray
    samples: np.ndarray
    times: np.ndarray
    period: float
    params: PeriodicHamiltonian


def analytic_gap(omega_q: float, kappa: float, omega_L: float) -> float:
    """Rotating-frame splitting sqrt((omega_q-omega_L)^2 + 4 kappa^2 omega_q^2)."""
    return math.hypot(omega_q - omega_L, 2.0 * kappa * omega_q)


def fold_frequency(value: float, omega_L: float) -> float:
    """Fold an angular frequency into [-omega_L/2, +omega_L/2)."""
    f = value / omega_L
    return (f - math.floor(f + 0.5)) * omega_L


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    """Rotate a mode vector so its largest-modulus component is real positive.

    Near-ties (relative difference below 1e-9) resolve to the lowest index so
    the convention is stable at symmetric points.
    """
    mags = np.abs(vec)
    idx = 1 if mags[1] > mags[0] * (1.0 + 1e-9) else 0
    ref = vec[idx]
    if abs(ref) == 0.0:
        return vec
    return vec * (abs(ref) / ref)


def _label_branches(vectors: np.ndarray, eps_rad: np.ndarray) -> tuple[int, int]:
    """Return (index of branch 0, index of branch 1).

    Branch 0 is the one with the larger overlap with the bare ground state
    (0, 1); score ties within 1e-6 fall back to the smaller folded
    quasi-energy.
    """
    scores = np.abs(vectors[:, 1])
    if abs(scores[0] - scores[1]) > 1e-6:
        first = int(np.argmax(scores))
    else:
        first = int(np.argmin(eps_rad))
    return first, 1 - first


def build_monochromatic(params: PeriodicHamiltonian, m_samples: int = 256) -> FloquetSpectrum:
    """Exact spectrum of the circularly driven qubit.

    Raises DegenerateSpectrumError when the rotating-frame splitting
    vanishes (resonant drive with zero coupling).
    """
    if params.drive_kind != "monochromatic":
        raise ConfigError("build_monochromatic requires a monochromatic drive")
    wq, wl, kap = params.omega_q, params.omega_L, params.kappa
    delta = wq - wl
    rabi = 2.0 * kap * wq
    nu = math.hypot(delta, rabi)
    if nu <= 1e-14 * max(abs(wq), wl):
        raise DegenerateSpectrumError("rotating-frame splitting vanishes")
    theta = math.atan2(rabi, delta)
    half = 0.5 * theta
    period = params.period

    # Rotating-frame eigenvectors and their full-period eigenvalues
    # F(T,0) = -exp(-i H_rot T/hbar), so lambda_pm = -e^{∓ i nu T/2}.
    vecs = np.array(
        [
            [math.cos(half), math.sin(half)],  # rotating-frame energy +nu/2
            [-math.sin(half), math.cos(half)],  # rotating-frame energy -nu/2
        ],
        dtype=complex,
    )
    rot_energies = np.array([0.5 * nu, -0.5 * nu])
    lams = -np.exp(-1j * rot_energies * period)
    eps_rad = -np.angle(lams) / period

    first, second = _label_branches(vecs, eps_rad)
    order = [first, second]
    vecs = np.stack([_fix_phase(vecs[i]) for i in order])
    eps_rad = eps_rad[order]
    rot_energies = rot_energies[order]

    times = np.arange(m_samples) * (period / m_samples)
    # phi_r(t) = e^{i eps_r t} U(t) e^{-i H_rot t} e_r with U(t) the frame
    # rotation; for an H_rot eigenvector the middle factor is a phase.
    phases = np.exp(1j * (eps_rad[:, None] - rot_energies[:, None]) * times[None, :])
    frame = np.stack(
        [np.exp(-0.5j * wl * times), np.exp(+0.5j * wl * times)], axis=-1
    )  # (M, 2)
    modes = phases[:, :, None] * frame[None, :, :] * vecs[:, None, :]

    return FloquetSpectrum(
        quasi_energies=(eps_rad[0] * HBAR_OVER_KB, eps_rad[1] * HBAR_OVER_KB),
        modes=modes,
        times=times,
        nu=nu,
        theta=theta,
        params=params,
    )


def _pauli_components(h: np.ndarray) -> tuple[float, float, float, float]:
    """Decompose a 2x2 Hermitian matrix (in rad/s) into (a0, ax, ay, az)."""
    scale = float(np.max(np.abs(h))) or 1.0
    if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
        raise ConfigError("Hamiltonian sample is not Hermitian")
    a0 = 0.5 * (h[0, 0].real + h[1, 1].real)
    az = 0.5 * (h[0, 0].real - h[1, 1].real)
    ax = h[0, 1].real
    ay = -h[0, 1].imag
    return a0, ax, ay, az


def _step_matrix(a0: float, ax: float, ay: float, az: float, dt: float) -> np.ndarray:
    """Closed-form exp(-i dt (a0 I + a.sigma)) for scalar Pauli components."""
    mag = math.sqrt(ax * ax + ay * ay + az * az)
    if mag == 0.0:
        return cmath.exp(-1j * a0 * dt) * np.eye(2, dtype=complex)
    c = math.cos(mag * dt)
    s = math.sin(mag * dt) / mag
    g = cmath.exp(-1j * a0 * dt)
    return g * np.array(
        [
            [c - 1j * s * az, -1j * s * (ax - 1j * ay)],
            [-1j * s * (ax + 1j * ay), c + 1j * s * az],
        ],
        dtype=complex,
    )


def _h_components(params: PeriodicHamiltonian, t: float) -> tuple[float, float, float, float]:
    if params.drive_kind == "monochromatic":
        amp = params.kappa * params.omega_q
        return 0.0, amp * math.cos(params.omega_L * t), amp * math.sin(params.omega_L * t), 0.5 * params.omega_q
    return _pauli_components(np.asarray(params.h_func(t), dtype=complex))


def _h_norm_bound(params: PeriodicHamiltonian) -> float:
    if params.drive_kind == "monochromatic":
        return math.hypot(0.5 * params.omega_q, params.kappa * params.omega_q)
    best = 0.0
    for t in np.linspace(0.0, params.period, 17):
        a0, ax, ay, az = _h_components(params, float(t))
        best = max(best, abs(a0) + math.sqrt(ax * ax + ay * ay + az * az))
    return best


def integrate_monodromy(
    params: PeriodicHamiltonian,
    steps: int,
    scheme: str = "midpoint",
    m_samples: int = 256,
) -> Monodromy:
    """Propagate one drive period, storing M intra-period samples.

    The step count is rounded up to a multiple of ``m_samples`` so the
    samples land exactly on the stored time grid. Preconditions: the step
    must satisfy dt * max||H||/hbar < 0.1.
    """
    if scheme not in ("midpoint", "cf4"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    if steps < m_samples:
        steps = m_samples
    per_sample = -(-steps // m_samples)
    steps = per_sample * m_samples
    period = params.period
    dt = period / steps
    if dt * _h_norm_bound(params) >= 0.1:
        raise TimeStepError("step too large: dt*max|H|/hbar must stay below 0.1")

    f = np.eye(2, dtype=complex)
    samples = np.empty((m_samples, 2, 2), dtype=complex)
    times = np.arange(m_samples) * (period / m_samples)
    j = 0
    for k in range(steps):
        if k % per_sample == 0:
            samples[j] = f
            j += 1
        t0 = k * dt
        if scheme == "midpoint":
            a0, ax, ay, az = _h_components(params, t0 + 0.5 * dt)
            step = _step_matrix(a0, ax, ay, az, dt)
        else:
            c1 = _h_components(params, t0 + _CF4_C1 * dt)
            c2 = _h_components(params, t0 + _CF4_C2 * dt)
            left = tuple(_CF4_A1 * u + _CF4_A2 * v for u, v in zip(c1, c2))
            right = tuple(_CF4_A2 * u + _CF4_A1 * v for u, v in zip(c1, c2))
            step = _step_matrix(*left, dt) @ _step_matrix(*right, dt)
        f = step @ f
    return Monodromy(matrix=f, samples=samples, times=times, period=period, params=params)


def monodromy_batch(
    omega_q: np.ndarray,
    kappa: np.ndarray,
    omega_L: np.ndarray,
    steps: int,
    scheme: str = "midpoint",
) -> np.ndarray:
    """One-period propagators for a batch of monochromatic drives.

    Shapes broadcast; the result is (..., 2, 2). Used by the sweep tests,
    where per-parameter Python loops would dominate the runtime.
    """
    wq, kap, wl = np.broadcast_arrays(
        np.asarray(omega_q, float), np.asarray(kappa, float), np.asarray(omega_L, float)
    )
    shape = wq.shape
    period = 2.0 * math.pi / wl
    dt = period / steps
    az = 0.5 * wq
    amp = kap * wq
    if np.max(dt * np.hypot(az, amp)) >= 0.1:
        raise TimeStepError("step too large: dt*max|H|/hbar must stay below 0.1")

    f00 = np.ones(shape, dtype=complex)
    f01 = np.zeros(shape, dtype=complex)
    f10 = np.zeros(shape, dtype=complex)
    f11 = np.ones(shape, dtype=complex)

    def apply(ax, ay, azc, step_dt):
        nonlocal f00, f01, f10, f11
        mag = np.sqrt(ax * ax + ay * ay + azc * azc)
        c = np.cos(mag * step_dt)
        s = np.sin(mag * step_dt) / mag
        m00 = c - 1j * s * azc
        m01 = -1j * s * (ax - 1j * ay)
        m10 = -1j * s * (ax + 1j * ay)
        m11 = c + 1j * s * azc
        g00 = m00 * f00 + m01 * f10
        g01 = m00 * f01 + m01 * f11
        g10 = m10 * f00 + m11 * f10
        g11 = m10 * f01 + m11 * f11
        f00, f01, f10, f11 = g00, g01, g10, g11

    for k in range(steps):
        t0 = k * dt
        if scheme == "midpoint":
            tm = t0 + 0.5 * dt
            apply(amp * np.cos(wl * tm), amp * np.sin(wl * tm), az, dt)
        else:
            t1 = t0 + _CF4_C1 * dt
            t2 = t0 + _CF4_C2 * dt
            x1, y1 = amp * np.cos(wl * t1), amp * np.sin(wl * t1)
            x2, y2 = amp * np.cos(wl * t2), amp * np.sin(wl * t2)
            # the A-weights hit every Pauli component, so the static z part
            # carries (A1+A2) = 1/2 per exponential factor
            apply(
                _CF4_A2 * x1 + _CF4_A1 * x2,
                _CF4_A2 * y1 + _CF4_A1 * y2,
                (_CF4_A1 + _CF4_A2) * az,
                dt,
            )
            apply(
                _CF4_A1 * x1 + _CF4_A2 * x2,
                _CF4_A1 * y1 + _CF4_A2 * y2,
                (_CF4_A1 + _CF4_A2) * az,
                dt,
            )

    out = np.empty(shape + (2, 2), dtype=complex)
    out[..., 0, 0] = f00
    out[..., 0, 1] = f01
    out[..., 1, 0] = f10
    out[..., 1, 1] = f11
    return out


def diagonalize_monodromy(
    monodromy: Monodromy | np.ndarray, period: float | None = None
) -> FloquetSpectrum:
    """Quasi-energies and modes from a one-period propagator.

    Accepts either the record produced by ``integrate_monodromy`` (required
    for mode construction) or a bare 2x2 matrix plus the period, which is
    enough for eigenvalue checks.
    """
    if isinstance(monodromy, Monodromy):
        f = monodromy.matrix
        period = monodromy.period
    else:
        f = np.asarray(monodromy, dtype=complex)
        if period is None:
            raise ConfigError("period required with a bare monodromy matrix")
    if f.shape != (2, 2):
        raise ConfigError("monodromy matrix must be 2x2")
    if np.max(np.abs(f.conj().T @ f - np.eye(2))) > 1e-8:
        raise ConfigError("monodromy matrix is not unitary")

    lams, vecs = np.linalg.eig(f)
    if abs(lams[0] - lams[1]) < 1e-10:
        raise DegenerateSpectrumError("monodromy eigenvalues too close to separate branches")
    # Orthonormal polish; eig already returns near-orthogonal vectors for a
    # unitary input.
    v0 = vecs[:, 0] / np.linalg.norm(vecs[:, 0])
    v1 = vecs[:, 1] - (v0.conj() @ vecs[:, 1]) * v0
    v1 /= np.linalg.norm(v1)
    vecs = np.stack([v0, v1])
    eps_rad = -np.angle(lams) / period

    first, second = _label_branches(vecs, eps_rad)
    order = [first, second]
    vecs = np.stack([_fix_phase(vecs[i]) for i in order])
    eps_rad = eps_rad[order]

    if not isinstance(monodromy, Monodromy):
        # no sampled propagator: quasi-energies only, no mode functions
        return FloquetSpectrum(
            quasi_energies=(eps_rad[0] * HBAR_OVER_KB, eps_rad[1] * HBAR_OVER_KB),
            modes=None,
            times=None,
            nu=abs(eps_rad[0] - eps_rad[1]),
            theta=None,
            params=None,
        )

    times = monodromy.times
    # phi_r(t_j) = e^{i eps_r t_j} F(t_j, 0) e_r
    proj = np.einsum("mab,rb->rma", monodromy.samples, vecs)
    phases = np.exp(1j * eps_rad[:, None] * times[None, :])
    modes = phases[:, :, None] * proj

    return FloquetSpectrum(
        quasi_energies=(eps_rad[0] * HBAR_OVER_KB, eps_rad[1] * HBAR_OVER_KB),
        modes=modes,
        times=times,
        nu=abs(eps_rad[0] - eps_rad[1]),
        theta=None,
        params=monodromy.params,
    )


def matrix_elements(spectrum: FloquetSpectrum, n_max: int = 8) -> MatrixElements:
    """Drive harmonics of <phi_r|sigma_x|phi_s> by DFT over the mode grid.

    Requires at least 4*n_max time samples; raises if spectral weight beyond
    |n| = n_max is non-negligible (aliasing).
    """
    m = spectrum.modes.shape[1]
    if m < 4 * n_max:
        raise ConfigError(f"need at least {4*n_max} time samples for n_max={n_max}")
    # dtil[r, s, j] = <phi_r(t_j)|sigma_x|phi_s(t_j)>
    bra = spectrum.modes.conj()
    ket = spectrum.modes
    dtil = np.einsum("rja,ab,sjb->rsj", bra, SIGMA_X, ket)
    coeffs = np.fft.fft(dtil, axis=-1) / m

    idx = np.arange(-n_max, n_max + 1) % m
    d = coeffs[:, :, idx]

    inside = np.zeros(m, dtype=bool)
    inside[idx] = True
    leak = np.max(np.abs(coeffs[:, :, ~inside])) if (~inside).any() else 0.0
    scale = max(np.max(np.abs(d)), 1e-300)
    if leak > 1e-8 * scale:
        raise NumericalError(
            f"harmonic content beyond |n|={n_max} ({leak:.2e} vs scale {scale:.2e}); "
            "raise n_max or the sample count"
        )
    return MatrixElements(d=d, n_max=n_max)


def jump_channels(
    elements: MatrixElements,
    spectrum: FloquetSpectrum,
    threshold: float = 1e-10,
) -> list[JumpChannel]:
    """Surviving jump channels, sorted by (s, n).

    ``threshold`` is relative to the largest harmonic amplitude. Raises when
    no channel survives or when two surviving channels share a transition
    frequency (the secular argument would not separate them).
    """
    wl = spectrum.params.omega_L
    gap = spectrum.gap_rad
    cut = threshold * float(np.max(np.abs(elements.d)))
    chans: list[JumpChannel] = []
    for s, (r, c) in ((0, (1, 1)), (1, (1, 0)), (-1, (0, 1))):
        for n in range(-elements.n_max, elements.n_max + 1):
            amp = elements.get(r, c, n)
            if abs(amp) > cut:
                chans.append(JumpChannel(s=s, n=n, omega=s * gap - n * wl, amplitude=amp))
    if not chans:
        raise EmptyChannelError("no jump channel above threshold")
    chans.sort(key=lambda ch: (ch.s, ch.n))
    freqs = np.array([ch.omega for ch in chans])
    ref = max(np.max(np.abs(freqs)), wl)
    for i in range(len(freqs)):
        for j in range(i + 1, len(freqs)):
            if abs(freqs[i] - freqs[j]) <= 1e-9 * ref:
                raise FrequencyCollisionError(
                    f"channels (s={chans[i].s}, n={chans[i].n}) and "
                    f"(s={chans[j].s}, n={chans[j].n}) collide at {freqs[i]:.6e} rad/s"
                )
    return chans
