"""Effective one-dimensional description of the calorimeter temperature.

Averaging over the fast qubit jumps reduces the two-component master
equation for (branch, squared temperature X) to a single drift-diffusion
equation in X. This module assembles the averaged drift J(X) and diffusion
S(X) with their first- and second-order jump contributions, locates the
steady state and its relaxation time, evaluates the stationary density, and
integrates both the reduced Fokker-Planck equation and the underlying
two-component master equation for cross-validation against Monte Carlo.

Everything is expressed in physical time: the heat capacity coefficient C
(J/K^2) carries the slow-time scaling, jump kicks move X by
delta_c = hbar*omega_c/C (K^2), and rates are per second.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .constants import HBAR, HBAR_OVER_KB
from .errors import (
    ConfigError,
    DegenerateSpectrumError,
    GridAlignmentError,
    InstabilityError,
    NoSteadyStateError,
    NumericalError,
    SchemeFailureError,
)
from .floquet import FloquetSpectrum, JumpChannel
from .jumps import gamma_rate
from .params import ModelParams
from .thermo import phonon_noise_amplitude


@dataclass
class RateMatrices:
    """Jump-moment generator matrices at the evaluation points.

    g[k] has shape X.shape + (2, 2); entry (r, s) sums (-delta_c)^k times
    the channel rate over every channel taking branch s to branch r, with
    delta_c = hbar*omega_c/C the squared-temperature kick.
    """

    x: np.ndarray
    g: dict[int, np.ndarray]


@dataclass
class SpectralProjection:
    """Eigenstructure of the branch-hopping generator at one X."""

    q: np.ndarray  # stationary populations, (2,)
    lam: float  # nonzero eigenvalue, <= 0
    q_perp: np.ndarray
    v: np.ndarray
    z: np.ndarray


@dataclass
class EffectiveCoeffs:
    """Drift and diffusion of the reduced X process on a uniform grid."""

    grid: np.ndarray
    drift: np.ndarray  # J, K^2/s
    diffusion: np.ndarray  # S, K^4/s
    components: dict[str, np.ndarray]
    _j_func: object = field(default=None, repr=False, compare=False)


@dataclass
class SteadyStateResult:
    x_s: float
    t_s: float
    roots: list[float]


@dataclass
class OUApprox:
    """Linearization of the X process around a stable steady state."""

    x_s: float
    t_s: float
    tau_s: float  # s
    variance: float  # stationary variance of X, K^4
    diffusion_at_root: float

    def spectrum(self, omega):
        """Lorentzian power spectrum of the linearized process."""
        w = np.asarray(omega, dtype=float)
        val = self.diffusion_at_root * self.tau_s**2 / (1.0 + (w * self.tau_s) ** 2)
        return float(val) if val.ndim == 0 else val


@dataclass
class StationaryDensity:
    grid: np.ndarray
    density: np.ndarray  # over X, unit mass
    te: np.ndarray
    density_te: np.ndarray  # over T_e = sqrt(X), Jacobian 2*T_e applied


@dataclass
class FPTrajectory:
    times: np.ndarray
    densities: np.ndarray  # (n_times, n_grid)
    grid: np.ndarray


@dataclass
class MasterTrajectory:
    times: np.ndarray
    densities: np.ndarray  # (n_times, 2, n_grid)
    grid: np.ndarray

    def marginal(self, i: int) -> np.ndarray:
        """X marginal (both branches summed) at snapshot i."""
        return self.densities[i].sum(axis=0)


# -- generator assembly ----------------------------------------------------


def _channel_entries(channels: list[JumpChannel]):
    """(row, col) target of each channel's generator entry, plus kick sign.

    Raising populates branch 1 from 0, lowering branch 0 from 1, dephasing
    is branch-diagonal and contributes to both diagonal entries.
    """
    entries = []
    for i, ch in enumerate(channels):
        if ch.s == 1:
            entries.append((i, 1, 0))
        elif ch.s == -1:
            entries.append((i, 0, 1))
        else:
            entries.append((i, 0, 0))
            entries.append((i, 1, 1))
    return entries


def rate_matrices(
    channels: list[JumpChannel], params: ModelParams, X, orders=(0, 1, 2)
) -> RateMatrices:
    """Moment-weighted 2x2 jump generators evaluated at X (scalar or array)."""
    x = np.asarray(X, dtype=float)
    if np.any(x <= 0.0):
        raise ConfigError("rate matrices require X > 0")
    te = np.sqrt(x)
    c_over_kB = params.thermo.c_over_kB
    out = {k: np.zeros(x.shape + (2, 2)) for k in orders}
    if params.g2 > 0.0:
        for i, r, s in _channel_entries(channels):
            ch = channels[i]
            rate = gamma_rate(ch.omega, te, params.g2) * abs(ch.amplitude) ** 2
            delta = ch.omega * HBAR_OVER_KB / c_over_kB  # K^2 kick
            for k in orders:
                out[k][..., r, s] += (-delta) ** k * rate
    return RateMatrices(x=x, g=out)


_SYMPLECTIC = np.array([[0.0, -1.0], [1.0, 0.0]])


def spectral_projection(g0: np.ndarray) -> SpectralProjection:
    """Stationary populations and eigenvectors of the branch generator.

    The generator M built from g0 has a zero mode Q (normalized against
    Z = (1,1)) and one decaying mode at lam = -(g0[1,0] + g0[0,1]); the
    dephasing diagonal of g0 cancels out of M and is ignored here.
    """
    g0 = np.asarray(g0, dtype=float)
    a = g0[1, 0]  # branch 0 -> 1
    b = g0[0, 1]  # branch 1 -> 0
    tot = a + b
    if tot <= 0.0:
        raise DegenerateSpectrumError(
            "both inter-branch rates vanish; no unique stationary population"
        )
    q = np.array([b, a]) / tot
    z = np.array([1.0, 1.0])
    q_perp = _SYMPLECTIC @ q
    v = _SYMPLECTIC @ z
    return SpectralProjection(q=q, lam=-tot, q_perp=q_perp, v=v, z=z)


# -- drift and diffusion ---------------------------------------------------


def _pointwise(channels, params: ModelParams, x: np.ndarray) -> dict:
    """Algebraic (derivative-free) pieces of the coefficients at points x.

    Returns arrays over x: phonon drift a, populations q (2, nX), lam,
    g1q (2, nX), j1, b1 = <Z|G1 JZ>, w = <Q_perp|G1 Q>.
    """
    th = params.thermo
    a_ph = th.drift_coefficient * (th.t_p**5 - x**2.5)
    n = x.size
    if params.g2 == 0.0 or not channels:
        zeros = np.zeros(n)
        return {
            "a": a_ph,
            "q": np.vstack([np.ones(n), np.zeros(n)]),
            "lam": zeros.copy(),
            "g1q": np.zeros((2, n)),
            "j1": zeros.copy(),
            "b1": zeros.copy(),
            "w": zeros.copy(),
        }
    mats = rate_matrices(channels, params, x, orders=(0, 1))
    g0 = mats.g[0]
    g1 = mats.g[1]
    up = g0[..., 1, 0]
    dn = g0[..., 0, 1]
    tot = up + dn
    if np.any(tot <= 0.0):
        raise DegenerateSpectrumError("inter-branch rates vanish inside the grid")
    q0 = dn / tot
    q1 = up / tot
    lam = -tot
    g1q0 = g1[..., 0, 0] * q0 + g1[..., 0, 1] * q1
    g1q1 = g1[..., 1, 0] * q0 + g1[..., 1, 1] * q1
    j1 = -(g1q0 + g1q1)
    # <Z|G1 JZ> with JZ = (-1, 1)
    b1 = -g1[..., 0, 0] + g1[..., 0, 1] - g1[..., 1, 0] + g1[..., 1, 1]
    # <Q_perp|G1 Q> with Q_perp = JQ = (-q1, q0)
    w = -q1 * g1q0 + q0 * g1q1
    return {
        "a": a_ph,
        "q": np.vstack([q0, q1]),
        "lam": lam,
        "g1q": np.vstack([g1q0, g1q1]),
        "j1": j1,
        "b1": b1,
        "w": w,
    }


def _ddx(arr: np.ndarray, h: float) -> np.ndarray:
    """Central difference along the last axis, one-sided at the ends."""
    d = np.empty_like(arr)
    d[..., 1:-1] = (arr[..., 2:] - arr[..., :-2]) / (2.0 * h)
    d[..., 0] = (arr[..., 1] - arr[..., 0]) / h
    d[..., -1] = (arr[..., -1] - arr[..., -2]) / h
    return d


def _second_order_drift(c: dict, h: float, lam_safe: np.ndarray) -> np.ndarray:
    """Three-term jump-averaged drift correction on a uniform grid."""
    aq = c["a"][None, :] * c["q"]  # A(X) * Q_r(X)
    l1q = -_ddx(aq, h)
    q_perp = np.vstack([-c["q"][1], c["q"][0]])
    term1 = c["b1"] * (q_perp * l1q).sum(axis=0) / lam_safe
    dg1q = _ddx(c["g1q"], h)
    term2 = c["b1"] * (q_perp * dg1q).sum(axis=0) / lam_safe
    t3 = c["b1"] * c["w"] / lam_safe
    term3 = -_ddx(t3, h)
    return term1 + term2 + term3


def drift_and_diffusion(
    channels: list[JumpChannel], params: ModelParams, grid: np.ndarray
) -> EffectiveCoeffs:
    """Assemble J(X) and S(X) with their component breakdown on the grid.

    J = phonon drift + j1 + j2 and S = phonon noise + Delta1 + Delta2; the
    derivative terms inside j2 use central differences at the grid spacing
    (one-sided at the two boundary nodes).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 5:
        raise ConfigError("coefficient grid must be 1-D with at least 5 points")
    if grid[0] <= 0.0:
        raise ConfigError("coefficient grid touches the singular boundary X = 0")
    dh = np.diff(grid)
    h = float(dh[0])
    if h <= 0.0 or not np.allclose(dh, h, rtol=1e-9, atol=0.0):
        raise ConfigError("coefficient grid must be uniformly spaced")

    c = _pointwise(channels, params, grid)
    amp = phonon_noise_amplitude(params.thermo)
    s_ph = np.full(grid.size, amp * amp)

    jump_free = params.g2 == 0.0 or not channels
    if jump_free:
        j2 = np.zeros(grid.size)
        delta1 = np.zeros(grid.size)
        delta2 = np.zeros(grid.size)
    else:
        lam = c["lam"]
        j2 = _second_order_drift(c, h, lam)
        delta1 = _delta1(channels, params, grid)
        delta2 = 2.0 * c["b1"] * c["w"] / np.abs(lam)

    drift = c["a"] + c["j1"] + j2
    diffusion = s_ph + delta1 + delta2
    components = {
        "phonon_drift": c["a"],
        "j1": c["j1"],
        "j2": j2,
        "phonon_noise": s_ph,
        "delta1": delta1,
        "delta2": delta2,
    }

    def j_func(x: float) -> float:
        """Total drift at an arbitrary X > h, same stencil width as the grid."""
        if jump_free:
            th = params.thermo
            return th.drift_coefficient * (th.t_p**5 - x**2.5)
        pts = np.array([x - h, x, x + h])
        if pts[0] <= 0.0:
            pts = np.array([x, x + h, x + 2.0 * h])
            ic = 0
        else:
            ic = 1
        cc = _pointwise(channels, params, pts)
        aq = cc["a"][None, :] * cc["q"]
        g1q = cc["g1q"]
        t3 = cc["b1"] * cc["w"] / cc["lam"]
        span = pts[2] - pts[0]
        dl1 = -(aq[:, 2] - aq[:, 0]) / span
        dg = (g1q[:, 2] - g1q[:, 0]) / span
        dt3 = (t3[2] - t3[0]) / span
        q_perp = np.array([-cc["q"][1, ic], cc["q"][0, ic]])
        j2v = (
            cc["b1"][ic] * (q_perp @ dl1) / cc["lam"][ic]
            + cc["b1"][ic] * (q_perp @ dg) / cc["lam"][ic]
            - dt3
        )
        return float(cc["a"][ic] + cc["j1"][ic] + j2v)

    return EffectiveCoeffs(
        grid=grid,
        drift=drift,
        diffusion=diffusion,
        components=components,
        _j_func=j_func,
    )


def _delta1(channels, params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Second-moment jump diffusion <Z|G2 Q>, a sum of positive addends."""
    mats = rate_matrices(channels, params, x, orders=(0, 2))
    g0, g2m = mats.g[0], mats.g[2]
    up = g0[..., 1, 0]
    dn = g0[..., 0, 1]
    tot = up + dn
    q0 = dn / tot
    q1 = up / tot
    return (g2m[..., 0, 0] + g2m[..., 1, 0]) * q0 + (
        g2m[..., 0, 1] + g2m[..., 1, 1]
    ) * q1


# -- steady state and linearization ----------------------------------------


def steady_state(
    coeffs: EffectiveCoeffs, mc_mean_x: float | None = None
) -> SteadyStateResult:
    """Roots of J(X) = 0, bracketed on the grid, bisected to 1e-12 K^2.

    With several roots all are reported (with a warning); the primary one is
    the root nearest a supplied Monte Carlo long-run mean of X, or the
    smallest otherwise.
    """
    grid, j = coeffs.grid, coeffs.drift
    f = coeffs._j_func if coeffs._j_func is not None else (
        lambda x: float(np.interp(x, grid, j))
    )
    brackets = []
    for i in range(grid.size - 1):
        if j[i] == 0.0:
            brackets.append((grid[i], grid[i]))
        elif j[i] * j[i + 1] < 0.0:
            brackets.append((grid[i], grid[i + 1]))
    if j[-1] == 0.0:
        brackets.append((grid[-1], grid[-1]))
    if not brackets:
        raise NoSteadyStateError("drift does not change sign on the grid")

    roots = []
    for lo, hi in brackets:
        if lo == hi:
            roots.append(float(lo))
            continue
        flo = f(lo)
        if flo == 0.0:
            roots.append(float(lo))
            continue
        # bisection against the sign at the left edge
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            fm = f(mid)
            if fm == 0.0:
                lo = hi = mid
                break
            if (fm > 0.0) == (flo > 0.0):
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))

    if len(roots) > 1:
        warnings.warn(
            f"drift has {len(roots)} steady states; reporting all", stacklevel=2
        )
        if mc_mean_x is not None:
            primary = min(roots, key=lambda r: abs(r - mc_mean_x))
        else:
            primary = min(roots)
    else:
        primary = roots[0]
    return SteadyStateResult(x_s=primary, t_s=math.sqrt(primary), roots=roots)


def closed_form_TS(params: ModelParams, spectrum: FloquetSpectrum) -> float:
    """Zero-temperature closed-form steady temperature for the driven qubit.

    Evaluates the fifth-power balance between phonon cooling and the
    drive-quantum heating channels, with the channel weights at their
    zero-temperature values.
    """
    th = params.thermo
    wl = params.omega_L
    nu = spectrum.nu
    theta = spectrum.theta
    s2 = math.sin(0.5 * theta) ** 2
    c2 = math.cos(0.5 * theta) ** 2
    sin_sq = math.sin(theta) ** 2
    num = HBAR * (wl + nu) ** 3 * s2**2 + HBAR * (wl - nu) ** 3 * c2**2
    den = (wl + nu) * s2**2 + (wl - nu) * c2**2
    bracket = HBAR * wl**2 * sin_sq + num / den
    x5 = th.t_p**5 + params.g2 * bracket / th.sigma_v
    return x5 ** (1.0 / 5.0)


def ou_linearization(coeffs: EffectiveCoeffs, x_s: float) -> OUApprox:
    """Ornstein-Uhlenbeck parameters of the X process near a steady state.

    tau_S = -1/J'(X_S) with J' from central differences on the coefficient
    grid; the stationary variance is S(X_S) tau_S / 2 and the power spectrum
    the matching Lorentzian.
    """
    grid = coeffs.grid
    if not (grid[0] <= x_s <= grid[-1]):
        raise ConfigError("steady state lies outside the coefficient grid")
    h = grid[1] - grid[0]
    dj = _ddx(coeffs.drift, float(h))
    slope = float(np.interp(x_s, grid, dj))
    if slope >= 0.0:
        raise InstabilityError(
            f"drift slope {slope:.3e}/s at the root is non-negative"
        )
    tau = -1.0 / slope
    s_root = float(np.interp(x_s, grid, coeffs.diffusion))
    return OUApprox(
        x_s=x_s,
        t_s=math.sqrt(x_s),
        tau_s=tau,
        variance=0.5 * s_root * tau,
        diffusion_at_root=s_root,
    )


def stationary_density(coeffs: EffectiveCoeffs) -> StationaryDensity:
    """No-flux stationary solution of the reduced drift-diffusion equation.

    F(X) proportional to (1/S) exp(2 int J/S dX) with the integral taken by
    the cumulative trapezoid rule from the left grid edge; normalized to
    unit mass, and also reported as a density over T_e = sqrt(X).
    """
    grid, j, s = coeffs.grid, coeffs.drift, coeffs.diffusion
    if np.any(s <= 0.0):
        raise NumericalError("diffusion coefficient must be positive on the grid")
    ratio = 2.0 * j / s
    phi = np.concatenate(
        [[0.0], np.cumsum(0.5 * (ratio[1:] + ratio[:-1]) * np.diff(grid))]
    )
    log_f = phi - np.log(s)
    log_f -= log_f.max()
    f = np.exp(log_f)
    mass = np.trapezoid(f, grid)
    f /= mass
    te = np.sqrt(grid)
    return StationaryDensity(grid=grid, density=f, te=te, density_te=f * 2.0 * te)


# -- PDE integrators -------------------------------------------------------


def _bernoulli(w: np.ndarray) -> np.ndarray:
    """B(w) = w/(e^w - 1), the exponential-fitting flux weight."""
    out = np.empty_like(w)
    small = np.abs(w) < 1e-8
    out[small] = 1.0 - 0.5 * w[small]
    ws = w[~small]
    with np.errstate(over="ignore"):
        out[~small] = ws / np.expm1(ws)
    # w -> +inf underflows to 0, w -> -inf tends to -w; both finite
    out[np.isnan(out)] = 0.0
    return out


def _flux_matrix(grid: np.ndarray, j: np.ndarray, s: np.ndarray):
    """Tridiagonal generator of the conservative drift-diffusion flux.

    Fluxes use exponential fitting between nodes: the advective velocity is
    J - S'/2 and the diffusion S/2, so pure drift and pure diffusion limits
    are both exact and the scheme preserves positivity. Returns the three
    diagonals (lower, main, upper) of dP/dt = L P with no-flux boundaries.
    """
    n = grid.size
    h = float(grid[1] - grid[0])
    sp = _ddx(s, h)
    v = j - 0.5 * sp
    d = 0.5 * s
    v_e = 0.5 * (v[:-1] + v[1:])
    d_e = 0.5 * (d[:-1] + d[1:])
    if np.any(d_e <= 0.0):
        raise NumericalError("diffusion must stay positive between grid nodes")
    w = v_e * h / d_e
    b_minus = _bernoulli(-w)  # weight of the left node, outgoing rightward
    b_plus = _bernoulli(w)  # weight of the right node, incoming leftward
    g = d_e / (h * h)
    # flux_{i+1/2} = g_i * (b_minus_i P_i - b_plus_i P_{i+1}) * h
    lower = np.zeros(n)
    main = np.zeros(n)
    upper = np.zeros(n)
    out_right = g * b_minus
    in_left = g * b_plus
    main[:-1] -= out_right
    upper[1:] += in_left
    main[1:] -= in_left
    lower[:-1] += out_right
    return lower, main, upper


def _solve_implicit(lower, main, upper, dt, p):
    """One backward-Euler step of dP/dt = L P via a banded solve."""
    n = main.size
    ab = np.zeros((3, n))
    ab[0, 1:] = -dt * upper[1:]
    ab[1, :] = 1.0 - dt * main
    ab[2, :-1] = -dt * lower[:-1]
    return solve_banded((1, 1), ab, p)


def integrate_fp(
    initial: np.ndarray,
    coeffs: EffectiveCoeffs,
    t_final: float,
    dt_grid: float,
    n_records: int = 101,
) -> FPTrajectory:
    """Evolve a density under the reduced drift-diffusion equation.

    Backward-Euler in time on the exponential-fitted conservative fluxes;
    unconditionally stable, mass-conserving, positivity-preserving.
    """
    grid = coeffs.grid
    p = np.asarray(initial, dtype=float).copy()
    if p.shape != grid.shape:
        raise ConfigError("initial density must live on the coefficient grid")
    if t_final < 0 or dt_grid <= 0:
        raise ConfigError("t_final must be >= 0 and dt_grid > 0")
    lower, main, upper = _flux_matrix(grid, coeffs.drift, coeffs.diffusion)
    n_steps = max(1, int(math.ceil(t_final / dt_grid))) if t_final > 0 else 0
    dt = t_final / n_steps if n_steps else 0.0
    rec = np.unique(np.linspace(0, n_steps, min(n_records, n_steps + 1)).astype(int))
    times = rec * dt
    out = np.empty((rec.size, grid.size))
    mass0 = float(p.sum())
    ri = 0
    if rec[0] == 0:
        out[0] = p
        ri = 1
    for k in range(1, n_steps + 1):
        p = _solve_implicit(lower, main, upper, dt, p)
        if ri < rec.size and k == rec[ri]:
            out[ri] = p
            ri += 1
    if n_steps:
        mass = float(p.sum())
        if abs(mass - mass0) > 1e-8 * max(abs(mass0), 1.0) * max(t_final, 1.0):
            raise SchemeFailureError("probability mass drifted beyond tolerance")
        if p.min() < -1e-10 * max(abs(p).max(), 1.0):
            raise SchemeFailureError("density developed significant negative values")
    return FPTrajectory(times=times, densities=out, grid=grid)


# -- two-component master equation -----------------------------------------


def kick_aligned_grid(
    channels: list[JumpChannel],
    params: ModelParams,
    x_min: float,
    x_max: float,
) -> np.ndarray:
    """Uniform X grid whose spacing divides every jump kick.

    The spacing is the drive-quantum kick divided by q, with q the smallest
    of {10, 20, 40, 80} aligning all kicks to 1e-9 relative; failing that,
    q = 64 is accepted if every kick rounds to a whole number of cells
    within 1%, else the grid is refused.
    """
    if x_min <= 0 or x_max <= x_min:
        raise ConfigError("need 0 < x_min < x_max for the master-equation grid")
    c_over_kB = params.thermo.c_over_kB
    delta_l = params.e_l / c_over_kB
    kicks = np.array(
        [abs(ch.omega) * HBAR_OVER_KB / c_over_kB for ch in channels] or [delta_l]
    )
    chosen = None
    for q in (10, 20, 40, 80):
        ratio = kicks / (delta_l / q)
        if np.all(np.abs(ratio - np.round(ratio)) <= 1e-9 * np.maximum(ratio, 1.0)):
            chosen = q
            break
    if chosen is None:
        q = 64
        ratio = kicks / (delta_l / q)
        if np.all(np.abs(ratio - np.round(ratio)) <= 0.01 * np.maximum(ratio, 1.0)):
            chosen = q
        else:
            raise GridAlignmentError(
                "jump kicks are incommensurate with the drive-quantum grid"
            )
    h = delta_l / chosen
    n0 = max(1, int(math.floor(x_min / h)))
    n1 = int(math.ceil(x_max / h))
    if n1 - n0 < 4:
        raise ConfigError("master-equation grid would have fewer than 5 cells")
    return np.arange(n0, n1 + 1, dtype=float) * h


def _shift_indices(channels, params, h: float):
    """Whole-cell shift per channel; refuses misalignment beyond 1%."""
    c_over_kB = params.thermo.c_over_kB
    shifts = []
    for ch in channels:
        kick = ch.omega * HBAR_OVER_KB / c_over_kB
        k = kick / h
        kr = int(round(k))
        if abs(k - kr) > 0.01 * max(abs(k), 1.0):
            raise GridAlignmentError(
                f"kick of channel (s={ch.s}, n={ch.n}) is {k:.6f} cells; "
                "grid spacing must divide every kick within 1%"
            )
        shifts.append(kr)
    return shifts


def _apply_shift(arr: np.ndarray, k: int) -> np.ndarray:
    """Move arr by k cells, clamping off-grid mass into the boundary cell."""
    if k == 0:
        return arr.copy()
    out = np.zeros_like(arr)
    if k > 0:
        if k < arr.size:
            out[k:] = arr[:-k]
            out[-1] += arr[-k:].sum()
        else:
            out[-1] = arr.sum()
    else:
        k = -k
        if k < arr.size:
            out[:-k] = arr[k:]
            out[0] += arr[:k].sum()
    return out


def integrate_master(
    initial: np.ndarray,
    grid: np.ndarray,
    channels: list[JumpChannel],
    params: ModelParams,
    t_final: float,
    dt: float | None = None,
    n_records: int = 101,
    phonon: bool = True,
    apply_kicks: bool = True,
) -> MasterTrajectory:
    """Evolve the two-component (branch, X) density.

    Strang splitting: an implicit phonon half-step on each branch, one
    explicit jump step with exact cell shifts for the temperature kicks,
    then the second phonon half-step. ``phonon=False`` freezes X between
    kicks and ``apply_kicks=False`` suppresses the kick shifts (both used
    by relaxation cross-checks).
    """
    grid = np.asarray(grid, dtype=float)
    p = np.array(initial, dtype=float)
    if p.shape != (2, grid.size):
        raise ConfigError("initial master density must have shape (2, len(grid))")
    if grid[0] <= 0.0:
        raise ConfigError("master grid touches X = 0")
    dh = np.diff(grid)
    h = float(dh[0])
    if not np.allclose(dh, h, rtol=1e-9, atol=0.0):
        raise ConfigError("master grid must be uniformly spaced")
    shifts = _shift_indices(channels, params, h) if channels else []
    if not apply_kicks:
        shifts = [0] * len(shifts)

    te = np.sqrt(grid)
    rates = [
        gamma_rate(ch.omega, te, params.g2) * abs(ch.amplitude) ** 2
        if params.g2 > 0
        else np.zeros(grid.size)
        for ch in channels
    ]
    # (channel, source branch, target branch); dephasing acts on both branches
    moves = []
    for i, ch in enumerate(channels):
        if ch.s == 1:
            moves.append((i, 0, 1))
        elif ch.s == -1:
            moves.append((i, 1, 0))
        else:
            moves.append((i, 0, 0))
            moves.append((i, 1, 1))

    th = params.thermo
    if phonon:
        a_ph = th.drift_coefficient * (th.t_p**5 - grid**2.5)
        amp = phonon_noise_amplitude(th)
        s_ph = np.full(grid.size, amp * amp)
        lower, main, upper = _flux_matrix(grid, a_ph, s_ph)

    total_rate = np.zeros(grid.size)
    for i, src, _ in moves:
        total_rate += rates[i]
    lam_max = float(total_rate.max()) if moves else 0.0
    if dt is None:
        dt = t_final / 100.0 if t_final > 0 else 1.0
        if lam_max > 0:
            dt = min(dt, 0.05 / lam_max)
    n_steps = max(1, int(math.ceil(t_final / dt))) if t_final > 0 else 0
    dt = t_final / n_steps if n_steps else 0.0
    n_sub = max(1, int(math.ceil(dt * lam_max / 0.1))) if lam_max > 0 else 1
    dt_sub = dt / n_sub

    rec = np.unique(np.linspace(0, n_steps, min(n_records, n_steps + 1)).astype(int))
    times = rec * dt
    out = np.empty((rec.size, 2, grid.size))
    mass0 = float(p.sum())
    ri = 0
    if rec[0] == 0:
        out[0] = p
        ri = 1
    move_shifts = [shifts[i] for i, _, _ in moves]
    for k in range(1, n_steps + 1):
        if phonon:
            p[0] = _solve_implicit(lower, main, upper, 0.5 * dt, p[0])
            p[1] = _solve_implicit(lower, main, upper, 0.5 * dt, p[1])
        for _ in range(n_sub):
            dp = np.zeros_like(p)
            for (i, src, dst), sh in zip(moves, move_shifts):
                flux = rates[i] * p[src]
                dp[src] -= flux
                dp[dst] += _apply_shift(flux, sh)
            p += dt_sub * dp
        if phonon:
            p[0] = _solve_implicit(lower, main, upper, 0.5 * dt, p[0])
            p[1] = _solve_implicit(lower, main, upper, 0.5 * dt, p[1])
        if ri < rec.size and k == rec[ri]:
            out[ri] = p
            ri += 1
    if n_steps:
        mass = float(p.sum())
        if abs(mass - mass0) > 1e-8 * max(abs(mass0), 1.0) * max(t_final, 1.0):
            raise SchemeFailureError("master-equation mass drifted beyond tolerance")
    return MasterTrajectory(times=times, densities=out, grid=grid)
