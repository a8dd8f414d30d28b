"""Statistical indicators for simulated temperature records.

Moments and histograms of ensemble samples, Welch power spectra of
steady-state paths with a log-log slope fit, and exponential relaxation
fits of ensemble means. Everything operates on plain arrays; the CLI layer
handles serialization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.optimize import curve_fit

from .errors import ConfigError, FitError, NumericalError


@dataclass
class MomentSet:
    """Mean, population standard deviation, and skewness of a sample set.

    The standard deviation uses the 1/n normalization; skewness is the
    central third moment over std cubed and comes out NaN for degenerate
    (zero-spread or n < 3) input.
    """

    mean: float
    std: float
    skewness: float
    n_samples: int


@dataclass
class Periodogram:
    frequencies: np.ndarray  # rad/s, positive ascending
    power: np.ndarray  # K^2 s/rad for temperature input
    slope: float
    slope_stderr: float
    band: tuple[float, float]
    parseval_ratio: float


@dataclass
class RelaxationFit:
    alpha: float  # 1/s
    asymptote: float  # fitted long-time mean
    start_value: float  # observed mean at the window start
    residual: float  # rms misfit over the window
    alpha_stderr: float


def moments(samples) -> MomentSet:
    """Population moments of a 1-D sample set."""
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ConfigError("moments need at least two samples")
    mean = float(x.mean())
    d = x - mean
    var = float(np.mean(d * d))
    std = math.sqrt(var)
    if n >= 3 and std > 0.0:
        skew = float(np.mean(d**3)) / std**3
    else:
        skew = float("nan")
    return MomentSet(mean=mean, std=std, skewness=skew, n_samples=n)


def merge_moments(a: MomentSet, b: MomentSet) -> MomentSet:
    """Combine moment sets of two disjoint sample blocks exactly."""
    n = a.n_samples + b.n_samples
    wa, wb = a.n_samples / n, b.n_samples / n
    delta = b.mean - a.mean
    mean = a.mean + wb * delta
    m2a = a.std**2 * a.n_samples
    m2b = b.std**2 * b.n_samples
    m3a = a.skewness * a.std**3 * a.n_samples if np.isfinite(a.skewness) else 0.0
    m3b = b.skewness * b.std**3 * b.n_samples if np.isfinite(b.skewness) else 0.0
    m2 = m2a + m2b + delta**2 * wa * wb * n
    m3 = (
        m3a
        + m3b
        + delta**3 * wa * wb * (wa - wb) * n
        + 3.0 * delta * (wa * m2b - wb * m2a)
    )
    var = m2 / n
    std = math.sqrt(var)
    skew = (m3 / n) / std**3 if n >= 3 and std > 0.0 else float("nan")
    return MomentSet(mean=mean, std=std, skewness=skew, n_samples=n)


def histogram(samples, bins: int, range_: tuple[float, float] | None = None):
    """Unit-mass density histogram; returns (edges, density)."""
    if bins < 1:
        raise ConfigError("need at least one histogram bin")
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ConfigError("cannot histogram an empty sample set")
    if range_ is not None and not range_[1] > range_[0]:
        raise ConfigError("histogram range must have positive width")
    if range_ is None and x.min() == x.max():
        # single repeated value: one unit-mass bin of token width around it
        w = max(abs(x[0]), 1.0) * 1e-9
        range_ = (x[0] - 0.5 * w, x[0] + 0.5 * w)
    density, edges = np.histogram(x, bins=bins, range=range_, density=True)
    return edges, density


def total_variation(edges: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """TV distance between two densities given on the same bin edges."""
    widths = np.diff(edges)
    return 0.5 * float(np.abs(p - q) @ widths)


def periodogram(
    path,
    sample_dt: float,
    band: tuple[float, float] | None = None,
    n_segments: int = 8,
) -> Periodogram:
    """Welch power spectrum in angular frequency with a log-log slope fit.

    The path is split into ``n_segments`` Hann-windowed segments with 50%
    overlap (n_segments=1 gives the plain single-segment estimate for
    cross-checks). The zero-frequency bin is dropped, frequencies are
    converted to rad/s and the density rescaled accordingly. The slope of
    log power against log frequency is fitted by least squares inside
    ``band`` (rad/s; the full resolvable range when omitted).
    """
    x = np.asarray(path, dtype=float).ravel()
    if x.size < 1024:
        raise ConfigError("periodogram needs at least 1024 samples")
    if sample_dt <= 0:
        raise ConfigError("sample_dt must be positive")
    if n_segments < 1:
        raise ConfigError("n_segments must be at least 1")
    if n_segments == 1:
        nperseg = x.size
    else:
        # 50% overlap: L = nperseg*(n_segments+1)/2
        nperseg = int(2 * x.size / (n_segments + 1))
    freqs, pxx = signal.welch(
        x,
        fs=1.0 / sample_dt,
        window="hann",
        nperseg=nperseg,
        noverlap=nperseg // 2,
        detrend="constant",
        scaling="density",
    )
    freqs, pxx = freqs[1:], pxx[1:]  # drop DC

    df = freqs[1] - freqs[0] if freqs.size > 1 else 1.0 / (nperseg * sample_dt)
    power_total = float(pxx.sum() * df)
    var = float(np.var(x))
    ratio = power_total / var if var > 0 else float("nan")
    if not (0.95 <= ratio <= 1.05):
        raise NumericalError(
            f"spectrum fails the power-variance consistency check (ratio {ratio:.4f})"
        )

    omega = 2.0 * math.pi * freqs
    p_omega = pxx / (2.0 * math.pi)
    if band is None:
        band = (float(omega[0]), float(omega[-1]))
    lo, hi = band
    slope, stderr = fit_loglog_slope(omega, p_omega, (lo, hi))
    return Periodogram(
        frequencies=omega,
        power=p_omega,
        slope=slope,
        slope_stderr=stderr,
        band=(float(lo), float(hi)),
        parseval_ratio=ratio,
    )


def fit_loglog_slope(
    omega: np.ndarray, power: np.ndarray, band: tuple[float, float]
) -> tuple[float, float]:
    """Least-squares slope of log power vs log frequency inside band."""
    lo, hi = band
    sel = (omega >= lo) & (omega <= hi)
    if sel.sum() < 3:
        raise ConfigError("slope band contains fewer than 3 resolvable frequencies")
    positive = power[sel] > 0
    lx = np.log(omega[sel][positive])
    ly = np.log(power[sel][positive])
    if lx.size < 3:
        raise NumericalError("too few positive power values inside the slope band")
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, _, _ = np.linalg.lstsq(a, ly, rcond=None)
    slope = float(coef[0])
    dof = lx.size - 2
    if dof > 0 and res.size:
        s2 = float(res[0]) / dof
        sxx = float(np.sum((lx - lx.mean()) ** 2))
        stderr = math.sqrt(s2 / sxx)
    else:
        stderr = float("nan")
    return slope, stderr


def fit_relaxation(
    times,
    means,
    t0: float | None = None,
    t1: float | None = None,
) -> RelaxationFit:
    """Exponential fit m(t) = m_inf + (m(t0) - m_inf) exp(-alpha (t - t0)).

    The asymptote is free, the initial value is pinned to the observed mean
    at the window start, and alpha is constrained positive through the fit
    starting point. Raises on non-convergence.
    """
    t = np.asarray(times, dtype=float).ravel()
    m = np.asarray(means, dtype=float).ravel()
    if t.size != m.size or t.size < 4:
        raise ConfigError("need matching times/means with at least 4 points")
    if t0 is None:
        t0 = float(t[0])
    if t1 is None:
        t1 = float(t[-1])
    sel = (t >= t0) & (t <= t1)
    if sel.sum() < 4:
        raise ConfigError("fit window contains fewer than 4 samples")
    tw, mw = t[sel], m[sel]
    m_start = float(mw[0])
    span = float(tw[-1] - tw[0])
    if span <= 0:
        raise ConfigError("fit window has zero duration")

    def model(tt, m_inf, alpha):
        return m_inf + (m_start - m_inf) * np.exp(-alpha * (tt - tw[0]))

    p0 = (float(mw[-1]), 3.0 / span)
    try:
        popt, pcov = curve_fit(model, tw, mw, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"relaxation fit did not converge: {exc}") from exc
    m_inf, alpha = float(popt[0]), float(popt[1])
    if not np.isfinite(alpha) or alpha <= 0:
        raise FitError(f"relaxation fit produced a non-decaying rate {alpha!r}")
    resid = mw - model(tw, *popt)
    rms = math.sqrt(float(np.mean(resid**2)))
    perr = float(np.sqrt(pcov[1, 1])) if np.all(np.isfinite(pcov)) else float("nan")
    return RelaxationFit(
        alpha=alpha,
        asymptote=m_inf,
        start_value=m_start,
        residual=rms,
        alpha_stderr=perr,
    )
