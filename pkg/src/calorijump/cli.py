"""Command-line surface: parameter files in, diff-able CSV/JSON out.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 validation
failure. Errors print a one-line JSON record to stderr so sweep scripts can
triage failures mechanically.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import effective as eff
from . import stats
from .config import RunManifest, load_config
from .constants import KB_OVER_HBAR
from .errors import CalorijumpError, ConfigError
from .floquet import (
    analytic_gap,
    build_monochromatic,
    diagonalize_monodromy,
    integrate_monodromy,
    jump_channels,
    matrix_elements,
)
from .jumps import gamma_rate
from .params import ModelParams, SimConfig
from .simulate import run_ensemble
from .thermo import phonon_noise_amplitude, relaxation_time_phonon


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_csv(path, header: list[str], columns: list[np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in zip(*columns):
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _emit_error(exc: BaseException) -> None:
    record = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)


def _load(args) -> tuple[ModelParams, SimConfig]:
    model, sim = load_config(args.config)
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    threads = args.threads
    if threads is None:
        env = os.environ.get("CALORIJUMP_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ConfigError(
                    f"CALORIJUMP_THREADS must be an integer, got {env!r}"
                ) from exc
    if threads is not None:
        sim = replace(sim, threads=threads)
    return model, sim


def _g2_values(args, model: ModelParams) -> list[float]:
    if args.g2:
        return list(args.g2)
    return [model.g2]


def _build_channels(model: ModelParams, sim: SimConfig):
    spectrum = build_monochromatic(model.drive, m_samples=sim.m_samples)
    elements = matrix_elements(spectrum, n_max=sim.n_max)
    channels = jump_channels(elements, spectrum, threshold=sim.channel_threshold)
    return spectrum, channels


def _coefficient_grid(model: ModelParams, sim: SimConfig, spectrum) -> np.ndarray:
    """Default X grid [(T_p/10)^2, (3 T_S_estimate)^2]."""
    t_p = model.thermo.t_p
    ts_est = t_p
    if model.g2 > 0:
        ts_est = max(ts_est, eff.closed_form_TS(model, spectrum))
    return np.linspace((t_p / 10.0) ** 2, (3.0 * ts_est) ** 2, sim.grid_points)


def _cmd_floquet(args) -> int:
    model, sim = _load(args)
    spectrum, channels = _build_channels(model, sim)
    rec = {
        "record": "spectrum",
        "quasi_energies_K": list(spectrum.quasi_energies),
        "nu_rad_per_s": spectrum.nu,
        "theta": spectrum.theta,
        "period_s": model.period,
        "m_samples": int(spectrum.modes.shape[1]),
    }
    print(json.dumps(rec))
    for ch in channels:
        print(
            json.dumps(
                {
                    "record": "channel",
                    "s": ch.s,
                    "n": ch.n,
                    "omega_rad_per_s": ch.omega,
                    "amplitude_re": ch.amplitude.real,
                    "amplitude_im": ch.amplitude.imag,
                    "weight": abs(ch.amplitude) ** 2,
                    "operator_form": ch.operator_form,
                }
            )
        )
    return 0


def _run_dir(base: Path, g2_values: list[float], g2: float) -> Path:
    if len(g2_values) == 1:
        return base
    d = base / f"g2={g2:.17g}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _cmd_simulate(args) -> int:
    model, sim = _load(args)
    base = Path(args.out)
    base.mkdir(parents=True, exist_ok=True)
    values = _g2_values(args, model)
    for g2 in values:
        model_g = model.with_g2(g2)
        out_dir = _run_dir(base, values, g2)
        result = run_ensemble(sim, model_g)
        manifest = RunManifest.for_run(model_g, sim, __version__)

        final_path = out_dir / "final_te.csv"
        n = result.final_te.size
        _write_csv(
            final_path,
            ["trajectory", "final_te", "pop0", "pop1", "n_jumps"],
            [
                np.arange(n),
                result.final_te,
                result.final_populations[:, 0],
                result.final_populations[:, 1],
                result.n_jumps,
            ],
        )
        manifest.add_output(final_path)

        if result.te_paths is not None:
            path_file = out_dir / "te_paths.csv"
            header = ["time"] + [f"te_{i}" for i in range(n)]
            _write_csv(path_file, header, [result.times] + list(result.te_paths))
            manifest.add_output(path_file)

        if result.histogram is not None:
            counts, edges = result.histogram
            widths = np.diff(edges)
            total = counts.sum()
            density = counts / (total * widths) if total else np.zeros_like(widths)
            hist_file = out_dir / "histogram.csv"
            _write_csv(
                hist_file,
                ["bin_left", "bin_right", "count", "density"],
                [edges[:-1], edges[1:], counts, density],
            )
            manifest.add_output(hist_file)

        manifest.write(out_dir / "manifest.json")
    return 0


def _cmd_effective(args) -> int:
    model, sim = _load(args)
    base = Path(args.out)
    base.mkdir(parents=True, exist_ok=True)
    values = _g2_values(args, model)
    for g2 in values:
        model_g = model.with_g2(g2)
        spectrum, channels = _build_channels(model_g, sim)
        grid = _coefficient_grid(model_g, sim, spectrum)
        coeffs = eff.drift_and_diffusion(channels, model_g, grid)
        out_dir = _run_dir(base, values, g2)
        comp = coeffs.components
        _write_csv(
            out_dir / "effective.csv",
            [
                "X",
                "drift",
                "diffusion",
                "phonon_drift",
                "j1",
                "j2",
                "phonon_noise",
                "delta1",
                "delta2",
            ],
            [
                grid,
                coeffs.drift,
                coeffs.diffusion,
                comp["phonon_drift"],
                comp["j1"],
                comp["j2"],
                comp["phonon_noise"],
                comp["delta1"],
                comp["delta2"],
            ],
        )
    return 0


def _cmd_steady(args) -> int:
    model, sim = _load(args)
    for g2 in _g2_values(args, model):
        model_g = model.with_g2(g2)
        spectrum, channels = _build_channels(model_g, sim)
        grid = _coefficient_grid(model_g, sim, spectrum)
        ch_list = channels if model_g.g2 > 0 else []
        coeffs = eff.drift_and_diffusion(ch_list, model_g, grid)
        root = eff.steady_state(coeffs)
        ou = eff.ou_linearization(coeffs, root.x_s)
        if model_g.g2 > 0:
            closed = eff.closed_form_TS(model_g, spectrum)
        else:
            closed = model_g.thermo.t_p
        print(f"g2 = {_fmt(g2)}")
        print(f"T_S_root = {_fmt(root.t_s)}")
        print(f"T_S_closed_form = {_fmt(closed)}")
        print(f"tau_S = {_fmt(ou.tau_s)}")
        print(f"X_root = {_fmt(root.x_s)}")
        print(f"n_roots = {len(root.roots)}")
    return 0


def _cmd_spectrum(args) -> int:
    model, sim = _load(args)
    base = Path(args.out)
    base.mkdir(parents=True, exist_ok=True)
    values = _g2_values(args, model)
    for g2 in values:
        model_g = model.with_g2(g2)
        sim_g = replace(sim, record="full-path")

        # linearized relaxation time, used for the burn-in and the fit band
        tau_est = None
        try:
            spectrum_f, channels = _build_channels(model_g, sim_g)
            ch_list = channels if model_g.g2 > 0 else []
            grid = _coefficient_grid(model_g, sim_g, spectrum_f)
            coeffs = eff.drift_and_diffusion(ch_list, model_g, grid)
            root = eff.steady_state(coeffs)
            tau_est = eff.ou_linearization(coeffs, root.x_s).tau_s
        except CalorijumpError:
            pass

        result = run_ensemble(sim_g, model_g)
        paths = result.te_paths
        if result.times.size < 2:
            raise ConfigError("spectrum needs a recorded path, not a single sample")
        sample_dt = float(result.times[1] - result.times[0])
        if tau_est is not None:
            burn = int(math.ceil(8.0 * tau_est / sample_dt))
        else:
            burn = paths.shape[1] // 4
        if paths.shape[1] - burn < 1024:
            raise ConfigError(
                "fewer than 1024 stationary samples after burn-in; "
                "extend horizon_periods or reduce downsample"
            )
        segment = paths[:, burn:]

        band = None
        if tau_est is not None:
            nyq = math.pi / sample_dt
            lo, hi = 3.0 / tau_est, nyq / 4.0
            if lo < hi:
                band = (lo, hi)

        # each Welch segment must span many relaxation times or the
        # per-segment detrend eats the low-frequency shoulder
        n_seg = args.segments
        if n_seg is None:
            n_seg = 8
            if tau_est is not None:
                span = segment.shape[1] * sample_dt
                n_seg = int(min(8, 2.0 * span / (150.0 * tau_est) - 1.0))
                if n_seg < 1:
                    need = math.ceil(150.0 * tau_est / model_g.period)
                    raise ConfigError(
                        "record too short to resolve the relaxation knee: "
                        f"need at least {need} drive periods past burn-in"
                    )

        pgs = [
            stats.periodogram(row, sample_dt, band=band, n_segments=n_seg)
            for row in segment
        ]
        omega = pgs[0].frequencies
        power = np.mean([p.power for p in pgs], axis=0)
        fit_band = band if band is not None else (float(omega[0]), float(omega[-1]))
        slope, stderr = stats.fit_loglog_slope(omega, power, fit_band)

        out_dir = _run_dir(base, values, g2)
        _write_csv(out_dir / "spectrum.csv", ["omega", "power"], [omega, power])
        print(
            json.dumps(
                {
                    "g2": g2,
                    "slope": slope,
                    "slope_stderr": stderr,
                    "band_lo": fit_band[0],
                    "band_hi": fit_band[1],
                    "tau_s_estimate": tau_est,
                    "n_paths": int(segment.shape[0]),
                }
            )
        )
    return 0


def _cmd_validate(args) -> int:
    model, sim = _load(args)
    failures = 0

    def check(name: str, ok: bool, detail: str = "") -> None:
        nonlocal failures
        tag = "ok" if ok else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"{tag} - {name}{suffix}")
        if not ok:
            failures += 1

    # quasi-energy gap: numeric monodromy vs closed form
    worst = 0.0
    for kappa, ratio in ((0.05, 1.0), (0.12, 0.7), (0.02, 1.3)):
        m = replace(model, kappa=kappa, omega_L=ratio * model.omega_q)
        nu_ref = analytic_gap(m.omega_q, m.kappa, m.omega_L)
        spec_num = diagonalize_monodromy(
            integrate_monodromy(m.drive, steps=4096, scheme="cf4")
        )
        wl = m.omega_L
        dist = nu_ref
        for s in (spec_num.nu, -spec_num.nu):
            e = (nu_ref - s) % wl
            dist = min(dist, e, wl - e)
        worst = max(worst, dist / nu_ref)
    check("quasi-energy gap, monodromy vs closed form", worst <= 1e-7, f"{worst:.2e}")

    # channel selection at the configured parameters
    try:
        spectrum, channels = _build_channels(model, sim)
        theta = spectrum.theta
        expected = {
            abs(math.sin(theta)) / 2.0,
            math.sin(theta / 2.0) ** 2,
            math.cos(theta / 2.0) ** 2,
        }
        got = {abs(c.amplitude) for c in channels}
        amp_err = max(
            min(abs(g - e) for e in expected) for g in got
        )
        check(
            "six jump channels with the analytic amplitudes",
            len(channels) == 6 and amp_err <= 1e-8,
            f"count {len(channels)}, amplitude err {amp_err:.2e}",
        )
    except CalorijumpError as exc:
        check("six jump channels with the analytic amplitudes", False, str(exc))

    # detailed balance of the rate function
    g2p = model.g2 if model.g2 > 0 else 0.01
    db_err = 0.0
    for w, te in ((1.3e11, 0.2), (5e10, 0.07), (2.2e11, 0.45)):
        ratio = gamma_rate(w, te, g2p) / gamma_rate(-w, te, g2p)
        db_err = max(db_err, abs(ratio - math.exp(w / (KB_OVER_HBAR * te))) / ratio)
    check("detailed balance of jump rates", db_err <= 1e-12, f"{db_err:.2e}")

    # determinism of a small ensemble across reruns and thread counts
    sim_small = replace(
        sim, n_trajectories=16, n_steps=min(sim.n_steps, 400), record="final-only"
    )
    runs = [
        run_ensemble(replace(sim_small, threads=t), model) for t in (1, 4, 1)
    ]
    same = all(
        np.array_equal(runs[0].final_te, r.final_te)
        and np.array_equal(runs[0].n_jumps, r.n_jumps)
        for r in runs[1:]
    )
    check("bit-identical ensembles across reruns and thread counts", same)

    # conservation of the reduced drift-diffusion integrator
    m0 = model.with_g2(0.0)
    t_p = m0.thermo.t_p
    grid = np.linspace((t_p / 10.0) ** 2, (3.0 * t_p) ** 2, 512)
    coeffs = eff.drift_and_diffusion([], m0, grid)
    tau0 = relaxation_time_phonon(m0.thermo)
    p0 = np.exp(-0.5 * ((grid - t_p**2) / (0.2 * t_p**2)) ** 2)
    p0 /= p0.sum() * (grid[1] - grid[0])
    fp = eff.integrate_fp(p0, coeffs, t_final=tau0, dt_grid=tau0 / 50)
    mass_err = abs(
        fp.densities[-1].sum() * (grid[1] - grid[0])
        - p0.sum() * (grid[1] - grid[0])
    )
    check("drift-diffusion integrator conserves mass", mass_err <= 1e-8, f"{mass_err:.2e}")

    # phonon-only steady state sits at the phonon temperature
    root = eff.steady_state(coeffs)
    check(
        "zero-coupling steady state at the phonon temperature",
        abs(root.x_s - t_p**2) <= 1e-10,
        f"|X_s - T_p^2| = {abs(root.x_s - t_p**2):.2e}",
    )

    # cross-module identity: relaxation time vs drift slope at equilibrium
    slope = 2.5 * m0.thermo.drift_coefficient * t_p**3
    tau_id = abs(relaxation_time_phonon(m0.thermo) * slope - 1.0)
    check("phonon relaxation time matches the drift slope", tau_id <= 1e-12, f"{tau_id:.2e}")

    # noise amplitude squared equals the diffusion constant in the coefficients
    amp = phonon_noise_amplitude(m0.thermo)
    s_err = abs(coeffs.diffusion[0] - amp * amp) / (amp * amp)
    check("phonon noise amplitude consistent with diffusion", s_err <= 1e-14, f"{s_err:.2e}")

    if failures:
        print(f"{failures} validation check(s) failed")
        return 4
    print("all validation checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="calorijump",
        description="Driven-qubit calorimetry: trajectories, effective "
        "description, spectra.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="parameter file")
        p.add_argument("--seed", type=int, default=None, help="override the seed")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (falls back to CALORIJUMP_THREADS, then config)",
        )
        p.add_argument(
            "--g2",
            type=float,
            action="append",
            default=None,
            help="coupling override; repeat for a sweep",
        )

    for name, fn, extra in (
        ("floquet", _cmd_floquet, "dump the drive spectrum and jump channels"),
        ("simulate", _cmd_simulate, "run a trajectory ensemble"),
        ("effective", _cmd_effective, "tabulate drift/diffusion coefficients"),
        ("steady", _cmd_steady, "steady temperature from both routes"),
        ("spectrum", _cmd_spectrum, "steady-state periodogram and slope"),
        ("validate", _cmd_validate, "run the invariant suite"),
    ):
        p = sub.add_parser(name, help=extra)
        common(p)
        p.set_defaults(handler=fn)
        if name == "spectrum":
            p.add_argument(
                "--segments",
                type=int,
                default=None,
                help="Welch segment count (default: chosen from the relaxation time)",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        _emit_error(exc)
        return 2
    except CalorijumpError as exc:
        _emit_error(exc)
        return 3
    except OSError as exc:
        _emit_error(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
