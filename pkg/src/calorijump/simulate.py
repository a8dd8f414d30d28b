"""Monte Carlo integration of the coupled qubit-calorimeter process.

Each time step does three things, in order: evaluate the jump rates at the
current state, either fire at most one jump (thinning on a single uniform
draw, which also selects the channel) or apply the no-jump drift, then
advance the squared temperature by an Euler-Maruyama substep that includes
any jump kick.

The inner loop is vectorized across trajectories: every lane carries its own
(seed, trajectory-index, g2) triple and every random draw is addressed by
(seed, trajectory, step, slot), so results are bit-identical for any
sharding of lanes across worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .constants import K_B, KB_OVER_HBAR
from .errors import ConfigError, TimeStepError
from .floquet import build_monochromatic, jump_channels, matrix_elements
from .jumps import QubitState, RateParams
from .params import ModelParams, SimConfig
from . import rng

_PHI = np.uint64(0x9E3779B97F4A7C15)
_T_FLOOR = 1e-30  # K; makes the closed-form rate land exactly on its T=0 limit
_MAX_PATH_FLOATS = 1 << 27


@dataclass
class SystemState:
    """Full per-trajectory state between steps."""

    qubit: QubitState
    xi: float
    step_index: int = 0
    traj_index: int = 0


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    T_e: np.ndarray
    floquet_populations: np.ndarray  # (n_rec, 2)
    jump_log: list[tuple[float, int, int, float]] = field(default_factory=list)


@dataclass
class EnsembleResult:
    """Aggregated ensemble output.

    ``times`` is the recorded grid for full-path runs and the single final
    time otherwise; ``te_paths`` is (n, len(times)) and only present for
    record="full-path".
    """

    times: np.ndarray
    final_te: np.ndarray
    final_populations: np.ndarray  # (n, 2)
    n_jumps: np.ndarray
    te_paths: np.ndarray | None = None
    histogram: tuple[np.ndarray, np.ndarray] | None = None  # (counts, edges)


class Engine:
    """Precomputed channel table and step kernel for one parameter set.

    The spectrum is built analytically for the monochromatic drive; the
    channel list fixes per-channel transition energies (K), squared
    amplitudes, xi-kicks, and branch changes once per engine.
    """

    def __init__(self, model: ModelParams, sim: SimConfig):
        self.model = model
        self.sim = sim
        self.spectrum = build_monochromatic(model.drive, m_samples=sim.m_samples)
        elements = matrix_elements(self.spectrum, n_max=sim.n_max)
        self.channels = jump_channels(
            elements, self.spectrum, threshold=sim.channel_threshold
        )
        self.rate_params = (
            RateParams.from_channels(self.channels, model.g2) if model.g2 > 0 else None
        )

        self.e_ch = np.array([ch.omega for ch in self.channels]) / KB_OVER_HBAR  # K
        self.amp2 = np.array([abs(ch.amplitude) ** 2 for ch in self.channels])
        self.kicks = self.e_ch / model.thermo.c_over_kB  # K^2 per jump
        self.s_arr = np.array([ch.s for ch in self.channels])
        self.idx_raise = np.flatnonzero(self.s_arr == 1)
        self.idx_lower = np.flatnonzero(self.s_arr == -1)
        self.idx_deph = np.flatnonzero(self.s_arr == 0)
        # occupancy selector per channel: 0 -> |c0|^2, 1 -> |c1|^2, 2 -> 1
        self.occ_kind = np.where(self.s_arr == 1, 0, np.where(self.s_arr == -1, 1, 2))

        self.dt = sim.dt
        self.sqdt = math.sqrt(sim.dt)
        th = model.thermo
        self.a_ph = th.drift_coefficient
        self.tp5 = th.t_p**5
        self.noise_amp = (
            math.sqrt(10.0 * th.sigma_v * K_B) * th.t_p**3 / th.c
            if sim.phonon_noise
            else 0.0
        )
        self.xi0 = th.t_p**2

        # Guard the thinning bound where the ensemble could plausibly wander:
        # total channel weight at 3*T_p with every occupancy at 1.
        probe = self._base_weights(np.array([3.0 * th.t_p]), np.array([model.g2]))
        if float(probe.sum()) * self.dt >= 0.05:
            raise TimeStepError(
                "dt too large: channel rates at 3*T_p exceed the thinning budget"
            )

        self.stride = max(1, round(model.period / sim.dt)) * sim.downsample
        self.n_steps = sim.n_steps

        eps0, eps1 = self.spectrum.quasi_energies
        emin = min(eps0, eps1)
        w0 = math.exp(-(eps0 - emin) / th.t_p)
        w1 = math.exp(-(eps1 - emin) / th.t_p)
        self.p0_thermal = w0 / (w0 + w1)

        self._build_pairs()

    def _build_pairs(self) -> None:
        """Group channels into (s, n) <-> (-s, -n) pairs sharing |amplitude|.

        The pair members sit at opposite frequencies, so one exponential per
        pair yields both the emission and the absorption rate; the hot loop
        exploits this. Conjugation symmetry of the harmonics guarantees the
        pairing exists for any spectrum produced by matrix_elements.
        """
        key = {(ch.s, ch.n): i for i, ch in enumerate(self.channels)}
        if np.min(np.abs(self.e_ch)) <= 0.0:
            raise ConfigError("zero-frequency jump channel not supported by the engine")
        pair_e = []  # positive energy per pair, K
        pair_k = []  # g2-independent emission prefactor (rate/g2)
        ch_pair = np.empty(len(self.channels), dtype=np.intp)
        ch_is_ab = np.empty(len(self.channels), dtype=bool)
        seen: dict[int, int] = {}
        for i, ch in enumerate(self.channels):
            if i in seen:
                continue
            j = key.get((-ch.s, -ch.n))
            if j is None or not math.isclose(
                self.e_ch[i], -self.e_ch[j], rel_tol=1e-12
            ):
                raise ConfigError("channel list lacks a frequency-mirrored partner")
            em, ab = (i, j) if self.e_ch[i] > 0 else (j, i)
            pid = len(pair_e)
            pair_e.append(self.e_ch[em])
            pair_k.append(KB_OVER_HBAR * self.e_ch[em] * self.amp2[em])
            ch_pair[em] = pid
            ch_is_ab[em] = False
            ch_pair[ab] = pid
            ch_is_ab[ab] = True
            seen[i] = seen[j] = pid
        self.pair_e = np.array(pair_e)
        self.pair_k = np.array(pair_k)
        self.ch_pair = ch_pair
        self.ch_is_ab = ch_is_ab
        # routing matrices: summed weight per drift class = em @ A_em + ab @ A_ab
        npair = self.pair_e.size
        a_em = np.zeros((npair, 3))
        a_ab = np.zeros((npair, 3))
        cls = {1: 0, -1: 1, 0: 2}  # raising, lowering, dephasing columns
        for i, ch in enumerate(self.channels):
            target = a_ab if self.ch_is_ab[i] else a_em
            target[self.ch_pair[i], cls[ch.s]] += 1.0
        self.route_em = a_em
        self.route_ab = a_ab

    # -- rate evaluation ---------------------------------------------------

    def _base_weights(self, te: np.ndarray, g2: np.ndarray) -> np.ndarray:
        """Gamma(omega_c, T_e)*|D_c|^2 for every lane and channel, shape (n, m).

        Single-exponential closed form; temperatures are floored at a value
        that reproduces the T=0 emission/absorption limits exactly. The
        near-zero-frequency series branch of gamma_rate is unnecessary here
        because every channel energy is of the order of the drive quantum.
        """
        t = np.maximum(te, _T_FLOOR)
        x = self.e_ch[None, :] / t[:, None]
        ax = np.abs(x)
        e = np.exp(-ax)
        f = ax * np.where(x > 0.0, 1.0, e) / (1.0 - e)
        return (KB_OVER_HBAR * g2 * t)[:, None] * f * self.amp2[None, :]

    # -- initial conditions ------------------------------------------------

    def initial_lanes(self, seeds: np.ndarray, trajs: np.ndarray):
        """Per-lane initial amplitudes (real) and squared temperature.

        The kernel works with real signed amplitudes: starting from a basis
        state, the no-jump drift factors are real and every jump lands on
        (0, +-1), so no complex phase ever develops. Complex inputs to
        ``Engine.step`` are handled by carrying their unit phases separately.
        """
        n = seeds.shape[0]
        xi = np.full(n, self.xi0)
        init = self.sim.qubit_init
        if init == "level0":
            level = np.zeros(n, dtype=bool)
        elif init == "level1":
            level = np.ones(n, dtype=bool)
        else:
            p0 = self.p0_thermal if init == "thermal" else init[0] / (init[0] + init[1])
            u = rng.uniform(seeds, trajs, 0, 2)
            level = u >= p0  # True -> branch 1
        a0 = np.where(level, 0.0, 1.0)
        a1 = np.where(level, 1.0, 0.0)
        return a0, a1, xi

    # -- kernel ------------------------------------------------------------

    def _advance(
        self,
        a0: np.ndarray,
        a1: np.ndarray,
        xi: np.ndarray,
        seeds: np.ndarray,
        trajs: np.ndarray,
        g2: np.ndarray,
        k_start: int,
        k_stop: int,
        n_jumps: np.ndarray,
        jump_log: list | None = None,
        z0: np.ndarray | None = None,
        z1: np.ndarray | None = None,
    ) -> None:
        """Advance all lanes in place from step k_start to k_stop.

        a0, a1 are real signed amplitudes. z0, z1 are optional unit phases
        that only move at jumps (a raising jump hands the upper phase to the
        lower slot and vice versa); omitted for ensembles seeded from basis
        states, whose phases stay at 1.
        """
        dt = self.dt
        half_dt = 0.5 * dt
        inv_dt = 1.0 / dt
        n = a0.shape[0]
        base = rng.stream_base(seeds, trajs)
        want_noise = self.noise_amp != 0.0
        noise_scale = self.noise_amp * self.sqdt
        bsize = max(8, min(1024, (1 << 20) // max(n, 1)))
        kicks = self.kicks
        s_arr = self.s_arr
        chs = self.channels
        up_sel = s_arr == 1
        dn_sel = s_arr == -1
        pair_e_col = self.pair_e[:, None]  # (npair, 1) for the (npair, n) layout
        # single routing matrix against the stacked [emission; absorption] block
        route_t = np.ascontiguousarray(
            np.hstack([self.route_em.T, self.route_ab.T])
        )  # (3, 2*npair)
        ch_pair, ch_is_ab = self.ch_pair, self.ch_is_ab
        a_ph_dt = self.a_ph * dt
        neg_a_ph_dt = -a_ph_dt
        drift_const = a_ph_dt * self.tp5
        # emission rates are k_em/(1 - e^{-x}); g2 enters only here, per lane
        k_em = self.pair_k[:, None] * g2[None, :]  # (npair, n)
        npair = self.pair_e.size
        m = len(chs)

        te = np.empty(n)
        tf = np.empty(n)
        x = np.empty((npair, n))
        ee = np.empty((npair, n))
        eab = np.empty((2 * npair, n))
        em = eab[:npair]
        ab = eab[npair:]
        w3 = np.empty((3, n))
        p0 = np.empty(n)
        p1 = np.empty(n)
        s2 = np.empty(n)
        lam = np.empty(n)
        f0 = np.empty(n)
        f1 = np.empty(n)
        nn = np.empty(n)
        t1 = np.empty(n)

        with np.errstate(over="ignore"):
            k = k_start
            while k < k_stop:
                kb = min(bsize, k_stop - k)
                cnt = np.uint64(4) * np.arange(k, k + kb, dtype=np.uint64)[None, :]
                us_blk = rng.to_uniform(
                    rng._mix(base[:, None] + _PHI * (cnt + np.uint64(1)))
                )
                us_blk *= inv_dt  # thinning compares u/dt against the total rate
                if want_noise:
                    zs_blk = ndtri(
                        rng.to_uniform(
                            rng._mix(base[:, None] + _PHI * (cnt + np.uint64(2)))
                        )
                    )
                    zs_blk *= noise_scale
                    zs_blk += drift_const  # fold the constant part of the drift in
                for b in range(kb):
                    np.sqrt(xi, out=te)
                    np.maximum(te, _T_FLOOR, out=tf)
                    np.divide(pair_e_col, tf[None, :], out=x)
                    np.negative(x, out=x)
                    np.exp(x, out=ee)
                    np.subtract(1.0, ee, out=x)
                    np.divide(k_em, x, out=em)
                    np.multiply(em, ee, out=ab)
                    np.matmul(route_t, eab, out=w3)
                    wp, wm, w0 = w3[0], w3[1], w3[2]
                    np.multiply(a0, a0, out=p0)
                    np.multiply(a1, a1, out=p1)
                    np.multiply(wp, p0, out=s2)
                    np.multiply(wm, p1, out=t1)
                    s2 += t1
                    np.add(s2, w0, out=lam)
                    if float(lam.max()) * dt > 0.5:
                        raise TimeStepError(
                            f"total jump rate {float(lam.max()):.3e}/s makes "
                            "rate*dt exceed 0.5"
                        )
                    us = us_blk[:, b]
                    jump = us < lam
                    rows = np.flatnonzero(jump) if jump.any() else None
                    if rows is not None:
                        # capture pre-drift amplitudes; a jump replaces the drift
                        a0j = a0[rows].copy()
                        a1j = a1[rows].copy()

                    # no-jump drift: f0 = 1 + dt/2*(wp*(p0-1) + wm*p1), and the
                    # bracket equals s2 - wp with s2 = wp*p0 + wm*p1
                    np.subtract(s2, wp, out=f0)
                    f0 *= half_dt
                    f0 += 1.0
                    np.subtract(s2, wm, out=f1)
                    f1 *= half_dt
                    f1 += 1.0
                    a0 *= f0
                    a1 *= f1

                    if rows is not None:
                        em_r = em[:, rows]
                        ab_r = ab[:, rows]
                        w_t = np.where(
                            ch_is_ab[:, None], ab_r[ch_pair, :], em_r[ch_pair, :]
                        )
                        occ = np.ones((m, rows.size))
                        occ[up_sel] = p0[rows][None, :]
                        occ[dn_sel] = p1[rows][None, :]
                        cum = np.cumsum(w_t * occ, axis=0)
                        sel = np.minimum(
                            (cum < us[rows][None, :]).sum(axis=0), m - 1
                        )
                        sj = s_arr[sel]

                        up = sj == 1
                        if up.any():
                            r_up = rows[up]
                            a1[r_up] = np.where(a0j[up] >= 0.0, 1.0, -1.0)
                            a0[r_up] = 0.0
                            if z0 is not None:
                                z1[r_up] = z0[r_up]
                                z0[r_up] = 1.0
                        dn = sj == -1
                        if dn.any():
                            r_dn = rows[dn]
                            a0[r_dn] = np.where(a1j[dn] >= 0.0, 1.0, -1.0)
                            a1[r_dn] = 0.0
                            if z0 is not None:
                                z0[r_dn] = z1[r_dn]
                                z1[r_dn] = 1.0
                        de = sj == 0
                        if de.any():
                            r_de = rows[de]
                            a0[r_de] = -a0j[de]
                            a1[r_de] = a1j[de]

                        xi[rows] += kicks[sel]
                        n_jumps[rows] += 1
                        if jump_log is not None:
                            t_jump = (k + b + 1) * dt
                            for i in range(rows.size):
                                ch = chs[sel[i]]
                                jump_log.append((t_jump, ch.s, ch.n, ch.omega))

                    np.multiply(a0, a0, out=nn)
                    np.multiply(a1, a1, out=t1)
                    nn += t1
                    np.sqrt(nn, out=nn)
                    np.divide(a0, nn, out=a0)
                    np.divide(a1, nn, out=a1)

                    if rows is not None:
                        te[rows] = np.sqrt(xi[rows])
                    np.multiply(xi, xi, out=t1)
                    t1 *= te
                    t1 *= neg_a_ph_dt
                    if want_noise:
                        t1 += zs_blk[:, b]
                    else:
                        t1 += drift_const
                    xi += t1
                    np.abs(xi, out=xi)
                k += kb

    # -- public stepping ---------------------------------------------------

    def step(self, state: SystemState, seed: int | None = None) -> SystemState:
        """Advance a single-trajectory state by one step (kernel-identical).

        Complex amplitudes are split into real modulus and unit phase; the
        dynamics moves the moduli, and phases only swap slots at raising and
        lowering jumps.
        """
        s = self.sim.seed if seed is None else seed
        c = (complex(state.qubit.c0), complex(state.qubit.c1))
        mags = [abs(v) for v in c]
        a0 = np.array([mags[0]])
        a1 = np.array([mags[1]])
        z0 = np.array([c[0] / mags[0] if mags[0] > 0 else 1.0], dtype=np.complex128)
        z1 = np.array([c[1] / mags[1] if mags[1] > 0 else 1.0], dtype=np.complex128)
        xi = np.array([state.xi], dtype=float)
        nj = np.zeros(1, dtype=np.int64)
        self._advance(
            a0,
            a1,
            xi,
            np.array([s], dtype=np.uint64),
            np.array([state.traj_index], dtype=np.uint64),
            np.array([self.model.g2]),
            state.step_index,
            state.step_index + 1,
            nj,
            z0=z0,
            z1=z1,
        )
        return SystemState(
            qubit=QubitState(complex(a0[0] * z0[0]), complex(a1[0] * z1[0])),
            xi=float(xi[0]),
            step_index=state.step_index + 1,
            traj_index=state.traj_index,
        )

    def record_steps(self) -> np.ndarray:
        ks = np.arange(0, self.n_steps + 1, self.stride, dtype=np.int64)
        if ks[-1] != self.n_steps:
            ks = np.append(ks, self.n_steps)
        return ks


def step(state: SystemState, engine: Engine) -> SystemState:
    """One transition of the piecewise-deterministic process; see Engine.step."""
    return engine.step(state)


def run_trajectory(config: SimConfig, params: ModelParams) -> TrajectoryRecord:
    """Single realization with a full (downsampled) path and jump log."""
    engine = Engine(params, config)
    ks = engine.record_steps()
    seeds = np.array([config.seed], dtype=np.uint64)
    trajs = np.zeros(1, dtype=np.uint64)
    g2 = np.array([params.g2])
    te_path = np.empty(ks.size)
    pops = np.empty((ks.size, 2))
    jump_log: list[tuple[float, int, int, float]] = []

    a0, a1, xi = engine.initial_lanes(seeds, trajs)
    nj = np.zeros(1, dtype=np.int64)
    prev = 0
    for j, kr in enumerate(ks):
        if kr > prev:
            engine._advance(a0, a1, xi, seeds, trajs, g2, prev, int(kr), nj, jump_log)
            prev = int(kr)
        te_path[j] = math.sqrt(xi[0])
        pops[j, 0] = a0[0] * a0[0]
        pops[j, 1] = a1[0] * a1[0]
    return TrajectoryRecord(
        times=ks * engine.dt,
        T_e=te_path,
        floquet_populations=pops,
        jump_log=jump_log,
    )


def _run_lane_block(
    engine: Engine,
    seeds: np.ndarray,
    trajs: np.ndarray,
    g2: np.ndarray,
    record_ks: np.ndarray,
    te_paths: np.ndarray | None,
    out_a0: np.ndarray,
    out_a1: np.ndarray,
    out_xi: np.ndarray,
    out_jumps: np.ndarray,
) -> None:
    a0, a1, xi = engine.initial_lanes(seeds, trajs)
    nj = np.zeros(seeds.size, dtype=np.int64)
    prev = 0
    for j, kr in enumerate(record_ks):
        if kr > prev:
            engine._advance(a0, a1, xi, seeds, trajs, g2, prev, int(kr), nj)
            prev = int(kr)
        if te_paths is not None:
            te_paths[:, j] = np.sqrt(xi)
    if prev < engine.n_steps:
        engine._advance(a0, a1, xi, seeds, trajs, g2, prev, engine.n_steps, nj)
    out_a0[:] = a0
    out_a1[:] = a1
    out_xi[:] = xi
    out_jumps[:] = nj


def run_ensemble(config: SimConfig, params: ModelParams) -> EnsembleResult:
    """Independent trajectories 0..n-1, sharded over worker threads.

    Lane i draws from the stream (seed, i); outputs are written to
    per-trajectory slots and reduced in fixed order afterwards, so the result
    is bit-identical for any thread count.
    """
    engine = Engine(params, config)
    n = config.n_trajectories
    want_paths = config.record == "full-path"
    ks = engine.record_steps() if want_paths else np.array([engine.n_steps], dtype=np.int64)
    if want_paths and n * ks.size > _MAX_PATH_FLOATS:
        raise ConfigError(
            "full-path recording would exceed the in-memory budget; "
            "raise downsample or lower n_trajectories"
        )
    te_paths = np.empty((n, ks.size)) if want_paths else None
    final_a0 = np.empty(n)
    final_a1 = np.empty(n)
    final_xi = np.empty(n)
    n_jumps = np.zeros(n, dtype=np.int64)
    seeds = np.full(n, config.seed, dtype=np.uint64)
    trajs = np.arange(n, dtype=np.uint64)
    g2 = np.full(n, params.g2)

    workers = config.threads
    bounds = np.linspace(0, n, workers + 1, dtype=int)
    blocks = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def work(block):
        lo, hi = block
        _run_lane_block(
            engine,
            seeds[lo:hi],
            trajs[lo:hi],
            g2[lo:hi],
            ks,
            te_paths[lo:hi] if want_paths else None,
            final_a0[lo:hi],
            final_a1[lo:hi],
            final_xi[lo:hi],
            n_jumps[lo:hi],
        )

    if len(blocks) == 1:
        work(blocks[0])
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, blocks))

    final_te = np.sqrt(final_xi)
    final_pops = np.stack([final_a0 * final_a0, final_a1 * final_a1], axis=1)
    hist = None
    if config.record == "histogram":
        rng_ = config.range
        if rng_ is None:
            lo, hi = float(final_te.min()), float(final_te.max())
            pad = 0.05 * (hi - lo) if hi > lo else max(1e-6, 0.05 * hi)
            rng_ = (lo - pad, hi + pad)
        counts, edges = np.histogram(final_te, bins=config.bins, range=rng_)
        hist = (counts, edges)
    return EnsembleResult(
        times=ks * engine.dt,
        final_te=final_te,
        final_populations=final_pops,
        n_jumps=n_jumps,
        te_paths=te_paths,
        histogram=hist,
    )
