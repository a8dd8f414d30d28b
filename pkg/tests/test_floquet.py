"""Spectrum, periodic modes, harmonics, and channel selection."""

import math

import numpy as np
import pytest

from calorijump.constants import HBAR_OVER_KB
from calorijump.errors import (
    ConfigError,
    DegenerateSpectrumError,
    EmptyChannelError,
    FrequencyCollisionError,
    TimeStepError,
)
from calorijump.floquet import (
    SIGMA_X,
    PeriodicHamiltonian,
    analytic_gap,
    build_monochromatic,
    diagonalize_monodromy,
    fold_frequency,
    integrate_monodromy,
    jump_channels,
    matrix_elements,
    monodromy_batch,
)

WQ = 1e11  # rad/s; the spectrum scales linearly so the value is arbitrary


def drive(kappa, x):
    return PeriodicHamiltonian(omega_q=WQ, kappa=kappa, omega_L=x * WQ)


def test_analytic_gap_values():
    assert analytic_gap(WQ, 0.05, 0.9 * WQ) == pytest.approx(
        0.1414213562373095 * WQ, rel=1e-14
    )
    # on resonance the detuning term vanishes and the gap is the Rabi rate
    assert analytic_gap(WQ, 0.03, WQ) == 0.06 * WQ


def test_fold_frequency_half_open_window():
    wl = 2.0
    assert fold_frequency(0.6 * wl, wl) == pytest.approx(-0.4 * wl)
    assert fold_frequency(0.49 * wl, wl) == pytest.approx(0.49 * wl)
    assert fold_frequency(1.0 * wl, wl) == pytest.approx(0.0)
    # the window is [-wl/2, +wl/2): the upper edge folds down
    assert fold_frequency(0.5 * wl, wl) == pytest.approx(-0.5 * wl)


def test_resonant_quasi_energies():
    spec = build_monochromatic(drive(0.05, 1.0))
    e_q = WQ * HBAR_OVER_KB
    assert spec.quasi_energies[0] / e_q == pytest.approx(-0.45, rel=1e-12)
    assert spec.quasi_energies[1] / e_q == pytest.approx(+0.45, rel=1e-12)
    assert spec.nu == pytest.approx(0.1 * WQ, rel=1e-14)
    assert spec.theta == pytest.approx(math.pi / 2.0, rel=1e-14)


def test_quasi_energies_stay_folded():
    for kappa, x in ((0.01, 0.6), (0.2, 1.4), (0.05, 0.9)):
        spec = build_monochromatic(drive(kappa, x))
        half = 0.5 * x * WQ * HBAR_OVER_KB
        for eps in spec.quasi_energies:
            assert -half <= eps < half


def test_modes_are_orthonormal_at_every_sample():
    spec = build_monochromatic(drive(0.07, 0.8), m_samples=128)
    overlap = np.einsum("rja,sja->rsj", spec.modes.conj(), spec.modes)
    eye = np.eye(2)[:, :, None]
    assert np.max(np.abs(overlap - eye)) < 1e-12


def test_branch_zero_has_larger_ground_overlap():
    spec = build_monochromatic(drive(0.05, 0.9))
    g0 = abs(spec.modes[0, 0, 1])
    g1 = abs(spec.modes[1, 0, 1])
    assert g0 > g1


def test_degenerate_drive_rejected():
    with pytest.raises(DegenerateSpectrumError):
        build_monochromatic(drive(0.0, 1.0))


def test_static_limit_matches_numeric_monodromy():
    # kappa = 0 removes the drive; the monodromy is a bare sigma_z rotation
    p = drive(0.0, 0.7)
    spec_num = diagonalize_monodromy(integrate_monodromy(p, steps=1024))
    nu_ref = analytic_gap(WQ, 0.0, 0.7 * WQ)
    wl = 0.7 * WQ
    dist = min(
        min((nu_ref - s) % wl, wl - (nu_ref - s) % wl)
        for s in (spec_num.nu, -spec_num.nu)
    )
    assert dist / nu_ref < 1e-12


def test_cf4_step_count_invariance():
    p = drive(0.12, 1.1)
    f1 = integrate_monodromy(p, steps=512, scheme="cf4").matrix
    f2 = integrate_monodromy(p, steps=2048, scheme="cf4").matrix
    assert np.max(np.abs(f1 - f2)) < 1e-11


def test_midpoint_converges_to_cf4():
    p = drive(0.12, 1.1)
    ref = integrate_monodromy(p, steps=4096, scheme="cf4").matrix
    errs = []
    for steps in (512, 1024):
        f = integrate_monodromy(p, steps=steps, scheme="midpoint").matrix
        errs.append(np.max(np.abs(f - ref)))
    # second-order scheme: error drops by about 4 per halving of dt
    assert errs[1] < errs[0] / 3.0


def test_monodromy_is_unitary():
    m = integrate_monodromy(drive(0.1, 0.85), steps=512)
    f = m.matrix
    assert np.max(np.abs(f.conj().T @ f - np.eye(2))) < 1e-12


@pytest.mark.parametrize("scheme", ["midpoint", "cf4"])
def test_monodromy_batch_matches_scalar_route(scheme):
    kappas = np.array([0.03, 0.1, 0.17])
    xs = np.array([0.6, 1.0, 1.3])
    batch = monodromy_batch(WQ, kappas, xs * WQ, steps=512, scheme=scheme)
    for i in range(3):
        single = integrate_monodromy(drive(kappas[i], xs[i]), steps=512, scheme=scheme).matrix
        assert np.max(np.abs(batch[i] - single)) < 1e-12


def test_cross_route_modes_agree():
    p = drive(0.05, 0.9)
    spec_a = build_monochromatic(p, m_samples=256)
    spec_n = diagonalize_monodromy(
        integrate_monodromy(p, steps=4096, scheme="cf4", m_samples=256)
    )
    for r in range(2):
        ov = np.abs(
            np.einsum("ja,ja->j", spec_a.modes[r].conj(), spec_n.modes[r])
        )
        assert ov.min() > 1.0 - 1e-7


def test_time_step_guards():
    with pytest.raises(TimeStepError):
        integrate_monodromy(drive(0.05, 1.0), steps=4, m_samples=4)
    with pytest.raises(TimeStepError):
        monodromy_batch(WQ, 0.05, WQ, steps=4)
    with pytest.raises(ConfigError):
        integrate_monodromy(drive(0.05, 1.0), steps=512, scheme="rk4")


def test_diagonalize_input_contracts():
    m = integrate_monodromy(drive(0.05, 0.9), steps=512)
    with pytest.raises(ConfigError):
        diagonalize_monodromy(m.matrix)  # bare matrix needs a period
    with pytest.raises(ConfigError):
        diagonalize_monodromy(np.eye(2) * 1.5, period=1e-11)  # not unitary
    # a bare matrix with the period yields quasi-energies but no modes
    bare = diagonalize_monodromy(m.matrix, period=m.period)
    full = diagonalize_monodromy(m)
    assert bare.modes is None
    assert bare.nu == pytest.approx(full.nu, rel=1e-12)


def test_harmonic_symmetries():
    spec = build_monochromatic(drive(0.08, 0.75))
    el = matrix_elements(spec)
    n_max = el.n_max
    scale = np.max(np.abs(el.d))
    for n in range(-n_max, n_max + 1):
        # hermiticity of sigma_x in the mode basis
        assert abs(el.get(0, 1, n) - np.conj(el.get(1, 0, -n))) < 1e-12 * scale
        # tracelessness: the two dephasing profiles are opposite
        assert abs(el.get(0, 0, n) + el.get(1, 1, n)) < 1e-12 * scale


def test_matrix_elements_needs_enough_samples():
    spec = build_monochromatic(drive(0.05, 0.9), m_samples=16)
    with pytest.raises(ConfigError):
        matrix_elements(spec, n_max=8)


def test_resonant_channel_table():
    spec = build_monochromatic(drive(0.05, 1.0))
    chans = jump_channels(matrix_elements(spec), spec)
    table = {(ch.s, ch.n): ch.omega / WQ for ch in chans}
    expected = {
        (-1, 0): 0.9,
        (-1, 2): -1.1,
        (0, -1): 1.0,
        (0, 1): -1.0,
        (1, -2): 1.1,
        (1, 0): -0.9,
    }
    assert set(table) == set(expected)
    for key, w in expected.items():
        assert table[key] == pytest.approx(w, rel=1e-9)
    for ch in chans:
        assert abs(ch.amplitude) == pytest.approx(0.5, abs=1e-12)
    forms = {ch.operator_form for ch in chans}
    assert forms == {"raising", "lowering", "dephasing"}


def test_detuned_amplitude_multiset():
    spec = build_monochromatic(drive(0.05, 0.9))
    chans = jump_channels(matrix_elements(spec), spec)
    got = sorted(abs(ch.amplitude) for ch in chans)
    want = sorted(
        [
            0.14644660940672624,
            0.14644660940672624,
            0.35355339059327373,
            0.35355339059327373,
            0.8535533905932737,
            0.8535533905932737,
        ]
    )
    assert np.allclose(got, want, rtol=0, atol=1e-9)


def test_channel_threshold_is_relative():
    spec = build_monochromatic(drive(0.05, 0.9))
    el = matrix_elements(spec)
    # cut at half the largest amplitude keeps only the cos^2 pair
    chans = jump_channels(el, spec, threshold=0.5)
    assert len(chans) == 2
    assert {ch.s for ch in chans} == {1, -1}
    with pytest.raises(EmptyChannelError):
        jump_channels(el, spec, threshold=2.0)


def test_frequency_collision_detected():
    # nu = omega_L here, so the folded gap vanishes and the raising and
    # lowering n = 0 channels land on the same frequency
    spec = build_monochromatic(drive(0.1, 0.52))
    with pytest.raises(FrequencyCollisionError):
        jump_channels(matrix_elements(spec), spec)


def test_coupling_operator_is_sigma_x():
    assert np.array_equal(SIGMA_X, np.array([[0, 1], [1, 0]], dtype=complex))
