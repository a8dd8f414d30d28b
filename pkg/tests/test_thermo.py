"""Calorimeter energy balance in the squared-temperature variable."""

import math

import numpy as np
import pytest

from calorijump.constants import K_B, KB_OVER_HBAR
from calorijump.thermo import (
    ThermoParams,
    euler_step,
    jump_kick,
    phonon_drift,
    phonon_noise_amplitude,
    reflect,
    relaxation_time_phonon,
    sigma_from_material,
)


@pytest.fixture
def params():
    # default operating point: Sigma*V = 2e-12 W/K^5, T_p = 0.1 K, C = 1500 k_B T
    return ThermoParams(sigma_v=2e-12, t_p=0.1, c=1500.0 * K_B)


def test_unit_properties(params):
    assert params.c_over_kB == pytest.approx(1500.0, rel=1e-15)
    assert params.kick_scale == pytest.approx(1.0 / 1500.0, rel=1e-15)
    assert params.sv_over_kB == pytest.approx(2e-12 / K_B, rel=1e-15)
    assert params.drift_coefficient == pytest.approx(96572940.2138656, rel=1e-12)


def test_invalid_parameters_rejected():
    with pytest.raises(ValueError):
        ThermoParams(sigma_v=0.0, t_p=0.1, c=1.0)
    with pytest.raises(ValueError):
        ThermoParams(sigma_v=1.0, t_p=-0.1, c=1.0)
    with pytest.raises(ValueError):
        ThermoParams(sigma_v=1.0, t_p=0.1, c=0.0)


def test_kick_moves_one_quantum(params):
    # absorbing a 1 K quantum raises xi by exactly 1/1500 K^2
    xi = jump_kick(0.01, KB_OVER_HBAR * 1.0, params)
    assert xi == pytest.approx(0.01 + 1.0 / 1500.0, rel=1e-15)
    assert math.sqrt(xi) == pytest.approx(0.10327955589886445, rel=1e-14)


def test_negative_kick_reflects_at_zero(params):
    # a cooling jump larger than the current xi bounces off the origin
    out = jump_kick(1e-4, -KB_OVER_HBAR * 1.0, params)
    assert out == pytest.approx(1.0 / 1500.0 - 1e-4, rel=1e-12)
    assert out > 0.0
    assert reflect(-0.25) == 0.25


def test_phonon_drift_values(params):
    assert phonon_drift(1e-4, params) == pytest.approx(965.7197448446348, rel=1e-12)
    assert phonon_drift(params.t_p**2, params) == pytest.approx(0.0, abs=1e-9)
    # above the bath the calorimeter cools
    assert phonon_drift(0.05, params) < 0.0
    arr = phonon_drift(np.array([1e-4, 0.01, 0.05]), params)
    assert arr.shape == (3,)
    with pytest.raises(ValueError):
        phonon_drift(-1e-6, params)


def test_noise_amplitude_and_derived_scales(params):
    amp = phonon_noise_amplitude(params)
    assert amp == pytest.approx(0.8023836996261643, rel=1e-12)
    # additive noise power in xi and the linearized relaxation time
    assert amp**2 == pytest.approx(0.6438196014257707, rel=1e-12)
    tau = relaxation_time_phonon(params)
    assert tau == pytest.approx(4.141947e-06, rel=1e-12)
    # equipartition of the pure-phonon stationary process:
    # var(xi) = (amp^2/2) * tau = (2/3) T_p^6 / (T_p^3) scale
    assert 0.5 * amp**2 * tau == pytest.approx(1.3333333333333334e-06, rel=1e-12)


def test_euler_step_composition(params):
    drift = phonon_drift(0.02, params)
    amp = phonon_noise_amplitude(params)
    dt = 1e-8
    dw = -0.3 * math.sqrt(dt)
    kicks = [1.0 / 1500.0, -0.9 / 1500.0]
    out = euler_step(0.02, drift, amp, dw, kicks, dt)
    ref = abs(0.02 + drift * dt + amp * dw + math.fsum(kicks))
    assert out == ref
    assert euler_step(0.0, 0.0, 0.0, 0.0, [], 1e-9) == 0.0
    with pytest.raises(ValueError):
        euler_step(0.02, drift, amp, dw, kicks, 0.0)


def test_euler_step_reflects(params):
    # strong cooling kick through the origin comes back positive
    out = euler_step(1e-5, 0.0, 0.0, 0.0, [-2e-5], 1e-9)
    assert out == pytest.approx(1e-5, rel=1e-12)


def test_sigma_from_material_value():
    val = sigma_from_material(1.5e-19, 9.1093837015e-31, 1.36e10, 4600.0)
    assert val == pytest.approx(102885.99528692826, rel=1e-12)
    with pytest.raises(ValueError):
        sigma_from_material(0.0, 9.1e-31, 1.36e10, 4600.0)


def test_sommerfeld_consistency_check():
    eps_f = 1.1e-18  # J, about 6.9 eV
    gamma_ok = math.pi**2 * K_B**2 / (4.0 * eps_f)
    ThermoParams(
        sigma_v=2e-12,
        t_p=0.1,
        c=1500.0 * K_B,
        n_electrons=1e8,
        gamma_e=gamma_ok,
        epsilon_f=eps_f,
    )
    with pytest.raises(ValueError):
        ThermoParams(
            sigma_v=2e-12,
            t_p=0.1,
            c=1500.0 * K_B,
            gamma_e=1.01 * gamma_ok,
            epsilon_f=eps_f,
        )
