import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_xy.core import (TWO_PI, HBAR, DomainError, ModelParams, TrapParams, chi_from_cavity,
                            chi_dispersive, classical_field, coupling_profile, derive,
                            drive_from_pump, pump_amplitude_from_power, rabi_rms_magnetization,
                            rabi_mean_magnetization, interaction_period)

finite = st.floats(-1e9, 1e9, allow_nan=False).filter(lambda v: abs(v) > 1e3)


def test_chi_paper_constants():
    chi = chi_from_cavity(TWO_PI * 10.9e3, TWO_PI * 50e6, 0.0)
    assert chi / TWO_PI == pytest.approx(-(10.9e3**2) / 50e6, rel=1e-12)
    assert chi / TWO_PI == pytest.approx(-2.376, abs=5e-4)


def test_chi_zero_coupling_and_odd():
    assert chi_from_cavity(0.0, 1e8) == 0.0
    for kap in (0.0, 1e6):
        assert chi_from_cavity(3e4, -2e8, kap) == -chi_from_cavity(3e4, 2e8, kap)


def test_chi_full_vs_dispersive():
    p = ModelParams()
    a = chi_from_cavity(p.g, p.Delta, p.kappa)
    b = chi_dispersive(p.g, p.Delta)
    assert abs(a / b - 1) < 1e-5


def test_chi_rejects_resonance():
    with pytest.raises(DomainError):
        chi_from_cavity(1.0, 0.0)


@given(finite, finite)
def test_drive_odd_in_detuning(D, d):
    if abs(D - d) < 1e3:
        return
    a = drive_from_pump(2e4, 1e6, 0.0, D, d)
    b = drive_from_pump(2e4, 1e6, 0.0, -D, -d)
    assert a[0] == pytest.approx(-b[0], rel=1e-12)
    assert a[1] == 0.0 and b[1] == 0.0


def test_drive_limits():
    g, op, D = 7e4, 6e6, 3e8
    om, omp = drive_from_pump(g, op, 0.0, D, 0.0, 0.0)
    assert om == pytest.approx(-2 * g * op / D, rel=1e-14) and omp == 0.0
    assert drive_from_pump(g, 0.0, 0.3, D, 0.0, 1e6) == (0.0, 0.0)
    a = drive_from_pump(g, op, 0.0, D, 0.0)
    b = drive_from_pump(g, op, math.pi, D, 0.0)
    assert b[0] == pytest.approx(-a[0], rel=1e-14)
    assert abs(b[1]) < 1e-12 * abs(a[0])


def test_pump_power():
    kap = TWO_PI * 153e3
    w = TWO_PI * 3e8 / 689e-9
    assert pump_amplitude_from_power(0.0, kap, 105e-6, 23e-6, w) == 0.0
    a = pump_amplitude_from_power(1e-9, kap, 105e-6, 23e-6, w)
    b = pump_amplitude_from_power(2e-9, kap, 105e-6, 23e-6, w)
    assert b / a == pytest.approx(math.sqrt(2), rel=1e-14)
    kappa_m = a**2 * 2 * HBAR * w / 1e-9
    assert kappa_m / kap == pytest.approx(105 / 128, rel=1e-12)


def test_coupling_profile():
    assert coupling_profile(1.0, 813e-9, 689e-9, 0) == 1.0
    j = np.arange(0, 200)
    assert np.allclose(coupling_profile(1.0, 4 * 689e-9, 689e-9, j), 1.0, atol=1e-10)
    gj = coupling_profile(1.0, 813e-9, 689e-9, np.arange(10001))
    assert np.max(np.abs(gj)) <= 1.0
    assert abs(np.mean(gj**2) / 0.5 - 1) < 0.01


@given(st.integers(0, 10**7))
def test_coupling_bounded(j):
    assert abs(coupling_profile(2.5, 813e-9, 689e-9, j)) <= 2.5


def test_classical_field():
    assert classical_field(0.0, 1e8, 0.0, 1e6) == 0
    a = classical_field(3e6, 2e8, 1e7, 0.0)
    assert a.imag == 0 and a.real == pytest.approx(-3e6 / 1.9e8)
    a = classical_field(TWO_PI * 1e6, TWO_PI * 50e6, 0.0, TWO_PI * 153e3)
    assert abs(a) == pytest.approx(0.0200, abs=5e-5)


@given(st.floats(1e3, 1e8), st.floats(0, 2 * math.pi), finite, st.floats(0, 1e7))
def test_classical_field_fixed_point(op, phi, D, kap):
    Op = op * np.exp(1j * phi)
    a = classical_field(Op, D, 0.0, kap)
    res = -1j * (D - 0.0 - 0.5j * kap) * a - 1j * Op
    assert abs(res) <= 1e-12 * abs(Op)


def test_rabi_line_shapes():
    assert rabi_rms_magnetization(1.0, 0.0) == -1.0
    assert rabi_rms_magnetization(1.0, 1.0) == -0.75
    assert rabi_rms_magnetization(1.0, 1e6) == pytest.approx(-0.5, abs=1e-9)
    assert rabi_mean_magnetization(1.0, 0.0) == 0.0
    assert rabi_mean_magnetization(1.0, 1e6) == pytest.approx(-1.0, abs=1e-9)


@settings(max_examples=50)
@given(st.floats(1.0, 1e7), st.floats(0.0, 1e6), st.floats(1e-3, 1e7))
def test_hz_round_trip(g, kap, D):
    p = ModelParams(g_hz=g, kappa_hz=kap, Delta_hz=D)
    assert p.hz()["g_hz"] == g and p.hz()["kappa_hz"] == kap and p.hz()["Delta_hz"] == D
    assert p.g == TWO_PI * g


def test_params_validation():
    with pytest.raises(DomainError):
        ModelParams(kappa_hz=-1.0)
    with pytest.raises(DomainError):
        TrapParams(V0=-1.0, recoil_k=1.0)


def test_drive_ratio_and_period():
    p = ModelParams().with_drive_ratio(0.3)
    d = derive(p)
    assert d.omega_over_chiN == pytest.approx(0.3, rel=1e-4)
    assert p.chiN / TWO_PI == pytest.approx(-2.26e6, rel=0.01)
    assert interaction_period(p.chiN) == pytest.approx(1 / 2.257e6, rel=1e-3)
    flipped = derive(p.with_(Delta_hz=-50e6))
    assert flipped.omega_over_chiN == pytest.approx(d.omega_over_chiN, rel=1e-12)


def test_trap_frequency_matches():
    t = TrapParams.for_frequency(200e3)
    w = 2 * math.sqrt(t.V0 * t.recoil_energy) / HBAR
    assert w / TWO_PI == pytest.approx(200e3, rel=1e-12)
