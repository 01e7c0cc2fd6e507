import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavity_xy.core import TWO_PI
from cavity_xy.collective import (BlochState, CollectiveFields, Phase, UnsupportedRegime,
                                  bloch_rhs, collective_energy, crosses_equator, integrate_batch,
                                  integrate_quench, separatrix_classify, separatrix_margin)
from cavity_xy.oracle import dicke_exact_evolve

CHIN = TWO_PI * 1e6
T_INT = TWO_PI / CHIN


def test_south_pole_fixed_point():
    assert np.all(bloch_rhs(np.array([0.0, 0.0, -1.0]), CHIN, 0.0) == 0.0)


def test_rabi_limit():
    om = TWO_PI * 0.8e6
    tr = integrate_quench(CollectiveFields(0.0, om), BlochState.south_pole(100), 4e-6, 0.01e-6)
    assert np.max(np.abs(tr.z + np.cos(om * tr.t))) < 1e-8


def test_no_drive_keeps_z():
    rng = np.random.default_rng(3)
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    tr = integrate_quench(CollectiveFields(CHIN, 0.0, 0.0, 0.3 * CHIN), v, 10 * T_INT, T_INT / 20)
    assert np.max(np.abs(tr.z - v[2])) < 1e-9


def test_trapped_and_circulating():
    sp = np.array([0.0, 0.0, -1.0])
    trapped = integrate_quench(CollectiveFields.from_ratios(CHIN, 0.3), sp, 20 * T_INT, T_INT / 50)
    assert trapped.z.max() < 0
    free = integrate_quench(CollectiveFields.from_ratios(CHIN, 0.7), sp, 20 * T_INT, T_INT / 50)
    assert free.z.max() > 0


def test_matches_dicke_small_n():
    N = 20
    t = np.linspace(0, T_INT, 201)
    d = dicke_exact_evolve(N, CHIN / N, 0.3 * CHIN, 0.0, -N / 2, t)
    tr = integrate_quench(CollectiveFields.from_ratios(CHIN, 0.3), BlochState.south_pole(N),
                          T_INT, T_INT / 200)
    assert np.max(np.abs(d.jz / (N / 2) - tr.z)) < 0.05


def test_energy_examples():
    assert collective_energy(np.array([0, 0, -1.0]), CHIN, 0.0) == 0.0
    # per N/2 units: chi(N/2)^2 / (N/2) = chiN/2
    assert collective_energy(np.array([1.0, 0, 0]), CHIN, 0.0) == pytest.approx(0.5 * CHIN)


def _random_states(rng, n):
    v = rng.normal(size=(3, n))
    return v / np.linalg.norm(v, axis=0)


def test_conservation_random_runs():
    rng = np.random.default_rng(11)
    M = 100
    v0 = _random_states(rng, M)
    om = rng.uniform(-1.5, 1.5, M) * CHIN
    dl = rng.uniform(-1.0, 1.0, M) * CHIN
    omp = rng.uniform(-0.5, 0.5, M) * CHIN
    t, v = integrate_batch(CHIN, om, dl, v0, 5 * T_INT, T_INT / 20, omega_prime=omp,
                           rtol=1e-11, atol=1e-13)
    length = np.sum(v**2, axis=0)
    assert np.max(np.abs(length - 1)) < 1e-8
    e = collective_energy(v, CHIN, om[:, None], dl[:, None], omp[:, None])
    scale = np.maximum(np.abs(e[:, :1]), 0.5 * CHIN)
    assert np.max(np.abs(e - e[:, :1]) / scale) < 1e-8


def test_classifier_agrees_with_trajectories():
    rng = np.random.default_rng(5)
    M = 1000
    v0 = _random_states(rng, M)
    r = rng.uniform(0.05, 1.5, M)
    t, v = integrate_batch(CHIN, r * CHIN, 0.0, v0, 20 * T_INT, T_INT / 40, rtol=1e-10, atol=1e-12)
    checked = 0
    for k in range(M):
        if abs(separatrix_margin(v0[:, k], CHIN, r[k] * CHIN)) < 2e-6:
            continue
        lab = separatrix_classify(v0[:, k], CHIN, r[k] * CHIN)
        # paramagnetic orbits change hemisphere; trapped ones never reach z = 0
        para = crosses_equator(v[2, k])
        assert (lab is Phase.PARAMAGNETIC) == para, (k, r[k], v0[:, k])
        checked += 1
    assert checked > 990


def test_separatrix_examples():
    N = 1000
    chi = CHIN / N
    sp = BlochState.south_pole(N)
    assert separatrix_classify(sp, chi, 0.4999 * CHIN, N) is Phase.FERROMAGNETIC
    assert separatrix_classify(sp, chi, 0.5 * CHIN, N) is Phase.PARAMAGNETIC
    assert separatrix_classify(sp, chi, 0.4 * CHIN, N) is Phase.FERROMAGNETIC
    om = 0.3 * CHIN
    edge = BlochState(-math.copysign(N / 2, chi / om), 0.0, 0.0, N)
    assert separatrix_classify(edge, chi, om, N) is Phase.PARAMAGNETIC
    with pytest.raises(UnsupportedRegime):
        separatrix_classify(sp, chi, om, N, delta=1.0)


@given(st.floats(0, math.pi), st.floats(0, 2 * math.pi))
def test_strong_drive_always_paramagnetic(theta, phi):
    v = BlochState.from_angles(theta, phi, 2).normalized()
    assert separatrix_classify(v, CHIN, 2.0 * CHIN) is Phase.PARAMAGNETIC


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(-0.5, 0.5), st.floats(0.1, math.pi), st.floats(0, 2 * math.pi))
def test_delta_sign_symmetry(r, d, theta, phi):
    """Delta -> -Delta flips chi and Omega; with delta also flipped, y -> -y maps orbits exactly."""
    v0 = BlochState.from_angles(theta, phi, 2).normalized()
    a = integrate_quench(CollectiveFields.from_ratios(CHIN, r, d), v0, 3 * T_INT, T_INT / 10)
    f = CollectiveFields(-CHIN, -r * CHIN, 0.0, -d * CHIN)
    b = integrate_quench(f, v0 * np.array([1, -1, 1]), 3 * T_INT, T_INT / 10)
    assert np.max(np.abs(a.z - b.z)) < 1e-7
    assert np.max(np.abs(a.x - b.x)) < 1e-7
    assert np.max(np.abs(a.y + b.y)) < 1e-7


def test_south_pole_z_identical_under_flip():
    sp = np.array([0.0, 0.0, -1.0])
    a = integrate_quench(CollectiveFields.from_ratios(CHIN, 0.4), sp, 10 * T_INT, T_INT / 20)
    b = integrate_quench(CollectiveFields(-CHIN, -0.4 * CHIN), sp, 10 * T_INT, T_INT / 20)
    assert np.max(np.abs(a.z - b.z)) < 1e-9
