import math
import time

import numpy as np
import pytest

from cavity_xy.core import TWO_PI, ModelParams
from cavity_xy.ensemble import (EnsembleState, SiteConfig, build_model, draw_atom_numbers,
                                integrate_ensemble, integrate_model, quench_protocol, run_shots,
                                sample_site_couplings, site_rhs_full_cavity, uniform_couplings)
from cavity_xy.checks import check_lindblad_sites, check_uniform_reduction, full_cavity_deviation
from cavity_xy.protocols import EnsembleOptions, drive_sweep
from cavity_xy.analysis import Estimator


def test_single_site_rabi():
    p = ModelParams(N=1, gamma_hz=0, gamma_el_hz=0)
    om = TWO_PI * 1e6
    sites = SiteConfig(np.ones(1), np.zeros(1, int), 1, 1.0)
    model = build_model(p, sites)
    model.g[:] = 0.0
    model.om[:] = om
    run = integrate_model(model, EnsembleState.south_pole(1), 3e-6, 0.01e-6, rtol=1e-11, atol=1e-13)
    assert np.max(np.abs(run.z[0] + np.cos(om * run.t))) < 1e-8


def test_uniform_reduces_to_collective():
    assert check_uniform_reduction() < 1e-8


def test_lindblad_six_sites():
    assert check_lindblad_sites() < 0.05


def test_beta_relaxes_at_half_kappa():
    p = ModelParams(N=3)
    sites = uniform_couplings(3, p)
    st = EnsembleState(np.zeros(3, complex), -np.ones(3), 1.0 + 0.5j)
    d = site_rhs_full_cavity(st, sites, p)
    # with the spins held fixed only the beta equation matters
    assert (d.beta / st.beta).real == pytest.approx(-0.5 * p.kappa, rel=1e-12)


def test_beta_steady_state():
    p = ModelParams(N=5, delta_hz=1e5)
    sites = sample_site_couplings(2, 5, p)
    rng = np.random.default_rng(0)
    c = 0.3 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    beta = -np.sum(sites.g_k * c) / ((p.Delta - p.delta) - 0.5j * p.kappa)
    d = site_rhs_full_cavity(EnsembleState(c, -0.5 * np.ones(5), beta), sites, p)
    assert abs(d.beta) < 1e-9 * abs(p.Delta * beta)


def test_full_cavity_converges_with_detuning():
    # elimination error shrinks as 1/Delta at fixed chi
    devs = []
    for scale in (1, 4):
        p = ModelParams(g_hz=10.9e3 * math.sqrt(scale), Delta_hz=50e6 * scale)
        devs.append(full_cavity_deviation(0.3, N_sim=50, t_final=3e-6, params=p, decoherence=False))
    assert devs[1] < 0.4 * devs[0]


def test_site_sampling():
    p = ModelParams(N=1e4)
    a = sample_site_couplings(7, 1000, p)
    b = sample_site_couplings(7, 1000, p)
    assert a.g_k.tobytes() == b.g_k.tobytes()
    assert sample_site_couplings(8, 1000, p).g_k.tobytes() != a.g_k.tobytes()
    g0 = p.g * math.sqrt(p.N / 1000)
    assert np.max(np.abs(a.g_k)) <= g0 * (1 + 1e-12)
    big = sample_site_couplings(1, 4000, p)
    assert np.mean(big.g_k**2) * 4000 == pytest.approx(p.g**2 * p.N / 2, rel=0.02)
    g50 = p.g * math.sqrt(p.N / 50)
    assert np.allclose(uniform_couplings(50, p).g_k, g50, rtol=1e-14)
    comm = sample_site_couplings(1, 50, p.with_(lambda_L=4 * p.lambda_c))
    assert np.allclose(comm.g_k, g50, rtol=1e-9)


def test_atom_numbers():
    assert np.all(draw_atom_numbers(1e6, 5, 0.0, 3) == 1e6)
    n = draw_atom_numbers(1e6, 20000, 0.05, 3)
    assert np.all(np.abs(n / 1e6 - 1) <= 0.2 + 1e-12)
    assert np.std(n) / 1e6 == pytest.approx(0.05, rel=0.05)
    assert np.array_equal(n, draw_atom_numbers(1e6, 20000, 0.05, 3))


def test_shots_without_fluctuation_identical():
    p = ModelParams().with_drive_ratio(0.3)
    tr = run_shots(p, quench_protocol(1e-6, 0.05e-6, N_sim=20, incommensurate=False),
                   n_shots=5, fluctuation_rms=0.0)
    assert np.all(tr.columns["z_std"] == 0)
    assert tr.meta["n_shots"] == 5


def test_purity_never_increases():
    p = ModelParams().with_drive_ratio(0.6)
    sites = sample_site_couplings(0, 200, p)
    model = build_model(p, sites)
    run = integrate_model(model, EnsembleState.south_pole(200), 6e-6, 0.02e-6, track_purity=True)
    assert np.all(np.diff(run.purity_max[0]) <= 1e-7)
    assert run.purity_max[0][-1] < 1


def test_energy_conserved_without_decoherence():
    p = ModelParams().with_drive_ratio(0.4)
    sites = sample_site_couplings(4, 100, p)
    model = build_model(p, sites, decoherence=False)
    run = integrate_model(model, EnsembleState.south_pole(100), 6e-6, 0.02e-6,
                          rtol=1e-10, atol=1e-12, track_energy=True)
    e = run.energy[0]
    assert np.max(np.abs(e - e[0])) / run.energy_scale[0] < 1e-7


def test_rhs_scaling_linear():
    p = ModelParams().with_drive_ratio(0.3)

    def cost(n):
        sites = sample_site_couplings(0, n, p)
        model = build_model(p, sites)
        y = model.pack([EnsembleState.coherent(n, 2.0, 0.3)])
        model.rhs(0.0, y)
        t0 = time.perf_counter()
        for _ in range(200):
            model.rhs(0.0, y)
        return time.perf_counter() - t0

    assert cost(40000) / cost(20000) <= 2.5


def test_critical_spread_peak():
    p = ModelParams()
    sw = drive_sweep(p, [0.1, 0.29, 0.6], model="ENSEMBLE_ADIABATIC", estimator=Estimator.snapshot(4e-6),
                     options=EnsembleOptions(N_sim=200, n_shots=6, fluctuation_rms=0.05))
    assert sw.spread[1] > sw.spread[0] and sw.spread[1] > sw.spread[2]


def test_integrate_ensemble_trajectory():
    p = ModelParams().with_drive_ratio(0.3)
    tr = integrate_ensemble(p, sample_site_couplings(0, 50, p), 1e-6, 0.1e-6)
    assert len(tr.t) == 11 and tr.t[-1] == pytest.approx(1e-6)
    assert tr.z[0] == -1.0
