"""Figure-level protocols: drive and detuning sweeps, phase diagrams, basin maps.

Sweeps are expressed in ratios to the interaction scale.  The drive ratio
Omega/(chi N) is signed like chi N (positive for the experiment, where both
flip with Delta); detunings are quoted as delta/|chi N| so that a sweep run
at -Delta shows the transition mirrored about delta = 0.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .analysis import (Estimator, EstimatorKind, estimate, central_gradient, classify_array,
                       THEORY_ESTIMATOR, fit_period)
from .collective import CollectiveFields, Phase, integrate_batch, bloch_rhs
from .core import ModelParams, TWO_PI, interaction_period
from .ensemble import (DEFAULT_N_SIM, EnsembleState, build_model, draw_atom_numbers,
                       integrate_model, sample_site_couplings, uniform_couplings)
from .oracle import basin_boundary_exact
from .trajectory import SweepResult, IntegrationError, Trajectory

MODELS = ("COLLECTIVE", "ENSEMBLE_ADIABATIC", "ENSEMBLE_FULL_CAVITY", "MOTION")

# cap on stored complex samples per ensemble solve (members x sites x outputs)
_SAMPLE_BUDGET = 4_000_000


@dataclass
class EnsembleOptions:
    """How ensemble members are built for a sweep."""

    N_sim: int = DEFAULT_N_SIM
    n_shots: int = 1
    fluctuation_rms: float = 0.0
    seed: int = 0
    incommensurate: bool = True
    decoherence: bool = True
    self_term: str = "exact"
    rtol: float = 1e-8
    atol: float = 1e-10
    dt_out: float = 0.05e-6
    workers: int = 1


def _mode(model):
    model = model.upper()
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    return {"ENSEMBLE_ADIABATIC": "adiabatic", "ENSEMBLE_FULL_CAVITY": "full_cavity"}.get(model)


def _t_end(estimator: Estimator):
    return estimator.t1 if estimator.kind == EstimatorKind.WINDOW else estimator.t0


def collective_fields(params: ModelParams, ordering_correction=False):
    return CollectiveFields.from_params(params, ordering_correction=ordering_correction)


def _collective_jz(chiN, omega, delta, estimator, v0=(0.0, 0.0, -1.0), dt_out=None,
                   omega_prime=0.0):
    t_end = _t_end(estimator)
    if dt_out is None:
        dt_out = min(t_end / 2000, interaction_period(chiN) / 50 if chiN else t_end / 2000)
    t, v = integrate_batch(chiN, omega, delta, np.asarray(v0, float), t_end, dt_out,
                           omega_prime=omega_prime)
    return estimate(t, v[2], estimator), t, v


def _ensemble_members(params, opts: EnsembleOptions, omega_ratio, delta, mode, estimator,
                      omega_prime_sign=1.0):
    """jz estimates for every (control value, shot) pair; returns array (n_ctrl, n_shots)."""
    omega_ratio = np.atleast_1d(omega_ratio).astype(float)
    delta = np.atleast_1d(delta).astype(float)
    n_ctrl = max(len(omega_ratio), len(delta))
    omega_ratio = np.broadcast_to(omega_ratio, (n_ctrl,))
    delta = np.broadcast_to(delta, (n_ctrl,))
    Ns = draw_atom_numbers(params.N, opts.n_shots, opts.fluctuation_rms, opts.seed)
    # pump amplitudes are fixed by the nominal N, so the realized ratio fluctuates with N
    omega_p = np.array([params.with_drive_ratio(r).omega_p for r in omega_ratio])
    members = [(i, s) for s in range(opts.n_shots) for i in range(n_ctrl)]
    t_end = _t_end(estimator)
    n_t = int(t_end / opts.dt_out) + 2
    per = max(1, int(_SAMPLE_BUDGET // (opts.N_sim * n_t)))
    chunks = [members[a:a + per] for a in range(0, len(members), per)]

    def solve(chunk):
        sites = []
        for i, s in chunk:
            p_s = params.with_(N=float(Ns[s]))
            sites.append(sample_site_couplings(opts.seed, opts.N_sim, p_s, shot=s)
                         if opts.incommensurate else uniform_couplings(opts.N_sim, p_s))
        idx = [i for i, _ in chunk]
        model = build_model(params, sites, omega_p=omega_p[idx], delta=delta[idx], mode=mode,
                            self_term=opts.self_term, decoherence=opts.decoherence)
        run = integrate_model(model, EnsembleState.south_pole(opts.N_sim), t_end, opts.dt_out,
                              rtol=opts.rtol, atol=opts.atol)
        return estimate(run.t, run.z, estimator)

    # chunk composition never depends on the worker count, so results are identical
    if opts.workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(opts.workers) as pool:
            results = list(pool.map(solve, chunks))
    else:
        results = [solve(c) for c in chunks]
    out = np.empty((n_ctrl, opts.n_shots))
    for chunk, jz in zip(chunks, results):
        for k, (i, s) in enumerate(chunk):
            out[i, s] = jz[k]
    return out, Ns


def drive_sweep(params: ModelParams, omega_over_chiN, *, model="COLLECTIVE",
                estimator: Estimator | None = None, options: EnsembleOptions | None = None,
                ordering_correction=False) -> SweepResult:
    """Order parameter after a quench from the south pole, versus Omega/(chi N)."""
    grid = np.asarray(omega_over_chiN, float)
    mode = _mode(model)
    if model.upper() == "MOTION":
        raise ValueError("drive sweeps are not implemented for the motion model")
    if mode is None:
        f = collective_fields(params, ordering_correction)
        if estimator is None:
            estimator = Estimator.window(0.0, 20 * interaction_period(f.chiN))
        jz, _, _ = _collective_jz(f.chiN, grid * f.chiN, f.delta, estimator)
        spread = np.zeros_like(jz)
        meta = {"chiN": f.chiN}
    else:
        estimator = THEORY_ESTIMATOR if estimator is None else estimator
        opts = options or EnsembleOptions()
        vals, Ns = _ensemble_members(params, opts, grid, params.delta, mode, estimator)
        jz, spread = vals.mean(axis=1), vals.std(axis=1)
        meta = {"chiN": params.chiN, "n_phys_shots": Ns.tolist(), "N_sim": opts.N_sim,
                "n_shots": opts.n_shots, "seed": opts.seed}
    jz = np.clip(jz, -1.0, 1.0)
    return SweepResult(grid, jz, spread=spread, labels=classify_array(jz),
                       names=("omega_over_chiN",),
                       meta=dict(meta, model=model.upper(), estimator=_est_meta(estimator)))


def detuning_sweep(params: ModelParams, delta_over_chiN, omega_over_chiN, *,
                   model="COLLECTIVE", estimator: Estimator | None = None,
                   options: EnsembleOptions | None = None) -> SweepResult:
    """Order parameter versus delta/|chi N| at a fixed drive ratio."""
    grid = np.asarray(delta_over_chiN, float)
    mode = _mode(model)
    if model.upper() == "MOTION":
        raise ValueError("detuning sweeps are not implemented for the motion model")
    scale = abs(params.chiN)
    if mode is None:
        f = collective_fields(params)
        if estimator is None:
            estimator = Estimator.window(0.0, 20 * interaction_period(f.chiN))
        jz, _, _ = _collective_jz(f.chiN, omega_over_chiN * f.chiN, grid * scale, estimator)
        spread = np.zeros_like(jz)
        meta = {"chiN": f.chiN}
    else:
        estimator = THEORY_ESTIMATOR if estimator is None else estimator
        opts = options or EnsembleOptions()
        vals, Ns = _ensemble_members(params, opts, omega_over_chiN, grid * scale, mode, estimator)
        jz, spread = vals.mean(axis=1), vals.std(axis=1)
        meta = {"chiN": params.chiN, "n_phys_shots": Ns.tolist(), "N_sim": opts.N_sim,
                "n_shots": opts.n_shots, "seed": opts.seed}
    jz = np.clip(jz, -1.0, 1.0)
    return SweepResult(grid, jz, spread=spread, labels=classify_array(jz),
                       names=("delta_over_chiN",),
                       meta=dict(meta, model=model.upper(), omega_over_chiN=float(omega_over_chiN),
                                 estimator=_est_meta(estimator)))


def _est_meta(e: Estimator):
    return {"kind": e.kind.value, "t0": e.t0, "t1": e.t1}


@dataclass
class PeriodScan:
    """Fitted ferromagnetic oscillation periods versus cavity detuning."""
    Delta_hz: np.ndarray
    period: np.ndarray          # fitted, seconds
    expected: np.ndarray        # 2 pi / (N |chi| / 2)
    fits: list

    @property
    def ratio(self):
        return self.period / self.expected

    def slope(self):
        """Linear fit T = a Delta + b; returns (a_fit, a_expected)."""
        a = np.polyfit(self.Delta_hz, self.period, 1)[0]
        b = np.polyfit(self.Delta_hz, self.expected, 1)[0]
        return float(a), float(b)


def ferromagnetic_period(params: ModelParams, Delta_hz, *, drive=0.104, t_final=6e-6,
                         options: EnsembleOptions | None = None) -> PeriodScan:
    """Quench deep into the trapped phase and fit the inversion oscillation period.

    ``drive`` is 2 Omega_p/(N g), which equals Omega/|chi N| at delta = 0.
    The reference period uses chi/2, the rms coupling of the incommensurate lattice.
    """
    opts = options or EnsembleOptions()
    Delta_hz = np.atleast_1d(np.asarray(Delta_hz, float))
    periods, expected, fits = [], [], []
    for D in Delta_hz:
        p = params.with_(Delta_hz=float(D), omega_p_hz=drive * params.g_hz * params.N / 2)
        sites = (sample_site_couplings(opts.seed, opts.N_sim, p) if opts.incommensurate
                 else uniform_couplings(opts.N_sim, p))
        model = build_model(p, sites, mode="adiabatic", self_term=opts.self_term,
                            decoherence=opts.decoherence)
        run = integrate_model(model, EnsembleState.south_pole(opts.N_sim), t_final, opts.dt_out / 5,
                              rtol=opts.rtol, atol=opts.atol)
        fit = fit_period(Trajectory(run.t, run.x[0], run.y[0], run.z[0]))
        fits.append(fit)
        periods.append(fit.period)
        expected.append(TWO_PI / abs(0.5 * p.chiN))
    return PeriodScan(Delta_hz, np.array(periods), np.array(expected), fits)


def rabi_detuning_sweep(omega, deltas, n_periods=10, rtol=1e-12, atol=1e-14):
    """Non-interacting (chi = 0) time-averaged inversion from the south pole.

    Each detuning is averaged over an integer number of its own generalized
    Rabi periods, so the result is the exact long-time mean.  All detunings
    are integrated together in the scaled time tau = t / T_m, one period per
    unit of tau, with the running integral of z appended to the state.
    """
    deltas = np.asarray(deltas, float)
    w = np.hypot(omega, deltas)
    out = np.full(deltas.shape, -1.0)
    live = w > 0
    if not np.any(live):
        return out
    d = deltas[live]
    T = TWO_PI / w[live]
    M = len(d)

    def fun(tau, y):
        v = y[:3 * M].reshape(3, M)
        dv = bloch_rhs(v, 0.0, omega, 0.0, d) * T
        return np.concatenate([dv.ravel(), v[2]])

    y0 = np.concatenate([np.zeros(M), np.zeros(M), -np.ones(M), np.zeros(M)])
    sol = solve_ivp(fun, (0.0, float(n_periods)), y0, rtol=rtol, atol=atol, method="DOP853")
    if sol.status < 0:
        raise IntegrationError(f"Rabi sweep failed: {sol.message}", sol.t[-1], sol.y[:, -1])
    out[live] = sol.y[3 * M:, -1] / n_periods
    return out


# phase diagram

@dataclass
class PhaseDiagram:
    sweep: SweepResult
    jump_line: list
    ridge: list
    jump_threshold: float = 0.3

    def polylines(self):
        return {"jump_line": [list(map(float, p)) for p in self.jump_line],
                "ridge": [list(map(float, p)) for p in self.ridge],
                "jump_threshold": self.jump_threshold}


def phase_diagram(params: ModelParams, delta_over_chiN, omega_over_chiN, *, model="COLLECTIVE",
                  estimator: Estimator | None = None, options: EnsembleOptions | None = None,
                  jump_threshold=0.3) -> PhaseDiagram:
    """Order parameter on a (delta/|chi N|, Omega/(chi N)) grid with jump line and crossover ridge.

    Rows are drive values, columns detunings.  Any adjacent pair of cells whose
    order parameters differ by more than ``jump_threshold`` contributes its
    midpoint to the jump line; in rows free of such jumps the ridge is the
    max-gradient detuning on the delta > 0 side.
    """
    d = np.asarray(delta_over_chiN, float)
    o = np.asarray(omega_over_chiN, float)
    if len(d) < 3 or len(o) < 2:
        raise ValueError("phase diagram needs at least 3 detunings and 2 drive values")
    mode = _mode(model)
    if mode is None:
        f = collective_fields(params)
        if estimator is None:
            estimator = Estimator.window(0.0, 20 * interaction_period(f.chiN))
        D, O = np.meshgrid(d, o)
        jz, _, _ = _collective_jz(f.chiN, O.ravel() * f.chiN, D.ravel() * abs(f.chiN), estimator)
        jz = jz.reshape(len(o), len(d))
    else:
        rows = [detuning_sweep(params, d, r, model=model, estimator=estimator, options=options)
                for r in o]
        jz = np.stack([r.jz_bar for r in rows])
        estimator = estimator or THEORY_ESTIMATOR
    jz = np.clip(jz, -1.0, 1.0)
    jumps = []
    for i in range(len(o)):
        for j in range(len(d) - 1):
            if abs(jz[i, j + 1] - jz[i, j]) > jump_threshold:
                jumps.append((0.5 * (d[j] + d[j + 1]), o[i]))
    for i in range(len(o) - 1):
        for j in range(len(d)):
            if abs(jz[i + 1, j] - jz[i, j]) > jump_threshold:
                jumps.append((d[j], 0.5 * (o[i] + o[i + 1])))
    jumps.sort(key=lambda p: (p[1], p[0]))
    ridge = []
    pos = d > 0
    for i in range(len(o)):
        if np.any(np.abs(np.diff(jz[i])) > jump_threshold):
            continue
        g = central_gradient(d, jz[i])
        idx = np.flatnonzero(pos & np.isfinite(g))
        if len(idx):
            k = idx[np.argmax(np.abs(g[idx]))]
            ridge.append((d[k], o[i]))
    grad = np.stack([central_gradient(d, row) for row in jz])
    sweep = SweepResult(d, jz, control_2=o, labels=classify_array(jz),
                        names=("delta_over_chiN", "omega_over_chiN"),
                        meta={"model": model.upper(), "estimator": _est_meta(estimator),
                              "gradient": grad})
    return PhaseDiagram(sweep, jumps, ridge, jump_threshold)


# state preparation and basin maps

def prep_state(fields: CollectiveFields, z_target, *, prep_ratio=3.0, rtol=1e-11, atol=1e-13):
    """Rotate the south pole with a strong drive along x until z reaches ``z_target``.

    Interactions stay on during the rotation, as in the experiment; the
    returned unit vector is the prepared collective state.
    """
    if not -1.0 <= z_target <= 0.0:
        raise ValueError("target z must lie in the southern hemisphere")
    v0 = np.array([0.0, 0.0, -1.0])
    if z_target <= -1.0:
        return v0
    om = prep_ratio * fields.chiN if fields.chiN else prep_ratio

    def fun(t, v):
        return bloch_rhs(v, fields.chiN, om, 0.0, fields.delta)

    def hit(t, v):
        return v[2] - z_target
    hit.terminal = True
    hit.direction = 1
    t_max = 4 * TWO_PI / abs(om)
    sol = solve_ivp(fun, (0.0, t_max), v0, events=hit, rtol=rtol, atol=atol)
    if not sol.t_events[0].size:
        raise IntegrationError("prep drive never reached the target inversion", sol.t[-1], sol.y[:, -1])
    v = sol.y_events[0][0]
    return v / np.linalg.norm(v)


def natural_azimuth(omega):
    """Azimuth of a state rotated away from the south pole by a drive of sign(omega) along x."""
    return math.copysign(0.5 * math.pi, omega) if omega != 0 else 0.5 * math.pi


def apply_phase_jump(v, prepared_azimuth, target_azimuth):
    """Rotate the prepared state about z so its azimuth becomes ``target_azimuth``.

    Equivalent to shifting the drive phase by prepared - target.
    """
    a = target_azimuth - prepared_azimuth
    c, s = math.cos(a), math.sin(a)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]])


@dataclass
class BasinMap:
    radius: np.ndarray          # cell centres, sqrt(1 - z0^2)
    dphi: np.ndarray            # cell centres, phase jump
    omega_over_chiN: float
    simulated: np.ndarray       # (n_r, n_phi) labels
    exact: np.ndarray | None    # (n_r, n_phi) labels from the energy-shell condition
    jz_bar: np.ndarray          # (n_r, n_phi)
    meta: dict = field(default_factory=dict)

    def ferro_fraction(self, which="simulated"):
        lab = self.simulated if which == "simulated" else self.exact
        w = np.broadcast_to(self.radius[:, None], lab.shape)
        return float(np.sum(w * (lab == Phase.FERROMAGNETIC.value)) / np.sum(w))

    def boundary_band(self):
        """Cells with an exact-label neighbour (8-connected, periodic in angle) of the other phase."""
        lab = self.exact == Phase.FERROMAGNETIC.value
        band = np.zeros_like(lab)
        n_r = lab.shape[0]
        for dr in (-1, 0, 1):
            for dp in (-1, 0, 1):
                sh = np.roll(lab, dp, axis=1)
                if dr:
                    sh = np.roll(sh, dr, axis=0)
                    valid = np.ones(n_r, bool)
                    valid[0 if dr == 1 else -1] = False
                    band |= (sh != lab) & valid[:, None]
                else:
                    band |= sh != lab
        return band

    def mismatch(self):
        return self.simulated != self.exact


def polar_grid(n_r=50, n_phi=50):
    r = (np.arange(n_r) + 0.5) / n_r
    phi = -math.pi + (np.arange(n_phi) + 0.5) * TWO_PI / n_phi
    return r, phi


def basin_map(omega_over_chiN, *, n_r=50, n_phi=50, chiN=TWO_PI * 1e6, model="COLLECTIVE",
              n_periods=20, prep_ratio=3.0, params: ModelParams | None = None,
              options: EnsembleOptions | None = None, t_final=4e-6, threshold=0.1) -> BasinMap:
    """Ferromagnetic basin over prepared initial states (radius, phase jump).

    For each radius the south pole is rotated by a strong drive to
    z0 = -sqrt(1 - r^2); the drive phase then jumps by dphi (measured from the
    unshifted orientation) while its amplitude drops to the target value.
    COLLECTIVE runs label a cell ferromagnetic when z never crosses the
    equator within ``n_periods`` interaction periods and also return the
    analytic energy-shell labels.  Ensemble runs use a SNAPSHOT at
    ``t_final`` and the usual threshold.
    """
    r, dphi = polar_grid(n_r, n_phi)
    mode = _mode(model)
    if mode is None:
        return _basin_collective(omega_over_chiN, r, dphi, chiN, n_periods, prep_ratio)
    if params is None:
        raise ValueError("ensemble basin maps need ModelParams")
    return _basin_ensemble(params, omega_over_chiN, r, dphi, mode, options or EnsembleOptions(),
                           prep_ratio, t_final, threshold)


def _basin_collective(ratio, r, dphi, chiN, n_periods, prep_ratio):
    f = CollectiveFields(chiN, ratio * chiN)
    omega = f.omega
    base = natural_azimuth(omega)
    v0 = np.empty((3, len(r), len(dphi)))
    exact = np.empty((len(r), len(dphi)), dtype=object)
    for i, rho in enumerate(r):
        z0 = -math.sqrt(max(0.0, 1.0 - rho * rho))
        v = prep_state(f, z0, prep_ratio=prep_ratio)
        az = math.atan2(v[1], v[0])
        for j, dp in enumerate(dphi):
            target = base - dp
            v0[:, i, j] = apply_phase_jump(v, az, target)
            exact[i, j] = basin_boundary_exact(2, chiN / 2, omega, math.pi - math.asin(rho), target).value
    T = n_periods * interaction_period(chiN)
    t, v = integrate_batch(chiN, omega, 0.0, v0.reshape(3, -1), T, interaction_period(chiN) / 40)
    z = v[2]
    crossed = np.any(z > 0, axis=1)
    sim = np.where(crossed, Phase.PARAMAGNETIC.value, Phase.FERROMAGNETIC.value)
    jz = estimate(t, z, Estimator.window(0.0, T))
    shape = (len(r), len(dphi))
    return BasinMap(r, dphi, ratio, sim.reshape(shape), exact.astype(str), jz.reshape(shape),
                    meta={"model": "COLLECTIVE", "chiN": chiN, "n_periods": n_periods,
                          "prep_ratio": prep_ratio})


def _basin_ensemble(params, ratio, r, dphi, mode, opts, prep_ratio, t_final, threshold):
    p = params.with_drive_ratio(ratio)
    sites = (sample_site_couplings(opts.seed, opts.N_sim, p) if opts.incommensurate
             else uniform_couplings(opts.N_sim, p))
    prep_p = params.with_drive_ratio(prep_ratio)
    base = natural_azimuth(p.chiN * ratio)
    jz = np.empty((len(r), len(dphi)))
    for i, rho in enumerate(r):
        z0 = -math.sqrt(max(0.0, 1.0 - rho * rho))
        prep = build_model(prep_p, sites, mode=mode, self_term=opts.self_term,
                           decoherence=opts.decoherence)
        state = _ensemble_prep(prep, opts, z0)
        c = state.c
        az = math.atan2(-2 * c.imag.sum(), 2 * c.real.sum()) if np.abs(c.sum()) > 0 else base
        starts = []
        for dp in dphi:
            rot = (base - dp) - az
            starts.append(EnsembleState(c * np.exp(-1j * rot), state.z.copy(), state.beta))
        model = build_model(p, [sites] * len(dphi), mode=mode, self_term=opts.self_term,
                            decoherence=opts.decoherence)
        run = integrate_model(model, starts, t_final, opts.dt_out, rtol=opts.rtol, atol=opts.atol)
        jz[i] = run.z[:, -1]
    labels = classify_array(jz, threshold)
    return BasinMap(r, dphi, ratio, labels, None, jz,
                    meta={"model": mode, "t_final": t_final, "N_sim": opts.N_sim})


def _ensemble_prep(model, opts, z_target):
    M, N = model.shape
    y0 = model.pack([EnsembleState.south_pole(N)])
    if z_target <= -1.0:
        return model.unpack(y0)[0]

    def hit(t, y):
        return y[N:2 * N].real.mean() - z_target
    hit.terminal = True
    hit.direction = 1
    om = np.sqrt(np.mean(model.om[0] ** 2 + model.omp[0] ** 2))
    sol = solve_ivp(model.rhs, (0.0, 8 * TWO_PI / om), y0, events=hit, rtol=opts.rtol, atol=opts.atol)
    if not sol.t_events[0].size:
        raise IntegrationError("ensemble prep never reached the target inversion",
                               sol.t[-1], sol.y[:, -1])
    return model.unpack(sol.y_events[0][0])[0]
