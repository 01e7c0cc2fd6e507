"""Site-resolved mean-field dynamics with inhomogeneous coupling and decoherence.

Each site k carries the coherence c_k = <s^-_k> and inversion z_k = <s^z_k>.
Couplings are rank one, chi_kj = -L g_k g_j with L = Delta/(Delta^2 + kappa^2/4),
so the exchange sum is evaluated through S = sum_j g_j c_j in O(N_sim).

A run may advance a batch of M independent members at once (drive values,
detunings, shots); member arrays have shape (M, N_sim).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import ModelParams, drive_from_pump, coupling_profile
from .trajectory import Trajectory, IntegrationError, output_grid

DEFAULT_N_SIM = 1000
DEFAULT_N_LATTICE = 3000
DEFAULT_SHOTS = 12
DEFAULT_FLUCTUATION = 0.05


@dataclass
class SiteConfig:
    """Per-site couplings after the g -> g sqrt(N_phys/N_sim) rescaling."""

    g_k: np.ndarray
    positions: np.ndarray
    N_sim: int
    N_phys: float
    radii: np.ndarray | None = None
    seed: int | None = None
    g_nominal: float = 1.0

    @property
    def g_peak(self) -> float:
        """Rescaled antinode coupling."""
        return self.g_nominal * math.sqrt(self.N_phys / self.N_sim)

    @property
    def profile(self) -> np.ndarray:
        return self.g_k / self.g_peak

    def rescaled(self, N_phys: float) -> "SiteConfig":
        """Same positions with the physical atom number changed."""
        s = math.sqrt(N_phys / self.N_phys)
        return SiteConfig(self.g_k * s, self.positions, self.N_sim, N_phys,
                          self.radii, self.seed, self.g_nominal)


@dataclass
class EnsembleState:
    c: np.ndarray
    z: np.ndarray
    beta: complex = 0.0
    t: float = 0.0

    @classmethod
    def south_pole(cls, n):
        return cls(np.zeros(n, complex), -np.ones(n))

    @classmethod
    def coherent(cls, n, theta, phi):
        """Every site in the same pure state at Bloch angles (theta, phi)."""
        c = 0.5 * math.sin(theta) * np.exp(-1j * phi) * np.ones(n)
        return cls(c.astype(complex), math.cos(theta) * np.ones(n))

    def bloch(self):
        """Site Bloch components (x_k, y_k, z_k) = (2 Re c, -2 Im c, z)."""
        return 2 * self.c.real, -2 * self.c.imag, self.z

    def purity(self):
        return 4 * np.abs(self.c) ** 2 + self.z**2


def _site_rng(seed, shot=0):
    # one independent stream per (seed, shot) so shots can be drawn in any order
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, int(shot), 0x5EED])


def uniform_couplings(N_sim: int, params: ModelParams) -> SiteConfig:
    """All sites at an antinode: the collective limit."""
    g = params.g * math.sqrt(params.N / N_sim)
    return SiteConfig(np.full(N_sim, g), np.zeros(N_sim, int), N_sim, params.N,
                      g_nominal=params.g)


def sample_site_couplings(rng_seed, N_sim: int, params: ModelParams, *, shot=0,
                          n_lattice=DEFAULT_N_LATTICE, N_phys=None) -> SiteConfig:
    """Random lattice positions and radial offsets for N_sim simulated atoms.

    g_k = g cos(k j) exp(-(r/w)^2) sqrt(N_phys/N_sim) with j uniform over
    ``n_lattice`` sites and r Rayleigh-distributed from a 2D Gaussian of width
    sigma_th.  Deterministic for a given (seed, shot).
    """
    if N_sim < 1:
        raise ValueError("N_sim must be >= 1")
    N_phys = params.N if N_phys is None else N_phys
    rng = _site_rng(rng_seed, shot)
    j = rng.integers(0, n_lattice, size=N_sim)
    if params.sigma_th > 0:
        xy = rng.normal(0.0, params.sigma_th, size=(N_sim, 2))
        r = np.hypot(xy[:, 0], xy[:, 1])
    else:
        r = np.zeros(N_sim)
    g0 = params.g * math.sqrt(N_phys / N_sim)
    g_k = coupling_profile(g0, params.lambda_L, params.lambda_c, j) * np.exp(-(r / params.waist) ** 2)
    return SiteConfig(g_k, j, N_sim, N_phys, r, int(rng_seed), g_nominal=params.g)


@dataclass
class EnsembleModel:
    """Numerical coefficients of the site equations for a batch of members."""

    g: np.ndarray          # (M, N)
    om: np.ndarray         # (M, N) transverse field Omega_k
    omp: np.ndarray        # (M, N) quadrature field Omega'_k
    delta: np.ndarray      # (M, 1)
    L: float               # Delta / (Delta^2 + kappa^2/4)
    gamma: float = 0.0
    gamma_el: float = 0.0
    mode: str = "adiabatic"
    self_term: str = "exact"
    cav_detuning: np.ndarray | None = None  # (M, 1), Delta - delta
    kappa: float = 0.0

    @property
    def shape(self):
        return self.g.shape

    def pack(self, states) -> np.ndarray:
        M, N = self.shape
        y = np.zeros((M, 2 * N + 1), complex)
        for m, s in enumerate(states):
            y[m, :N] = s.c
            y[m, N:2 * N] = s.z
            y[m, -1] = s.beta
        return y.ravel()

    def rhs(self, t, y):
        M, N = self.shape
        Y = y.reshape(M, 2 * N + 1)
        c = Y[:, :N]
        z = Y[:, N:2 * N].real
        out = np.empty_like(Y)
        g = self.g
        S = np.einsum("mn,mn->m", g, c)[:, None]
        drive = 0.5j * (self.om - 1j * self.omp) * z
        dc = 1j * self.delta * c + drive - (0.5 * self.gamma + self.gamma_el) * c
        dz = -2.0 * self.om * c.imag - 2.0 * self.omp * c.real - self.gamma * (z + 1.0)
        if self.mode == "adiabatic":
            if self.self_term == "exact":
                dc += -1j * self.L * z * g * (S - g * c) + 1j * self.L * g * g * c
            else:
                dc += -1j * self.L * z * g * S
            dz += -4.0 * self.L * g * (np.conj(c) * S).imag
            out[:, -1] = 0.0
        else:
            beta = Y[:, -1:]
            dc += 1j * g * beta * z
            dz += -4.0 * g * (np.conj(beta) * c).imag
            out[:, -1:] = -(1j * self.cav_detuning + 0.5 * self.kappa) * beta - 1j * S
        out[:, :N] = dc
        out[:, N:2 * N] = dz
        return out.ravel()

    def unpack(self, y) -> list:
        M, N = self.shape
        Y = y.reshape(M, 2 * N + 1)
        return [EnsembleState(Y[m, :N].copy(), Y[m, N:2 * N].real.copy(), complex(Y[m, -1]))
                for m in range(M)]

    def energy(self, y) -> np.ndarray:
        """Mean-field energy per member (rad/s), conserved without decoherence."""
        M, N = self.shape
        Y = y.reshape(M, 2 * N + 1, -1)
        c = Y[:, :N]
        z = Y[:, N:2 * N].real
        g = self.g[:, :, None]
        S = np.einsum("mnt,mnt->mt", g * np.ones_like(c.real), c)
        pair = -self.L * (np.abs(S) ** 2 - np.sum(g * g * np.abs(c) ** 2, axis=1))
        if self.self_term == "exact":
            self_e = np.sum(-self.L * g * g * 0.5 * (1.0 + z), axis=1)
        else:
            self_e = np.sum(-self.L * g * g * np.abs(c) ** 2, axis=1)
        single = np.sum(self.om[:, :, None] * c.real - self.omp[:, :, None] * c.imag, axis=1) \
            - 0.5 * self.delta * np.sum(z, axis=1)
        return pair + self_e + single

    def energy_scale(self) -> np.ndarray:
        """Natural magnitude of ``energy`` per member, for relative drift checks."""
        N = self.shape[1]
        chiN = np.abs(self.L) * np.sum(self.g**2, axis=1)
        return 0.5 * N * (0.5 * chiN + np.max(np.abs(self.om) + np.abs(self.omp), axis=1)
                          + np.abs(self.delta[:, 0]))


def build_model(params: ModelParams, sites, *, omega_p=None, delta=None, phi=None,
                mode="adiabatic", self_term="exact", decoherence=True) -> EnsembleModel:
    """Assemble coefficients for one or many members.

    ``sites`` is a SiteConfig or list of them; ``omega_p``, ``delta`` and
    ``phi`` may be arrays over members (rad/s, physical pump amplitude).
    """
    if isinstance(sites, SiteConfig):
        sites = [sites]
    omega_p = np.atleast_1d(params.omega_p if omega_p is None else omega_p).astype(float)
    delta = np.atleast_1d(params.delta if delta is None else delta).astype(float)
    phi = np.atleast_1d(params.phi if phi is None else phi).astype(float)
    M = max(len(sites), len(omega_p), len(delta), len(phi))
    if len(sites) == 1:
        sites = sites * M
    omega_p = np.broadcast_to(omega_p, (M,))
    delta = np.broadcast_to(delta, (M,))
    phi = np.broadcast_to(phi, (M,))
    g = np.stack([s.g_k for s in sites])
    # the pump is rescaled opposite to g so that Omega_k is unchanged
    om = np.empty_like(g)
    omp = np.empty_like(g)
    for m, s in enumerate(sites):
        op_sim = omega_p[m] * math.sqrt(s.N_sim / s.N_phys)
        om[m], omp[m] = drive_from_pump(g[m], op_sim, phi[m], params.Delta, delta[m], params.kappa)
    D, k = params.Delta, params.kappa
    return EnsembleModel(
        g=g, om=om, omp=omp, delta=delta[:, None].copy(), L=D / (D * D + 0.25 * k * k),
        gamma=params.gamma if decoherence else 0.0,
        gamma_el=params.gamma_el if decoherence else 0.0,
        mode=mode, self_term=self_term, cav_detuning=(D - delta)[:, None].copy(), kappa=k)


def site_rhs_adiabatic(state: EnsembleState, sites: SiteConfig, params: ModelParams, *,
                       self_term="exact", decoherence=True):
    """d(c, z)/dt for a single ensemble with the cavity eliminated."""
    model = build_model(params, sites, mode="adiabatic", self_term=self_term,
                        decoherence=decoherence)
    d = model.rhs(state.t, model.pack([state]))
    n = sites.N_sim
    return EnsembleState(d[:n], d[n:2 * n].real, 0.0, state.t)


def site_rhs_full_cavity(state: EnsembleState, sites: SiteConfig, params: ModelParams, *,
                         decoherence=True):
    """d(c, z, beta)/dt with the cavity fluctuation beta kept explicitly."""
    model = build_model(params, sites, mode="full_cavity", decoherence=decoherence)
    d = model.rhs(state.t, model.pack([state]))
    n = sites.N_sim
    return EnsembleState(d[:n], d[n:2 * n].real, complex(d[-1]), state.t)


@dataclass
class EnsembleRun:
    """Output of ``integrate_model``: per-member collective series and final states."""

    t: np.ndarray
    x: np.ndarray      # (M, n_t), normalized by N_sim/2
    y: np.ndarray
    z: np.ndarray
    beta: np.ndarray   # (M, n_t)
    final: list
    energy: np.ndarray | None = None
    energy_scale: np.ndarray | None = None
    purity_max: np.ndarray | None = None

    def trajectory(self, m=0, **meta) -> Trajectory:
        cols = {"beta_re": self.beta[m].real, "beta_im": self.beta[m].imag}
        if self.energy is not None:
            cols["energy"] = self.energy[m]
            meta = dict(meta, energy_scale=float(self.energy_scale[m]))
        return Trajectory(self.t, self.x[m], self.y[m], self.z[m], columns=cols, meta=meta)


def integrate_model(model: EnsembleModel, initial, t_final, dt_out, *, t0=0.0,
                    rtol=1e-8, atol=1e-10, method="RK45", track_energy=False,
                    track_purity=False) -> EnsembleRun:
    """Integrate every member of ``model`` from ``initial`` (state or list of states)."""
    M, N = model.shape
    if isinstance(initial, EnsembleState):
        initial = [initial] * M
    y0 = model.pack(initial)
    t_eval = output_grid(t0, t_final, dt_out)
    sol = solve_ivp(model.rhs, (t0, t_final), y0, method=method, t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if sol.status < 0:
        raise IntegrationError(f"ensemble integration failed: {sol.message}",
                               sol.t[-1] if sol.t.size else t0,
                               sol.y[:, -1] if sol.y.size else y0)
    Y = sol.y.reshape(M, 2 * N + 1, -1)
    c = Y[:, :N]
    z = Y[:, N:2 * N].real
    x = 2 * c.real.sum(axis=1) / N
    yy = -2 * c.imag.sum(axis=1) / N
    zz = z.sum(axis=1) / N
    run = EnsembleRun(sol.t, x, yy, zz, Y[:, -1], model.unpack(sol.y[:, -1]))
    for st in run.final:
        st.t = float(sol.t[-1])
    if track_energy:
        run.energy = model.energy(sol.y)
        run.energy_scale = model.energy_scale()
    if track_purity:
        run.purity_max = np.max(4 * np.abs(c) ** 2 + z**2, axis=1)
    return run


def integrate_ensemble(params: ModelParams, sites: SiteConfig, t_final, dt_out, *,
                       initial=None, mode="adiabatic", self_term="exact", decoherence=True,
                       rtol=1e-8, atol=1e-10, t0=0.0) -> Trajectory:
    """Single-member convenience wrapper returning a Trajectory."""
    model = build_model(params, sites, mode=mode, self_term=self_term, decoherence=decoherence)
    initial = EnsembleState.south_pole(sites.N_sim) if initial is None else initial
    run = integrate_model(model, initial, t_final, dt_out, t0=t0, rtol=rtol, atol=atol,
                          track_energy=not decoherence)
    traj = run.trajectory(0, model=f"ENSEMBLE_{mode.upper()}", n_sim=sites.N_sim,
                          n_phys=sites.N_phys)
    traj.meta["final_state"] = run.final[0]
    return traj


def draw_atom_numbers(N, n_shots, fluctuation_rms, rng_seed):
    """Gaussian shot-to-shot atom numbers, clamped to +-4 sigma and >= 1."""
    rng = np.random.default_rng([int(rng_seed) & 0xFFFFFFFFFFFFFFFF, 0xA70])
    if fluctuation_rms == 0:
        return np.full(n_shots, float(N))
    dev = np.clip(rng.standard_normal(n_shots), -4.0, 4.0)
    return np.maximum(1.0, N * (1.0 + fluctuation_rms * dev))


def run_shots(params: ModelParams, protocol, n_shots=DEFAULT_SHOTS,
              fluctuation_rms=DEFAULT_FLUCTUATION, rng_seed=0) -> Trajectory:
    """Average a protocol over shots with fluctuating atom number.

    ``protocol(params_shot, shot_index)`` returns a Trajectory on a fixed time
    grid.  The pump amplitude is held fixed, so Omega/(chi N) fluctuates with N.
    Returns the pointwise mean with ``*_std`` spread columns.
    """
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    if fluctuation_rms < 0:
        raise ValueError("fluctuation_rms must be >= 0")
    Ns = draw_atom_numbers(params.N, n_shots, fluctuation_rms, rng_seed)
    trajs = [protocol(params.with_(N=float(Ns[i])), i) for i in range(n_shots)]
    X = np.stack([tr.x for tr in trajs])
    Y = np.stack([tr.y for tr in trajs])
    Z = np.stack([tr.z for tr in trajs])
    cols = {"x_std": X.std(axis=0), "y_std": Y.std(axis=0), "z_std": Z.std(axis=0)}
    return Trajectory(trajs[0].t, X.mean(axis=0), Y.mean(axis=0), Z.mean(axis=0), columns=cols,
                      meta={"n_shots": n_shots, "n_phys_shots": Ns.tolist(),
                            "fluctuation_rms": fluctuation_rms, "seed": rng_seed})


def quench_protocol(t_final, dt_out, *, N_sim=DEFAULT_N_SIM, seed=0, mode="adiabatic",
                    decoherence=True, incommensurate=True, rtol=1e-8, atol=1e-10):
    """Protocol factory for ``run_shots``: south pole, constant drive, fresh site sample per shot."""
    def protocol(p: ModelParams, shot: int) -> Trajectory:
        sites = (sample_site_couplings(seed, N_sim, p, shot=shot) if incommensurate
                 else uniform_couplings(N_sim, p))
        return integrate_ensemble(p, sites, t_final, dt_out, mode=mode,
                                  decoherence=decoherence, rtol=rtol, atol=atol)
    return protocol
