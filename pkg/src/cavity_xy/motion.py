"""Axial trap motion: level-resolved couplings, thermal starts and the echo protocol.

Each simulated site carries a density matrix over (trap level n = 0..n_max)
x (spin down, up), stored spin-major: index s*(n_max+1) + n with s = 0 for
down.  The cavity coupling cos(k_c x) of an atom displaced by x from its site
centre mixes trap levels through the overlaps eta_c, eta_s, so a site sees

    h_j = w_T n - (delta/2) sz + [(alpha + beta) G_j (x) |up><down| + h.c.]

with G_j = g_j (cos(k j) eta_c + sin(k j) eta_s).  The fluctuating cavity
field beta is eliminated adiabatically from the instantaneous site moments.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import eval_genlaguerre, gammaln

from .core import ModelParams, TrapParams, HBAR, KB, TWO_PI, classical_field
from .ensemble import SiteConfig, sample_site_couplings, uniform_couplings
from .trajectory import Trajectory, IntegrationError, output_grid


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same quantity disagree."""


class TruncationWarning(RuntimeWarning):
    pass


def trap_frequency(V0, recoil_k, mass):
    """Harmonic frequency sqrt(4 V0 E_r)/hbar of a lattice site (rad/s)."""
    if V0 < 0:
        raise ValueError("V0 must be non-negative")
    e_r = HBAR**2 * recoil_k**2 / (2.0 * mass)
    return math.sqrt(4.0 * V0 * e_r) / HBAR


def ground_state_extent(omega_T, mass):
    """x0 = sqrt(hbar/(m w_T))."""
    return math.sqrt(HBAR / (mass * omega_T))


def _hermite_functions(xi, n_max):
    # orthonormal w.r.t. weight exp(-xi^2)
    psi = np.zeros((n_max + 1, len(xi)))
    psi[0] = math.pi ** -0.25
    if n_max >= 1:
        psi[1] = math.sqrt(2.0) * xi * psi[0]
    for n in range(1, n_max):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * xi * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def displacement_matrix(eta, n_max):
    """<m| exp(i eta (a + a^dag)) |n> from the associated-Laguerre closed form."""
    n = np.arange(n_max + 1)
    out = np.zeros((n_max + 1, n_max + 1), complex)
    e2 = eta * eta
    for m in n:
        for k in n[: m + 1]:
            # m >= k
            d = m - k
            mag = math.exp(0.5 * (gammaln(k + 1) - gammaln(m + 1)) - 0.5 * e2) \
                * eta**d * eval_genlaguerre(k, d, e2)
            val = (1j) ** d * mag
            out[m, k] = val
            out[k, m] = val
    return out


def eta_coefficients(omega_T, mass, lambda_c, n_max, *, order=None, check=True):
    """Overlap matrices eta_c = <n|cos(k_c x)|m>, eta_s = <n|sin(k_c x)|m>.

    Gauss-Hermite quadrature of order >= 2 n_max + 32, checked against the
    Laguerre closed form.  ``lambda_c = inf`` gives the frozen-motion limit.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    k_c = 0.0 if math.isinf(lambda_c) else TWO_PI / lambda_c
    kx0 = k_c * ground_state_extent(omega_T, mass)
    order = max(order or 0, 2 * n_max + 32)
    xi, w = np.polynomial.hermite.hermgauss(order)
    psi = _hermite_functions(xi, n_max)
    eta_c = np.einsum("q,nq,mq->nm", w * np.cos(kx0 * xi), psi, psi)
    eta_s = np.einsum("q,nq,mq->nm", w * np.sin(kx0 * xi), psi, psi)
    if check:
        ref = displacement_matrix(kx0 / math.sqrt(2.0), n_max)
        err = max(np.max(np.abs(eta_c - ref.real)), np.max(np.abs(eta_s - ref.imag)))
        if err > 1e-8:
            raise ConsistencyError(f"quadrature and Laguerre overlaps differ by {err:.3g}")
    # parity zeros are exact; clear quadrature round-off
    n = np.arange(n_max + 1)
    odd = (n[:, None] + n[None, :]) % 2 == 1
    eta_c[odd] = 0.0
    eta_s[~odd] = 0.0
    return 0.5 * (eta_c + eta_c.T), 0.5 * (eta_s + eta_s.T)


@dataclass
class LevelCouplings:
    """Overlap matrices and the per-site level-resolved couplings G_j (M=1 batch)."""

    eta_c: np.ndarray
    eta_s: np.ndarray
    g_nm_j: np.ndarray   # (N_sim, n+1, n+1), rad/s

    @property
    def n_levels(self):
        return self.eta_c.shape[0]


def level_couplings(j, g, eta_c, eta_s, k_lattice):
    """g cos(k j) eta_c + g sin(k j) eta_s for one site index or an array of them.

    ``g`` may be an array matching ``j`` (e.g. radial factors folded in).
    """
    j = np.asarray(j)
    g = np.broadcast_to(np.asarray(g, float), j.shape)
    cs = (g * np.cos(k_lattice * j))[..., None, None]
    sn = (g * np.sin(k_lattice * j))[..., None, None]
    return cs * eta_c + sn * eta_s


def thermal_populations(temperature, omega_T, n_max):
    """Boltzmann weights over levels 0..n_max and the weight lost to truncation."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p, 0.0
    x = math.exp(-HBAR * omega_T / (KB * temperature))
    p = x ** np.arange(n_max + 1)
    lost = x ** (n_max + 1)
    if lost > 0.01:
        warnings.warn(f"trap truncation drops {lost:.2%} of the thermal weight; raise n_max",
                      TruncationWarning, stacklevel=2)
    return p / p.sum(), lost


@dataclass
class MotionState:
    rho: np.ndarray     # (N_sim, D, D)
    beta: complex = 0.0
    t: float = 0.0

    @classmethod
    def thermal(cls, populations, N_sim):
        """Spin down in every site, trap levels in a diagonal thermal mixture."""
        n1 = len(populations)
        rho = np.zeros((N_sim, 2 * n1, 2 * n1), complex)
        idx = np.arange(n1)
        rho[:, idx, idx] = populations
        return cls(rho)

    def spin_moments(self):
        """Per-site (c, z) with c = <s^->, traced over trap levels."""
        return _spin_moments(self.rho)


def _spin_moments(rho):
    n1 = rho.shape[-1] // 2
    dd = np.einsum("...nn->...", rho[..., :n1, :n1]).real
    uu = np.einsum("...nn->...", rho[..., n1:, n1:]).real
    c = np.einsum("...nn->...", rho[..., n1:, :n1])
    return c, uu - dd


@dataclass
class MotionModel:
    """Coefficients for M members of N_sim sites sharing one overlap structure."""

    G: np.ndarray            # (N_sim, n1, n1)
    alpha: np.ndarray        # (M,) classical field seen by each member
    omega_T: float
    delta: float
    gamma: float = 0.0
    gamma_el: float = 0.0
    beta_factor: complex = 0.0   # beta = beta_factor * sum_j tr(G_j rho_ud,j)
    interactions: bool = True

    @property
    def n1(self):
        return self.G.shape[-1]

    @property
    def shape(self):
        return (len(self.alpha), self.G.shape[0], 2 * self.n1)

    def beta(self, rho):
        if not self.interactions:
            return np.zeros(rho.shape[0], complex)
        n1 = self.n1
        s = np.einsum("jnm,Mjnm->M", self.G, rho[:, :, n1:, :n1])
        return self.beta_factor * s

    def rhs(self, t, y, sign=None):
        M, Ns, D = self.shape
        n1 = self.n1
        rho = y.reshape(M, Ns, D, D)
        A = self.alpha * (1.0 if sign is None else sign) + self.beta(rho)
        lev = self.omega_T * np.arange(n1)
        e = np.concatenate([lev + 0.5 * self.delta, lev - 0.5 * self.delta])
        out = -1j * (e[:, None] - e[None, :]) * rho
        # coupling V: up-down block A G, down-up block conj(A) G
        r_d = rho[:, :, :n1, :]
        r_u = rho[:, :, n1:, :]
        c_d = rho[:, :, :, :n1]
        c_u = rho[:, :, :, n1:]
        Aa = A[:, None, None, None]
        G = self.G[None]
        Vr = np.concatenate([np.conj(Aa) * (G @ r_u), Aa * (G @ r_d)], axis=2)
        rV = np.concatenate([Aa * (c_u @ G), np.conj(Aa) * (c_d @ G)], axis=3)
        out += -1j * (Vr - rV)
        if self.gamma or self.gamma_el:
            g, ge = self.gamma, self.gamma_el
            uu = rho[:, :, n1:, n1:]
            out[:, :, :n1, :n1] += g * uu
            out[:, :, n1:, n1:] -= g * uu
            off = 0.5 * g + ge
            out[:, :, :n1, n1:] -= off * rho[:, :, :n1, n1:]
            out[:, :, n1:, :n1] -= off * rho[:, :, n1:, :n1]
        return out.ravel()


def build_motion_model(params: ModelParams, sites: SiteConfig, eta_c, eta_s, *,
                       omega_T, omega_p=None, decoherence=True, interactions=True):
    """Motion-model coefficients with the usual g sqrt(N/N_sim), Omega_p sqrt(N_sim/N) rescaling."""
    omega_p = np.atleast_1d(params.omega_p if omega_p is None else omega_p).astype(float)
    amp = sites.g_peak
    if sites.radii is not None:
        amp = amp * np.exp(-(sites.radii / params.waist) ** 2)
    G = level_couplings(sites.positions, amp, eta_c, eta_s, params.k_lattice)
    op_sim = omega_p * math.sqrt(sites.N_sim / sites.N_phys)
    alpha = np.array([classical_field(o * np.exp(1j * params.phi), params.Delta, params.delta,
                                      params.kappa) for o in op_sim], complex)
    dD = params.Delta - params.delta
    return MotionModel(G=G, alpha=alpha, omega_T=omega_T, delta=params.delta,
                       gamma=params.gamma if decoherence else 0.0,
                       gamma_el=params.gamma_el if decoherence else 0.0,
                       beta_factor=-2.0 / (2.0 * dD - 1j * params.kappa),
                       interactions=interactions)


def motion_rhs(state: MotionState, couplings: LevelCouplings, params: ModelParams, *,
               omega_T, N_sim=None, decoherence=True, interactions=True):
    """d(rho)/dt for one ensemble; ``couplings.g_nm_j`` must already be rescaled to N_sim."""
    Ns = state.rho.shape[0]
    N_sim = Ns if N_sim is None else N_sim
    op_sim = params.omega_p * math.sqrt(N_sim / params.N)
    alpha = classical_field(op_sim * np.exp(1j * params.phi), params.Delta, params.delta,
                            params.kappa)
    dD = params.Delta - params.delta
    model = MotionModel(couplings.g_nm_j, np.array([alpha]), omega_T, params.delta,
                        params.gamma if decoherence else 0.0,
                        params.gamma_el if decoherence else 0.0,
                        -2.0 / (2.0 * dD - 1j * params.kappa), interactions)
    d = model.rhs(state.t, state.rho[None].ravel())
    return d.reshape(state.rho.shape)


@dataclass
class MotionRun:
    t: np.ndarray
    x: np.ndarray       # (M, n_t)
    y: np.ndarray
    z: np.ndarray
    beta: np.ndarray
    final: np.ndarray   # (M, N_sim, D, D)
    trace_dev: float = 0.0
    min_eig: float = 0.0

    def trajectory(self, m=0, **meta):
        return Trajectory(self.t, self.x[m], self.y[m], self.z[m],
                          columns={"beta_re": self.beta[m].real, "beta_im": self.beta[m].imag},
                          meta=meta)


def _observe(model, rho):
    # rho (M, Ns, D, D) -> normalized collective components and beta
    c, z = _spin_moments(rho)
    Ns = rho.shape[1]
    return (2 * c.real.sum(axis=1) / Ns, -2 * c.imag.sum(axis=1) / Ns, z.sum(axis=1) / Ns,
            model.beta(rho))


def _check_state(rho, trace_tol=1e-6, eig_tol=1e-9):
    tr = np.einsum("...ii->...", rho).real
    dev = float(np.max(np.abs(tr - 1.0)))
    herm = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    lo = float(np.min(np.linalg.eigvalsh(herm)))
    return dev, lo


def _segment(model, y0, t0, t1, sign, t_eval, rtol, atol):
    sol = solve_ivp(lambda t, y: model.rhs(t, y, sign), (t0, t1), y0, t_eval=t_eval,
                    rtol=rtol, atol=atol)
    if sol.status < 0:
        raise IntegrationError(f"motion integration failed: {sol.message}",
                               sol.t[-1] if sol.t.size else t0,
                               sol.y[:, -1] if sol.y.size else y0)
    return sol


def integrate_motion(model: MotionModel, initial: MotionState, t_final, dt_out, *,
                     rtol=1e-9, atol=1e-12, check_invariants=True) -> MotionRun:
    """Constant-drive evolution of every member from the same initial state."""
    M, Ns, D = model.shape
    y0 = np.broadcast_to(initial.rho, (M, Ns, D, D)).ravel().copy()
    t_eval = output_grid(0.0, t_final, dt_out)
    sol = _segment(model, y0, 0.0, t_final, None, t_eval, rtol, atol)
    rho_t = sol.y.reshape(M, Ns, D, D, -1)
    dev, lo = 0.0, 0.0
    if check_invariants:
        for k in range(rho_t.shape[-1]):
            d, e = _check_state(rho_t[..., k])
            dev, lo = max(dev, d), min(lo, e)
        if dev > 1e-6:
            raise IntegrationError(f"trace drift {dev:.3g} exceeds 1e-6", sol.t[-1], sol.y[:, -1])
    obs = [_observe(model, rho_t[..., k]) for k in range(rho_t.shape[-1])]
    x, y, z, b = (np.stack([o[i] for o in obs], axis=-1) for i in range(4))
    return MotionRun(sol.t, x, y, z, b, rho_t[..., -1], dev, lo)


@dataclass
class EchoResult:
    t_echo: np.ndarray
    jz_revival: np.ndarray
    trace_dev: float = 0.0
    min_eig: float = 0.0
    meta: dict = field(default_factory=dict)


def default_trap(params: ModelParams) -> TrapParams:
    return params.trap if params.trap is not None else TrapParams.for_frequency(200e3, params.lambda_L)


def run_echo(params: ModelParams, t_echo, *, N_sim=100, seed=0, frozen=False,
             interactions=False, decoherence=False, incommensurate=True,
             rtol=1e-9, atol=1e-12) -> EchoResult:
    """Evolve t_e with +Omega_p, flip the pump sign, evolve t_e again; report Jz/(N/2).

    All t_echo values are advanced together: member m flips its drive at
    t_echo[m] and is read out at 2 t_echo[m].  ``frozen`` replaces the
    overlaps by the identity.  Interactions and decoherence are off by default
    so that the echo isolates level-changing processes: with both off a
    frozen-motion ensemble revives exactly.
    """
    t_echo = np.atleast_1d(np.asarray(t_echo, float))
    if np.any(t_echo < 0):
        raise ValueError("t_echo must be >= 0")
    trap = default_trap(params)
    w_T = trap_frequency(trap.V0, trap.recoil_k, trap.mass)
    n_max = 0 if frozen else trap.n_max
    if frozen:
        eta_c, eta_s = np.eye(1), np.zeros((1, 1))
    else:
        eta_c, eta_s = eta_coefficients(w_T, trap.mass, params.lambda_c, n_max)
    sites = (sample_site_couplings(seed, N_sim, params) if incommensurate
             else uniform_couplings(N_sim, params))
    M = len(t_echo)
    model = build_motion_model(params, sites, eta_c, eta_s, omega_T=w_T,
                               omega_p=np.full(M, params.omega_p),
                               decoherence=decoherence, interactions=interactions)
    pops, lost = (np.ones(1), 0.0) if frozen else thermal_populations(params.temperature, w_T, n_max)
    rho0 = MotionState.thermal(pops, N_sim).rho
    D = rho0.shape[-1]
    y = np.broadcast_to(rho0, (M, N_sim, D, D)).ravel().copy()
    marks = np.unique(np.concatenate([[0.0], t_echo, 2 * t_echo]))
    revival = np.full(M, np.nan)
    _, z0 = _spin_moments(rho0)
    revival[t_echo == 0] = z0.mean()
    dev, lo = 0.0, 0.0
    for a, b in zip(marks[:-1], marks[1:]):
        sign = np.where(a < t_echo, 1.0, -1.0)
        sol = _segment(model, y, a, b, sign, None, rtol, atol)
        y = sol.y[:, -1]
        rho = y.reshape(M, N_sim, D, D)
        d, e = _check_state(rho)
        dev, lo = max(dev, d), min(lo, e)
        if dev > 1e-6:
            raise IntegrationError(f"trace drift {dev:.3g} exceeds 1e-6", b, y)
        hit = np.isclose(2 * t_echo, b, rtol=0, atol=1e-15) & (t_echo > 0)
        if np.any(hit):
            _, z = _spin_moments(rho[hit])
            revival[hit] = z.mean(axis=1)
    return EchoResult(t_echo, revival, dev, lo,
                      meta={"omega_T": w_T, "n_max": n_max, "N_sim": N_sim, "frozen": frozen,
                            "interactions": interactions, "decoherence": decoherence,
                            "thermal_truncation": lost})
