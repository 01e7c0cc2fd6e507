"""Exact small-system quantum evolutions used as references for the mean-field models."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .collective import BlochState, Phase, UnsupportedRegime, separatrix_classify

DENSE_LIMIT = 512
MAX_DIM = 1024


class ResourceError(ValueError):
    """Requested Hilbert space is larger than the oracle will build."""


# collective spin in the Dicke basis

def dicke_operators(N):
    """Sparse Jx, Jy, Jz, J+ on |J=N/2, m>, m ordered from -N/2 to +N/2."""
    j = N / 2.0
    m = np.arange(-j, j + 1)
    jp = np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1))
    Jp = sp.diags(jp, -1, format="csr")      # raises m -> m+1 (index +1)
    Jm = Jp.T.tocsr()
    Jx = 0.5 * (Jp + Jm)
    Jy = -0.5j * (Jp - Jm)
    Jz = sp.diags(m, 0, format="csr")
    return Jx, Jy, Jz, Jp


def dicke_hamiltonian(N, chi, omega_drive, delta=0.0, omega_prime=0.0):
    Jx, Jy, Jz, Jp = dicke_operators(N)
    return (chi * (Jp @ Jp.T) + omega_drive * Jx + omega_prime * Jy - delta * Jz).tocsr()


@dataclass
class DickeState:
    amplitudes: np.ndarray

    @classmethod
    def from_m(cls, N, m):
        if abs(m) > N / 2 or (m + N / 2) % 1:
            raise ValueError("m must be one of -N/2..N/2")
        a = np.zeros(int(N) + 1, complex)
        a[int(round(m + N / 2))] = 1.0
        return cls(a)

    @property
    def norm(self):
        return float(np.linalg.norm(self.amplitudes))


@dataclass
class DickeResult:
    t: np.ndarray
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    energy: np.ndarray
    norm: np.ndarray
    N: int


def _propagate(H, psi0, t_grid):
    dim = H.shape[0]
    out = np.empty((len(t_grid), dim), complex)
    out[0] = psi0
    dts = np.diff(t_grid)
    if dim <= DENSE_LIMIT:
        Hd = H.toarray()
        cache = {}
        psi = psi0
        for k, dt in enumerate(dts):
            key = round(float(dt), 18)
            U = cache.get(key)
            if U is None:
                U = cache[key] = expm(-1j * dt * Hd)
            psi = U @ psi
            out[k + 1] = psi
        return out
    psi = psi0
    for k, dt in enumerate(dts):
        psi = expm_multiply(-1j * dt * H, psi)
        out[k + 1] = psi
    return out


def dicke_exact_evolve(N, chi, omega_drive, delta, initial_m, t_grid, omega_prime=0.0):
    """Unitary evolution of chi J+J- + Omega Jx + Omega' Jy - delta Jz in the symmetric manifold."""
    N = int(N)
    if N < 1 or N > 10_000:
        raise ValueError("N must be in 1..10000")
    t_grid = np.asarray(t_grid, float)
    H = dicke_hamiltonian(N, chi, omega_drive, delta, omega_prime)
    psi0 = initial_m.amplitudes if isinstance(initial_m, DickeState) else DickeState.from_m(N, initial_m).amplitudes
    if t_grid[0] != 0:
        psi0 = _propagate(H, psi0, np.array([0.0, t_grid[0]]))[-1]
    psi = _propagate(H, psi0, t_grid)
    Jx, Jy, Jz, _ = dicke_operators(N)

    def ev(op):
        return np.einsum("ti,ti->t", psi.conj(), (op @ psi.T).T).real

    return DickeResult(t_grid, ev(Jx), ev(Jy), ev(Jz), ev(H),
                       np.linalg.norm(psi, axis=1), N)


# site-resolved spins and density matrices

@dataclass
class DensityMatrix:
    rho: np.ndarray

    def __post_init__(self):
        self.rho = np.asarray(self.rho, complex)

    @classmethod
    def pure(cls, psi):
        psi = np.asarray(psi, complex)
        return cls(np.outer(psi, psi.conj()))

    @property
    def trace(self):
        return complex(np.trace(self.rho))

    def min_eigenvalue(self):
        return float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))


SIGMA_MINUS = np.array([[0, 1], [0, 0]], complex)   # basis (down, up)
SIGMA_Z = np.array([[-1, 0], [0, 1]], complex)
SIGMA_X = np.array([[0, 1], [1, 0]], complex)
SIGMA_Y = np.array([[0, 1j], [-1j, 0]], complex)   # consistent with s- = |down><up|


def _check_dim(dim, what):
    if dim > MAX_DIM:
        raise ResourceError(f"{what} needs Hilbert dimension {dim} (> {MAX_DIM}); "
                            f"the density matrix alone would take {16 * dim * dim / 1e9:.2f} GB")


def embed(op, k, dims):
    """Operator ``op`` acting on factor k of a tensor product with local ``dims``."""
    mats = [sp.identity(d, format="csr", dtype=complex) for d in dims]
    mats[k] = sp.csr_matrix(op)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), mats)


def spin_ops(n_spins, n_ph=None):
    """Per-site s-, sz (and the cavity a if n_ph is given) as sparse matrices.

    Factor order: spins 0..n-1, then the cavity with Fock levels 0..n_ph.
    """
    dims = [2] * n_spins + ([n_ph + 1] if n_ph is not None else [])
    if n_ph is not None and n_spins > 6:
        raise ResourceError("spin+cavity oracle supports at most 6 spins")
    _check_dim(int(np.prod(dims)), f"{n_spins} spins" + (f" + cavity (n_ph={n_ph})" if n_ph else ""))
    sm = [embed(SIGMA_MINUS, k, dims) for k in range(n_spins)]
    sz = [embed(SIGMA_Z, k, dims) for k in range(n_spins)]
    a = None
    if n_ph is not None:
        a = embed(np.diag(np.sqrt(np.arange(1, n_ph + 1)), 1), n_spins, dims)
    return sm, sz, a


def ensemble_hamiltonian(g, L, om, omp, delta):
    """Spin-model operator with chi_kj = -L g_k g_j and per-site fields.

    H = sum_kj chi_kj s+_k s-_j + sum_k (Om_k sx_k + Om'_k sy_k)/2 - (delta/2) sum sz_k.
    """
    n = len(g)
    sm, sz, _ = spin_ops(n)
    S = reduce(lambda a, b: a + b, [g[k] * sm[k] for k in range(n)])
    H = -L * (S.conj().T @ S)
    for k in range(n):
        sx = sm[k] + sm[k].conj().T
        sy = 1j * (sm[k] - sm[k].conj().T)
        H = H + 0.5 * om[k] * sx + 0.5 * omp[k] * sy - 0.5 * delta * sz[k]
    return H.tocsr(), sm, sz


def decoherence_jumps(sm, sz, gamma, gamma_el):
    jumps = []
    if gamma:
        jumps += [math.sqrt(gamma) * s for s in sm]
    if gamma_el:
        jumps += [math.sqrt(gamma_el / 2.0) * s for s in sz]
    return jumps


@dataclass
class LindbladResult:
    t: np.ndarray
    observables: dict
    trace: np.ndarray
    min_eig: float
    final: DensityMatrix


def lindblad_exact_evolve(H, jumps, initial, t_grid, observables=None, *,
                          rtol=1e-9, atol=1e-11):
    """Integrate d rho/dt = -i[H, rho] + sum_k (L rho L^+ - {L^+L, rho}/2).

    ``observables`` maps names to operators; their expectation values are
    returned on ``t_grid``.
    """
    rho0 = initial.rho if isinstance(initial, DensityMatrix) else np.asarray(initial, complex)
    dim = rho0.shape[0]
    _check_dim(dim, "master equation")
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H, complex)
    Ls = [j.toarray() if sp.issparse(j) else np.asarray(j, complex) for j in jumps]
    Heff = Hd - 0.5j * sum((L.conj().T @ L for L in Ls), np.zeros_like(Hd))
    Heff_dag = Heff.conj().T

    t_grid = np.asarray(t_grid, float)
    if not Ls:
        # closed system: exact propagation in the eigenbasis of H
        w, V = np.linalg.eigh(Hd)
        ph = np.exp(-1j * np.outer(t_grid - t_grid[0], w))
        r0 = V.conj().T @ rho0 @ V
        rhos = np.einsum("ia,ta,ab,tb,jb->tij", V, ph, r0, ph.conj(), V.conj(), optimize=True)
        return _lindblad_result(t_grid, rhos, observables)

    def rhs(t, y):
        r = y.reshape(dim, dim)
        d = -1j * (Heff @ r - r @ Heff_dag)
        for L in Ls:
            d += L @ r @ L.conj().T
        return d.ravel()

    sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), rho0.ravel(), t_eval=t_grid,
                    rtol=rtol, atol=atol)
    if sol.status < 0:
        raise RuntimeError(f"master equation failed: {sol.message}")
    return _lindblad_result(sol.t, sol.y.T.reshape(-1, dim, dim), observables)


def _lindblad_result(t, rhos, observables):
    obs = {}
    for name, op in (observables or {}).items():
        o = op.toarray() if sp.issparse(op) else np.asarray(op)
        obs[name] = np.einsum("ij,tji->t", o, rhos)
    tr = np.einsum("tii->t", rhos).real
    herm = 0.5 * (rhos + np.conj(np.swapaxes(rhos, 1, 2)))
    lo = float(np.min(np.linalg.eigvalsh(herm)))
    return LindbladResult(t, obs, tr, lo, DensityMatrix(rhos[-1]))


def product_state(n_spins, theta=math.pi, phi=0.0, n_ph=None):
    """All spins in the same pure state (theta = pi is all down), cavity in vacuum.

    Single-site amplitudes in (down, up) order are (sin(theta/2), cos(theta/2) e^{-i phi}),
    so <s-> = sin(theta) e^{-i phi}/2 as in the ensemble convention.
    """
    one = np.array([math.sin(0.5 * theta), math.cos(0.5 * theta) * np.exp(-1j * phi)], complex)
    psi = reduce(np.kron, [one] * n_spins)
    if n_ph is not None:
        vac = np.zeros(n_ph + 1, complex)
        vac[0] = 1.0
        psi = np.kron(psi, vac)
    return DensityMatrix.pure(psi)


def basin_boundary_exact(N, chi, omega_drive, theta0, phi0, delta=0.0) -> Phase:
    """Analytic dynamical phase of the coherent state (theta0, phi0) at zero longitudinal field."""
    if delta != 0:
        raise UnsupportedRegime("analytic basin needs delta = 0")
    return separatrix_classify(BlochState.from_angles(theta0, phi0, N), chi, omega_drive, N)
