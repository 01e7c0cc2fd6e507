"""Mean-field dynamics of the collective XY model with transverse and longitudinal fields.

The state is the Bloch vector divided by N/2, so it lives on the unit sphere
and N only enters through chi*N.  In these units

    x' = (chiN z + delta) y + Omega' z
    y' = -(chiN z + delta) x - Omega z
    z' = Omega y - Omega' x

and the conserved mean-field energy per N/2 is
(chiN/2)(x^2 + y^2) + Omega x + Omega' y - delta z.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .core import ModelParams, derive, TWO_PI
from .trajectory import Trajectory, IntegrationError, output_grid

RTOL = 1e-10
ATOL = 1e-12


class Phase(str, enum.Enum):
    FERROMAGNETIC = "FERROMAGNETIC"
    PARAMAGNETIC = "PARAMAGNETIC"


class UnsupportedRegime(ValueError):
    pass


@dataclass(frozen=True)
class BlochState:
    """Collective spin components <Jx>, <Jy>, <Jz> for N spins at time t."""

    X: float
    Y: float
    Z: float
    N: float
    t: float = 0.0

    @classmethod
    def south_pole(cls, N):
        return cls(0.0, 0.0, -N / 2.0, N)

    @classmethod
    def from_angles(cls, theta, phi, N):
        """Coherent state at polar angle theta (pi = all down) and azimuth phi."""
        s = N / 2.0
        return cls(s * math.sin(theta) * math.cos(phi), s * math.sin(theta) * math.sin(phi),
                   s * math.cos(theta), N)

    @classmethod
    def from_normalized(cls, v, N, t=0.0):
        s = N / 2.0
        return cls(s * float(v[0]), s * float(v[1]), s * float(v[2]), N, t)

    def normalized(self) -> np.ndarray:
        s = self.N / 2.0
        return np.array([self.X / s, self.Y / s, self.Z / s])


@dataclass(frozen=True)
class CollectiveFields:
    """Rates (rad/s) driving the normalized flow."""

    chiN: float
    omega: float
    omega_prime: float = 0.0
    delta: float = 0.0

    @classmethod
    def from_params(cls, params: ModelParams, *, ordering_correction=False):
        d = derive(params)
        chiN, delta = d.chiN, params.delta
        if ordering_correction:
            chiN, delta = effective_ordering(d.chi, params.N, delta)
        return cls(chiN, d.omega_drive, d.omega_prime, delta)

    @classmethod
    def from_ratios(cls, chiN, omega_over_chiN, delta_over_chiN=0.0, omega_prime_over_chiN=0.0):
        return cls(chiN, omega_over_chiN * chiN, omega_prime_over_chiN * chiN,
                   delta_over_chiN * chiN)


def effective_ordering(chi, N, delta):
    """Rates that reproduce the exact operator ordering of chi J+J- at mean-field level.

    chi J+J- = chi sum_{i!=j} s+_i s-_j + chi sum_i (1 + s^z_i)/2, so for a
    product state the nonlinear rate becomes chi(N-1) and the longitudinal
    field shifts by -chi.  Returns (chiN_eff, delta_eff).
    """
    return chi * (N - 1), delta - chi


def bloch_rhs(v, chiN, omega, omega_prime=0.0, delta=0.0):
    """Time derivative of the normalized Bloch vector.

    ``v`` has shape (3,) or (3, M); the rate arguments broadcast against the
    trailing axis, so a whole sweep can be advanced as one system.
    """
    x, y, z = v[0], v[1], v[2]
    h = chiN * z + delta
    return np.array([h * y + omega_prime * z,
                     -h * x - omega * z,
                     omega * y - omega_prime * x])


def collective_energy(v, chiN, omega, delta=0.0, omega_prime=0.0):
    """Mean-field energy per N/2: (chiN/2)(x^2+y^2) + Omega x + Omega' y - delta z.

    Multiply by N/2 to get chi(X^2+Y^2) + Omega X - delta Z.
    """
    x, y, z = v[0], v[1], v[2]
    return 0.5 * chiN * (x * x + y * y) + omega * x + omega_prime * y - delta * z


def _run(fun, v0, t_final, dt_out, rtol, atol, method="RK45", t0=0.0, events=None):
    t_eval = output_grid(t0, t_final, dt_out)
    sol = solve_ivp(fun, (t0, t_final), v0, method=method, t_eval=t_eval,
                    rtol=rtol, atol=atol, events=events)
    if sol.status < 0:
        last = sol.y[:, -1] if sol.y.size else v0
        last_t = sol.t[-1] if sol.t.size else t0
        raise IntegrationError(f"integration failed: {sol.message}", last_t, last)
    return sol


def integrate_quench(fields: CollectiveFields, initial, t_final, dt_out, *,
                     rtol=RTOL, atol=ATOL, N=None, t0=0.0) -> Trajectory:
    """Integrate the normalized flow from ``initial`` (BlochState or unit vector).

    Output is sampled every ``dt_out`` seconds and includes the energy column.
    """
    if t_final <= t0:
        raise ValueError("t_final must exceed the start time")
    if isinstance(initial, BlochState):
        v0 = initial.normalized()
        N = initial.N
    else:
        v0 = np.asarray(initial, dtype=float)
    f = fields

    def fun(t, v):
        return bloch_rhs(v, f.chiN, f.omega, f.omega_prime, f.delta)

    sol = _run(fun, v0, t_final, dt_out, rtol, atol, t0=t0)
    x, y, z = sol.y
    e = collective_energy(sol.y, f.chiN, f.omega, f.delta, f.omega_prime)
    return Trajectory(sol.t, x, y, z, columns={"energy": e},
                      meta={"model": "COLLECTIVE", "chiN": f.chiN, "omega": f.omega,
                            "omega_prime": f.omega_prime, "delta": f.delta, "N": N})


def integrate_batch(chiN, omega, delta, v0, t_final, dt_out, *, omega_prime=0.0,
                    rtol=1e-9, atol=1e-11):
    """Integrate M independent collective trajectories in one adaptive solve.

    Rate arguments are scalars or arrays of length M; ``v0`` has shape (3,) or
    (3, M).  Returns (t, v) with v of shape (3, M, n_t).
    """
    chiN, omega, delta, omega_prime = np.broadcast_arrays(
        np.atleast_1d(np.asarray(chiN, float)), np.atleast_1d(np.asarray(omega, float)),
        np.atleast_1d(np.asarray(delta, float)), np.atleast_1d(np.asarray(omega_prime, float)))
    M = chiN.shape[0]
    v0 = np.asarray(v0, dtype=float)
    if v0.ndim == 1:
        v0 = np.repeat(v0[:, None], M, axis=1)
    if v0.shape[1] != M:
        chiN, omega, delta, omega_prime = (np.broadcast_to(a, (v0.shape[1],))
                                           for a in (chiN, omega, delta, omega_prime))
        M = v0.shape[1]

    def fun(t, y):
        return bloch_rhs(y.reshape(3, M), chiN, omega, omega_prime, delta).ravel()

    sol = _run(fun, v0.ravel(), t_final, dt_out, rtol, atol)
    return sol.t, sol.y.reshape(3, M, -1)


def separatrix_classify(initial, chi_or_chiN, omega_drive, N=None, delta=0.0) -> Phase:
    """Analytic phase of a decoherence-free orbit at zero longitudinal field.

    With ``N`` given, ``initial`` is a BlochState (or (X, Y, Z)) and the first
    rate is chi; without ``N`` the state is normalized and the rate is chiN.
    The orbit crosses the equator iff its energy shell reaches z = 0 with
    |x| <= 1, i.e. |e0 - chi (N/2)^2| <= |Omega| N/2.
    """
    if delta != 0:
        raise UnsupportedRegime("analytic separatrix needs delta = 0")
    if N is None:
        v = np.asarray(initial, dtype=float)
        chiN = chi_or_chiN
    else:
        v = initial.normalized() if isinstance(initial, BlochState) else np.asarray(initial) / (N / 2.0)
        chiN = chi_or_chiN * N
    x, y = v[0], v[1]
    # divide e0 - chi(N/2)^2 <= |Omega| N/2 through by (N/2)
    e0 = 0.5 * chiN * (x * x + y * y) + omega_drive * x
    if abs(e0 - 0.5 * chiN) <= abs(omega_drive):
        return Phase.PARAMAGNETIC
    return Phase.FERROMAGNETIC


def separatrix_margin(v, chiN, omega_drive) -> float:
    """Signed distance from the separatrix in units of |chiN|/2 (negative = paramagnetic)."""
    x, y = v[0], v[1]
    e0 = 0.5 * chiN * (x * x + y * y) + omega_drive * x
    return (abs(e0 - 0.5 * chiN) - abs(omega_drive)) / (0.5 * abs(chiN))


def crosses_equator(z) -> bool:
    z = np.asarray(z)
    return bool(np.any(np.sign(z) != np.sign(z[0])) and np.any(z > 0) and np.any(z < 0))


def rabi_period(fields: CollectiveFields) -> float:
    return TWO_PI / math.hypot(fields.omega, fields.delta)
