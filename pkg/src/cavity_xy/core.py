"""Parameter algebra for the driven cavity XY model.

All user-facing frequencies are linear (Hz). They are stored as given and
converted to angular frequency (rad/s) on access, so a ``ModelParams`` built
from Hz values reads back the exact same Hz values.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace, asdict
from typing import Optional

import numpy as np
from scipy import constants as const

TWO_PI = 2.0 * math.pi
HBAR = const.hbar
KB = const.k
AMU = const.atomic_mass

SR88_MASS = 87.9056 * AMU


class DomainError(ValueError):
    """Raised when a formula is evaluated outside its range of validity."""


class DispersiveRegimeWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TrapParams:
    """Harmonic approximation of one lattice site.

    V0 is the lattice depth in J, ``recoil_k`` the lattice recoil wavenumber
    in 1/m and ``mass`` the atomic mass in kg.
    """

    V0: float
    recoil_k: float
    mass: float = SR88_MASS
    n_max: int = 10

    def __post_init__(self):
        if self.V0 <= 0:
            raise DomainError("lattice depth V0 must be positive")
        if self.n_max < 0:
            raise DomainError("n_max must be >= 0")

    @property
    def recoil_energy(self) -> float:
        return HBAR**2 * self.recoil_k**2 / (2.0 * self.mass)

    @classmethod
    def for_frequency(cls, trap_hz: float = 200e3, lambda_L: float = 813e-9,
                      mass: float = SR88_MASS, n_max: int = 10) -> "TrapParams":
        """Lattice depth that gives an axial trap frequency of ``trap_hz``."""
        k_r = TWO_PI / lambda_L
        e_r = HBAR**2 * k_r**2 / (2.0 * mass)
        w = TWO_PI * trap_hz
        return cls(V0=(HBAR * w) ** 2 / (4.0 * e_r), recoil_k=k_r, mass=mass, n_max=n_max)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of one experimental configuration.

    Frequencies carry a ``_hz`` suffix and are linear frequencies; the
    unsuffixed properties (``g``, ``kappa``, ...) return rad/s.  Defaults are
    the values quoted for the 88Sr 689 nm cavity experiment.
    """

    g_hz: float = 10.9e3
    kappa_hz: float = 153.0e3
    gamma_hz: float = 7.5e3
    gamma_el_hz: float = 40e3
    Delta_hz: float = 50e6
    delta_hz: float = 0.0
    omega_p_hz: float = 0.0
    phi: float = 0.0
    N: float = 950e3
    lambda_L: float = 813e-9
    lambda_c: float = 689e-9
    trap: Optional[TrapParams] = None
    temperature: float = 14e-6
    waist: float = 71e-6
    sigma_th: float = 0.0

    def __post_init__(self):
        for name in ("g_hz", "kappa_hz", "gamma_hz", "gamma_el_hz"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.N < 1:
            raise DomainError("N must be >= 1")
        if self.lambda_L <= 0 or self.lambda_c <= 0:
            raise DomainError("wavelengths must be positive")
        if self.temperature < 0 or self.waist <= 0 or self.sigma_th < 0:
            raise DomainError("temperature, waist and sigma_th must be non-negative")

    # angular-frequency views
    @property
    def g(self) -> float:
        return TWO_PI * self.g_hz

    @property
    def kappa(self) -> float:
        return TWO_PI * self.kappa_hz

    @property
    def gamma(self) -> float:
        return TWO_PI * self.gamma_hz

    @property
    def gamma_el(self) -> float:
        return TWO_PI * self.gamma_el_hz

    @property
    def Delta(self) -> float:
        return TWO_PI * self.Delta_hz

    @property
    def delta(self) -> float:
        return TWO_PI * self.delta_hz

    @property
    def omega_p(self) -> float:
        return TWO_PI * self.omega_p_hz

    @property
    def dispersive_ok(self) -> bool:
        D = abs(self.Delta)
        return D > 10 * self.g * math.sqrt(self.N) and D > 10 * self.kappa

    @property
    def k_lattice(self) -> float:
        """Phase advance of the cavity standing wave per lattice site."""
        return math.pi * self.lambda_L / self.lambda_c

    def hz(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k.endswith("_hz")}

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    @property
    def chi(self) -> float:
        return chi_from_cavity(self.g, self.Delta, self.kappa)

    @property
    def chiN(self) -> float:
        return self.chi * self.N

    def with_drive_ratio(self, omega_over_chiN: float) -> "ModelParams":
        """Set the pump so that Omega/(chi N) takes the given value.

        The ratio is referenced to delta = 0 and phi = 0, where
        Omega/(chi N) = 2|Omega_p|/(g N) independently of kappa.
        """
        omega_p = omega_over_chiN * self.g * self.N / 2.0
        return replace(self, omega_p_hz=omega_p / TWO_PI)

    def warn_if_not_dispersive(self):
        if not self.dispersive_ok:
            warnings.warn(
                f"dispersive hierarchy not satisfied: |Delta|/2pi={abs(self.Delta_hz):.3g} Hz, "
                f"g*sqrt(N)/2pi={self.g_hz * math.sqrt(self.N):.3g} Hz, kappa/2pi={self.kappa_hz:.3g} Hz",
                DispersiveRegimeWarning, stacklevel=2)


@dataclass(frozen=True)
class DerivedCouplings:
    chi: float
    omega_drive: float
    omega_prime: float
    chiN: float
    alpha: complex

    @property
    def omega_over_chiN(self) -> float:
        return self.omega_drive / self.chiN if self.chiN != 0 else math.inf


def derive(params: ModelParams) -> DerivedCouplings:
    chi = chi_from_cavity(params.g, params.Delta, params.kappa)
    om, omp = drive_from_pump(params.g, params.omega_p, params.phi,
                              params.Delta, params.delta, params.kappa)
    alpha = classical_field(params.omega_p * np.exp(1j * params.phi), params.Delta,
                            params.delta, params.kappa)
    return DerivedCouplings(chi=chi, omega_drive=om, omega_prime=omp,
                            chiN=chi * params.N, alpha=alpha)


def chi_from_cavity(g, Delta, kappa=0.0):
    """Cavity-mediated exchange rate -g^2 Delta / (Delta^2 + (kappa/2)^2)."""
    if np.any(np.asarray(Delta) == 0):
        raise DomainError("Delta = 0: dispersive elimination undefined")
    return -g * g * Delta / (Delta * Delta + 0.25 * kappa * kappa)


def chi_dispersive(g, Delta):
    """The kappa << |Delta| shortcut -g^2/Delta."""
    if np.any(np.asarray(Delta) == 0):
        raise DomainError("Delta = 0: dispersive elimination undefined")
    return -g * g / Delta


def drive_from_pump(g, omega_p, phi, Delta, delta, kappa=0.0):
    """Transverse fields (Omega, Omega') produced by a pump of amplitude |omega_p| and phase phi.

    ``g`` may be an array of per-site couplings.
    """
    dD = Delta - delta
    if np.any((np.asarray(dD) == 0) & (np.asarray(kappa) == 0)):
        raise DomainError("pump resonant with a lossless cavity")
    den = dD * dD + 0.25 * kappa * kappa
    amp = g * abs(omega_p) / den
    om = amp * (kappa * np.sin(phi) - 2.0 * dD * np.cos(phi))
    omp = amp * (kappa * np.cos(phi) + 2.0 * dD * np.sin(phi))
    return om, omp


def pump_amplitude_from_power(P, kappa, T_m, T_L, omega_pump):
    """Intracavity pump amplitude sqrt(kappa_m P / (2 hbar omega_pump)).

    ``kappa`` and ``omega_pump`` in rad/s, ``P`` in W, mirror transmission and
    loss as fractions.
    """
    if P < 0:
        raise DomainError("negative pump power")
    if T_m <= 0 or T_L <= 0:
        raise DomainError("mirror coefficients must be positive")
    kappa_m = kappa * T_m / (T_m + T_L)
    return math.sqrt(kappa_m * P / (2.0 * HBAR * omega_pump))


def coupling_profile(g, lambda_L, lambda_c, j):
    """Standing-wave coupling g cos(pi lambda_L/lambda_c j) at lattice site(s) j."""
    j = np.asarray(j)
    if np.any(j < 0):
        raise DomainError("site index must be >= 0")
    return g * np.cos(math.pi * (lambda_L / lambda_c) * j)


def classical_field(omega_p, Delta, delta, kappa=0.0):
    """Steady intracavity amplitude -2 Omega_p / (2(Delta - delta) - i kappa).

    ``omega_p`` may be complex (|Omega_p| e^{i phi}).
    """
    if Delta == delta and kappa == 0:
        raise DomainError("pump resonant with a lossless cavity")
    return -2.0 * omega_p / (2.0 * (Delta - delta) - 1j * kappa)


def rabi_rms_magnetization(omega_drive, delta):
    """Closed-form non-interacting line shape -Omega^2/(2(delta^2+Omega^2)) - 1/2.

    Returned in units of N/2.  With no drive and no detuning nothing moves and
    the south-pole value -1 is returned.
    """
    omega_drive = np.asarray(omega_drive, dtype=float)
    delta = np.asarray(delta, dtype=float)
    den = delta**2 + omega_drive**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, -0.5 * omega_drive**2 / np.where(den > 0, den, 1.0) - 0.5, -1.0)
    return out[()] if out.ndim == 0 else out


def rabi_mean_magnetization(omega_drive, delta):
    """Time average of the detuned Rabi inversion from the south pole, in units of N/2.

    This is -delta^2/(delta^2+Omega^2); see ``rabi_rms_magnetization`` for the
    printed experimental line shape.
    """
    omega_drive = np.asarray(omega_drive, dtype=float)
    delta = np.asarray(delta, dtype=float)
    den = delta**2 + omega_drive**2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, -delta**2 / np.where(den > 0, den, 1.0), -1.0)
    return out[()] if out.ndim == 0 else out


def interaction_period(chiN: float) -> float:
    """2 pi / |chi N| in seconds."""
    return TWO_PI / abs(chiN)
