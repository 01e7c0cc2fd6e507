"""Order parameters, phase labels, critical points and oscillation fits."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .collective import Phase
from .trajectory import Trajectory, SweepResult


class EstimatorKind(str, enum.Enum):
    SNAPSHOT = "SNAPSHOT"
    WINDOW = "WINDOW"


@dataclass(frozen=True)
class Estimator:
    kind: EstimatorKind
    t0: float = 0.0
    t1: float = 0.0

    @classmethod
    def snapshot(cls, t_f):
        return cls(EstimatorKind.SNAPSHOT, t_f, t_f)

    @classmethod
    def window(cls, t0, t1):
        if t1 <= t0:
            raise ValueError("window must have t1 > t0")
        return cls(EstimatorKind.WINDOW, t0, t1)


# the two usages in the experiment/theory comparison
EXPERIMENT_ESTIMATOR = Estimator.snapshot(4e-6)
THEORY_ESTIMATOR = Estimator.window(0.0, 6e-6)


@dataclass(frozen=True)
class OrderParameter:
    jz_bar: float
    estimator: Estimator


class CriticalMethod(str, enum.Enum):
    JUMP = "JUMP"
    MAX_GRADIENT = "MAX_GRADIENT"


@dataclass(frozen=True)
class CriticalPoint:
    value: float
    method: CriticalMethod
    uncertainty: float
    gradient: float = float("nan")
    index: int = -1


def _check_range(t, a, b):
    tol = 1e-9 * max(abs(t[-1]), abs(t[0]), 1e-30)
    if a < t[0] - tol or b > t[-1] + tol:
        raise ValueError(f"estimator window [{a}, {b}] outside trajectory [{t[0]}, {t[-1]}]")


def window_average(t, z, t0, t1):
    """Trapezoidal time average of z over [t0, t1]; z may be (..., n_t)."""
    t = np.asarray(t)
    z = np.asarray(z)
    _check_range(t, t0, t1)
    inside = (t > t0) & (t < t1)
    tt = np.concatenate([[t0], t[inside], [t1]])
    z0 = _interp_last(t, z, t0)
    z1 = _interp_last(t, z, t1)
    zz = np.concatenate([z0[..., None], z[..., inside], z1[..., None]], axis=-1)
    return np.trapezoid(zz, tt, axis=-1) / (t1 - t0)


def snapshot(t, z, t_f):
    t = np.asarray(t)
    _check_range(t, t_f, t_f)
    return _interp_last(t, np.asarray(z), t_f)


def _interp_last(t, z, tq):
    i = int(np.searchsorted(t, tq))
    if i < len(t) and abs(t[i] - tq) <= 1e-12 * max(abs(tq), 1e-30):
        return z[..., i]
    if i > 0 and abs(t[i - 1] - tq) <= 1e-12 * max(abs(tq), 1e-30):
        return z[..., i - 1]
    i = min(max(i, 1), len(t) - 1)
    w = (tq - t[i - 1]) / (t[i] - t[i - 1])
    return (1 - w) * z[..., i - 1] + w * z[..., i]


def estimate(t, z, estimator: Estimator):
    if estimator.kind == EstimatorKind.SNAPSHOT:
        return snapshot(t, z, estimator.t0)
    return window_average(t, z, estimator.t0, estimator.t1)


def order_parameter(trajectory: Trajectory, estimator: Estimator) -> OrderParameter:
    """Normalized magnetization from a trajectory, clipped to [-1, 1]."""
    val = float(estimate(trajectory.t, trajectory.z, estimator))
    return OrderParameter(min(1.0, max(-1.0, val)), estimator)


def classify_phase(order, threshold=0.1) -> Phase:
    """FERROMAGNETIC iff the order parameter lies below -threshold."""
    jz = order.jz_bar if isinstance(order, OrderParameter) else float(order)
    return Phase.FERROMAGNETIC if jz < -threshold else Phase.PARAMAGNETIC


def classify_array(jz, threshold=0.1) -> np.ndarray:
    jz = np.asarray(jz)
    return np.where(jz < -threshold, Phase.FERROMAGNETIC.value, Phase.PARAMAGNETIC.value)


def central_gradient(x, f):
    """Three-point differences at interior points (nan at the ends); x may be non-uniform."""
    x = np.asarray(x, float)
    f = np.asarray(f, float)
    g = np.full_like(f, np.nan)
    g[1:-1] = (f[2:] - f[:-2]) / (x[2:] - x[:-2])
    return g


def _sweep_arrays(sweep):
    if isinstance(sweep, SweepResult):
        return np.asarray(sweep.control_1, float), np.asarray(sweep.jz_bar, float)
    x, f = sweep
    return np.asarray(x, float), np.asarray(f, float)


def critical_drive(sweep, method=CriticalMethod.MAX_GRADIENT) -> CriticalPoint:
    """Location of the transition along a monotone 1D sweep.

    MAX_GRADIENT returns the grid point with the largest |three-point
    gradient| (smallest control value on ties); JUMP returns the midpoint of
    the largest single-step change.
    """
    x, f = _sweep_arrays(sweep)
    if len(x) < 3:
        raise ValueError("need at least 3 grid points")
    dx = np.diff(x)
    if not (np.all(dx > 0) or np.all(dx < 0)):
        raise ValueError("control grid must be monotone")
    half = 0.5 * float(np.min(np.abs(dx)))
    method = CriticalMethod(method)
    if method == CriticalMethod.MAX_GRADIENT:
        g = central_gradient(x, f)
        mag = np.abs(g[1:-1])
        best = mag.max()
        idx = 1 + np.flatnonzero(mag >= best * (1 - 1e-12))
        i = int(idx[np.argmin(x[idx])])
        return CriticalPoint(float(x[i]), method, half, float(g[i]), i)
    steps = np.abs(np.diff(f))
    i = int(np.argmax(steps))
    return CriticalPoint(float(0.5 * (x[i] + x[i + 1])), method, half,
                         float((f[i + 1] - f[i]) / (x[i + 1] - x[i])), i)


@dataclass(frozen=True)
class DetuningCritical:
    negative: CriticalPoint
    positive: CriticalPoint

    @property
    def dominant(self) -> CriticalPoint:
        """Side with the sharper transition."""
        if abs(self.positive.gradient) > abs(self.negative.gradient):
            return self.positive
        return self.negative


def critical_detuning(sweep) -> DetuningCritical:
    """Max-gradient point on each side of delta = 0 of a detuning sweep."""
    x, f = _sweep_arrays(sweep)
    if not (x.min() < 0 < x.max()):
        raise ValueError("detuning sweep must span both signs")
    g = central_gradient(x, f)
    half = 0.5 * float(np.min(np.abs(np.diff(x))))
    out = []
    for side in (x < 0, x > 0):
        idx = np.flatnonzero(side & np.isfinite(g))
        mag = np.abs(g[idx])
        best = idx[mag >= mag.max() * (1 - 1e-12)]
        i = int(best[np.argmin(np.abs(x[best]))])
        out.append(CriticalPoint(float(x[i]), CriticalMethod.MAX_GRADIENT, half, float(g[i]), i))
    return DetuningCritical(*out)


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class PeriodFit:
    period: float
    amplitude: float
    offset: float
    slope: float
    phase: float
    residual: float


def _linear_part(t, z, T):
    w = 2 * math.pi / T
    A = np.column_stack([np.sin(w * t), np.cos(w * t), np.ones_like(t), t])
    coef, *_ = np.linalg.lstsq(A, z, rcond=None)
    r = z - A @ coef
    return coef, float(r @ r)


def fit_period(trajectory, *, min_periods=2.0, snr=5.0) -> PeriodFit:
    """Fit z(t) = a sin(2 pi t/T + phi) + b + c t.

    The FFT peak of the detrended signal seeds T, a grid over T refines the
    seed with the linear coefficients solved exactly, and a final
    least-squares pass polishes all five parameters.
    """
    if isinstance(trajectory, Trajectory):
        t, z = np.asarray(trajectory.t, float), np.asarray(trajectory.z, float)
    else:
        t, z = (np.asarray(a, float) for a in trajectory)
    t_rel = t - t[0]
    span = t_rel[-1]
    lin = np.polyfit(t_rel, z, 1)
    resid = z - np.polyval(lin, t_rel)
    n = len(t)
    pad = 16 * n
    spec = np.abs(np.fft.rfft(resid * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, d=span / (n - 1))
    lo = int(np.searchsorted(freqs, 0.5 * min_periods / span))
    if lo >= len(spec) - 1:
        raise FitError("trajectory too short for a period fit")
    k = lo + int(np.argmax(spec[lo:]))
    floor = np.median(spec[lo:]) + 1e-300
    if spec[k] < snr * floor or spec[k] == 0:
        raise FitError("no spectral peak above the noise floor")
    T0 = 1.0 / freqs[k]
    grid = T0 * np.linspace(0.9, 1.1, 81)
    costs = [_linear_part(t_rel, z, T)[1] for T in grid]
    T1 = grid[int(np.argmin(costs))]
    (s, c, b, slope), _ = _linear_part(t_rel, z, T1)
    a0 = math.hypot(s, c)
    ph0 = math.atan2(c, s)

    def res(p):
        a, T, ph, bb, cc = p
        return a * np.sin(2 * math.pi * t_rel / T + ph) + bb + cc * t_rel - z

    scale_t = 1.0 / span
    sol = least_squares(res, [a0, T1, ph0, b, slope], x_scale=[max(a0, 1e-12), T1, 1.0, 1.0, scale_t],
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, method="lm")
    a, T, ph, bb, cc = sol.x
    if a < 0:
        a, ph = -a, ph + math.pi
    if span / T < min_periods * 0.999:
        raise FitError(f"only {span / T:.2f} periods in trajectory")
    ph = (ph + math.pi) % (2 * math.pi) - math.pi
    # report offset at the original time origin
    bb_abs = bb - cc * t[0]
    return PeriodFit(float(T), float(a), float(bb_abs), float(cc), float(ph),
                     float(np.sqrt(np.mean(sol.fun**2))))
