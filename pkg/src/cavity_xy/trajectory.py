"""Time-series containers shared by the simulators."""
from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np


def output_grid(t0, t_final, dt_out):
    """Uniform samples t0, t0+dt, ... ending exactly at t_final.

    A last partial step is kept only if it is longer than 1e-6 dt, so round-off
    never adds a spurious extra point.
    """
    n = int(math.floor((t_final - t0) / dt_out + 1e-6))
    t = t0 + dt_out * np.arange(n + 1)
    if t_final - t[-1] > 1e-6 * dt_out:
        t = np.append(t, t_final)
    else:
        t[-1] = t_final
    return t


class IntegrationError(RuntimeError):
    """ODE integration failed; ``last_t`` / ``last_state`` hold the last good point."""

    def __init__(self, message, last_t=None, last_state=None):
        super().__init__(message)
        self.last_t = last_t
        self.last_state = last_state


@dataclass
class Trajectory:
    """Normalized collective spin components sampled on a uniform grid.

    ``x, y, z`` are the Bloch components divided by N/2. ``columns`` carries
    any extra per-sample series (energy, cavity amplitude, spreads).
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    columns: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    def state_at(self, i: int = -1) -> np.ndarray:
        return np.array([self.x[i], self.y[i], self.z[i]])


@dataclass
class SweepResult:
    """Order parameter on a 1D or 2D grid of control parameters.

    For a 1D sweep ``control_2`` is None and ``jz_bar`` has shape (n1,);
    for a 2D sweep ``jz_bar`` has shape (n2, n1) indexed [row=control_2, col=control_1].
    """

    control_1: np.ndarray
    jz_bar: np.ndarray
    control_2: np.ndarray | None = None
    spread: np.ndarray | None = None
    labels: np.ndarray | None = None
    names: tuple = ("omega_over_chiN",)
    meta: dict = field(default_factory=dict)

    @property
    def is_2d(self) -> bool:
        return self.control_2 is not None
