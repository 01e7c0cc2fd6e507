"""Mean-field and exact simulations of a cavity-mediated collective XY spin model."""

__version__ = "0.1.0"

from .core import (ModelParams, TrapParams, DerivedCouplings, DomainError, derive, chi_from_cavity,
                   chi_dispersive, drive_from_pump, pump_amplitude_from_power, coupling_profile,
                   classical_field, rabi_rms_magnetization, rabi_mean_magnetization)
from .trajectory import Trajectory, SweepResult, IntegrationError
from .collective import (BlochState, CollectiveFields, Phase, bloch_rhs, collective_energy,
                         integrate_quench, separatrix_classify)
from .ensemble import (SiteConfig, EnsembleState, sample_site_couplings, uniform_couplings,
                       integrate_ensemble, run_shots)
from .analysis import (Estimator, OrderParameter, CriticalPoint, order_parameter, classify_phase,
                       critical_drive, critical_detuning, fit_period)
from .protocols import drive_sweep, detuning_sweep, phase_diagram, basin_map

__all__ = [name for name in dir() if not name.startswith("_")]
