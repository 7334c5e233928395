"""Thin liquid film with insoluble surfactant: finite-volume solver and analysis tools."""

from .config import PRESETS, RunConfig, load_config, parse_config
from .core import Grid, PhysicalParams, State, compute_fluxes, ghost_extend, rhs
from .diagnostics import TimeSeries, dissipation_terms, energy, fit_decay
from .ellipticity import FrozenCoefficients, freeze, sector_scan
from .errors import (CheckpointError, ConfigError, DegeneracyStop, DomainError, ModelRangeError,
                     NumericalError, PositivityError, ThinFilmError)
from .integrator import IntegratorConfig, advance, newton_solve
from .stability import Equilibrium, aq_check, spectral_bound
from .surfactant import SurfactantModel

__all__ = [
    "PRESETS", "RunConfig", "load_config", "parse_config",
    "Grid", "PhysicalParams", "State", "compute_fluxes", "ghost_extend", "rhs",
    "TimeSeries", "dissipation_terms", "energy", "fit_decay",
    "FrozenCoefficients", "freeze", "sector_scan",
    "CheckpointError", "ConfigError", "DegeneracyStop", "DomainError", "ModelRangeError",
    "NumericalError", "PositivityError", "ThinFilmError",
    "IntegratorConfig", "advance", "newton_solve",
    "Equilibrium", "aq_check", "spectral_bound",
    "SurfactantModel",
]

__version__ = "0.1.0"
