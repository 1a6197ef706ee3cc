"""Compressible natural convection and its Oberbeck-Boussinesq limit."""

from .config import RunConfig, parse_config
from .constitutive import GibbsModel, ThermoPoint, coefficient_table
from .exceptions import ConfigError, DomainError, RegimeError, SolverError, StudyError
from .grid import FieldState, Grid
from .harness import ConvergenceReport, StudyConfig, limit_study, run_case, weak_residual
from .nondim import BaseScales, DimensionlessGroups, physical_groups, limit_groups, verify_assumptions
from .solver import ProblemSetup, integrate

__all__ = [
    "BaseScales",
    "ConfigError",
    "ConvergenceReport",
    "DimensionlessGroups",
    "DomainError",
    "FieldState",
    "GibbsModel",
    "Grid",
    "ProblemSetup",
    "RegimeError",
    "RunConfig",
    "SolverError",
    "StudyConfig",
    "StudyError",
    "ThermoPoint",
    "coefficient_table",
    "integrate",
    "limit_groups",
    "limit_study",
    "parse_config",
    "physical_groups",
    "run_case",
    "verify_assumptions",
    "weak_residual",
]
