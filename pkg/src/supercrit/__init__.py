"""Positive solutions of Delta u + u^p + f = 0 in R^n for supercritical p.

The pipeline: exponent algebra (``constants``), the radial ground state w
(``fowler``), a right inverse of Delta + p w^(p-1) mode by mode (``linop``)
and a Picard iteration for the perturbation (``fixedpoint``).
"""

from .constants import DomainError, Exponents, Regime, classify_regime, derive_exponents
from .fixedpoint import SolveConfig, SolveReport, SourceSpec, picard_solve, solve
from .fowler import GroundState, IntegrationError, ground_state, shoot_direct
from .linop import LinearSolver, ModeExpansion, WeightedNormConfig, apply_T
from .radialgrid import Grid, RadialProfile, build_grid, default_grid

__all__ = [
    "DomainError",
    "Exponents",
    "Grid",
    "GroundState",
    "IntegrationError",
    "LinearSolver",
    "ModeExpansion",
    "RadialProfile",
    "Regime",
    "SolveConfig",
    "SolveReport",
    "SourceSpec",
    "WeightedNormConfig",
    "apply_T",
    "build_grid",
    "classify_regime",
    "default_grid",
    "derive_exponents",
    "ground_state",
    "picard_solve",
    "shoot_direct",
    "solve",
]
