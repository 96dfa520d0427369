"""Normalized solutions of a nonlinear Schrodinger equation with a steep mixed nonlinearity.

Landscape radii and Gagliardo-Nirenberg constants, spectral fields on
periodic boxes, bump potentials with a barycenter localization, constrained
minimization on the mass sphere, and split-step time evolution.
"""

from .config import RunConfig
from .field import Field, Grid
from .landscape import LandscapeReport, compute_landscape
from .optimizer import MinimizerRecord, SolverSettings, autonomous_minimize, minimize_localized, ordering_report
from .params import ProblemParams
from .potential import Peak, PotentialSpec, build_potential

__all__ = [
    "Field",
    "Grid",
    "LandscapeReport",
    "MinimizerRecord",
    "Peak",
    "PotentialSpec",
    "ProblemParams",
    "RunConfig",
    "SolverSettings",
    "autonomous_minimize",
    "build_potential",
    "compute_landscape",
    "minimize_localized",
    "ordering_report",
]
__version__ = "0.1.0"
