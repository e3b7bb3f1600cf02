"""Space-time boundary elements for a moving void in the heat equation.

Forward Dirichlet-to-Neumann solves, adjoint shape gradients and an
L-BFGS reconstruction of a star-shaped, time-dependent void from exterior
Cauchy data.
"""
from .config import ConfigError, RunConfig
from .conventions import Conventions, default_conventions, load_conventions
from .geometry import GeometryError, ShapeCoefficients, SpaceTimeMesh, build_mesh
from .inverse import InversionHistory, LineSearchError, run_inversion
from .solver import add_noise, solve_adjoint, solve_dirichlet, synth_forward

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunConfig",
    "Conventions",
    "default_conventions",
    "load_conventions",
    "GeometryError",
    "ShapeCoefficients",
    "SpaceTimeMesh",
    "build_mesh",
    "InversionHistory",
    "LineSearchError",
    "run_inversion",
    "add_noise",
    "solve_adjoint",
    "solve_dirichlet",
    "synth_forward",
]
