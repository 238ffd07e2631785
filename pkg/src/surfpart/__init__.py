"""Optimal spectral partitions of surfaces by eigenfunction segregation."""

from .config import ConfigError, RunConfig, build_mesh, parse_config
from .geometry import (ImplicitSurface, PlanarDisk, ProjectionError, Sphere,
                       Torus, dziuk_surface)
from .mesh import (ProlongationMap, TriangulatedSurface, generate_disk,
                   generate_icosphere, generate_implicit, generate_torus,
                   refine)
from .partitioner import SpectralPartitioner
from .segregation import (ComponentEnsemble, ContinuationResult,
                          ContinuationSchedule, EnergyTrace, ExtinctionError,
                          labeled_init, random_init, run_continuation,
                          run_stage)
from .solvers import SolveReport, SolverError, pcg_solve, smallest_eigenpair

__version__ = "0.1.0"

__all__ = [
    "ComponentEnsemble", "ConfigError", "ContinuationResult",
    "ContinuationSchedule", "EnergyTrace", "ExtinctionError",
    "ImplicitSurface", "PlanarDisk", "ProjectionError", "ProlongationMap",
    "RunConfig", "SolveReport", "SolverError", "SpectralPartitioner",
    "Sphere", "Torus", "TriangulatedSurface", "build_mesh", "dziuk_surface",
    "generate_disk", "generate_icosphere", "generate_implicit",
    "generate_torus", "labeled_init", "parse_config", "pcg_solve",
    "random_init", "refine", "run_continuation", "run_stage",
    "smallest_eigenpair",
]
