"""Arc-length continuation FEM solvers for local and gradient damage."""

from .assembly import AnalysisContext, assemble_local, assemble_nonlocal, constraint_residual
from .benchmarks import BenchmarkSpec, gen_benchmark
from .config import RunConfig, build_context, load_config, parse_config
from .materials import ElasticityParams, MazarsParams, elasticity_tensor
from .mesh import BCSpec, DofMap, Mesh, build_dof_map
from .solvers import run_analysis
from .state import AnalysisResult, ControlParams, IncrementRecord, SystemState

__all__ = [
    "AnalysisContext",
    "AnalysisResult",
    "BCSpec",
    "BenchmarkSpec",
    "ControlParams",
    "DofMap",
    "ElasticityParams",
    "IncrementRecord",
    "MazarsParams",
    "Mesh",
    "RunConfig",
    "SystemState",
    "assemble_local",
    "assemble_nonlocal",
    "build_context",
    "build_dof_map",
    "constraint_residual",
    "elasticity_tensor",
    "gen_benchmark",
    "load_config",
    "parse_config",
    "run_analysis",
]
