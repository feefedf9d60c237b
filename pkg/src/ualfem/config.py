"""Run configuration: TOML parsing, per-benchmark defaults, validation.

The config document is flat TOML with typed scalars.  Unknown keys are
rejected.  Unspecified material and control parameters take the
benchmark defaults listed in :data:`PROBLEM_DEFAULTS`.
"""

from __future__ import annotations

from dataclasses import dataclass

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import benchmarks
from .assembly import COUPLING_EXACT, COUPLING_SIMPLIFIED, AnalysisContext
from .benchmarks import BenchmarkSpec
from .materials import MEASURE_MVM, MEASURE_PRINCIPAL, ElasticityParams, MazarsParams
from .mesh import LOCAL, NONLOCAL, build_dof_map
from .solvers import FAL, NR, SOLVERS, UAL_PC, UAL_PNC
from .state import ControlParams


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


# Per-problem defaults; 1D values follow the bar parameter tables, 2D
# values the shared plane-strain table.  Tolerances are per solver where
# the tables differ.
_BAR_COMMON = dict(
    e_modulus=30_000.0, nu=0.0, eps_d=1e-4, mazars_a=0.7, mazars_b=1e4,
    dl0=1e-4, dl_min=0.0, dl_max=1e-4, st=1e-12, d_max=0.999, beta=0.0,
)
_2D_COMMON = dict(
    mu=125.0, nu=0.2, eps_d=1e-4, mazars_a=0.7, mazars_b=1e4,
    dl0=1e-4, dl_min=0.0, dl_max=1e-3, st=1e-6, d_max=0.999, beta=0.0,
    alpha=1e-4,
)

PROBLEM_DEFAULTS = {
    benchmarks.BAR1D: {
        LOCAL: dict(_BAR_COMMON, phi=0.75, alpha=1e-2,
                    tol={NR: 1e-6, FAL: 1e-6, UAL_PC: 1e-6, UAL_PNC: 1e-6}),
        NONLOCAL: dict(_BAR_COMMON, phi=0.5, alpha=1e-1, lc=5.0,
                       tol={NR: 1e-6, FAL: 1e-4, UAL_PC: 1e-6, UAL_PNC: 1e-6}),
    },
    benchmarks.SNT: {
        LOCAL: dict(_2D_COMMON, tol={NR: 1e-6, FAL: 1e-6, UAL_PC: 1e-8, UAL_PNC: 1e-8}),
    },
    benchmarks.SSNT: {
        LOCAL: dict(_2D_COMMON, tol={NR: 1e-6, FAL: 1e-6, UAL_PC: 1e-8, UAL_PNC: 1e-8}),
        NONLOCAL: dict(_2D_COMMON, lc=5.0,
                       tol={NR: 1e-6, FAL: 1e-4, UAL_PC: 1e-8, UAL_PNC: 1e-8}),
    },
    benchmarks.TNT: {
        LOCAL: dict(_2D_COMMON, tol={NR: 1e-6, FAL: 1e-6, UAL_PC: 1e-8, UAL_PNC: 1e-8}),
    },
    benchmarks.SNS: {
        NONLOCAL: dict(_2D_COMMON, lc=2.0, measure=MEASURE_MVM,
                       tol={NR: 1e-6, FAL: 1e-4, UAL_PC: 1e-8, UAL_PNC: 1e-8}),
    },
}

_SCHEMA = {
    "benchmark": str,
    "resolution": str,
    "solver": str,
    "law": str,
    "phi": float,
    "damaged_length": float,
    "load": float,
    "e_modulus": float,
    "mu": float,
    "nu": float,
    "eps_d": float,
    "mazars_a": float,
    "mazars_b": float,
    "k_ratio": float,
    "measure": str,
    "tol": float,
    "st": float,
    "d_max": float,
    "dl0": float,
    "dl_min": float,
    "dl_max": float,
    "i_min": int,
    "i_max": int,
    "i_total": int,
    "alpha": float,
    "beta": float,
    "lc": float,
    "history_path": str,
    "contour_every": int,
    "contour_dir": str,
    "max_increments": int,
    "nonlocal_coupling": str,
    "pnc_literal_c": bool,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved analysis definition."""

    benchmark: BenchmarkSpec
    solver: str
    law: str
    elasticity: ElasticityParams
    mazars: MazarsParams
    controls: ControlParams
    history_path: str = "history.csv"
    contour_every: int = 0
    contour_dir: str = "contours"
    max_increments: int = 200_000
    nonlocal_coupling: str = COUPLING_EXACT
    pnc_literal_c: bool = False


def _coerce(key, value):
    want = _SCHEMA[key]
    if want is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, want) or (want is int and isinstance(value, bool)):
        raise ConfigError(f"key {key!r}: expected {want.__name__}, got {value!r}")
    return value


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat TOML configuration document.

    Unknown keys are rejected; invariant violations raise
    :class:`ConfigError` naming the offending field.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    unknown = set(raw) - set(_SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    data = {k: _coerce(k, v) for k, v in raw.items()}
    return build_config(data)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_config(data: dict) -> RunConfig:
    """Resolve a validated key-value mapping into a :class:`RunConfig`."""
    for required in ("benchmark", "solver"):
        if required not in data:
            raise ConfigError(f"missing required key {required!r}")
    problem = str(data["benchmark"]).lower()
    if problem not in benchmarks.PROBLEMS:
        raise ConfigError(f"benchmark: unknown problem {data['benchmark']!r}")
    solver = str(data["solver"]).lower()
    if solver not in SOLVERS:
        raise ConfigError(f"solver: unknown solver {data['solver']!r}")
    law = str(data.get("law", LOCAL)).lower()
    if law in ("nonlocalgradient", "nonlocal_gradient", "gradient"):
        law = NONLOCAL
    if law not in (LOCAL, NONLOCAL):
        raise ConfigError(f"law: unknown law {data['law']!r}")
    if solver == UAL_PNC and law == NONLOCAL:
        raise ConfigError("solver: the non-consistent scheme supports the local law only")

    laws = PROBLEM_DEFAULTS.get(problem, {})
    if law not in laws:
        raise ConfigError(f"law: benchmark {problem!r} does not support the {law} law")
    defaults = laws[law]

    def pick(key, fallback=None):
        return data.get(key, defaults.get(key, fallback))

    resolution = str(data.get("resolution", benchmarks.COARSE)).lower()
    bench = BenchmarkSpec(
        problem=problem,
        resolution=resolution,
        law=law,
        phi=pick("phi", 1.0),
        damaged_length=pick("damaged_length", 4.0),
        load=data.get("load"),
    )

    if "e_modulus" in data:
        elasticity = ElasticityParams(E=data["e_modulus"], nu=pick("nu", 0.0))
    elif "mu" in data:
        elasticity = ElasticityParams.from_shear(data["mu"], pick("nu", 0.0))
    elif "e_modulus" in defaults:
        elasticity = ElasticityParams(E=defaults["e_modulus"], nu=pick("nu", 0.0))
    else:
        elasticity = ElasticityParams.from_shear(defaults["mu"], pick("nu", 0.0))

    measure = str(pick("measure", MEASURE_PRINCIPAL)).lower()
    if measure in ("principaltension", "principal_tension"):
        measure = MEASURE_PRINCIPAL
    if measure in ("modifiedvonmises", "modified_von_mises"):
        measure = MEASURE_MVM
    if measure not in (MEASURE_PRINCIPAL, MEASURE_MVM):
        raise ConfigError(f"measure: unknown equivalent-strain measure {measure!r}")

    try:
        mazars = MazarsParams(
            eps_d=pick("eps_d", 1e-4),
            a=pick("mazars_a", 0.7),
            b=pick("mazars_b", 1e4),
            k_ratio=pick("k_ratio", 10.0),
            measure=measure,
        )
        tol_default = defaults.get("tol", {})
        tol = data.get("tol", tol_default.get(solver, 1e-6)
                       if isinstance(tol_default, dict) else tol_default)
        controls = ControlParams(
            tol=tol,
            st=pick("st", 1e-12),
            d_max=pick("d_max", 0.999),
            dl0=pick("dl0", 1e-4),
            dl_min=pick("dl_min", 0.0),
            dl_max=pick("dl_max", 1e-4),
            i_min=pick("i_min", 5),
            i_max=pick("i_max", 12),
            i_total=pick("i_total", 30),
            alpha=pick("alpha", 1e-2),
            beta=pick("beta", 0.0),
            lc=pick("lc", 0.0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if law == NONLOCAL and controls.lc <= 0.0:
        raise ConfigError("lc: the gradient law requires a positive characteristic length")

    coupling = str(data.get("nonlocal_coupling", COUPLING_EXACT)).lower()
    if coupling not in (COUPLING_EXACT, COUPLING_SIMPLIFIED):
        raise ConfigError(f"nonlocal_coupling: unknown mode {coupling!r}")

    max_increments = data.get("max_increments", 200_000)
    if max_increments <= 0:
        raise ConfigError("max_increments: must be positive")
    contour_every = data.get("contour_every", 0)
    if contour_every < 0:
        raise ConfigError("contour_every: must be non-negative")

    return RunConfig(
        benchmark=bench,
        solver=solver,
        law=law,
        elasticity=elasticity,
        mazars=mazars,
        controls=controls,
        history_path=data.get("history_path", "history.csv"),
        contour_every=contour_every,
        contour_dir=data.get("contour_dir", "contours"),
        max_increments=max_increments,
        nonlocal_coupling=coupling,
        pnc_literal_c=data.get("pnc_literal_c", False),
    )


def build_context(cfg: RunConfig) -> AnalysisContext:
    """Generate the benchmark mesh and assemble the analysis context."""
    mesh, bc, _pattern = benchmarks.gen_benchmark(cfg.benchmark)
    dofmap = build_dof_map(mesh, bc, cfg.law)
    scale = benchmarks.stiffness_scale(mesh, cfg.benchmark)
    return AnalysisContext(
        mesh=mesh,
        dofmap=dofmap,
        bc_spec=bc,
        elasticity=cfg.elasticity,
        mazars=cfg.mazars,
        controls=cfg.controls,
        law=cfg.law,
        stiffness_scale=scale,
        nonlocal_coupling=cfg.nonlocal_coupling,
    )
