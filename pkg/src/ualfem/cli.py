"""Command line interface.

Subcommands: ``run`` (one analysis from a config file), ``compare``
(solver comparison over several configs of one benchmark), ``mesh``
(dump a generated benchmark mesh) and ``report`` (render figures from
history files).  Exit codes: 0 full path, 2 partial path, 1 error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import benchmarks, output
from .config import ConfigError, RunConfig, build_context, load_config
from .mesh import NONLOCAL, build_dof_map
from .solvers import run_analysis
from .state import SystemState

EXIT_FULL = 0
EXIT_ERROR = 1
EXIT_PARTIAL = 2


def _contour_path(cfg: RunConfig, n: int) -> Path:
    return Path(cfg.contour_dir) / f"contour_{n:06d}.vtk"


def _execute(cfg: RunConfig, contour_every: int | None = None):
    ctx = build_context(cfg)
    every = cfg.contour_every if contour_every is None else contour_every
    recorder = None
    if every:
        def recorder(record, outcome, state):
            if record.n % every == 0:
                output.write_contour(ctx.mesh, state, _contour_path(cfg, record.n),
                                     cfg.law == NONLOCAL)

    t0 = time.perf_counter()
    result = run_analysis(
        ctx, cfg.solver, recorder=recorder,
        max_increments=cfg.max_increments, literal_c=cfg.pnc_literal_c,
    )
    wall = time.perf_counter() - t0
    return ctx, result, wall


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    ctx, result, wall = _execute(cfg, args.contour_every)
    if not result.history:
        print("no converged increments", file=sys.stderr)
        return EXIT_ERROR
    output.write_history(result.history, cfg.history_path)
    every = cfg.contour_every if args.contour_every is None else args.contour_every
    if every:
        output.write_contour(ctx.mesh, result.state,
                             _contour_path(cfg, result.history[-1].n),
                             cfg.law == NONLOCAL)
    if args.plot:
        from . import report

        fig_path = Path(cfg.history_path).with_suffix(".png")
        report.plot_histories({cfg.solver: result.history}, fig_path)
        print(f"figure: {fig_path}")
    last = result.history[-1]
    print(
        f"{cfg.solver} on {cfg.benchmark.problem}: {result.status} path, "
        f"{len(result.history)} increments, final m_bar {last.m_bar:.6f}, "
        f"reaction {last.reaction:.6e} N, {wall:.2f}s"
    )
    print(f"history: {cfg.history_path}")
    return EXIT_FULL if result.completed else EXIT_PARTIAL


def cmd_compare(args) -> int:
    configs = [load_config(p) for p in args.configs]
    problems = {(c.benchmark.problem, c.law) for c in configs}
    if len(problems) > 1:
        print(f"compare requires one benchmark and law, got {sorted(problems)}",
              file=sys.stderr)
        return EXIT_ERROR
    results = {}
    histories = {}
    for cfg in configs:
        ctx, result, wall = _execute(cfg)
        name = cfg.solver
        results[name] = (result, wall)
        histories[name] = result.history
        if result.history:
            stem = Path(cfg.history_path)
            path = stem.with_name(f"{stem.stem}_{name}{stem.suffix}")
            output.write_history(result.history, path)
            print(f"history ({name}): {path}")
    rows = output.compare_rows(results)
    out = Path(args.output)
    output.write_compare(rows, out)
    print(output.format_compare(rows), end="")
    print(f"comparison table: {out}")
    if args.plot:
        from . import report

        fig_path = out.with_suffix(".png")
        report.plot_histories(histories, fig_path)
        print(f"figure: {fig_path}")
    return EXIT_FULL


def cmd_mesh(args) -> int:
    spec = benchmarks.BenchmarkSpec(
        problem=args.benchmark, resolution=args.resolution, law=args.law
    )
    mesh, bc, _ = benchmarks.gen_benchmark(spec)
    dofmap = build_dof_map(mesh, bc, args.law)
    state = SystemState.initial(dofmap, mesh.n_elements,
                                2 if mesh.dim == 1 else 4, args.law == NONLOCAL)
    output.write_contour(mesh, state, args.output, args.law == NONLOCAL)
    print(
        f"{args.benchmark} ({args.resolution}, {args.law}): "
        f"{mesh.n_elements} elements, {mesh.n_nodes} nodes -> {args.output}"
    )
    return EXIT_FULL


def cmd_report(args) -> int:
    from . import report

    histories = {}
    for path in args.histories:
        label = Path(path).stem
        histories[label] = output.read_history(path)
    report.plot_histories(histories, args.output)
    print(f"figure: {args.output}")
    return EXIT_FULL


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ualfem",
        description="Arc-length continuation solvers for damage mechanics benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one analysis from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--contour-every", type=int, default=None, metavar="N",
                       help="write a contour file every N converged increments")
    p_run.add_argument("--plot", action="store_true",
                       help="render the reaction-displacement figure next to the history")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run several configs of one benchmark")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("-o", "--output", default="comparison.csv")
    p_cmp.add_argument("--plot", action="store_true")
    p_cmp.set_defaults(func=cmd_compare)

    p_mesh = sub.add_parser("mesh", help="dump a generated benchmark mesh")
    p_mesh.add_argument("benchmark", choices=benchmarks.PROBLEMS)
    p_mesh.add_argument("--resolution", default="coarse", choices=("coarse", "fine"))
    p_mesh.add_argument("--law", default="local", choices=("local", "nonlocal"))
    p_mesh.add_argument("-o", "--output", default="mesh.vtk")
    p_mesh.set_defaults(func=cmd_mesh)

    p_rep = sub.add_parser("report", help="render figures from history files")
    p_rep.add_argument("histories", nargs="+")
    p_rep.add_argument("-o", "--output", default="report.png")
    p_rep.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
