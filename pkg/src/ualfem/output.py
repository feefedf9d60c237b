"""History tables (CSV), damage contours (legacy ASCII VTK) and the
solver comparison table."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .state import AnalysisResult, IncrementRecord

HISTORY_HEADER = (
    "increment,m_bar,applied_disp_mm,reaction_N,iterations,arc_length,max_damage"
)
COMPARE_HEADER = "solver,increments,total_iterations,final_m_bar,status,wall_time_s"


def format_history(history) -> str:
    """History as comma-separated text with 16 significant digits."""
    if not history:
        raise ValueError("empty history")
    lines = [HISTORY_HEADER]
    for rec in history:
        lines.append(
            f"{rec.n},{rec.m_bar:.16e},{rec.applied_disp:.16e},{rec.reaction:.16e},"
            f"{rec.iterations},{rec.dl:.16e},{rec.max_damage:.16e}"
        )
    return "\n".join(lines) + "\n"


def write_history(history, path) -> None:
    """Write the converged-increment table; one row per increment."""
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_history(history), encoding="utf-8")


def read_history(path) -> list[IncrementRecord]:
    """Parse a history file back into increment records."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            records.append(
                IncrementRecord(
                    n=int(row["increment"]),
                    m_bar=float(row["m_bar"]),
                    applied_disp=float(row["applied_disp_mm"]),
                    reaction=float(row["reaction_N"]),
                    iterations=int(row["iterations"]),
                    dl=float(row["arc_length"]),
                    max_damage=float(row["max_damage"]),
                )
            )
    return records


# ---------------------------------------------------------------------------
# Contours
# ---------------------------------------------------------------------------

def nodal_damage(mesh, gp_damage) -> np.ndarray:
    """Arithmetic mean of the Gauss values of all elements touching a node."""
    n_gp = gp_damage.shape[1]
    sums = np.zeros(mesh.n_nodes)
    counts = np.zeros(mesh.n_nodes)
    elem_mean_sum = gp_damage.sum(axis=1)
    np.add.at(sums, mesh.elements, (elem_mean_sum / n_gp)[:, None] * np.ones_like(mesh.elements, dtype=float))
    np.add.at(counts, mesh.elements, 1.0)
    counts[counts == 0] = 1.0
    return sums / counts


def write_contour(mesh, state, path, nonlocal_law: bool = False) -> None:
    """Legacy ASCII unstructured-grid snapshot of one converged state.

    Point data: ``displacement`` (3-vector, zero padded), ``damage``
    (Gauss values averaged to nodes) and ``eps_bar`` for the gradient
    law.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    n_nodes = mesh.n_nodes
    n_el = mesh.n_elements
    npe = mesh.elements.shape[1]
    cell_type = 3 if mesh.dim == 1 else 9  # VTK_LINE / VTK_QUAD

    buf.write("# vtk DataFile Version 3.0\n")
    buf.write("damage analysis state\n")
    buf.write("ASCII\n")
    buf.write("DATASET UNSTRUCTURED_GRID\n")
    buf.write(f"POINTS {n_nodes} double\n")
    for i in range(n_nodes):
        x = mesh.nodes[i, 0]
        y = mesh.nodes[i, 1] if mesh.dim == 2 else 0.0
        buf.write(f"{x:.10g} {y:.10g} 0\n")
    buf.write(f"CELLS {n_el} {n_el * (npe + 1)}\n")
    for conn in mesh.elements:
        buf.write(f"{npe} " + " ".join(str(c) for c in conn) + "\n")
    buf.write(f"CELL_TYPES {n_el}\n")
    for _ in range(n_el):
        buf.write(f"{cell_type}\n")

    buf.write(f"POINT_DATA {n_nodes}\n")
    buf.write("VECTORS displacement double\n")
    for i in range(n_nodes):
        ux = state.u[i * mesh.dim]
        uy = state.u[i * mesh.dim + 1] if mesh.dim == 2 else 0.0
        buf.write(f"{ux:.10e} {uy:.10e} 0\n")
    dmg = nodal_damage(mesh, state.gp_damage)
    buf.write("SCALARS damage double 1\n")
    buf.write("LOOKUP_TABLE default\n")
    for v in dmg:
        buf.write(f"{v:.10e}\n")
    if nonlocal_law and state.eps_bar is not None:
        buf.write("SCALARS eps_bar double 1\n")
        buf.write("LOOKUP_TABLE default\n")
        for v in state.eps_bar:
            buf.write(f"{v:.10e}\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


# ---------------------------------------------------------------------------
# Solver comparison
# ---------------------------------------------------------------------------

def compare_rows(results: dict[str, tuple[AnalysisResult, float]]) -> list[dict]:
    """One summary row per solver from ``{name: (result, wall_time)}``."""
    rows = []
    for name, (result, wall) in results.items():
        total_iters = sum(r.iterations for r in result.history)
        final_m = result.history[-1].m_bar if result.history else 0.0
        rows.append(
            {
                "solver": name,
                "increments": len(result.history),
                "total_iterations": total_iters,
                "final_m_bar": final_m,
                "status": result.status,
                "wall_time_s": wall,
            }
        )
    return rows


def format_compare(rows) -> str:
    lines = [COMPARE_HEADER]
    for r in rows:
        lines.append(
            f"{r['solver']},{r['increments']},{r['total_iterations']},"
            f"{r['final_m_bar']:.16e},{r['status']},{r['wall_time_s']:.3f}"
        )
    return "\n".join(lines) + "\n"


def write_compare(rows, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(format_compare(rows), encoding="utf-8")
