"""Report rendering: reaction-displacement figures and damage maps.

Figures are written next to the delimited output; nothing in the solver
path depends on this module.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .output import nodal_damage


def plot_histories(histories: dict, path, title: str | None = None) -> None:
    """Overlay reaction-displacement curves from ``{label: records}``."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, records in histories.items():
        disp = [r.applied_disp for r in records]
        reac = [r.reaction for r in records]
        ax.plot(disp, reac, lw=1.2, label=label)
    ax.set_xlabel("applied displacement [mm]")
    ax.set_ylabel("reaction [N]")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_damage_map(mesh, gp_damage, path, title: str | None = None) -> None:
    """Filled damage contour over a 2D mesh (nodal averages)."""
    if mesh.dim != 2:
        raise ValueError("damage maps are available for 2D meshes only")
    dmg = nodal_damage(mesh, gp_damage)
    fig, ax = plt.subplots(figsize=(5.4, 4.6))
    # Quads drawn as two triangles for tricontourf.
    quads = mesh.elements
    tris = np.vstack([quads[:, [0, 1, 2]], quads[:, [0, 2, 3]]])
    tpc = ax.tricontourf(
        mesh.nodes[:, 0], mesh.nodes[:, 1], tris, dmg,
        levels=np.linspace(0.0, 1.0, 21), cmap="inferno",
    )
    fig.colorbar(tpc, ax=ax, label="damage")
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
