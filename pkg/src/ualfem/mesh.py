"""Meshes, boundary conditions and degree-of-freedom partitioning.

Displacement DOFs are numbered node-major, component-minor
(``dof = node * dim + comp``).  Nonlocal-strain DOFs use a separate
numbering, one per node (``nl_dof = node``); they never carry an
essential boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOCAL = "local"
NONLOCAL = "nonlocal"


class MeshError(ValueError):
    """Invalid mesh topology or boundary data."""


@dataclass(frozen=True)
class Mesh:
    """Finite element mesh of 2-node lines (1D) or 4-node quads (2D).

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    nodes : ndarray, shape (n_nodes, dim)
        Nodal coordinates in mm.
    elements : ndarray, shape (n_elements, 2 or 4)
        Connectivity. Quads are numbered counter-clockwise.
    boundary_sets : dict
        Named node sets, e.g. ``{"left": array([...])}``.
    element_tags : ndarray of str, shape (n_elements,)
        Per-element region label ('' for untagged bulk).
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_sets: dict = field(default_factory=dict)
    element_tags: np.ndarray | None = None

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise MeshError(f"dim must be 1 or 2, got {self.dim}")
        nodes = np.asarray(self.nodes, dtype=float).reshape(len(self.nodes), self.dim)
        elements = np.asarray(self.elements, dtype=np.int64)
        npe = 2 if self.dim == 1 else 4
        if elements.ndim != 2 or elements.shape[1] != npe:
            raise MeshError(f"expected {npe}-node elements, got shape {elements.shape}")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise MeshError("element connectivity index out of range")
        tags = self.element_tags
        if tags is None:
            tags = np.full(len(elements), "", dtype="U16")
        else:
            tags = np.asarray(tags, dtype="U16")
            if tags.shape != (len(elements),):
                raise MeshError("element_tags length mismatch")
        for name, nset in self.boundary_sets.items():
            nset = np.asarray(nset, dtype=np.int64)
            if nset.size and (nset.min() < 0 or nset.max() >= len(nodes)):
                raise MeshError(f"boundary set {name!r} references unknown nodes")
            self.boundary_sets[name] = nset
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "element_tags", tags)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_disp_dofs(self) -> int:
        return self.dim * self.n_nodes


@dataclass(frozen=True)
class BCSpec:
    """Essential boundary conditions on displacement DOFs.

    ``constraints`` is a tuple of ``(set_name, component, value)`` where
    ``value`` is the target displacement at full load (load fraction 1).
    Supports use ``value = 0``.
    """

    constraints: tuple = ()

    def with_constraint(self, set_name: str, comp: int, value: float) -> "BCSpec":
        return BCSpec(self.constraints + ((set_name, comp, value),))


@dataclass(frozen=True)
class DofMap:
    """Prescribed/free partition of the displacement DOFs.

    ``prescribed`` and ``free`` are sorted, disjoint index arrays whose
    union covers all ``dim * n_nodes`` displacement DOFs.  ``n_nl`` is the
    number of nonlocal-strain DOFs (0 for the local law).
    """

    dim: int
    n_nodes: int
    prescribed: np.ndarray
    free: np.ndarray
    n_nl: int

    @property
    def n_disp_dofs(self) -> int:
        return self.dim * self.n_nodes

    def disp_dof(self, node: int, comp: int = 0) -> int:
        return node * self.dim + comp


def build_dof_map(mesh: Mesh, bc_spec: BCSpec, law: str = LOCAL) -> DofMap:
    """Partition displacement DOFs into prescribed and free sets.

    Raises
    ------
    MeshError
        If a constraint names an unknown or empty boundary set, or no
        DOF ends up prescribed.
    """
    n = mesh.n_disp_dofs
    pres_mask = np.zeros(n, dtype=bool)
    for set_name, comp, _value in bc_spec.constraints:
        if set_name not in mesh.boundary_sets:
            raise MeshError(f"unknown boundary set {set_name!r}")
        nset = mesh.boundary_sets[set_name]
        if nset.size == 0:
            raise MeshError(f"boundary set {set_name!r} is empty")
        if not 0 <= comp < mesh.dim:
            raise MeshError(f"component {comp} invalid for dim {mesh.dim}")
        pres_mask[nset * mesh.dim + comp] = True
    prescribed = np.flatnonzero(pres_mask)
    if prescribed.size == 0:
        raise MeshError("boundary conditions prescribe no DOF")
    free = np.flatnonzero(~pres_mask)
    n_nl = mesh.n_nodes if law == NONLOCAL else 0
    return DofMap(mesh.dim, mesh.n_nodes, prescribed, free, n_nl)


def prescribed_pattern(mesh: Mesh, bc_spec: BCSpec) -> np.ndarray:
    """Full-length displacement vector holding the target values at full load.

    Zero on free DOFs; later entries of ``bc_spec`` win on overlap.  The
    instantaneous prescribed displacement is this pattern scaled by the
    cumulative load fraction.
    """
    pattern = np.zeros(mesh.n_disp_dofs)
    for set_name, comp, value in bc_spec.constraints:
        nset = mesh.boundary_sets[set_name]
        pattern[nset * mesh.dim + comp] = value
    return pattern


def loaded_dofs(mesh: Mesh, bc_spec: BCSpec) -> np.ndarray:
    """Prescribed DOFs with a nonzero target (where reactions are summed)."""
    pattern = prescribed_pattern(mesh, bc_spec)
    return np.flatnonzero(pattern != 0.0)
