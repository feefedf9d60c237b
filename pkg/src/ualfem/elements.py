"""Shape functions and Gauss quadrature for Line2 and Quad4 elements.

Quadrature is 2 points per direction (2 for lines, 2x2 for quads), which
integrates the bilinear element matrices exactly.  Strain uses Voigt
ordering with engineering shear (eps_xx, eps_yy, gamma_xy).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LINE2 = "line2"
QUAD4 = "quad4"

_G = 1.0 / np.sqrt(3.0)
GAUSS_1D = np.array([[-_G], [_G]])
GAUSS_2D = np.array([[-_G, -_G], [_G, -_G], [_G, _G], [-_G, _G]])


class InvertedElementError(ValueError):
    """Non-positive Jacobian determinant (inverted or degenerate element)."""


@dataclass(frozen=True)
class ShapeEval:
    """Shape data at one quadrature point.

    ``N`` holds the shape values, ``B_u`` the strain-displacement matrix,
    ``B_eps`` the scalar-field gradient matrix and ``jxw`` the Jacobian
    determinant times the quadrature weight.
    """

    N: np.ndarray
    B_u: np.ndarray
    B_eps: np.ndarray
    jxw: float


def _line2(xi, coords):
    h = coords[1, 0] - coords[0, 0]
    if h <= 0.0:
        raise InvertedElementError(f"non-positive line-element Jacobian {h / 2.0}")
    N = np.array([0.5 * (1.0 - xi), 0.5 * (1.0 + xi)])
    dN = np.array([-1.0 / h, 1.0 / h])
    return N, dN.reshape(1, 2), h / 2.0


def _quad4(xi, eta, coords):
    N = 0.25 * np.array(
        [
            (1 - xi) * (1 - eta),
            (1 + xi) * (1 - eta),
            (1 + xi) * (1 + eta),
            (1 - xi) * (1 + eta),
        ]
    )
    dN_ref = 0.25 * np.array(
        [
            [-(1 - eta), -(1 - xi)],
            [(1 - eta), -(1 + xi)],
            [(1 + eta), (1 + xi)],
            [-(1 + eta), (1 - xi)],
        ]
    )
    J = dN_ref.T @ coords  # (2, 2): dx/dxi
    detJ = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
    if detJ <= 0.0:
        raise InvertedElementError(f"non-positive Jacobian determinant {detJ}")
    dN = dN_ref @ np.linalg.inv(J).T  # (4, 2): dN/dx
    return N, dN, detJ


def eval_shape(element_kind: str, xi, node_coords: np.ndarray) -> ShapeEval:
    """Evaluate shapes at reference coordinates ``xi`` on one element.

    Raises :class:`InvertedElementError` for non-positive Jacobians.
    """
    coords = np.asarray(node_coords, dtype=float)
    if element_kind == LINE2:
        (x,) = np.atleast_1d(xi)[:1]
        N, dN, detJ = _line2(float(x), coords.reshape(2, 1))
        return ShapeEval(N=N, B_u=dN, B_eps=dN, jxw=detJ)
    if element_kind == QUAD4:
        x, e = np.asarray(xi, dtype=float)
        N, dN, detJ = _quad4(x, e, coords.reshape(4, 2))
        B = np.zeros((3, 8))
        B[0, 0::2] = dN[:, 0]
        B[1, 1::2] = dN[:, 1]
        B[2, 0::2] = dN[:, 1]
        B[2, 1::2] = dN[:, 0]
        return ShapeEval(N=N, B_u=B, B_eps=dN.T, jxw=detJ)
    raise ValueError(f"unknown element kind {element_kind!r}")


@dataclass(frozen=True)
class ElementData:
    """Precomputed per-element quadrature data for a whole mesh.

    Shapes: ``N (n_gp, npe)``, ``B (n_el, n_gp, n_strain, n_dof_el)``,
    ``B_eps (n_el, n_gp, dim, npe)``, ``jxw (n_el, n_gp)`` plus the
    element DOF gather map ``dof_ids (n_el, n_dof_el)``.
    """

    kind: str
    N: np.ndarray
    B: np.ndarray
    B_eps: np.ndarray
    jxw: np.ndarray
    dof_ids: np.ndarray

    @property
    def n_gp(self) -> int:
        return self.N.shape[0]


def precompute(mesh) -> ElementData:
    """Evaluate and cache all Gauss-point shape data for ``mesh``."""
    if mesh.dim == 1:
        kind, points, npe, nstr = LINE2, GAUSS_1D, 2, 1
    else:
        kind, points, npe, nstr = QUAD4, GAUSS_2D, 4, 3
    n_el, n_gp = mesh.n_elements, len(points)
    N = np.zeros((n_gp, npe))
    B = np.zeros((n_el, n_gp, nstr, npe * mesh.dim))
    B_eps = np.zeros((n_el, n_gp, mesh.dim, npe))
    jxw = np.zeros((n_el, n_gp))
    for e in range(n_el):
        coords = mesh.nodes[mesh.elements[e]]
        for g, xi in enumerate(points):
            ev = eval_shape(kind, xi, coords)
            if e == 0:
                N[g] = ev.N
            B[e, g] = ev.B_u
            B_eps[e, g] = ev.B_eps
            jxw[e, g] = ev.jxw
    dof_ids = (
        mesh.elements[:, :, None] * mesh.dim + np.arange(mesh.dim)[None, None, :]
    ).reshape(n_el, npe * mesh.dim)
    return ElementData(kind=kind, N=N, B=B, B_eps=B_eps, jxw=jxw, dof_ids=dof_ids)
