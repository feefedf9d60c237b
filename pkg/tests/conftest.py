"""Shared mesh builders for the test suite."""

import numpy as np
import pytest

from ualfem.mesh import BCSpec, Mesh


def make_bar(n_el, length=100.0, weak=()):
    """Uniform 1D bar with 'left'/'right' node sets and optional weak tags."""
    nodes = np.linspace(0.0, length, n_el + 1).reshape(-1, 1)
    elements = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    tags = np.full(n_el, "", dtype="U16")
    for e in weak:
        tags[e] = "weakened"
    return Mesh(
        dim=1,
        nodes=nodes,
        elements=elements,
        boundary_sets={"left": np.array([0]), "right": np.array([n_el])},
        element_tags=tags,
    )


def make_grid(nx, ny, lx=1.0, ly=1.0, distort=0.0, seed=0):
    """Structured Quad4 grid with edge node sets; optional interior jitter."""
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    if distort:
        rng = np.random.default_rng(seed)
        interior = (
            (nodes[:, 0] > 0) & (nodes[:, 0] < lx) & (nodes[:, 1] > 0) & (nodes[:, 1] < ly)
        )
        h = min(lx / nx, ly / ny)
        nodes[interior] += rng.uniform(-distort * h, distort * h, (interior.sum(), 2))

    def nid(i, j):
        return j * (nx + 1) + i

    elements = []
    for j in range(ny):
        for i in range(nx):
            elements.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
    elements = np.array(elements)
    sets = {
        "left": np.array([nid(0, j) for j in range(ny + 1)]),
        "right": np.array([nid(nx, j) for j in range(ny + 1)]),
        "bottom": np.array([nid(i, 0) for i in range(nx + 1)]),
        "top": np.array([nid(i, ny) for i in range(nx + 1)]),
        "bottom_left": np.array([nid(0, 0)]),
    }
    return Mesh(dim=2, nodes=nodes, elements=elements, boundary_sets=sets)


@pytest.fixture
def bar_bc():
    return BCSpec((("left", 0, 0.0), ("right", 0, 0.01)))
