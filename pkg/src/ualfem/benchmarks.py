"""Benchmark problem generators.

Five problems: a 1D bar with a weakened mid region, and four 2D plane
strain specimens (single notch tension, symmetric single notch tension,
two notch tension, single notch shear).  The 2D meshes are graded
tensor-product grids with a refined band along the expected damage path;
notches are realized by removing one element row, except for the
symmetric tension specimen whose notch is a knocked-down soft band so
the published element and node counts are kept exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import BCSpec, Mesh, MeshError

BAR1D = "bar1d"
SNT = "snt"
SSNT = "ssnt"
TNT = "tnt"
SNS = "sns"
PROBLEMS = (BAR1D, SNT, SSNT, TNT, SNS)

COARSE = "coarse"
FINE = "fine"

# Residual stiffness of soft-band notches; small enough to act as an open
# slit, large enough to keep the factorization well conditioned.
NOTCH_SOFT_SCALE = 1e-3

_2D_LAWS = {SNT: ("local",), SSNT: ("local", "nonlocal"),
            TNT: ("local",), SNS: ("nonlocal",)}

DEFAULT_LOAD = {BAR1D: 0.01, SNT: 5e-3, SSNT: 0.01, TNT: 0.01, SNS: 0.019}


@dataclass(frozen=True)
class BenchmarkSpec:
    """Benchmark selector plus its governing geometric parameters.

    ``phi`` scales the Young's modulus inside the weakened band of the
    bar; ``damaged_length`` is the band width in mm.  ``load`` is the
    total prescribed displacement (per-problem default when ``None``).
    """

    problem: str
    resolution: str = COARSE
    law: str = "local"
    phi: float = 0.75
    damaged_length: float = 4.0
    load: float | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown benchmark {self.problem!r}")
        if self.resolution not in (COARSE, FINE):
            raise ValueError(f"unknown resolution {self.resolution!r}")
        if not 0.0 < self.phi <= 1.0:
            raise ValueError("phi must lie in (0, 1]")
        if self.problem == BAR1D and not 0.0 <= self.damaged_length < 100.0:
            raise ValueError("damaged length must be shorter than the bar")
        if self.load is not None and self.load <= 0.0:
            raise ValueError("load must be positive")

    @property
    def target_load(self) -> float:
        return DEFAULT_LOAD[self.problem] if self.load is None else self.load


def gen_benchmark(spec: BenchmarkSpec):
    """Build the mesh, boundary conditions and full-load pattern.

    Returns ``(mesh, bc_spec, pattern)`` where ``pattern`` is the
    prescribed-displacement target vector at load fraction 1.
    """
    if spec.problem == BAR1D:
        mesh, bc = _bar1d(spec)
    else:
        laws = _2D_LAWS[spec.problem]
        if spec.law not in laws:
            raise ValueError(
                f"{spec.problem} supports laws {laws}, got {spec.law!r}"
            )
        if spec.problem != SSNT and spec.resolution == FINE:
            raise ValueError(f"{spec.problem} has a single mesh resolution")
        builder = {SNT: _snt, SSNT: _ssnt, TNT: _tnt, SNS: _sns}[spec.problem]
        mesh, bc = builder(spec)
    _check_no_orphans(mesh)
    from .mesh import prescribed_pattern

    return mesh, bc, prescribed_pattern(mesh, bc)


def stiffness_scale(mesh: Mesh, spec: BenchmarkSpec) -> np.ndarray:
    """Per-element Young's modulus factor from the region tags."""
    scale = np.ones(mesh.n_elements)
    scale[mesh.element_tags == "weakened"] = spec.phi
    scale[mesh.element_tags == "notch"] = NOTCH_SOFT_SCALE
    return scale


def _check_no_orphans(mesh: Mesh) -> None:
    used = np.zeros(mesh.n_nodes, dtype=bool)
    used[mesh.elements.ravel()] = True
    if not used.all():
        raise MeshError(f"{(~used).sum()} orphan nodes after notch removal")


# ---------------------------------------------------------------------------
# 1D bar
# ---------------------------------------------------------------------------

def _bar1d(spec: BenchmarkSpec):
    length = 100.0
    if spec.resolution == COARSE:
        n_el = 51
    else:
        n_el = 151 if spec.law == "nonlocal" else 101
    nodes = np.linspace(0.0, length, n_el + 1).reshape(-1, 1)
    elements = np.column_stack([np.arange(n_el), np.arange(1, n_el + 1)])
    tags = np.full(n_el, "", dtype="U16")
    if spec.damaged_length > 0.0:
        # Realize the damaged length as the round(DL/h) elements nearest
        # the bar center, so the weakened span stays within half an
        # element of DL on every mesh (the band realization, not the
        # regularization, otherwise dominates mesh-resolution studies).
        h = length / n_el
        n_weak = max(1, round(spec.damaged_length / h))
        centroids = 0.5 * (nodes[elements[:, 0], 0] + nodes[elements[:, 1], 0])
        order = np.lexsort((np.arange(n_el), np.abs(centroids - 0.5 * length)))
        tags[np.sort(order[:n_weak])] = "weakened"
    mesh = Mesh(
        dim=1,
        nodes=nodes,
        elements=elements,
        boundary_sets={"left": np.array([0]), "right": np.array([n_el])},
        element_tags=tags,
    )
    bc = BCSpec((("left", 0, 0.0), ("right", 0, spec.target_load)))
    return mesh, bc


# ---------------------------------------------------------------------------
# Graded tensor grids
# ---------------------------------------------------------------------------

def graded_axis(total, fine_lo, fine_hi, h_fine, h_coarse, growth=1.15):
    """Axis coordinates: uniform cells inside the band, geometric outside.

    Outside cell sizes grow from ``h_fine`` by ``growth`` up to
    ``h_coarse`` and are then rescaled so the axis closes exactly at 0
    and ``total``.
    """
    if not 0.0 <= fine_lo < fine_hi <= total:
        raise ValueError("fine band must lie inside the axis")
    n_fine = max(1, round((fine_hi - fine_lo) / h_fine))

    def side_sizes(span):
        if span <= 1e-12:
            return []
        sizes, h = [], h_fine
        while sum(sizes) < span:
            h = min(h * growth, h_coarse)
            sizes.append(h)
        f = span / sum(sizes)
        return [s * f for s in sizes]

    left = side_sizes(fine_lo)
    right = side_sizes(total - fine_hi)
    coords = [0.0]
    for s in reversed(left):
        coords.append(coords[-1] + s)
    band = np.linspace(fine_lo, fine_hi, n_fine + 1)
    coords = np.concatenate([np.array(coords[:-1]), band])
    tail = [coords[-1]]
    for s in right:
        tail.append(tail[-1] + s)
    coords = np.concatenate([coords, np.array(tail[1:])])
    coords[-1] = total
    return coords


def _tensor_mesh(xs, ys, remove_mask_fn=None, tag_fn=None):
    """Structured Quad4 mesh from axis coordinates.

    ``remove_mask_fn(cx, cy, x0, x1, y0, y1)`` marks elements to drop;
    ``tag_fn`` assigns region tags from the same cell geometry.
    """
    nx, ny = len(xs) - 1, len(ys) - 1
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    quads, tags = [], []
    for j in range(ny):
        for i in range(nx):
            x0, x1 = xs[i], xs[i + 1]
            y0, y1 = ys[j], ys[j + 1]
            cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
            if remove_mask_fn is not None and remove_mask_fn(cx, cy, x0, x1, y0, y1):
                continue
            quads.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1), nid(i, j + 1)])
            tags.append(tag_fn(cx, cy, x0, x1, y0, y1) if tag_fn else "")
    elements = np.array(quads, dtype=np.int64)
    used = np.zeros(len(nodes), dtype=bool)
    used[elements.ravel()] = True
    remap = -np.ones(len(nodes), dtype=np.int64)
    remap[used] = np.arange(used.sum())
    elements = remap[elements]
    nodes = nodes[used]

    lx, ly = xs[-1], ys[-1]
    tol = 1e-9
    sets = {
        "left": np.flatnonzero(np.abs(nodes[:, 0]) < tol),
        "right": np.flatnonzero(np.abs(nodes[:, 0] - lx) < tol),
        "bottom": np.flatnonzero(np.abs(nodes[:, 1]) < tol),
        "top": np.flatnonzero(np.abs(nodes[:, 1] - ly) < tol),
    }
    corners = {
        "bottom_left": (0.0, 0.0),
        "bottom_right": (lx, 0.0),
        "top_left": (0.0, ly),
        "top_right": (lx, ly),
    }
    for name, (cx_, cy_) in corners.items():
        idx = np.flatnonzero(
            (np.abs(nodes[:, 0] - cx_) < tol) & (np.abs(nodes[:, 1] - cy_) < tol)
        )
        sets[name] = idx
    return Mesh(
        dim=2,
        nodes=nodes,
        elements=elements,
        boundary_sets=sets,
        element_tags=np.array(tags, dtype="U16"),
    )


def _band_row(ys, center):
    """Index of the cell row whose midpoint is closest to ``center``."""
    mids = 0.5 * (ys[:-1] + ys[1:])
    return int(np.argmin(np.abs(mids - center)))


def _snt(spec: BenchmarkSpec):
    # 120 x 100 mm, 5 mm mid-left notch, refined 0.7 mm band along the
    # horizontal damage path.
    xs = graded_axis(120.0, 0.0, 10.0, 0.7, 3.1, growth=1.075)
    band = 11 * 0.7
    ys = graded_axis(100.0, 50.0 - band / 2, 50.0 + band / 2, 0.7, 4.8, growth=1.14)
    row = _band_row(ys, 50.0)
    y0n, y1n = ys[row], ys[row + 1]

    def remove(cx, cy, x0, x1, y0, y1):
        return x1 <= 5.0 + 1e-9 and abs(y0 - y0n) < 1e-12 and abs(y1 - y1n) < 1e-12

    mesh = _tensor_mesh(xs, ys, remove_mask_fn=remove)
    load = spec.target_load
    bc = BCSpec(
        (
            ("top", 1, load),
            ("bottom", 1, -load),
            ("top_right", 0, 0.0),
            ("bottom_right", 0, 0.0),
        )
    )
    return mesh, bc


def _ssnt(spec: BenchmarkSpec):
    # 100 x 100 mm structured grid (2500 or 6400 elements).  The edge
    # notch to half width is a soft band so the published element and
    # node counts hold exactly.
    n = 50 if spec.resolution == COARSE else 80
    xs = np.linspace(0.0, 100.0, n + 1)
    ys = np.linspace(0.0, 100.0, n + 1)
    row = _band_row(ys, 50.0 - 1e-9)  # row just below the mid line

    def tag(cx, cy, x0, x1, y0, y1):
        in_row = abs(0.5 * (y0 + y1) - 0.5 * (ys[row] + ys[row + 1])) < 1e-12
        return "notch" if in_row and x1 <= 50.0 + 1e-9 else ""

    mesh = _tensor_mesh(xs, ys, tag_fn=tag)
    bc = BCSpec(
        (
            ("bottom", 1, 0.0),
            ("bottom_left", 0, 0.0),
            ("top", 1, spec.target_load),
        )
    )
    return mesh, bc


def _tnt(spec: BenchmarkSpec):
    # 100 x 100 mm, two opposing 25 mm edge notches at mid height.
    xs = graded_axis(100.0, 20.0, 80.0, 1.45, 3.2, growth=1.25)
    band = 11 * 0.7
    ys = graded_axis(100.0, 50.0 - band / 2, 50.0 + band / 2, 0.7, 5.0, growth=1.17)
    row = _band_row(ys, 50.0)
    y0n, y1n = ys[row], ys[row + 1]

    def remove(cx, cy, x0, x1, y0, y1):
        if not (abs(y0 - y0n) < 1e-12 and abs(y1 - y1n) < 1e-12):
            return False
        return x1 <= 25.0 + 1e-9 or x0 >= 75.0 - 1e-9

    mesh = _tensor_mesh(xs, ys, remove_mask_fn=remove)
    bc = BCSpec(
        (
            ("bottom", 1, 0.0),
            ("bottom_left", 0, 0.0),
            ("top", 1, spec.target_load),
        )
    )
    return mesh, bc


def _sns(spec: BenchmarkSpec):
    # 100 x 100 mm shear specimen: mid-height notch to half width, shear
    # on the top surface, crack curving toward the bottom right.
    xs = graded_axis(100.0, 48.0, 86.0, 0.75, 4.0, growth=1.3)
    ys = graded_axis(100.0, 27.0, 52.85, 0.75, 4.2, growth=1.3)
    row = _band_row(ys, 50.0)
    y0n, y1n = ys[row], ys[row + 1]

    def remove(cx, cy, x0, x1, y0, y1):
        return x1 <= 50.0 + 1e-9 and abs(y0 - y0n) < 1e-12 and abs(y1 - y1n) < 1e-12

    mesh = _tensor_mesh(xs, ys, remove_mask_fn=remove)
    load = spec.target_load
    bc = BCSpec(
        (
            ("bottom", 0, 0.0),
            ("bottom", 1, 0.0),
            ("top", 0, load),
            ("top", 1, 0.0),
        )
    )
    return mesh, bc
