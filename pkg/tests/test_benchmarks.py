import numpy as np
import pytest

from ualfem.benchmarks import (
    BenchmarkSpec,
    gen_benchmark,
    graded_axis,
    stiffness_scale,
)
from ualfem.elements import precompute
from ualfem.mesh import build_dof_map

ALL_CASES = [
    ("bar1d", "coarse", "local"),
    ("bar1d", "fine", "local"),
    ("bar1d", "coarse", "nonlocal"),
    ("bar1d", "fine", "nonlocal"),
    ("snt", "coarse", "local"),
    ("ssnt", "coarse", "local"),
    ("ssnt", "fine", "local"),
    ("ssnt", "coarse", "nonlocal"),
    ("tnt", "coarse", "local"),
    ("sns", "coarse", "nonlocal"),
]


@pytest.mark.parametrize("problem,resolution,law", ALL_CASES)
def test_generated_meshes_satisfy_invariants(problem, resolution, law):
    spec = BenchmarkSpec(problem=problem, resolution=resolution, law=law)
    mesh, bc, pattern = gen_benchmark(spec)
    data = precompute(mesh)  # raises on non-positive Jacobians
    assert np.all(data.jxw > 0)
    assert mesh.elements.min() >= 0
    assert mesh.elements.max() < mesh.n_nodes
    for name, _comp, _val in bc.constraints:
        assert mesh.boundary_sets[name].size > 0
    dm = build_dof_map(mesh, bc, law)
    assert len(dm.prescribed) + len(dm.free) == mesh.dim * mesh.n_nodes
    assert pattern.shape == (mesh.dim * mesh.n_nodes,)
    assert np.count_nonzero(pattern) > 0


def test_bar_coarse_counts_and_weak_band():
    mesh, bc, _ = gen_benchmark(BenchmarkSpec(problem="bar1d", law="local"))
    assert mesh.n_elements == 51
    assert mesh.n_nodes == 52
    # nearest-n rule: round(4 mm / 1.96 mm) = 2 elements at the bar center,
    # realized span within half an element of the requested 4 mm
    weak = np.flatnonzero(mesh.element_tags == "weakened")
    assert len(weak) == 2
    x0 = mesh.nodes[mesh.elements[weak[0], 0], 0]
    x1 = mesh.nodes[mesh.elements[weak[-1], 1], 0]
    assert x1 - x0 == pytest.approx(4.0, abs=100.0 / 51 / 2)
    assert abs(0.5 * (x0 + x1) - 50.0) < 100.0 / 51


def test_bar_fine_resolutions_differ_by_law():
    local, _, _ = gen_benchmark(BenchmarkSpec(problem="bar1d", resolution="fine", law="local"))
    nonlocal_, _, _ = gen_benchmark(
        BenchmarkSpec(problem="bar1d", resolution="fine", law="nonlocal")
    )
    assert local.n_elements == 101
    assert nonlocal_.n_elements == 151


def test_bar_zero_damaged_length_untagged():
    mesh, _, _ = gen_benchmark(
        BenchmarkSpec(problem="bar1d", law="local", damaged_length=0.0)
    )
    assert not np.any(mesh.element_tags == "weakened")


def test_ssnt_exact_counts():
    mesh, _, _ = gen_benchmark(BenchmarkSpec(problem="ssnt", law="local"))
    assert mesh.n_elements == 2500
    assert mesh.n_nodes == 2601
    # half-width soft band at mid height
    notch = mesh.element_tags == "notch"
    assert notch.sum() == 25
    cx = mesh.nodes[mesh.elements[notch]][:, :, 0].mean(axis=1)
    cy = mesh.nodes[mesh.elements[notch]][:, :, 1].mean(axis=1)
    assert cx.max() < 50.0
    assert np.all(np.abs(cy - 49.0) < 1e-9)


def test_ssnt_fine_counts():
    mesh, _, _ = gen_benchmark(BenchmarkSpec(problem="ssnt", resolution="fine", law="local"))
    assert mesh.n_elements == 6400
    assert mesh.n_nodes == 6561


@pytest.mark.parametrize("problem,target", [("snt", 2703), ("tnt", 2347), ("sns", 4129)])
def test_unstructured_counts_within_window(problem, target):
    law = "nonlocal" if problem == "sns" else "local"
    mesh, _, _ = gen_benchmark(BenchmarkSpec(problem=problem, law=law))
    assert 0.9 * target <= mesh.n_elements <= 1.1 * target


def test_snt_notch_removed_at_mid_left():
    mesh, _, _ = gen_benchmark(BenchmarkSpec(problem="snt", law="local"))
    # no element centroid inside the notch opening
    cx = mesh.nodes[mesh.elements][:, :, 0].mean(axis=1)
    cy = mesh.nodes[mesh.elements][:, :, 1].mean(axis=1)
    inside = (cx < 4.5) & (np.abs(cy - 50.0) < 0.3)
    assert not inside.any()
    # band resolution ~0.7 mm in y around the crack path
    heights = (
        mesh.nodes[mesh.elements][:, 3, 1] - mesh.nodes[mesh.elements][:, 0, 1]
    )
    band = np.abs(cy - 50.0) < 3.0
    assert np.allclose(heights[band], 0.7, atol=1e-9)


def test_tnt_two_opposing_notches():
    mesh, _, _ = gen_benchmark(BenchmarkSpec(problem="tnt", law="local"))
    cx = mesh.nodes[mesh.elements][:, :, 0].mean(axis=1)
    cy = mesh.nodes[mesh.elements][:, :, 1].mean(axis=1)
    mid_row = np.abs(cy - 50.0) < 0.3
    assert not ((cx < 20.0) & mid_row).any()
    assert not ((cx > 80.0) & mid_row).any()
    assert ((cx > 40.0) & (cx < 60.0) & mid_row).any()  # ligament kept


def test_sns_notch_and_shear_bcs():
    mesh, bc, pattern = gen_benchmark(BenchmarkSpec(problem="sns", law="nonlocal"))
    cx = mesh.nodes[mesh.elements][:, :, 0].mean(axis=1)
    cy = mesh.nodes[mesh.elements][:, :, 1].mean(axis=1)
    assert not ((cx < 45.0) & (np.abs(cy - 50.0) < 0.3)).any()
    # shear: x-displacement prescribed on top, both components on bottom
    comps = {(name, comp) for name, comp, _ in bc.constraints}
    assert ("top", 0) in comps and ("top", 1) in comps
    assert ("bottom", 0) in comps and ("bottom", 1) in comps
    top = mesh.boundary_sets["top"]
    assert np.allclose(pattern[top * 2], 0.019)


def test_stiffness_scale_from_tags():
    spec = BenchmarkSpec(problem="bar1d", law="local", phi=0.6)
    mesh, _, _ = gen_benchmark(spec)
    scale = stiffness_scale(mesh, spec)
    assert set(np.unique(scale)) == {0.6, 1.0}
    spec2 = BenchmarkSpec(problem="ssnt", law="local")
    mesh2, _, _ = gen_benchmark(spec2)
    scale2 = stiffness_scale(mesh2, spec2)
    assert scale2.min() == pytest.approx(1e-3)


def test_unsupported_combinations_rejected():
    with pytest.raises(ValueError, match="supports laws"):
        gen_benchmark(BenchmarkSpec(problem="snt", law="nonlocal"))
    with pytest.raises(ValueError, match="supports laws"):
        gen_benchmark(BenchmarkSpec(problem="sns", law="local"))
    with pytest.raises(ValueError, match="single mesh resolution"):
        gen_benchmark(BenchmarkSpec(problem="tnt", resolution="fine", law="local"))


def test_graded_axis_closes_exactly():
    xs = graded_axis(120.0, 0.0, 10.0, 0.7, 3.0, growth=1.1)
    assert xs[0] == 0.0
    assert xs[-1] == 120.0
    assert np.all(np.diff(xs) > 0)
    band = (xs >= -1e-9) & (xs <= 10.0 + 1e-9)
    # band cells are uniform and within rounding of the requested size
    sizes = np.diff(xs[band])
    assert np.allclose(sizes, sizes[0], atol=1e-12)
    assert sizes[0] == pytest.approx(0.7, abs=0.05)
