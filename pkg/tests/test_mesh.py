import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from msfem_transport.errors import ConfigError
from msfem_transport.mesh import build_nested_mesh, patch_of


def test_1d_sizes():
    mesh = build_nested_mesh(1, 4, 4)
    assert mesh.n_nodes == 4 and mesh.n_fine == 16
    assert mesh.H == 0.5 and mesh.h == 0.125


def test_2d_sizes():
    mesh = build_nested_mesh(2, 2, 2)
    assert mesh.n_nodes == 4
    assert mesh.n_fine**2 == 16


@pytest.mark.parametrize("args", [(3, 4, 2), (1, 1, 2), (1, 4, 0)])
def test_invalid_meshes(args):
    with pytest.raises(ConfigError):
        build_nested_mesh(*args)


@given(st.integers(1, 2), st.integers(2, 7), st.integers(1, 5))
def test_nestedness(dim, n, r):
    mesh = build_nested_mesh(dim, n, r)
    fine = mesh.fine_coords[mesh.coarse_to_fine]
    assert np.array_equal(fine, mesh.coarse_coords)


@given(st.integers(1, 2), st.integers(2, 7))
def test_patch_counts(dim, n):
    mesh = build_nested_mesh(dim, n, 2)
    counts = np.zeros(mesh.n_elements, dtype=int)
    for node in range(mesh.n_nodes):
        patch = patch_of(mesh, node)
        assert len(patch) == 2**dim
        counts[patch] += 1
    assert np.all(counts == 2**dim)


def test_periodic_wrap_patch():
    mesh = build_nested_mesh(1, 5, 2)
    assert sorted(patch_of(mesh, 0)) == [0, 4]


def test_patch_index_error():
    mesh = build_nested_mesh(1, 5, 2)
    with pytest.raises(IndexError):
        patch_of(mesh, 5)
    with pytest.raises(IndexError):
        patch_of(mesh, -1)


@given(st.integers(1, 2), st.integers(2, 9), st.integers(1, 4))
def test_measure(dim, n, r):
    mesh = build_nested_mesh(dim, n, r)
    assert mesh.n_elements * mesh.element_measure == pytest.approx(mesh.measure, abs=1e-12)


def test_element_subgrid_reproduces_corners():
    mesh = build_nested_mesh(2, 3, 4)
    for e in range(mesh.n_elements):
        axes = mesh.element_fine_axes(e)
        origin = mesh.element_origin(e)
        for a, o in zip(axes, origin):
            assert a[0] == o and a[-1] == pytest.approx(o + mesh.H, abs=1e-15)


def test_element_corner_order():
    mesh = build_nested_mesh(2, 3, 2)
    # element 0 spans nodes (0,0) (1,0) (0,1) (1,1) with x offset varying fastest
    c = mesh.coarse_coords[mesh.elements[0]]
    assert np.allclose(c, [[-1, -1], [-1 + mesh.H, -1], [-1, -1 + mesh.H], [-1 + mesh.H, -1 + mesh.H]])


def test_shared_edges_in_2d():
    mesh = build_nested_mesh(2, 4, 2)
    els = [set(e) for e in mesh.elements]
    for i in range(len(els)):
        for j in range(i + 1, len(els)):
            assert len(els[i] & els[j]) in (0, 1, 2)
