import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse.linalg as spla
from hypothesis import given
from hypothesis import strategies as st

from msfem_transport.assembly import (
    asymmetric_limit_operators,
    assemble_heat,
    assemble_spatial,
    compute_limit_operator,
)
from msfem_transport.errors import AssemblyError, ConfigError
from msfem_transport.harness.metrics import fit_rate
from msfem_transport.media import builtin_media, constant_media
from msfem_transport.mesh import build_nested_mesh
from msfem_transport.msfem import build_global_basis, fine_cell_media

from .oracles import brute_force_matrices_1d


def _system(dim, n, r, media=None, mode="multiscale"):
    mesh = build_nested_mesh(dim, n, r)
    basis = build_global_basis(mesh, media, mode)
    return mesh, assemble_spatial(mesh, basis, media if media is not None else 1.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_unit_media_collapses_weights(dim):
    _, s = _system(dim, 4, 4, constant_media(1.0, dim))
    assert abs(s.weighted_mass - s.mass).max() <= 1e-12
    assert abs(s.inverse_weighted_mass - s.mass).max() <= 1e-12
    for xi, sx in zip(s.advection, s.weighted_advection):
        assert abs(xi - sx).max() <= 1e-12


def test_1d_affine_mass_trapezoidal_closed_form():
    # fine-grid trapezoidal rule on hats: 2H/3 and H/6 up to an O(1/r^2) term
    for r in (2, 4, 8, 16):
        mesh, s = _system(1, 8, r, mode="affine")
        phi, H = s.mass.toarray(), mesh.H
        assert phi[3, 3] == pytest.approx(H * (2 / 3 + 1 / (3 * r * r)), rel=1e-13)
        assert phi[3, 4] == pytest.approx(H * (1 / 6 - 1 / (6 * r * r)), rel=1e-13)
        assert phi[0, 7] == pytest.approx(H * (1 / 6 - 1 / (6 * r * r)), rel=1e-13)
        assert phi[0, 3] == 0.0


def test_1d_affine_advection_exact():
    _, s = _system(1, 6, 4, mode="affine")
    xi = s.advection[0].toarray()
    assert np.max(np.abs(np.diag(xi))) <= 1e-15
    assert np.array_equal(xi, -xi.T)
    assert xi[2, 3] == pytest.approx(0.5, abs=1e-14) and xi[3, 2] == pytest.approx(-0.5, abs=1e-14)
    assert xi[5, 0] == pytest.approx(0.5, abs=1e-14)  # periodic wrap


def test_1d_affine_stiffness_exact():
    mesh, s = _system(1, 6, 4, mode="affine")
    A = s.stiffness.toarray()
    assert np.allclose(np.diag(A), -2 / mesh.H, atol=1e-12)
    assert A[2, 3] == pytest.approx(1 / mesh.H) and A[0, 5] == pytest.approx(1 / mesh.H)


@given(st.floats(0.1, 10.0))
def test_stiffness_linear_in_coefficient(c):
    mesh = build_nested_mesh(2, 3, 4)
    basis = build_global_basis(mesh, mode="affine")
    a1 = assemble_heat(mesh, basis, 1.0).toarray()
    ac = assemble_heat(mesh, basis, c).toarray()
    assert np.allclose(ac, c * a1, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("dim,name", [(1, "sine10"), (2, "aniso2d"), (2, "benchmark2d")])
def test_structural_invariants(dim, name):
    mesh, s = _system(dim, 5, 6, builtin_media(name))
    ones = np.ones(mesh.n_nodes)
    for m in (s.mass, s.weighted_mass, s.inverse_weighted_mass):
        d = m.toarray()
        assert np.max(np.abs(d - d.T)) <= 1e-10
        sla.cholesky(d)  # positive definite
    A = s.stiffness.toarray()
    assert np.max(np.abs(A - A.T)) <= 1e-10
    assert np.max(np.linalg.eigvalsh(A)) <= 1e-10
    assert np.max(np.abs(A @ ones)) <= 1e-10
    for m in s.advection + s.weighted_advection:
        assert np.max(np.abs(m @ ones)) <= 1e-10
    assert np.max(np.abs(s.limit_operator @ ones)) <= 1e-10
    # sparsity limited to overlapping patches
    for m in (s.mass, s.stiffness) + s.advection:
        assert np.max(np.diff(m.tocsr().indptr)) <= 3**dim


def test_brute_force_oracle_1d():
    media = builtin_media("sine10")
    mesh = build_nested_mesh(1, 4, 8)
    basis = build_global_basis(mesh, media)
    s = assemble_spatial(mesh, basis, media)
    ref = brute_force_matrices_1d(mesh, basis, fine_cell_media(mesh, media))
    assert np.allclose(s.mass.toarray(), ref["mass"], atol=1e-14)
    assert np.allclose(s.weighted_mass.toarray(), ref["wmass"], atol=1e-14)
    assert np.allclose(s.advection[0].toarray(), ref["adv"], atol=1e-13)
    assert np.allclose(s.weighted_advection[0].toarray(), ref["wadv"], atol=1e-13)
    assert np.allclose(s.stiffness.toarray(), ref["stiff"], atol=1e-11)


def test_frozen_small_system():
    media = builtin_media("sine10")
    mesh = build_nested_mesh(1, 4, 8)
    s = assemble_spatial(mesh, build_global_basis(mesh, media), media)
    assert np.allclose(s.mass.toarray()[0], [0.3459587072987399, 0.05718380002824192, 0.0, 0.09685749267301838],
                       rtol=1e-12, atol=1e-15)
    assert np.allclose(s.limit_operator[0], [-0.6803931643670134, -0.04532410619259156,
                                             0.6803931643670116, 0.04532410619259249], rtol=1e-10)


def test_deterministic_assembly():
    media = builtin_media("benchmark2d")
    mesh = build_nested_mesh(2, 4, 4)
    a = assemble_spatial(mesh, build_global_basis(mesh, media), media).matrices()
    b = assemble_spatial(mesh, build_global_basis(mesh, media, workers=2), media).matrices()
    for k in a:
        assert np.array_equal(a[k], b[k]), k


def test_limit_operator_definition():
    media = builtin_media("aniso2d")
    mesh, s = _system(2, 4, 4, media)
    phi = s.mass.toarray()
    expect = sum(xi.toarray() @ np.linalg.solve(phi, sx.toarray())
                 for xi, sx in zip(s.advection, s.weighted_advection))
    assert np.allclose(s.limit_operator, expect, atol=1e-10)
    w = compute_limit_operator(s, (0.5, 0.25))
    expect_w = sum(c * xi.toarray() @ np.linalg.solve(phi, sx.toarray())
                   for c, xi, sx in zip((0.5, 0.25), s.advection, s.weighted_advection))
    assert np.allclose(w, expect_w, atol=1e-10)
    with pytest.raises(ConfigError):
        compute_limit_operator(s, (1.0,))


def test_asymmetric_limit_operator_is_not_symmetric():
    mesh, s = _system(1, 8, 8, builtin_media("sine10"))
    lhs, op = asymmetric_limit_operators(s)
    assert np.max(np.abs(op - op.T)) > 1e-3
    assert np.max(np.abs(op @ np.ones(mesh.n_nodes))) <= 1e-10


def _apply(mass, op, f):
    return spla.spsolve(mass.tocsc(), op @ f)


def test_limit_operator_approximates_laplacian():
    errs, Hs = [], []
    for n in (32, 64, 128):  # H = 1/16, 1/32, 1/64
        mesh, s = _system(1, n, 4, mode="affine")
        x = mesh.coarse_coords[:, 0]
        errs.append(np.max(np.abs(_apply(s.mass, s.limit_operator, np.sin(np.pi * x)) + np.pi**2 * np.sin(np.pi * x))))
        Hs.append(mesh.H)
    slope, _ = fit_rate(zip(Hs, errs))
    assert abs(slope - 2.0) <= 0.2


def test_homogenized_limit_operator_cos_delta():
    from msfem_transport.msfem import homogenized_coefficient

    a_hom = homogenized_coefficient(builtin_media("cos_delta", 1 / 8)).a_hom
    mesh = build_nested_mesh(1, 64, 4)
    s = assemble_spatial(mesh, build_global_basis(mesh, mode="affine"), a_hom)
    x = mesh.coarse_coords[:, 0]
    g = _apply(s.mass, s.limit_operator, np.sin(np.pi * x))
    assert np.max(np.abs(g + 0.25 * np.pi**2 * np.sin(np.pi * x))) <= 2e-3


@pytest.mark.parametrize("dim", [1, 2])
def test_derivative_surrogate_rate(dim):
    # Phi^-1 Xi approximates +d/dx with the derivative on the second argument
    errs, Hs = [], []
    for n in ((32, 64, 128) if dim == 1 else (16, 32, 64)):
        mesh, s = _system(dim, n, 2, mode="affine")
        x = mesh.coarse_coords
        f = np.prod(np.sin(np.pi * x), axis=1)
        df = np.pi * np.cos(np.pi * x[:, 0]) * (np.sin(np.pi * x[:, 1]) if dim == 2 else 1.0)
        errs.append(np.max(np.abs(_apply(s.mass, s.advection[0], f) - df)))
        Hs.append(mesh.H)
    slope, _ = fit_rate(zip(Hs, errs))
    assert abs(slope - 2.0) <= 0.2


def test_matrix_limit_in_delta():
    mesh = build_nested_mesh(1, 64, 40)
    hom = assemble_spatial(mesh, build_global_basis(mesh, mode="affine"), 0.25)
    x = mesh.coarse_coords[:, 0]
    deltas = [1 / 8, 1 / 24, 1 / 40, 1 / 56]
    entry, action = [], []
    for d in deltas:
        media = builtin_media("cos_delta", d)
        s = assemble_spatial(mesh, build_global_basis(mesh, media), media)
        diff = s.limit_operator - hom.limit_operator
        entry.append(np.max(np.abs(diff)))
        action.append(np.max(np.abs(diff @ np.cos(np.pi * x))))
    assert all(b < a for a, b in zip(entry, entry[1:]))
    # delta = 1/8 > H is pre-asymptotic for the entrywise difference
    assert abs(fit_rate(zip(deltas[1:], entry[1:]))[0] - 1.0) <= 0.3
    assert abs(fit_rate(zip(deltas, action))[0] - 1.0) <= 0.3


def test_tensor_coefficient():
    mesh = build_nested_mesh(2, 4, 2)
    basis = build_global_basis(mesh, mode="affine")
    a = np.array([[2.0, 0.3], [0.3, 1.0]])
    s = assemble_spatial(mesh, basis, a)
    assert s.weighted_mass is None
    xi = [m.toarray() for m in s.advection]
    assert np.allclose(s.weighted_advection[0].toarray(), 2.0 * xi[0] + 0.3 * xi[1])
    A = s.stiffness.toarray()
    assert np.allclose(A, A.T) and np.max(np.abs(A @ np.ones(16))) <= 1e-12


def test_bad_coefficients():
    mesh = build_nested_mesh(2, 4, 2)
    basis = build_global_basis(mesh, mode="affine")
    with pytest.raises(AssemblyError):
        assemble_spatial(mesh, basis, np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(AssemblyError):
        assemble_spatial(mesh, basis, np.eye(3))
    with pytest.raises(AssemblyError):
        assemble_spatial(mesh, basis, builtin_media("sine10"))
    other = build_global_basis(build_nested_mesh(2, 3, 2), mode="affine")
    with pytest.raises(AssemblyError):
        assemble_spatial(mesh, other, 1.0)
