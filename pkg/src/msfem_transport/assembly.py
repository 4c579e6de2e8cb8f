"""Spatial Galerkin matrices on the coarse basis.

Integrals are evaluated on the fine grid with the media frozen per fine
cell.  Mass-type products use the composite trapezoidal rule (average of the
four, or two, cell-corner values); products with a gradient use the
cell-averaged gradient of the (bi)linear fine representation.

Matrix names follow the role they play in the transport scheme:

=========================  =======================================
``mass``                   <phi_m, phi_n>
``weighted_mass``          <a phi_m, phi_n>
``inverse_weighted_mass``  <a^-1 phi_m, phi_n>
``advection[i]``           <phi_m, d_i phi_n>
``weighted_advection[i]``  <phi_m, (a grad phi_n)_i>
``stiffness``              -<a grad phi_m, grad phi_n>
``limit_operator``         sum_i advection[i] mass^-1 weighted_advection[i]
=========================  =======================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, ConfigError
from .media import MediaSpec
from .mesh import NestedMesh, cell_connectivity
from .msfem import BasisSet, fine_cell_media, q1_gradient_integrals, q1_gradient_matrices


@dataclass(frozen=True, eq=False)
class SpatialSystem:
    mesh: NestedMesh
    mode: str
    mass: sp.csr_matrix
    weighted_mass: sp.csr_matrix | None
    inverse_weighted_mass: sp.csr_matrix | None
    advection: tuple[sp.csr_matrix, ...]
    weighted_advection: tuple[sp.csr_matrix, ...]
    stiffness: sp.csr_matrix
    limit_operator: np.ndarray
    coefficient: object = None

    @property
    def size(self) -> int:
        return self.mass.shape[0]

    @property
    def dimension(self) -> int:
        return len(self.advection)

    def matrices(self) -> dict[str, np.ndarray]:
        """Dense copies of every assembled matrix, keyed by name."""
        out = {"mass": self.mass.toarray(), "stiffness": self.stiffness.toarray(),
               "limit_operator": np.asarray(self.limit_operator)}
        if self.weighted_mass is not None:
            out["weighted_mass"] = self.weighted_mass.toarray()
            out["inverse_weighted_mass"] = self.inverse_weighted_mass.toarray()
        for axis, (xi, sx) in zip("xy", zip(self.advection, self.weighted_advection)):
            out[f"advection_{axis}"] = xi.toarray()
            out[f"weighted_advection_{axis}"] = sx.toarray()
        return out


def _element_blocks(mesh: NestedMesh, cell_values: np.ndarray) -> np.ndarray:
    """Reshape a fine-cell field into (n_el, r^d) blocks, element by element."""
    n, r = mesh.n_coarse, mesh.ratio
    if mesh.dimension == 1:
        return cell_values.reshape(n, r)
    return cell_values.reshape(n, r, n, r).transpose(0, 2, 1, 3).reshape(n * n, r * r)


def _scatter(mesh: NestedMesh, local: np.ndarray) -> sp.csr_matrix:
    conn = mesh.elements
    nb = conn.shape[1]
    rows = np.repeat(conn, nb, axis=1).ravel()
    cols = np.tile(conn, (1, nb)).ravel()
    M = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(M, M)).tocsr()


def _coefficient(mesh: NestedMesh, media):
    """(per-cell scalar field or None, constant tensor or None)."""
    d = mesh.dimension
    if isinstance(media, MediaSpec):
        return _element_blocks(mesh, fine_cell_media(mesh, media)), None
    tensor = np.atleast_2d(np.asarray(media, dtype=float))
    if tensor.shape == (1, 1):
        tensor = tensor[0, 0] * np.eye(d)
    if tensor.shape != (d, d):
        raise AssemblyError(f"coefficient tensor of shape {tensor.shape} for a {d}-d mesh")
    if not np.allclose(tensor, tensor.T, atol=1e-10) or np.linalg.eigvalsh(tensor).min() <= 0:
        raise AssemblyError("coefficient tensor must be symmetric positive definite")
    return None, tensor


def assemble_spatial(mesh: NestedMesh, basis: BasisSet, media) -> SpatialSystem:
    """Assemble every spatial matrix for ``basis`` with coefficient ``media``.

    ``media`` is either a :class:`MediaSpec` or a constant coefficient
    (scalar or symmetric d x d tensor, e.g. a homogenised coefficient).
    """
    if basis.mesh != mesh:
        raise AssemblyError("basis was built on a different mesh")
    if isinstance(media, MediaSpec) and media.dimension != mesh.dimension:
        raise AssemblyError("media and mesh dimensions differ")
    d, r = mesh.dimension, mesh.ratio
    spacing = (mesh.h,) * d
    vol = mesh.h**d
    conn = cell_connectivity(r, d)
    ncorner = conn.shape[1]

    cells, tensor = _coefficient(mesh, media)
    ones = np.ones((mesh.n_elements, conn.shape[0]))
    a = ones if cells is None else cells

    U = basis.local[:, :, conn]  # (el, basis, cell, corner)
    mean = U.mean(axis=3)
    gint = q1_gradient_integrals(spacing) / vol
    grads = [U @ gint[i] for i in range(d)]  # cell-averaged gradients

    def mass_like(w):
        return _scatter(mesh, vol / ncorner * np.einsum("eacq,ebcq,ec->eab", U, U, w))

    def advect(w, g):
        return _scatter(mesh, vol * np.einsum("eac,ebc,ec->eab", mean, g, w))

    mass = mass_like(ones)
    advection = tuple(advect(ones, g) for g in grads)

    kmats = q1_gradient_matrices(spacing)
    if tensor is None:
        weighted_mass = mass_like(a)
        inverse_weighted_mass = mass_like(1.0 / a)
        weighted_advection = tuple(advect(a, g) for g in grads)
        kloc = kmats.trace(axis1=0, axis2=1)
        stiff = -np.einsum("eacp,pq,ebcq,ec->eab", U, kloc, U, a)
    else:
        iso = np.allclose(tensor, tensor[0, 0] * np.eye(d))
        weighted_mass = tensor[0, 0] * mass if iso else None
        inverse_weighted_mass = mass / tensor[0, 0] if iso else None
        weighted_advection = tuple(
            sum(tensor[i, j] * advection[j] for j in range(d)) for i in range(d)
        )
        kloc = np.einsum("ij,ijab->ab", tensor, kmats)
        stiff = -np.einsum("eacp,pq,ebcq->eab", U, kloc, U)
    stiffness = _scatter(mesh, stiff)

    limit = compute_limit_operator_from(mass, advection, weighted_advection)
    return SpatialSystem(mesh, basis.mode, mass, weighted_mass, inverse_weighted_mass,
                         advection, weighted_advection, stiffness, limit,
                         media if tensor is None else tensor)


def assemble_heat(mesh: NestedMesh, basis: BasisSet, coefficient) -> sp.csr_matrix:
    """Heat stiffness -<a grad phi_m, grad phi_n> for media or a constant tensor."""
    return assemble_spatial(mesh, basis, coefficient).stiffness


def factorize_mass(mass) -> spla.SuperLU:
    try:
        return spla.splu(sp.csc_matrix(mass))
    except RuntimeError as exc:
        raise AssemblyError(f"mass matrix factorisation failed: {exc}") from exc


def compute_limit_operator_from(mass, advection, weighted_advection, weights=None) -> np.ndarray:
    lu = factorize_mass(mass)
    if weights is None:
        weights = (1.0,) * len(advection)
    if len(weights) != len(advection):
        raise ConfigError("one weight per spatial axis is required")
    D = np.zeros(mass.shape)
    for w, xi, sx in zip(weights, advection, weighted_advection):
        D += w * (xi @ lu.solve(sx.toarray()))
    if not np.all(np.isfinite(D)):
        raise AssemblyError("limit operator has non-finite entries")
    return D


def compute_limit_operator(system: SpatialSystem, weights=None) -> np.ndarray:
    """D = sum_i advection_i mass^-1 weighted_advection_i (optionally weighted per axis)."""
    if weights is None:
        return np.array(system.limit_operator)
    return compute_limit_operator_from(system.mass, system.advection,
                                       system.weighted_advection, weights)


def asymmetric_limit_operators(system: SpatialSystem, weights=None):
    """(left mass, operator) of the limit of the asymmetric formulation.

    The even equation keeps the media on its left side, so the limit reads
    weighted_mass (a^{n+1} - a^n) = dt * sum_i w_i Sx_i mass^-1 Sx_i a^{n+1}.
    """
    if system.weighted_mass is None:
        raise AssemblyError("asymmetric limit needs a scalar coefficient")
    op = compute_limit_operator_from(system.mass, system.weighted_advection,
                                     system.weighted_advection, weights)
    return system.weighted_mass, op
