"""Multiscale basis functions and the periodic cell problem.

Fine-scale problems use continuous piecewise (bi)linear elements with the
media frozen at fine-cell centres.  Local basis functions carry the affine
(hat) trace of the coarse element on its boundary.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, ConfigError
from .media import MediaSpec
from .mesh import NestedMesh, cell_connectivity, corner_offsets

MODES = ("multiscale", "affine")


@lru_cache(maxsize=None)
def _reference_q1(dimension: int):
    """Gauss points/weights and shape-function data on the unit cell."""
    g, w = np.polynomial.legendre.leggauss(2)
    g, w = 0.5 * (g + 1), 0.5 * w
    pts = np.array(list(itertools.product(g, repeat=dimension)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=dimension))), axis=1)
    offs = corner_offsets(dimension)
    # values and reference gradients, shape (q, corners) and (q, corners, d)
    lin = np.where(offs[None, :, :] == 1, pts[:, None, :], 1 - pts[:, None, :])
    vals = np.prod(lin, axis=2)
    sign = np.where(offs == 1, 1.0, -1.0)
    grads = np.empty(vals.shape + (dimension,))
    for i in range(dimension):
        others = np.prod(np.delete(lin, i, axis=2), axis=2) if dimension > 1 else 1.0
        grads[..., i] = sign[None, :, i] * others
    return wts, vals, grads


def q1_gradient_matrices(spacing) -> np.ndarray:
    """K[i, j, a, b] = integral over one cell of d_i N_a * d_j N_b."""
    spacing = np.asarray(spacing, dtype=float)
    d = len(spacing)
    wts, _, grads = _reference_q1(d)
    g = grads / spacing  # physical gradients
    vol = np.prod(spacing)
    return vol * np.einsum("q,qai,qbj->ijab", wts, g, g)


def q1_gradient_integrals(spacing) -> np.ndarray:
    """G[i, a] = integral over one cell of d_i N_a."""
    spacing = np.asarray(spacing, dtype=float)
    wts, _, grads = _reference_q1(len(spacing))
    return np.prod(spacing) * np.einsum("q,qai->ia", wts, grads / spacing)


def fine_cell_media(mesh: NestedMesh, media: MediaSpec) -> np.ndarray:
    """Media at the centre of every fine cell, array of shape ``mesh.fine_shape``."""
    if media.dimension != mesh.dimension:
        raise ConfigError(
            f"media is {media.dimension}-d but the mesh is {mesh.dimension}-d"
        )
    centres = mesh.fine_axis(np.arange(mesh.n_fine) + 0.5)
    grids = np.meshgrid(*([centres] * mesh.dimension), indexing="ij")
    values = np.broadcast_to(media(*grids), mesh.fine_shape).copy()
    if not np.all(values > 0):
        raise AssemblyError("media is non-positive on the fine grid")
    return values


def element_cell_values(mesh: NestedMesh, cell_values: np.ndarray, element: int) -> np.ndarray:
    """Per-fine-cell values inside one coarse element, flattened in cell order."""
    r = mesh.ratio
    base = mesh.element_index[element] * r
    sl = tuple(slice(b, b + r) for b in base)
    return cell_values[sl].ravel()


def _stiffness(conn: np.ndarray, n_nodes: int, kloc: np.ndarray, coef: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(conn, conn.shape[1], axis=1).ravel()
    cols = np.tile(conn, (1, conn.shape[1])).ravel()
    data = (coef[:, None, None] * kloc[None]).ravel()
    return sp.coo_matrix((data, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()


def corner_functions(mesh: NestedMesh) -> np.ndarray:
    """Bilinear corner shape functions on the element sub-grid, (2^d, (r+1)^d)."""
    s = np.arange(mesh.ratio + 1) / mesh.ratio
    local = np.array(list(itertools.product(range(mesh.ratio + 1), repeat=mesh.dimension)))
    local = s[local.reshape(-1, mesh.dimension)]
    offs = corner_offsets(mesh.dimension)
    lin = np.where(offs[:, None, :] == 1, local[None], 1 - local[None])
    return np.prod(lin, axis=2)


@lru_cache(maxsize=32)
def _local_layout(ratio: int, dimension: int):
    conn = cell_connectivity(ratio, dimension)
    local = np.array(list(itertools.product(range(ratio + 1), repeat=dimension)))
    local = local.reshape(-1, dimension)
    boundary = np.any((local == 0) | (local == ratio), axis=1)
    return conn, np.flatnonzero(~boundary), np.flatnonzero(boundary)


def _solve_local(mesh: NestedMesh, coef: np.ndarray, traces: np.ndarray) -> np.ndarray:
    conn, interior, boundary = _local_layout(mesh.ratio, mesh.dimension)
    kloc = q1_gradient_matrices((mesh.h,) * mesh.dimension).trace(axis1=0, axis2=1)
    K = _stiffness(conn, (mesh.ratio + 1) ** mesh.dimension, kloc, coef)
    out = traces.copy()
    if len(interior) == 0:
        return out
    K_ii = K[interior][:, interior].tocsc()
    K_ib = K[interior][:, boundary]
    try:
        lu = spla.splu(K_ii)
    except RuntimeError as exc:
        raise AssemblyError(f"singular local cell problem: {exc}") from exc
    rhs = -(K_ib @ traces[:, boundary].T)
    out[:, interior] = lu.solve(np.asarray(rhs)).T
    if not np.all(np.isfinite(out)):
        raise AssemblyError("local basis solve produced non-finite values")
    return out


def solve_local_basis(mesh: NestedMesh, media: MediaSpec, element: int, cell_values=None) -> np.ndarray:
    """The 2^d a-harmonic local functions on one coarse element.

    Returns an array of shape ``(2^d, (r+1)^d)`` of values on the element's
    fine sub-grid; row k takes the value 1 at corner k and 0 at the others.
    """
    if mesh.ratio < 2:
        raise ConfigError("local problems need at least 2 fine cells per coarse cell")
    if cell_values is None:
        cell_values = fine_cell_media(mesh, media)
    coef = element_cell_values(mesh, cell_values, element)
    return _solve_local(mesh, coef, corner_functions(mesh))


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Global coarse basis, stored element by element.

    ``local[e, k]`` holds the values of the basis function of corner k of
    element e on that element's fine sub-grid.  The global function of node
    l is the union of its pieces over the patch of l.
    """

    mesh: NestedMesh
    mode: str
    local: np.ndarray

    @property
    def n_functions(self) -> int:
        return self.mesh.n_nodes

    def global_matrix(self) -> sp.csr_matrix:
        """Sparse (M, n_fine_total) matrix of fine-grid nodal values."""
        mesh = self.mesh
        nb, nloc = self.local.shape[1:]
        rows = np.repeat(mesh.elements[:, :, None], nloc, axis=2).ravel()
        cols = np.repeat(mesh.element_fine_nodes[:, None, :], nb, axis=1).ravel()
        shape = (mesh.n_nodes, mesh.n_fine**mesh.dimension)
        total = sp.coo_matrix((self.local.ravel(), (rows, cols)), shape=shape).tocsr()
        count = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=shape).tocsr()
        # nodes on element interfaces are visited once per adjacent element
        total.data /= count.data
        return total

    def nodal_values(self, node: int) -> np.ndarray:
        return self.global_matrix()[node].toarray().reshape(self.mesh.fine_shape)

    def evaluate(self, coefficients) -> np.ndarray:
        """Fine-grid values of sum_l c_l phi_l."""
        values = self.global_matrix().T @ np.asarray(coefficients, dtype=float)
        return values.reshape(self.mesh.fine_shape)


def build_global_basis(mesh: NestedMesh, media: MediaSpec | None = None, mode: str = "multiscale",
                       workers: int | None = None) -> BasisSet:
    """Multiscale (a-harmonic) or affine (hat) basis on the nested mesh."""
    if mode not in MODES:
        raise ConfigError(f"unknown basis mode {mode!r}; expected one of {MODES}")
    corners = corner_functions(mesh)
    if mode == "affine":
        local = np.broadcast_to(corners, (mesh.n_elements,) + corners.shape).copy()
        return BasisSet(mesh, mode, local)
    if media is None:
        raise ConfigError("multiscale basis needs media")
    if mesh.ratio < 2:
        raise ConfigError("multiscale basis needs a refinement ratio >= 2")
    cell_values = fine_cell_media(mesh, media)

    def one(e):
        return _solve_local(mesh, element_cell_values(mesh, cell_values, e), corners)

    elements = range(mesh.n_elements)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            pieces = list(pool.map(one, elements))
    else:
        pieces = [one(e) for e in elements]
    return BasisSet(mesh, mode, np.stack(pieces))


@dataclass(frozen=True, eq=False)
class HomogenizationResult:
    a_hom: np.ndarray
    correctors: tuple[np.ndarray, ...]
    resolution: int


def homogenized_coefficient(media: MediaSpec, cell_resolution: int = 128) -> HomogenizationResult:
    """Effective coefficient from the periodic corrector problem on one period cell."""
    n, d = int(cell_resolution), media.dimension
    if n < 16:
        raise ConfigError("cell resolution must be at least 16 per axis")
    spacing = np.array([p / n for p in media.period])
    centres = [(np.arange(n) + 0.5) * s for s in spacing]
    grids = np.meshgrid(*centres, indexing="ij")
    coef = np.broadcast_to(media(*grids), (n,) * d).ravel()
    if not np.all(coef > 0):
        raise AssemblyError("media is non-positive on the cell grid")

    conn = cell_connectivity(n, d, periodic=True)
    n_nodes = n**d
    kloc = q1_gradient_matrices(spacing).trace(axis1=0, axis2=1)
    K = _stiffness(conn, n_nodes, kloc, coef)
    gint = q1_gradient_integrals(spacing)
    loads = np.zeros((d, n_nodes))
    for i in range(d):
        np.add.at(loads[i], conn.ravel(), (coef[:, None] * gint[i][None, :]).ravel())

    # mean-zero gauge through a Lagrange multiplier
    ones = sp.csr_matrix(np.ones((1, n_nodes)))
    system = sp.bmat([[K, ones.T], [ones, None]], format="csc")
    try:
        lu = spla.splu(system)
    except RuntimeError as exc:
        raise AssemblyError(f"singular cell problem: {exc}") from exc
    rhs = np.vstack([-loads.T, np.zeros((1, d))])
    chi = lu.solve(rhs)[:n_nodes].T
    chi -= chi.mean(axis=1, keepdims=True)

    volume = float(np.prod(media.period))
    mean_a = coef.sum() * np.prod(spacing)
    a_hom = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            a_hom[i, j] = (
                (mean_a if i == j else 0.0)
                + chi[j] @ loads[i]
                + chi[i] @ loads[j]
                + chi[i] @ (K @ chi[j])
            ) / volume
    a_hom = 0.5 * (a_hom + a_hom.T)
    correctors = tuple(c.reshape((n,) * d) for c in chi)
    return HomogenizationResult(a_hom, correctors, n)
