"""Nested periodic coarse/fine tensor grids on [lower, upper]^d.

Coarse nodes are numbered in C order over an ``(n,)*d`` index grid with the
last node on each axis identified with the first.  Elements carry their
corners in the order (0,0), (1,0), (0,1), (1,1) (x offset varies fastest),
which is also the order of the local basis functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError


def corner_offsets(dimension: int) -> np.ndarray:
    """Corner offsets of a reference cell, x offset varying fastest."""
    return np.array([c[::-1] for c in itertools.product((0, 1), repeat=dimension)], dtype=int)


def cell_connectivity(n_cells: int, dimension: int, periodic: bool = False) -> np.ndarray:
    """Corner node indices for each cell of an ``n_cells^d`` grid.

    Non-periodic grids have ``n_cells + 1`` nodes per axis (element-local
    fine grids); periodic grids have ``n_cells``.
    """
    n_nodes = n_cells if periodic else n_cells + 1
    cells = np.array(list(itertools.product(range(n_cells), repeat=dimension)), dtype=int)
    cells = cells.reshape(-1, dimension)
    conn = np.empty((len(cells), 2**dimension), dtype=int)
    for k, off in enumerate(corner_offsets(dimension)):
        idx = cells + off
        if periodic:
            idx %= n_nodes
        conn[:, k] = np.ravel_multi_index(tuple(idx.T), (n_nodes,) * dimension)
    return conn


@dataclass(frozen=True)
class NestedMesh:
    dimension: int
    n_coarse: int
    ratio: int
    lower: float = -1.0
    upper: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError("mesh dimension must be 1 or 2")
        if self.n_coarse < 2:
            raise ConfigError("need at least 2 coarse cells per axis")
        if self.ratio < 1:
            raise ConfigError("refinement ratio must be >= 1")
        if not self.upper > self.lower:
            raise ConfigError("empty domain")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def H(self) -> float:
        return self.length / self.n_coarse

    @property
    def h(self) -> float:
        return self.H / self.ratio

    @property
    def n_fine(self) -> int:
        """Fine cells (= logical fine nodes) per axis."""
        return self.n_coarse * self.ratio

    @property
    def n_nodes(self) -> int:
        """Number of logical coarse nodes M."""
        return self.n_coarse**self.dimension

    @property
    def n_elements(self) -> int:
        return self.n_coarse**self.dimension

    @property
    def measure(self) -> float:
        return self.length**self.dimension

    @property
    def element_measure(self) -> float:
        return self.H**self.dimension

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_coarse,) * self.dimension

    @property
    def fine_shape(self) -> tuple[int, ...]:
        return (self.n_fine,) * self.dimension

    def fine_axis(self, index) -> np.ndarray:
        """Coordinates of fine-grid lines; every coordinate in the mesh comes from here."""
        return self.lower + self.length * (np.asarray(index) / self.n_fine)

    @cached_property
    def coarse_coords(self) -> np.ndarray:
        """(M, d) coordinates of the logical coarse nodes."""
        axis = self.fine_axis(self.ratio * np.arange(self.n_coarse))
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def fine_coords(self) -> np.ndarray:
        axis = self.fine_axis(np.arange(self.n_fine))
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def element_index(self) -> np.ndarray:
        """(n_el, d) integer index of each coarse element's lower corner."""
        idx = np.array(list(itertools.product(range(self.n_coarse), repeat=self.dimension)))
        return idx.reshape(-1, self.dimension)

    @cached_property
    def elements(self) -> np.ndarray:
        """(n_el, 2^d) logical coarse-node indices of element corners."""
        return cell_connectivity(self.n_coarse, self.dimension, periodic=True)

    def element_origin(self, element: int) -> np.ndarray:
        return self.fine_axis(self.ratio * self.element_index[element])

    def element_fine_axes(self, element: int) -> list[np.ndarray]:
        """Fine node coordinates of the element's closed sub-grid, per axis."""
        s = np.arange(self.ratio + 1)
        return [self.fine_axis(self.ratio * b + s) for b in self.element_index[element]]

    @cached_property
    def element_fine_nodes(self) -> np.ndarray:
        """(n_el, (r+1)^d) global fine-node indices of each element sub-grid."""
        r, nf = self.ratio, self.n_fine
        local = np.array(list(itertools.product(range(r + 1), repeat=self.dimension)))
        local = local.reshape(-1, self.dimension)
        out = np.empty((self.n_elements, len(local)), dtype=int)
        for e, base in enumerate(self.element_index):
            idx = (base * r + local) % nf
            out[e] = np.ravel_multi_index(tuple(idx.T), self.fine_shape)
        return out

    @cached_property
    def coarse_to_fine(self) -> np.ndarray:
        """Fine-node index of every logical coarse node."""
        idx = np.array(list(itertools.product(range(self.n_coarse), repeat=self.dimension)))
        idx = idx.reshape(-1, self.dimension) * self.ratio
        return np.ravel_multi_index(tuple(idx.T), self.fine_shape)

    @cached_property
    def patches(self) -> tuple[tuple[int, ...], ...]:
        members: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for e, corners in enumerate(self.elements):
            for node in corners:
                members[node].append(e)
        return tuple(tuple(sorted(m)) for m in members)

    def descriptor(self) -> dict:
        return {
            "dimension": self.dimension,
            "n_coarse": self.n_coarse,
            "ratio": self.ratio,
            "lower": self.lower,
            "upper": self.upper,
        }


def build_nested_mesh(dimension: int, coarse_cells_per_axis: int, refinement_ratio: int) -> NestedMesh:
    return NestedMesh(dimension, coarse_cells_per_axis, refinement_ratio)


def patch_of(mesh: NestedMesh, coarse_node: int) -> list[int]:
    """Coarse elements that contain ``coarse_node``."""
    if not 0 <= coarse_node < mesh.n_nodes:
        raise IndexError(f"coarse node {coarse_node} out of range [0, {mesh.n_nodes})")
    return list(mesh.patches[coarse_node])
