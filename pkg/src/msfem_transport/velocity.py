"""Normalised Legendre (Pn) basis on the velocity variable.

Two velocity settings are supported:

* ``"slab"``:   xi in [-1, 1], velocity v = xi (one flux matrix).
* ``"circle"``: xi in (-pi, pi], velocity v = (cos xi, sin xi) (two flux matrices).

Averages are taken with respect to the uniform probability measure on the
interval, so p_1 = 1 is the normalised equilibrium.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .errors import ConfigError

MODES = ("slab", "circle")


def half_width(mode: str) -> float:
    if mode == "slab":
        return 1.0
    if mode == "circle":
        return np.pi
    raise ConfigError(f"unknown velocity mode {mode!r}; expected one of {MODES}")


@dataclass(frozen=True)
class LegendreBasis:
    """p_1..p_N, orthonormal under the uniform probability measure."""

    n: int
    mode: str

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("velocity basis needs N >= 1")
        half_width(self.mode)

    def __call__(self, xi) -> np.ndarray:
        """Values p_n(xi) with shape ``xi.shape + (N,)``."""
        t = np.asarray(xi, dtype=float) / half_width(self.mode)
        out = np.empty(t.shape + (self.n,))
        # three-term recurrence for P_k(t), then scale by sqrt(2k+1)
        prev, cur = np.zeros_like(t), np.ones_like(t)
        for k in range(self.n):
            out[..., k] = np.sqrt(2 * k + 1) * cur
            prev, cur = cur, ((2 * k + 1) * t * cur - k * prev) / (k + 1)
        return out


def build_basis(n: int, mode: str = "circle") -> LegendreBasis:
    return LegendreBasis(n, mode)


def gauss_rule(k: int, mode: str = "circle") -> tuple[np.ndarray, np.ndarray]:
    """K-point Gauss-Legendre rule for the uniform probability measure.

    Exact for polynomials of degree <= 2K - 1; weights sum to one.
    """
    if k < 1:
        raise ConfigError("quadrature needs K >= 1")
    t, w = legendre.leggauss(k)
    return half_width(mode) * t, 0.5 * w


def default_quadrature_order(n: int) -> int:
    # 2N nodes alone under-resolve cos/sin on (-pi, pi] when N is small
    return max(2 * n, n + 20)


@dataclass(frozen=True, eq=False)
class VelocitySystem:
    """Velocity matrices of the Pn discretisation.

    ``fluxes`` holds one matrix per spatial axis: ``(F,)`` in slab mode,
    ``(F_cos, F_sin)`` in circle mode.
    """

    basis: LegendreBasis
    nodes: np.ndarray
    weights: np.ndarray
    identity: np.ndarray
    collision: np.ndarray
    projection: np.ndarray
    fluxes: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def mode(self) -> str:
        return self.basis.mode

    @property
    def dimension(self) -> int:
        return len(self.fluxes)

    @property
    def flux_cos(self) -> np.ndarray:
        return self.fluxes[0]

    @property
    def flux_sin(self) -> np.ndarray | None:
        return self.fluxes[1] if len(self.fluxes) > 1 else None

    def diffusion_weights(self) -> tuple[float, ...]:
        """(F_a F_a)_{11} per axis: the diffusion constant seen by the limit scheme.

        Tends to 1/2 per axis in circle mode as N grows; equals 1/3 in slab
        mode for N >= 2.
        """
        return tuple(float((f @ f)[0, 0]) for f in self.fluxes)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients <g, p_n> from samples ``values[..., k] = g(xi_k)``."""
        return np.asarray(values) @ (self.weights[:, None] * self._vandermonde)

    @property
    def _vandermonde(self) -> np.ndarray:
        return self.basis(self.nodes)


def assemble_velocity_matrices(basis: LegendreBasis, rule=None) -> VelocitySystem:
    n = basis.n
    if rule is None:
        rule = gauss_rule(default_quadrature_order(n), basis.mode)
    nodes, weights = (np.asarray(r, dtype=float) for r in rule)
    if len(nodes) < n + 2:
        raise ConfigError(f"quadrature with K={len(nodes)} nodes is too small for N={n} (need K >= N+2)")

    v = basis(nodes)
    wv = weights[:, None] * v
    identity = v.T @ wv
    # eigenstructure of L f = <f> - f: exact, no quadrature
    collision = np.eye(n)
    collision[0, 0] = 0.0
    projection = np.zeros((n, n))
    projection[0, 0] = 1.0

    if basis.mode == "slab":
        velocities = (nodes,)
    else:
        velocities = (np.cos(nodes), np.sin(nodes))
    fluxes = []
    for vel in velocities:
        f = v.T @ (vel[:, None] * wv)
        fluxes.append(0.5 * (f + f.T))
    return VelocitySystem(basis, nodes, weights, identity, collision, projection, tuple(fluxes))


def velocity_system(n: int, mode: str = "circle", k: int | None = None) -> VelocitySystem:
    basis = build_basis(n, mode)
    rule = gauss_rule(k if k is not None else default_quadrature_order(n), mode)
    return assemble_velocity_matrices(basis, rule)
