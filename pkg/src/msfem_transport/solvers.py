"""Implicit time steppers.

Coefficients are stored as (M, N) arrays: row m is the spatial basis
function, column n the velocity mode.  Vectorising row by row gives the
ordering alpha_11, ..., alpha_1N, alpha_21, ..., so ``A (x) B`` acts on a
coefficient array ``X`` as ``A @ X @ B.T``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SpatialSystem
from .errors import ConfigError, SolverError
from .velocity import VelocitySystem

FORMULATIONS = ("symmetric", "asymmetric")


@dataclass(frozen=True)
class KineticState:
    alpha: np.ndarray
    beta: np.ndarray
    t: float = 0.0

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.alpha)) and np.all(np.isfinite(self.beta)))


@dataclass(frozen=True)
class ScalarState:
    values: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class StepperConfig:
    eps: float
    dt: float = 1e-3
    formulation: str = "symmetric"
    tol: float = 1e-10

    def __post_init__(self):
        if not (self.eps > 0 and self.dt > 0):
            raise ConfigError("eps and dt must be positive")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"unknown formulation {self.formulation!r}")


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)


def project_initial(f0, mesh, velocity: VelocitySystem, kinetic: bool = False) -> KineticState:
    """Coefficients of the initial distribution.

    ``f0(coords)`` gives a velocity-independent density at the coarse nodes
    (``coords`` has shape (M, d)); with ``kinetic=True`` it is called as
    ``f0(coords, xi)`` with ``xi`` of shape (K,) and must return (M, K).
    Space is interpolated at the coarse nodes (the basis is nodal), velocity
    is L2-projected with the Gauss rule after an even/odd split in xi.
    """
    coords = mesh.coarse_coords
    M, N = mesh.n_nodes, velocity.n
    if not kinetic:
        rho = np.broadcast_to(np.asarray(f0(coords), dtype=float), (M,))
        alpha = np.zeros((M, N))
        alpha[:, 0] = rho
        return KineticState(alpha, np.zeros((M, N)))
    xi = velocity.nodes
    f = np.asarray(f0(coords, xi), dtype=float)
    f_ref = np.asarray(f0(coords, -xi), dtype=float)
    alpha = velocity.project(0.5 * (f + f_ref))
    beta = velocity.project(0.5 * (f - f_ref))
    return KineticState(alpha, beta)


def density(state: KineticState, basis=None):
    """Density at the coarse nodes, or on the fine grid when ``basis`` is given."""
    rho = np.array(state.alpha[:, 0])
    if basis is None:
        return rho
    return basis.evaluate(rho)


def _relative_residual(residual, *terms) -> float:
    scale = sum(np.linalg.norm(t) for t in terms)
    return float(np.linalg.norm(residual) / scale) if scale > 0 else float(np.linalg.norm(residual))


class TransportStepper:
    """Backward-Euler even/odd Galerkin stepper with a cached factorisation.

    The odd unknowns are eliminated (their operator is block diagonal over
    velocity modes), leaving one MN x MN system for the even coefficients.
    """

    def __init__(self, spatial: SpatialSystem, velocity: VelocitySystem, cfg: StepperConfig):
        if spatial.dimension != velocity.dimension:
            raise ConfigError(
                f"{spatial.dimension}-d spatial system with {velocity.mode!r} velocities"
            )
        self.spatial, self.velocity, self.cfg = spatial, velocity, cfg
        eps, dt = cfg.eps, cfg.dt
        phi = _dense(spatial.mass)
        if spatial.weighted_mass is None:
            raise ConfigError("transport stepper needs a scalar coefficient")
        sigma = _dense(spatial.weighted_mass)
        fluxes = velocity.fluxes
        if cfg.formulation == "symmetric":
            even_mass = phi
            even_relax = _dense(spatial.inverse_weighted_mass)
            even_flux = [_dense(x) for x in spatial.advection]
        else:
            even_mass = sigma
            even_relax = phi
            even_flux = [_dense(x) for x in spatial.weighted_advection]
        odd_flux = [_dense(x) for x in spatial.weighted_advection]

        M, N = phi.shape[0], velocity.n
        q = np.eye(N) - velocity.projection
        # odd block scaled by eps^2/dt:  G beta = (eps^2/dt) Sigma beta^n - eps sum_a Sx_a alpha F_a
        G = phi + (eps * eps / dt) * sigma
        try:
            g_cho = sla.cho_factor(G)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"odd-block factorisation failed: {exc}") from exc
        self._g_odd_flux = [sla.cho_solve(g_cho, x) for x in odd_flux]
        self._g_sigma = sla.cho_solve(g_cho, sigma)

        K = np.kron(even_mass, np.eye(N)) + (dt / eps**2) * np.kron(even_relax, q)
        for a, fa in enumerate(fluxes):
            for b, fb in enumerate(fluxes):
                K -= dt * np.kron(even_flux[b] @ self._g_odd_flux[a], fb @ fa)
        # equilibrate: modes n >= 2 carry the dt/eps^2 relaxation scale
        row_scale = np.ones(N)
        row_scale[1:] = 1.0 / (1.0 + dt / eps**2)
        self._row_scale = np.tile(row_scale, M)
        try:
            self._lu = sla.lu_factor(self._row_scale[:, None] * K, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SolverError(f"Schur system factorisation failed: {exc}") from exc

        self._even_mass, self._even_relax, self._even_flux = even_mass, even_relax, even_flux
        self._odd_flux, self._sigma, self._phi, self._q = odd_flux, sigma, phi, q
        self.shape = (M, N)

    def step(self, state: KineticState) -> KineticState:
        eps, dt = self.cfg.eps, self.cfg.dt
        fluxes = self.velocity.fluxes
        a0, b0 = state.alpha, state.beta
        if a0.shape != self.shape or b0.shape != self.shape:
            raise ConfigError(f"state shape {a0.shape} does not match system {self.shape}")

        g_sigma_b0 = self._g_sigma @ b0
        rhs = self._even_mass @ a0
        for xe, fb in zip(self._even_flux, fluxes):
            rhs = rhs - eps * (xe @ g_sigma_b0 @ fb)
        alpha = sla.lu_solve(self._lu, self._row_scale * rhs.ravel()).reshape(self.shape)

        beta = (eps * eps / dt) * g_sigma_b0
        for gx, fa in zip(self._g_odd_flux, fluxes):
            beta = beta - eps * (gx @ alpha @ fa)

        res = self.residuals(a0, b0, alpha, beta)
        if not (max(res) <= self.cfg.tol):
            raise SolverError(f"transport step residual {max(res):.3e} above {self.cfg.tol:.1e}",
                              residual=max(res))
        out = KineticState(alpha, beta, state.t + dt)
        if not out.is_finite():
            raise SolverError("transport step produced non-finite coefficients")
        return out

    def residuals(self, a0, b0, alpha, beta) -> tuple[float, float]:
        """Residuals of the even and odd equations relative to the block system."""
        eps, dt = self.cfg.eps, self.cfg.dt
        fluxes = self.velocity.fluxes
        e_terms = [self._even_mass @ alpha, (dt / eps**2) * (self._even_relax @ alpha @ self._q),
                   -(self._even_mass @ a0)]
        e_terms += [(dt / eps) * (x @ beta @ f) for x, f in zip(self._even_flux, fluxes)]
        o_terms = [self._sigma @ beta, (dt / eps**2) * (self._phi @ beta), -(self._sigma @ b0)]
        o_terms += [(dt / eps) * (x @ alpha @ f) for x, f in zip(self._odd_flux, fluxes)]
        # scaled by the whole block system, so an equation whose terms all
        # vanish (e.g. the odd part at equilibrium) does not report noise
        return (_relative_residual(sum(e_terms), *e_terms, *o_terms),
                _relative_residual(sum(o_terms), *e_terms, *o_terms))

    def run(self, state: KineticState, n_steps: int, callback=None) -> KineticState:
        for _ in range(n_steps):
            state = self.step(state)
            if callback is not None:
                callback(state)
        return state


def transport_step(state, spatial, velocity, cfg: StepperConfig) -> KineticState:
    """One implicit step; use :class:`TransportStepper` to reuse the factorisation."""
    return TransportStepper(spatial, velocity, cfg).step(state)


def transport_step_asymmetric(state, spatial, velocity, cfg: StepperConfig) -> KineticState:
    return transport_step(state, spatial, velocity, replace(cfg, formulation="asymmetric"))


class ImplicitScalarStepper:
    """Solves (lhs_mass - dt * operator) u^{n+1} = rhs_mass u^n with a cached factorisation."""

    def __init__(self, mass, operator, dt: float, rhs_mass=None):
        if dt <= 0:
            raise ConfigError("dt must be positive")
        self.dt = dt
        self.mass = mass
        self.rhs_mass = mass if rhs_mass is None else rhs_mass
        system = mass - dt * operator
        try:
            if sp.issparse(system):
                self._solve = spla.splu(sp.csc_matrix(system)).solve
            else:
                lu = sla.lu_factor(np.asarray(system))
                self._solve = lambda b: sla.lu_solve(lu, b)
        except (RuntimeError, ValueError, np.linalg.LinAlgError) as exc:
            raise SolverError(f"implicit scalar factorisation failed: {exc}") from exc

    def step(self, state: ScalarState) -> ScalarState:
        values = self._solve(self.rhs_mass @ state.values)
        if not np.all(np.isfinite(values)):
            raise SolverError("scalar step produced non-finite values")
        return ScalarState(values, state.t + self.dt)

    def run(self, state: ScalarState, n_steps: int) -> ScalarState:
        for _ in range(n_steps):
            state = self.step(state)
        return state


class HeatStepper(ImplicitScalarStepper):
    """Phi eta^{n+1} = Phi eta^n + dt * c * A eta^{n+1} (c = 1/2 for circle velocities)."""

    def __init__(self, mass, stiffness, dt: float, diffusion: float = 0.5):
        super().__init__(mass, diffusion * stiffness, dt)


class LimitStepper(ImplicitScalarStepper):
    """Phi a^{n+1} = Phi a^n + dt * c * D a^{n+1}: the eps -> 0 limit of the transport step."""

    def __init__(self, mass, limit_operator, dt: float, diffusion: float = 0.5):
        super().__init__(mass, diffusion * np.asarray(_dense(limit_operator)), dt)


def heat_step(state: ScalarState, mass, stiffness, dt: float, diffusion: float = 0.5) -> ScalarState:
    return HeatStepper(mass, stiffness, dt, diffusion).step(state)


def limit_step(state: ScalarState, mass, limit_operator, dt: float, diffusion: float = 0.5) -> ScalarState:
    return LimitStepper(mass, limit_operator, dt, diffusion).step(state)


def n_steps_for(final_time: float, dt: float) -> int:
    n = final_time / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigError(f"final time {final_time} is not a multiple of dt {dt}")
    return int(round(n))


def asymmetry_norm(values: np.ndarray, permutation: np.ndarray) -> float:
    """Max deviation between a nodal field and its mirror image."""
    values = np.asarray(values)
    return float(np.max(np.abs(values - values[permutation])))


def mirror_permutation(mesh, centre: float, axis: int = 0) -> np.ndarray:
    """Node permutation of the reflection x_axis -> 2*centre - x_axis on the periodic grid."""
    coords = mesh.coarse_coords
    L = mesh.length
    reflected = coords.copy()
    reflected[:, axis] = 2 * centre - coords[:, axis]
    idx = np.rint((reflected - mesh.lower) / mesh.H).astype(int)
    if not np.allclose(mesh.lower + idx * mesh.H, reflected, atol=1e-9 * L):
        raise ConfigError(f"reflection about {centre} does not map the grid onto itself")
    idx %= mesh.n_coarse
    return np.ravel_multi_index(tuple(idx.T), mesh.shape)


__all__ = [
    "FORMULATIONS", "KineticState", "ScalarState", "StepperConfig", "TransportStepper",
    "HeatStepper", "LimitStepper", "ImplicitScalarStepper", "project_initial", "density",
    "transport_step", "transport_step_asymmetric", "heat_step", "limit_step", "n_steps_for",
    "asymmetry_norm", "mirror_permutation",
]
