"""Experiment pipelines: build (or load) matrices, run solvers, collect errors."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..assembly import SpatialSystem, assemble_spatial, compute_limit_operator
from ..errors import ConfigError, SolverError
from ..media import MediaSpec
from ..mesh import NestedMesh, build_nested_mesh
from ..msfem import build_global_basis, homogenized_coefficient
from ..solvers import (
    HeatStepper,
    LimitStepper,
    ScalarState,
    StepperConfig,
    TransportStepper,
    asymmetry_norm,
    mirror_permutation,
    project_initial,
)
from ..velocity import VelocitySystem, default_quadrature_order, velocity_system
from .config import ExperimentConfig
from .io import MatrixCache, fingerprint, write_report, write_snapshot
from .metrics import error_norm, fit_rate, restrict

log = logging.getLogger(__name__)


def reference_diffusion(mode: str) -> float:
    """Diffusion constant of the limit equation: <v_x^2> for the velocity set."""
    return 1.0 / 3.0 if mode == "slab" else 0.5


def initial_density(name: str):
    if name == "cosine":
        return lambda x: 1.0 + 0.5 * np.prod(np.cos(np.pi * x), axis=1)
    if name == "shifted_cosine":
        # mirror symmetric about x = 0.05, the symmetry line of benchmark2d
        def f(x):
            rest = np.prod(np.cos(np.pi * x[:, 1:]), axis=1) if x.shape[1] > 1 else 1.0
            return 1.0 + 0.5 * np.cos(np.pi * (x[:, 0] - 0.05)) * rest

        return f
    if name == "constant":
        return lambda x: np.ones(len(x))
    raise ConfigError(f"unknown initial density {name!r}")


def mirror_centre(media: MediaSpec) -> float | None:
    """An x-coordinate about which the media is mirror symmetric, if known."""
    if media.name in ("sine10", "sine20", "benchmark2d"):
        return media.delta / 4
    if media.name in ("cos_delta", "constant"):
        return 0.0
    if media.name == "aniso2d":
        return 0.25
    return None


@dataclass
class Workspace:
    """Builds spatial and velocity systems, going through the cache when enabled."""

    cache: MatrixCache = field(default_factory=lambda: MatrixCache(None, enabled=False))

    def velocity(self, cfg: ExperimentConfig) -> VelocitySystem:
        return velocity_system(cfg.velocity_order, cfg.velocity_mode, cfg.quadrature_order)

    def key(self, media_key: str, mesh: NestedMesh, mode: str, cfg: ExperimentConfig) -> str:
        k = cfg.quadrature_order or default_quadrature_order(cfg.velocity_order)
        return fingerprint(media_key, mesh.descriptor(), mode, cfg.velocity_order, k)

    def spatial(self, mesh: NestedMesh, coefficient, mode: str, cfg: ExperimentConfig) -> SpatialSystem:
        """MsFEM system for a MediaSpec, or an affine system for a constant tensor."""
        if isinstance(coefficient, MediaSpec):
            media_key = coefficient.key
        else:
            media_key = "tensor:" + ",".join(repr(float(c)) for c in np.ravel(coefficient))
        key = self.key(media_key, mesh, mode, cfg)
        names = ["mass", "stiffness", "limit_operator"]
        names += [f"advection_{a}" for a in "xy"[: mesh.dimension]]
        names += [f"weighted_advection_{a}" for a in "xy"[: mesh.dimension]]
        if isinstance(coefficient, MediaSpec):
            names += ["weighted_mass", "inverse_weighted_mass"]
        cached = self.cache.get(key, names)
        if cached is not None:
            return _from_dense(mesh, mode, cached, coefficient)
        basis = build_global_basis(mesh, coefficient if mode == "multiscale" else None, mode)
        system = assemble_spatial(mesh, basis, coefficient)
        self.cache.put(key, {n: m for n, m in system.matrices().items() if n in names})
        return system


def _from_dense(mesh, mode, mats: dict, coefficient) -> SpatialSystem:
    def sparse(name):
        return sp.csr_matrix(mats[name]) if name in mats else None

    axes = "xy"[: mesh.dimension]
    return SpatialSystem(
        mesh, mode, sparse("mass"), sparse("weighted_mass"), sparse("inverse_weighted_mass"),
        tuple(sparse(f"advection_{a}") for a in axes),
        tuple(sparse(f"weighted_advection_{a}") for a in axes),
        sparse("stiffness"), np.array(mats["limit_operator"]), coefficient,
    )


def _label(value) -> str:
    return format(value, "g")


def _run_transport(spatial: SpatialSystem, vel: VelocitySystem, cfg: ExperimentConfig,
                   eps: float, formulation: str | None = None) -> np.ndarray:
    mesh = spatial.mesh
    stepper = TransportStepper(spatial, vel, StepperConfig(eps, cfg.dt, formulation or cfg.formulation))
    state = project_initial(initial_density(cfg.initial), mesh, vel)
    try:
        state = stepper.run(state, cfg.n_steps)
    except SolverError as exc:
        raise SolverError(f"transport run eps={eps:g} on {mesh.descriptor()}: {exc}",
                          residual=exc.residual) from exc
    return state.alpha[:, 0].copy()


def _run_heat(spatial: SpatialSystem, cfg: ExperimentConfig) -> np.ndarray:
    mesh = spatial.mesh
    stepper = HeatStepper(spatial.mass, spatial.stiffness, cfg.dt, reference_diffusion(cfg.velocity_mode))
    u0 = ScalarState(initial_density(cfg.initial)(mesh.coarse_coords))
    return stepper.run(u0, cfg.n_steps).values


def _run_limit(spatial: SpatialSystem, vel: VelocitySystem, cfg: ExperimentConfig) -> np.ndarray:
    mesh = spatial.mesh
    D = compute_limit_operator(spatial, vel.diffusion_weights())
    stepper = LimitStepper(spatial.mass, D, cfg.dt, diffusion=1.0)
    u0 = ScalarState(initial_density(cfg.initial)(mesh.coarse_coords))
    return stepper.run(u0, cfg.n_steps).values


def _map(fn, items, threads: int):
    items = list(items)
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


@dataclass
class RunResult:
    report: dict
    snapshots: dict[str, tuple[np.ndarray, np.ndarray]]


def reference_mesh(cfg: ExperimentConfig, delta: float) -> NestedMesh:
    """Resolved mesh with H <= delta/4 and h <= delta/16, nested in the run mesh."""
    if cfg.reference_cells is not None:
        n_ref = cfg.reference_cells
    else:
        n_ref = cfg.n_coarse * max(4, math.ceil(8.0 / (delta * cfg.n_coarse)))
    H = 2.0 / n_ref
    r_ref = cfg.reference_ratio or max(2, math.ceil(16.0 * H / delta - 1e-9))
    if H > delta / 4 + 1e-12 or H / r_ref > delta / 16 + 1e-12:
        log.warning("reference mesh (%d cells, ratio %d) does not resolve delta=%g", n_ref, r_ref, delta)
    if n_ref % cfg.n_coarse:
        raise ConfigError("reference_cells must be a multiple of n_coarse")
    return build_nested_mesh(cfg.dimension, n_ref, r_ref)


def run_single(cfg: ExperimentConfig, ws: Workspace, threads: int = 1) -> RunResult:
    t0 = time.perf_counter()
    media = cfg.build_media()
    mesh = build_nested_mesh(cfg.dimension, cfg.n_coarse, cfg.ratio)
    vel = ws.velocity(cfg)
    spatial = ws.spatial(mesh, media, "multiscale", cfg)
    t1 = time.perf_counter()
    rho = _run_transport(spatial, vel, cfg, cfg.eps[0])
    limit = _run_limit(spatial, vel, cfg)
    t2 = time.perf_counter()
    run = {
        "params": {"eps": cfg.eps[0], "n_coarse": cfg.n_coarse, "formulation": cfg.formulation},
        "errors": {"limit_scheme": error_norm(rho, limit, mesh)},
        "timings": {"assemble": t1 - t0, "solve": t2 - t1},
    }
    snaps = {f"single_eps_{_label(cfg.eps[0])}": (mesh.coarse_coords, rho)}
    return RunResult({"runs": [run], "rates": []}, snaps)


def run_eps_sweep(cfg: ExperimentConfig, ws: Workspace, threads: int = 1) -> RunResult:
    t0 = time.perf_counter()
    media = cfg.build_media()
    mesh = build_nested_mesh(cfg.dimension, cfg.n_coarse, cfg.ratio)
    vel = ws.velocity(cfg)
    spatial = ws.spatial(mesh, media, "multiscale", cfg)
    ref_mesh = reference_mesh(cfg, media.delta)
    ref = restrict(_run_heat(ws.spatial(ref_mesh, media, "multiscale", cfg), cfg), ref_mesh, mesh)
    setup = time.perf_counter() - t0

    def one(eps):
        s = time.perf_counter()
        rho = _run_transport(spatial, vel, cfg, eps)
        return eps, rho, time.perf_counter() - s

    runs, snaps, pairs = [], {"eps_reference": (mesh.coarse_coords, ref)}, []
    for eps, rho, wall in _map(one, cfg.eps, threads):
        err = error_norm(rho, ref, mesh)
        pairs.append((eps, err))
        runs.append({"params": {"eps": eps}, "errors": {"resolved_heat": err},
                     "timings": {"setup": setup, "solve": wall}})
        snaps[f"eps_{_label(eps)}"] = (mesh.coarse_coords, rho)
    rates = _rates("eps", pairs)
    return RunResult({"runs": runs, "rates": rates,
                      "reference": {"n_coarse": ref_mesh.n_coarse, "ratio": ref_mesh.ratio}}, snaps)


def run_delta_sweep(cfg: ExperimentConfig, ws: Workspace, threads: int = 1) -> RunResult:
    mesh = build_nested_mesh(cfg.dimension, cfg.n_coarse, cfg.ratio)
    vel = ws.velocity(cfg)
    eps = cfg.eps[0]

    def one(delta):
        s = time.perf_counter()
        media = cfg.build_media(delta)
        spatial = ws.spatial(mesh, media, "multiscale", cfg)
        a_hom = homogenized_coefficient(media, cfg.cell_resolution).a_hom
        hom = ws.spatial(mesh, a_hom, "affine", cfg)
        t1 = time.perf_counter()
        rho = _run_transport(spatial, vel, cfg, eps)
        ref = _run_heat(hom, cfg)
        return delta, a_hom, rho, ref, (t1 - s, time.perf_counter() - t1)

    runs, snaps, pairs = [], {}, []
    for delta, a_hom, rho, ref, (ta, ts) in _map(one, cfg.deltas, threads):
        err = error_norm(rho, ref, mesh)
        pairs.append((delta, err))
        runs.append({"params": {"delta": delta, "eps": eps, "a_hom": np.asarray(a_hom).tolist()},
                     "errors": {"homogenized_heat": err},
                     "timings": {"assemble": ta, "solve": ts}})
        snaps[f"delta_{_label(delta)}"] = (mesh.coarse_coords, rho)
        snaps[f"delta_{_label(delta)}_homogenized"] = (mesh.coarse_coords, ref)
    rates = _rates("delta", pairs)
    return RunResult({"runs": runs, "rates": rates}, snaps)


def run_resolution_consistency(cfg: ExperimentConfig, ws: Workspace, threads: int = 1) -> RunResult:
    media = cfg.build_media()
    resolutions = sorted(cfg.resolutions)
    coarsest = build_nested_mesh(cfg.dimension, resolutions[0], cfg.ratio)
    for n in resolutions:
        if n % resolutions[0]:
            raise ConfigError("every resolution must be a multiple of the coarsest one")
    vel = ws.velocity(cfg)

    def one(n):
        s = time.perf_counter()
        # keep h fixed across levels so only H changes
        ratio = max(2, cfg.ratio * resolutions[0] // n)
        mesh = build_nested_mesh(cfg.dimension, n, ratio)
        spatial = ws.spatial(mesh, media, "multiscale", cfg)
        heat = restrict(_run_heat(spatial, cfg), mesh, coarsest)
        rho = restrict(_run_transport(spatial, vel, cfg, cfg.eps[0]), mesh, coarsest)
        return n, ratio, heat, rho, time.perf_counter() - s

    results = _map(one, resolutions, threads)
    _, _, heat_f, rho_f, _ = results[-1]
    runs, snaps = [], {}
    for n, ratio, heat, rho, wall in results:
        runs.append({
            "params": {"n_coarse": n, "ratio": ratio, "eps": cfg.eps[0]},
            "errors": {
                "heat_vs_finest": error_norm(heat, heat_f, coarsest),
                "transport_vs_finest": error_norm(rho, rho_f, coarsest),
                "heat_max_vs_finest": float(np.max(np.abs(heat - heat_f))),
                "transport_max_vs_finest": float(np.max(np.abs(rho - rho_f))),
            },
            "timings": {"total": wall},
        })
        snaps[f"heat_n{n}"] = (coarsest.coarse_coords, heat)
        snaps[f"transport_n{n}"] = (coarsest.coarse_coords, rho)
    return RunResult({"runs": runs, "rates": []}, snaps)


def run_formulation_compare(cfg: ExperimentConfig, ws: Workspace, threads: int = 1) -> RunResult:
    media = cfg.build_media()
    mesh = build_nested_mesh(cfg.dimension, cfg.n_coarse, cfg.ratio)
    vel = ws.velocity(cfg)
    spatial = ws.spatial(mesh, media, "multiscale", cfg)
    centre = mirror_centre(media)
    perm = None
    if centre is not None:
        try:
            perm = mirror_permutation(mesh, centre)
        except ConfigError as exc:
            log.warning("no mirror symmetry check: %s", exc)
    u0 = initial_density(cfg.initial)(mesh.coarse_coords)
    if perm is not None and asymmetry_norm(u0, perm) > 1e-12:
        log.warning("initial density is not mirror symmetric about x=%g", centre)

    def one(form):
        s = time.perf_counter()
        return form, _run_transport(spatial, vel, cfg, cfg.eps[0], form), time.perf_counter() - s

    out = dict((f, (rho, wall)) for f, rho, wall in _map(one, ("symmetric", "asymmetric"), threads))
    gap = error_norm(out["symmetric"][0], out["asymmetric"][0], mesh)
    runs, snaps = [], {}
    for form, (rho, wall) in out.items():
        errors = {"formulation_gap": gap}
        if perm is not None:
            errors["asymmetry"] = asymmetry_norm(rho, perm)
        runs.append({"params": {"formulation": form, "eps": cfg.eps[0], "mirror_centre": centre},
                     "errors": errors, "timings": {"solve": wall}})
        snaps[f"formulation_{form}"] = (mesh.coarse_coords, rho)
    return RunResult({"runs": runs, "rates": []}, snaps)


def _rates(name, pairs):
    if len(pairs) < 3:
        return []
    slope, residual = fit_rate(pairs)
    return [{"name": name, "slope": slope, "residual": residual}]


RUNNERS = {
    "single_run": run_single,
    "eps_sweep": run_eps_sweep,
    "delta_sweep": run_delta_sweep,
    "resolution_consistency": run_resolution_consistency,
    "formulation_compare": run_formulation_compare,
}


def run_experiment(cfg: ExperimentConfig, cache_dir=None, threads: int = 1,
                   out: str | Path | None = None, use_cache: bool = True) -> dict:
    """Run ``cfg``, write CSV snapshots and report.json under the output directory."""
    warnings = cfg.check_regime()
    ws = Workspace(MatrixCache(cache_dir, enabled=use_cache and cache_dir is not None))
    t0 = time.perf_counter()
    result = RUNNERS[cfg.kind](cfg, ws, threads)
    report = {
        "config": cfg.to_dict(),
        "fingerprint": cfg.fingerprint(),
        "warnings": warnings,
        "cache": {"hits": ws.cache.hits, "misses": ws.cache.misses},
        "wall_time": time.perf_counter() - t0,
        **result.report,
    }
    out_dir = Path(out if out is not None else cfg.out)
    for name, (coords, values) in sorted(result.snapshots.items()):
        write_snapshot(out_dir / "snapshots" / f"{name}.csv", coords, values)
    write_report(out_dir / "report.json", report)
    return report


def assemble_only(cfg: ExperimentConfig, cache_dir=None, use_cache: bool = True) -> dict:
    """Build (and cache) the spatial system of the configured mesh and media."""
    ws = Workspace(MatrixCache(cache_dir, enabled=use_cache and cache_dir is not None))
    deltas = cfg.deltas or (None,)
    mesh = build_nested_mesh(cfg.dimension, cfg.n_coarse, cfg.ratio)
    vel = ws.velocity(cfg)
    summary = []
    for d in deltas:
        media = cfg.build_media(d)
        s = time.perf_counter()
        system = ws.spatial(mesh, media, "multiscale", cfg)
        summary.append({"media": media.key, "size": system.size,
                        "nnz_mass": int(system.mass.nnz), "seconds": time.perf_counter() - s})
    return {"systems": summary, "velocity": {"N": vel.n, "K": len(vel.nodes), "mode": vel.mode},
            "cache": {"hits": ws.cache.hits, "misses": ws.cache.misses}}


__all__ = ["ExperimentConfig", "Workspace", "run_experiment", "assemble_only", "reference_mesh",
           "initial_density", "reference_diffusion", "mirror_centre", "RUNNERS"]
