"""Error norms, convergence-rate fits and grid restriction."""

from __future__ import annotations

import numpy as np

from ..errors import MetricError
from ..mesh import NestedMesh


def error_norm(a, b, mesh: NestedMesh) -> float:
    """Discrete L2 norm of a - b with every coarse node weighted by H^d."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise MetricError(f"cannot compare {a.size} values with {b.size}")
    if a.size != mesh.n_nodes:
        raise MetricError(f"expected {mesh.n_nodes} nodal values, got {a.size}")
    return float(np.sqrt(mesh.element_measure * np.sum((a - b) ** 2)))


def fit_rate(pairs) -> tuple[float, float]:
    """Least-squares slope of log(error) against log(parameter).

    Returns ``(slope, residual)`` where the residual is the RMS misfit in
    log space (0 for exact power laws).
    """
    pairs = [(float(p), float(e)) for p, e in pairs]
    if len(pairs) < 3:
        raise MetricError("a rate fit needs at least 3 (parameter, error) pairs")
    x, y = np.array(pairs).T
    if np.any(~(x > 0)) or np.any(~(y > 0)):
        raise MetricError("rate fit needs strictly positive parameters and errors")
    lx, ly = np.log(x), np.log(y)
    if np.ptp(lx) == 0:
        raise MetricError("rate fit needs at least two distinct parameters")
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return float(slope), residual


def restrict(values, fine: NestedMesh, coarse: NestedMesh) -> np.ndarray:
    """Values of a fine-mesh nodal field at the nodes of a coarser mesh."""
    if fine.dimension != coarse.dimension or fine.n_coarse % coarse.n_coarse:
        raise MetricError("coarse node set is not contained in the fine one")
    step = fine.n_coarse // coarse.n_coarse
    grid = np.asarray(values).reshape(fine.shape)
    return grid[(slice(None, None, step),) * fine.dimension].ravel()
