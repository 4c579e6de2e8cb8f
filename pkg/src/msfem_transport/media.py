"""Oscillatory scattering media a(x) = 1/sigma(x).

A :class:`MediaSpec` wraps a vectorised evaluator together with the period of
the oscillation along each axis.  All built-in media live on the periodic
domain [-1, 1]^d and their periods divide the domain length.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import ConfigError, InvalidMediaError

DOMAIN_LENGTH = 2.0
SAMPLES_PER_PERIOD = 64

BUILTIN_NAMES = ("sine10", "sine20", "cos_delta", "aniso2d", "benchmark2d", "constant")


@dataclass(frozen=True)
class MediaSpec:
    """Immutable description of a periodic, strictly positive coefficient.

    ``func`` takes one coordinate array per axis (broadcastable) and returns
    the coefficient values.  ``period`` holds the period along each axis and
    ``delta`` the nominal oscillation length used in sweeps and cache keys.
    """

    name: str
    dimension: int
    period: tuple[float, ...]
    delta: float
    func: Callable[..., np.ndarray] = field(compare=False, repr=False)
    params: tuple = ()

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ConfigError(f"media dimension must be 1 or 2, got {self.dimension}")
        if len(self.period) != self.dimension:
            raise ConfigError("one period per axis is required")
        if self.delta <= 0 or any(p <= 0 for p in self.period):
            raise ConfigError("media periods must be positive")
        validate_positive(self)

    def __call__(self, *coords):
        return np.asarray(self.func(*coords), dtype=float)

    @property
    def key(self) -> str:
        """Stable identifier for fingerprints (name plus numeric parameters)."""
        parts = [self.name, repr(float(self.delta))] + [repr(p) for p in self.params]
        return "|".join(parts)


def validate_positive(spec: MediaSpec, samples: int = SAMPLES_PER_PERIOD) -> None:
    axes = [np.arange(samples) * (p / samples) for p in spec.period]
    grids = np.meshgrid(*axes, indexing="ij")
    values = np.asarray(spec.func(*grids), dtype=float)
    values = np.broadcast_to(values, grids[0].shape)
    bad = ~(values > 0)
    if bad.any():
        idx = np.unravel_index(np.argmax(bad), values.shape)
        point = tuple(float(g[idx]) for g in grids)
        raise InvalidMediaError(
            f"media {spec.name!r} is not strictly positive at {point}: value {values[idx]}",
            point=point,
        )


def evaluate_media(spec: MediaSpec, point) -> float:
    """Evaluate the coefficient at a single point of the domain."""
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (spec.dimension,):
        raise ConfigError(f"expected a {spec.dimension}-d point, got shape {point.shape}")
    if np.any(point < -1.0) or np.any(point > 1.0):
        raise ConfigError(f"point {tuple(point)} lies outside [-1, 1]^{spec.dimension}")
    value = float(spec(*point))
    if not value > 0:
        raise InvalidMediaError(
            f"non-positive media value {value} at {tuple(point)}", point=tuple(point)
        )
    return value


def _check_divides(period: float, what: str) -> None:
    ratio = DOMAIN_LENGTH / period
    if abs(ratio - round(ratio)) > 1e-9:
        raise ConfigError(f"{what} period {period} does not divide the domain length 2")


def constant_media(value: float, dimension: int = 1) -> MediaSpec:
    value = float(value)

    def func(*coords):
        return np.full(np.broadcast(*coords).shape, value)

    return MediaSpec("constant", dimension, (DOMAIN_LENGTH,) * dimension, DOMAIN_LENGTH, func, (value,))


def builtin_media(name: str, delta: float | None = None, value: float = 1.0) -> MediaSpec:
    """Return one of the built-in media.

    ``delta`` overrides the oscillation period.  For ``aniso2d`` it is the
    period along y (the x period stays 1); ``cos_delta`` requires it.
    """
    if name == "sine10" or name == "sine20":
        d = (0.2 if name == "sine10" else 0.1) if delta is None else float(delta)
        _check_divides(d, name)
        k = 2 * np.pi / d
        return MediaSpec(name, 1, (d,), d, lambda x: 1.1 + np.sin(k * x))
    if name == "cos_delta":
        if delta is None:
            raise ConfigError("cos_delta media needs an explicit delta")
        d = float(delta)
        _check_divides(d, name)
        k = 2 * np.pi / d
        return MediaSpec(name, 1, (d,), d, lambda x: 1.0 / (np.cos(k * x) + 4.0))
    if name == "aniso2d":
        d = 0.2 if delta is None else float(delta)
        _check_divides(d, name)
        k = 2 * np.pi / d
        return MediaSpec(
            name, 2, (1.0, d), d, lambda x, y: 1.1 + np.sin(2 * np.pi * x) * np.sin(k * y)
        )
    if name == "benchmark2d":
        d = 0.2 if delta is None else float(delta)
        _check_divides(d, name)
        k = 2 * np.pi / d

        def func(x, y):
            sx, sy, cy = np.sin(k * x), np.sin(k * y), np.cos(k * y)
            return (2 + 1.8 * sx) / (2 + 1.8 * cy) + (2 + sy) / (2 + 1.8 * sx)

        return MediaSpec(name, 2, (d, d), d, func)
    if name == "constant":
        return constant_media(value, 1)
    raise ConfigError(f"unknown media {name!r}; expected one of {BUILTIN_NAMES}")


def tabulated_media(axes, values, name: str = "table", delta: float | None = None) -> MediaSpec:
    """Periodic (bi)linear interpolant of nodal values on a uniform grid.

    ``axes`` holds one sorted 1-d array of node coordinates per axis; the
    grid is assumed to cover one full period of length ``n * spacing``.
    """
    axes = [np.asarray(a, dtype=float) for a in axes]
    values = np.asarray(values, dtype=float)
    dim = len(axes)
    if values.shape != tuple(len(a) for a in axes):
        raise ConfigError("table values do not match the coordinate axes")
    origin = tuple(a[0] for a in axes)
    spacing = tuple(a[1] - a[0] for a in axes)
    period = tuple(len(a) * s for a, s in zip(axes, spacing))

    def func(*coords):
        coords = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        idx, frac = [], []
        for c, o, s, n in zip(coords, origin, spacing, values.shape):
            u = (c - o) / s
            i0 = np.floor(u)
            frac.append(u - i0)
            idx.append(i0.astype(int) % n)
        out = np.zeros(coords[0].shape)
        for corner in np.ndindex(*(2,) * dim):
            w = np.ones(coords[0].shape)
            pos = []
            for ax, bit in enumerate(corner):
                w = w * (frac[ax] if bit else 1 - frac[ax])
                pos.append((idx[ax] + bit) % values.shape[ax])
            out += w * values[tuple(pos)]
        return out

    digest = hashlib.sha256(values.tobytes()).hexdigest()[:16]
    d = float(delta) if delta is not None else max(period)
    return MediaSpec(name, dim, period, d, func, (digest,))


def load_media_table(path, delta: float | None = None) -> MediaSpec:
    """Read a CSV table with columns ``x[,y],value`` (header row required)."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read media table {path}: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"media table {path} has no data rows")
    try:
        header, body = rows[0], np.array(rows[1:], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"media table {path} has non-numeric entries: {exc}") from exc
    dim = len(header) - 1
    if dim not in (1, 2) or body.ndim != 2 or body.shape[1] != dim + 1:
        raise ConfigError(f"media table {path} must have columns x[,y],value")
    axes = [np.unique(body[:, k]) for k in range(dim)]
    values = np.empty(tuple(len(a) for a in axes))
    index = [np.searchsorted(a, body[:, k]) for k, a in enumerate(axes)]
    values[tuple(index)] = body[:, -1]
    # a closed grid repeats the first node at the far end; drop it
    if all(np.isclose(a[-1] - a[0], DOMAIN_LENGTH) for a in axes):
        values = values[tuple(slice(0, -1) for _ in axes)]
        axes = [a[:-1] for a in axes]
    return tabulated_media(axes, values, name=f"table:{path.name}", delta=delta)
