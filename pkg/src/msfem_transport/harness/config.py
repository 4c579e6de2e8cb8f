"""Experiment configuration: a flat dataclass read from / written to JSON."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import ConfigError
from ..media import BUILTIN_NAMES, MediaSpec, builtin_media, load_media_table
from ..solvers import FORMULATIONS

log = logging.getLogger(__name__)

KINDS = ("eps_sweep", "delta_sweep", "resolution_consistency", "formulation_compare", "single_run")
INITIAL = ("cosine", "shifted_cosine", "constant")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.

    ``n_coarse`` is the number of coarse cells per axis on [-1, 1].  The
    list-valued fields are only read by the sweep that varies them:
    ``eps`` by every transport run (sweeps use all values, single runs the
    first), ``deltas`` by ``delta_sweep`` and ``resolutions`` by
    ``resolution_consistency``.
    """

    kind: str = "single_run"
    media: str = "sine10"
    delta: float | None = None
    media_table: str | None = None
    dimension: int = 1
    n_coarse: int = 100
    ratio: int = 16
    velocity_order: int = 4
    quadrature_order: int | None = None
    eps: tuple[float, ...] = (1e-2,)
    deltas: tuple[float, ...] = ()
    resolutions: tuple[int, ...] = ()
    dt: float = 1e-3
    final_time: float = 0.1
    initial: str = "cosine"
    formulation: str = "symmetric"
    reference_cells: int | None = None
    reference_ratio: int | None = None
    cell_resolution: int = 128
    out: str = "results"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.media_table is None and self.media not in BUILTIN_NAMES:
            raise ConfigError(f"unknown media {self.media!r}")
        if self.dimension not in (1, 2):
            raise ConfigError("dimension must be 1 or 2")
        if self.n_coarse < 2 or self.ratio < 1:
            raise ConfigError("need n_coarse >= 2 and ratio >= 1")
        if self.velocity_order < 1:
            raise ConfigError("velocity_order must be >= 1")
        if not self.eps or any(not e > 0 for e in self.eps):
            raise ConfigError("eps must be a non-empty list of positive numbers")
        if not (self.dt > 0 and self.final_time > 0):
            raise ConfigError("dt and final_time must be positive")
        if self.initial not in INITIAL:
            raise ConfigError(f"unknown initial density {self.initial!r}; expected one of {INITIAL}")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"unknown formulation {self.formulation!r}")
        if self.kind == "delta_sweep" and len(self.deltas) < 1:
            raise ConfigError("delta_sweep needs a list of deltas")
        if self.kind == "resolution_consistency" and len(self.resolutions) < 2:
            raise ConfigError("resolution_consistency needs at least two resolutions")
        if self.kind == "eps_sweep" and len(self.eps) < 2:
            raise ConfigError("eps_sweep needs at least two eps values")

    @property
    def velocity_mode(self) -> str:
        return "slab" if self.dimension == 1 else "circle"

    @property
    def n_steps(self) -> int:
        n = self.final_time / self.dt
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError(f"final_time {self.final_time} is not a multiple of dt {self.dt}")
        return int(round(n))

    def build_media(self, delta: float | None = None) -> MediaSpec:
        d = self.delta if delta is None else delta
        if self.media_table is not None:
            spec = load_media_table(self.media_table, d)
        else:
            spec = builtin_media(self.media, d)
        if spec.dimension != self.dimension:
            raise ConfigError(f"media {spec.name!r} is {spec.dimension}-d, config is {self.dimension}-d")
        return spec

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key in ("eps", "deltas", "resolutions"):
            out[key] = list(out[key])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def fingerprint(self) -> str:
        payload = self.to_dict()
        payload.pop("out")
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def check_regime(self) -> list[str]:
        """Warnings for parameter choices outside the intended regime."""
        notes = []
        deltas = list(self.deltas) or [self.build_media().delta]
        if self.kind in ("eps_sweep", "delta_sweep"):
            for d in deltas:
                if max(self.eps) > d / 4:
                    notes.append(f"eps={max(self.eps):g} exceeds delta/4={d / 4:g}; "
                                 "the eps << delta regime is not met")
        h = 2.0 / (self.n_coarse * self.ratio)
        for d in deltas:
            if h > d / 8:
                notes.append(f"fine mesh h={h:g} does not resolve delta={d:g} (h > delta/8)")
        for note in notes:
            log.warning(note)
        return notes


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    data = dict(data)
    for key in ("eps", "deltas", "resolutions"):
        if key in data:
            value = data[key]
            data[key] = tuple(value) if isinstance(value, (list, tuple)) else (value,)
    try:
        for key in ("delta", "dt", "final_time"):
            if data.get(key) is not None:
                data[key] = float(data[key])
        data["eps"] = tuple(float(e) for e in data.get("eps", (1e-2,)))
        data["deltas"] = tuple(float(d) for d in data.get("deltas", ()))
        data["resolutions"] = tuple(int(n) for n in data.get("resolutions", ()))
        cfg = ExperimentConfig(**data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config value: {exc}") from exc
    for name in ("delta", "dt", "final_time"):
        value = getattr(cfg, name)
        if value is not None and not math.isfinite(value):
            raise ConfigError(f"{name} must be finite")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
