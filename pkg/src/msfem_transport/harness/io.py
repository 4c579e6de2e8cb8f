"""Snapshot/report export and the on-disk matrix cache.

Cache file layout (one matrix per file)::

    {"shape": [m, n], "symmetric": false, "fingerprint": "...", "dtype": "<f8"}\\n
    <m*n little-endian float64 values, row-major>

Files are written to a temporary name and renamed into place, so readers
never observe partial writes and concurrent writers are harmless.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from ..errors import ConfigError

CACHE_DTYPE = "<f8"


def write_snapshot(path, coords: np.ndarray, values: np.ndarray) -> Path:
    """CSV with columns x[,y],value and 17 significant digits."""
    path = Path(path)
    coords = np.asarray(coords, dtype=float)
    values = np.asarray(values, dtype=float).ravel()
    if coords.ndim != 2 or coords.shape[0] != values.size:
        raise ValueError("one coordinate row per value is required")
    header = ["x", "y"][: coords.shape[1]] + ["value"]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row, v in zip(coords, values):
                writer.writerow([format(c, ".17g") for c in row] + [format(v, ".17g")])
    except OSError as exc:
        raise OSError(f"writing snapshot {path}: {exc}") from exc
    return path


def read_snapshot(path) -> tuple[np.ndarray, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    body = np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return body[:, :-1], body[:, -1]


def write_report(path, report: dict) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"writing report {path}: {exc}") from exc
    return path


def fingerprint(*parts) -> str:
    blob = json.dumps([str(p) if not isinstance(p, (dict, list)) else p for p in parts],
                      sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:24]


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(path, matrix, fingerprint_: str) -> Path:
    path = Path(path)
    m = np.ascontiguousarray(np.asarray(matrix, dtype=CACHE_DTYPE))
    if m.ndim != 2:
        raise ValueError("only 2-d matrices are cached")
    header = {
        "shape": list(m.shape),
        "symmetric": bool(m.shape[0] == m.shape[1] and np.array_equal(m, m.T)),
        "fingerprint": fingerprint_,
        "dtype": CACHE_DTYPE,
    }
    _atomic_write(path, json.dumps(header, sort_keys=True).encode() + b"\n" + m.tobytes())
    return path


def load_matrix(path, fingerprint_: str | None = None) -> np.ndarray | None:
    """Matrix stored at ``path``, or None if missing, corrupt or stale."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        return None
    head, sep, payload = raw.partition(b"\n")
    if not sep:
        return None
    try:
        header = json.loads(head)
        shape = tuple(int(s) for s in header["shape"])
    except (ValueError, KeyError, TypeError):
        return None
    if fingerprint_ is not None and header.get("fingerprint") != fingerprint_:
        return None
    if len(payload) != 8 * int(np.prod(shape)):
        return None
    return np.frombuffer(payload, dtype=CACHE_DTYPE).reshape(shape).copy()


class MatrixCache:
    """Directory of cached matrices grouped by fingerprint."""

    def __init__(self, root, enabled: bool = True):
        self.root = Path(root) if root is not None else None
        self.enabled = enabled and root is not None
        self.hits = 0
        self.misses = 0
        if self.enabled:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise ConfigError(f"cache directory {self.root} is not writable: {exc}") from exc

    def _path(self, key: str, name: str) -> Path:
        return self.root / key / f"{name}.mat"

    def get(self, key: str, names) -> dict[str, np.ndarray] | None:
        """All of ``names`` under ``key``, or None if any is missing."""
        if not self.enabled:
            return None
        out = {}
        for name in names:
            m = load_matrix(self._path(key, name), key)
            if m is None:
                self.misses += 1
                return None
            out[name] = m
        self.hits += 1
        return out

    def put(self, key: str, matrices: dict) -> None:
        if not self.enabled:
            return
        for name, m in matrices.items():
            save_matrix(self._path(key, name), m, key)
