"""Canonical JSON and raw-float blob I/O.

All structured outputs go through :func:`dump_json` so identical data produces
byte-identical files: keys sorted, 2-space indent, floats via repr (shortest
round-trip), trailing newline. Bulk arrays go to little-endian raw blobs with
a JSON sidecar describing shape and dtype.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ParseError

SCHEMA_VERSION = 1


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(canonical_json(obj))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_json(path: str | Path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: line {e.lineno}: {e.msg}") from e
    except OSError as e:
        raise ParseError(f"{path}: {e}") from e


def check_schema(data: dict, allowed: set[str], context: str) -> None:
    """Reject unknown fields and bad schema_version markers."""
    from .errors import InvalidConfig

    if not isinstance(data, dict):
        raise InvalidConfig(f"{context}: expected a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise InvalidConfig(f"{context}: unsupported schema_version {version}")
    unknown = set(data) - allowed - {"schema_version"}
    if unknown:
        raise InvalidConfig(f"{context}: unknown fields {sorted(unknown)}")


def save_volume(values: np.ndarray, grid_dict: dict, path: str | Path) -> None:
    """Write a volume as <path> raw little-endian float32 + <path>.json sidecar."""
    path = Path(path)
    arr = np.ascontiguousarray(values, dtype="<f4")
    path.write_bytes(arr.tobytes())
    dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "shape": list(arr.shape),
            "dtype": "<f4",
            "grid": grid_dict,
        },
        path.with_suffix(path.suffix + ".json"),
    )


def load_volume(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a raw float blob written by :func:`save_volume`; returns (values, grid dict)."""
    path = Path(path)
    sidecar = load_json(path.with_suffix(path.suffix + ".json"))
    try:
        shape = tuple(int(s) for s in sidecar["shape"])
        dtype = np.dtype(sidecar["dtype"])
        grid = sidecar["grid"]
    except (KeyError, TypeError, ValueError) as e:
        raise ParseError(f"{path}: bad sidecar: {e}") from e
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * dtype.itemsize
    if len(raw) != expected:
        raise ParseError(f"{path}: blob has {len(raw)} bytes, sidecar declares {expected}")
    return np.frombuffer(raw, dtype=dtype).reshape(shape).astype(np.float64), grid
