"""Binary checkpoint container for named parameter arrays.

Layout: 8-byte magic ``TGMCCKP1``, a u32 entry count, then one table entry
per array (u16 name length, UTF-8 name, u32 rows, u32 cols) followed by the
payloads in table order as little-endian float32, row-major. Vectors are
stored as a single row; the JSON sidecar (``<path>.json``) records the true
shapes plus whatever metadata the caller attaches (hyperparameters, seed),
and is required to load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .numerics import Array

CHECKPOINT_MAGIC = b"TGMCCKP1"
SIDECAR_FORMAT = "tgmc-checkpoint-v1"


class CheckpointError(ValueError):
    """Unreadable, truncated or inconsistent checkpoint data."""


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_checkpoint(path, arrays: dict[str, Array],
                    metadata: dict | None = None) -> None:
    """Write arrays plus metadata; entries are sorted by name so identical
    contents produce byte-identical files."""
    path = Path(path)
    names = sorted(arrays)
    table = []
    payloads = []
    shapes = {}
    for name in names:
        raw = name.encode("utf-8")
        if not raw or len(raw) > 0xFFFF:
            raise CheckpointError(f"bad parameter name {name!r}")
        arr = np.asarray(arrays[name])
        if arr.ndim > 2:
            raise CheckpointError(f"{name}: checkpoint arrays must be <= 2-D, "
                                  f"got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"{name}: non-finite values")
        shapes[name] = list(arr.shape)
        flat = np.ascontiguousarray(arr, dtype="<f4").reshape(1, -1) \
            if arr.ndim < 2 else np.ascontiguousarray(arr, dtype="<f4")
        table.append((raw, flat.shape[0], flat.shape[1]))
        payloads.append(flat)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(table)))
        for raw, rows, cols in table:
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<II", rows, cols))
        for flat in payloads:
            fh.write(flat.tobytes())
    meta = dict(metadata or {})
    meta["format"] = SIDECAR_FORMAT
    meta["shapes"] = shapes
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return data


def load_checkpoint(path) -> tuple[dict[str, Array], dict]:
    """Read back (arrays, metadata); arrays come out float32 in the shapes
    recorded by the sidecar."""
    path = Path(path)
    side = sidecar_path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if not side.exists():
        raise CheckpointError(f"missing metadata sidecar {side}")
    with open(side, encoding="utf-8") as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"unreadable sidecar {side}: {exc}") from exc
    if meta.get("format") != SIDECAR_FORMAT:
        raise CheckpointError(f"unexpected sidecar format {meta.get('format')!r}")
    shapes = meta.get("shapes", {})
    arrays = {}
    with open(path, "rb") as fh:
        if _read_exact(fh, len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "entry count"))
        table = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, "name length"))
            name = _read_exact(fh, name_len, "name").decode("utf-8")
            rows, cols = struct.unpack("<II", _read_exact(fh, 8, "dims"))
            table.append((name, rows, cols))
        for name, rows, cols in table:
            payload = _read_exact(fh, 4 * rows * cols, f"payload of {name}")
            arr = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
            if name in shapes:
                want = tuple(shapes[name])
                if int(np.prod(want, dtype=np.int64)) != arr.size:
                    raise CheckpointError(
                        f"{name}: sidecar shape {want} does not match "
                        f"{arr.size} stored values")
                arr = arr.reshape(want)
            arrays[name] = arr.astype(np.float32)
        if fh.read(1):
            raise CheckpointError("trailing bytes after last payload")
    missing = set(shapes) - set(arrays)
    if missing:
        raise CheckpointError(f"sidecar lists arrays absent from container: "
                              f"{sorted(missing)}")
    return arrays, meta
