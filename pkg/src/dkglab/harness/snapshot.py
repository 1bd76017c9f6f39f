"""Binary snapshot files.

Layout, all little-endian:

    magic      4 bytes   b"DKG2"
    version    u32       FORMAT_VERSION
    n          u32       grid points per axis
    L          f64       half width
    t          f64       time
    count      u32       number of fields
    per field:
        name length u32, UTF-8 name,
        kind u32 (0 = real64, 1 = complex128 with interleaved re/im),
        n*n row-major values
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..evolver import SimState
from ..field_grid import SpectralGrid

MAGIC = b"DKG2"
FORMAT_VERSION = 1
KIND_REAL = 0
KIND_COMPLEX = 1
_DTYPES = {KIND_REAL: np.dtype("<f8"), KIND_COMPLEX: np.dtype("<c16")}


class SnapshotError(ValueError):
    pass


def _fields(state: SimState) -> list[tuple[str, np.ndarray]]:
    out = [("psi_0", state.psi[0]), ("psi_1", state.psi[1]), ("v", state.v), ("vt", state.vt)]
    if state.has_aux:
        out += [("Psi_0", state.Psi[0]), ("Psi_1", state.Psi[1]), ("Psit_0", state.Psit[0]), ("Psit_1", state.Psit[1])]
    return out


def encode(state: SimState) -> bytes:
    g = state.grid
    fields = _fields(state)
    parts = [MAGIC, struct.pack("<IIddI", FORMAT_VERSION, g.n, g.L, state.t, len(fields))]
    for name, arr in fields:
        raw = name.encode("utf-8")
        kind = KIND_COMPLEX if np.iscomplexobj(arr) else KIND_REAL
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", kind))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise SnapshotError(f"truncated snapshot: needed {size} bytes at offset {self.pos}, file has {len(self.data)}")
        chunk = self.data[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_header(data: bytes) -> dict:
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise SnapshotError("bad magic: not a DKG2 snapshot")
    version, n, L, t, count = r.unpack("<IIddI")
    if version != FORMAT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}; this build reads version {FORMAT_VERSION}")
    return {"version": version, "n": n, "L": L, "t": t, "count": count, "_offset": r.pos}


def decode_fields(data: bytes) -> tuple[dict, dict[str, np.ndarray]]:
    head = decode_header(data)
    r = _Reader(data)
    r.pos = head.pop("_offset")
    n = head["n"]
    fields = {}
    for _ in range(head["count"]):
        (length,) = r.unpack("<I")
        try:
            name = r.take(length).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SnapshotError(f"field name is not valid UTF-8 at offset {r.pos - length}") from exc
        (kind,) = r.unpack("<I")
        if kind not in _DTYPES:
            raise SnapshotError(f"field {name!r} has unknown kind code {kind}")
        dtype = _DTYPES[kind]
        fields[name] = np.frombuffer(r.take(n * n * dtype.itemsize), dtype=dtype).reshape(n, n).astype(dtype.newbyteorder("="))
    if r.pos != len(data):
        raise SnapshotError(f"{len(data) - r.pos} trailing bytes after the last field")
    return head, fields


def decode(data: bytes) -> SimState:
    head, f = decode_fields(data)
    missing = {"psi_0", "psi_1", "v", "vt"} - f.keys()
    if missing:
        raise SnapshotError(f"snapshot lacks fields {sorted(missing)}")
    try:
        grid = SpectralGrid(head["n"], head["L"])
    except ValueError as exc:
        raise SnapshotError(f"snapshot header describes an invalid grid: {exc}") from exc
    Psi = Psit = None
    if "Psi_0" in f:
        Psi = np.stack([f["Psi_0"], f["Psi_1"]])
        Psit = np.stack([f["Psit_0"], f["Psit_1"]])
    return SimState(grid, head["t"], np.stack([f["psi_0"], f["psi_1"]]), f["v"], f["vt"], Psi, Psit)


def write_snapshot(state: SimState, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode(state))
    tmp.replace(path)
    return path


def read_snapshot(path: str | Path) -> SimState:
    return decode(Path(path).read_bytes())


def snapshot_roundtrip(state: SimState, path: str | Path) -> SimState:
    write_snapshot(state, path)
    return read_snapshot(path)


def describe(path: str | Path) -> dict:
    """Header and per-field summary for inspect-snapshot."""
    head, fields = decode_fields(Path(path).read_bytes())
    head["fields"] = [
        {"name": k, "kind": "complex128" if np.iscomplexobj(a) else "real64", "max_abs": float(np.abs(a).max())}
        for k, a in fields.items()
    ]
    return head
