"""File formats: field snapshots, ball masks, boundary point sets and estimate tables.

Binary field layout (all little-endian)::

    offset  size  content
    0       4     magic b"LQGF"
    4       4     u32 version (= 1)
    8       4     u32 n
    12      8     f64 spacing
    20      8     u64 seed
    28      1     u8 1 if the seed is present, else 0
    29      1     u8 normalization tag (0 raw, 1 pinned)
    30      8     f64 pinning radius (0 for raw)
    38      8     f64 calibration
    46      8n^2  f64 values, row-major
"""

from __future__ import annotations

import csv
import gzip
import json
import math
import struct
from pathlib import Path

import numpy as np

from .gff import RAW, FieldGrid, Normalization

MAGIC = b"LQGF"
VERSION = 1
_HEADER = struct.Struct("<4sIIdQBBdd")
MAX_JSON_N = 128  # compressed JSON is meant for small grids only


def _normalization_from(tag: int, radius: float) -> Normalization:
    if tag == 0:
        return RAW
    if tag == 1:
        return Normalization.pinned(radius)
    raise ValueError(f"unknown normalization tag {tag}")


def write_field(f: FieldGrid, path) -> Path:
    """Write ``f`` in the binary layout; returns the path."""
    path = Path(path)
    radius = f.normalization.radius if f.normalization.kind == "pinned" else 0.0
    has_seed = f.seed is not None
    header = _HEADER.pack(MAGIC, VERSION, f.n, f.spacing, int(f.seed) if has_seed else 0, int(has_seed),
                          f.normalization.tag, radius, f.calibration)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())
    return path


def read_field(path) -> FieldGrid:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError("truncated field file")
    magic, version, n, spacing, seed, has_seed, tag, radius, cal = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a field file (bad magic)")
    if version != VERSION:
        raise ValueError(f"unsupported field file version {version}")
    payload = data[_HEADER.size:]
    if len(payload) != 8 * n * n:
        raise ValueError(f"payload has {len(payload)} bytes, expected {8 * n * n}")
    values = np.frombuffer(payload, dtype="<f8").reshape(n, n).astype(np.float64)
    return FieldGrid(n, spacing, values, seed if has_seed else None, cal,
                     _normalization_from(tag, radius))


def field_to_json(f: FieldGrid) -> dict:
    return {
        "format": "lqgball-field",
        "version": VERSION,
        "n": f.n,
        "spacing": f.spacing,
        "seed": f.seed,
        "normalization": {"kind": f.normalization.kind, "radius": f.normalization.radius},
        "calibration": f.calibration,
        "values": f.values.tolist(),
    }


def field_from_json(obj: dict) -> FieldGrid:
    if obj.get("format") != "lqgball-field":
        raise ValueError("not a field JSON document")
    norm = obj["normalization"]
    return FieldGrid(int(obj["n"]), float(obj["spacing"]), np.asarray(obj["values"], dtype=float),
                     obj["seed"], float(obj["calibration"]), Normalization(norm["kind"], norm["radius"]))


def write_field_json(f: FieldGrid, path) -> Path:
    """Gzip-compressed JSON; floats are written with full round-trip precision."""
    if f.n > MAX_JSON_N:
        raise ValueError(f"JSON snapshots are limited to n <= {MAX_JSON_N}; use the binary format")
    path = Path(path)
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        json.dump(field_to_json(f), fh)
    return path


def read_field_json(path) -> FieldGrid:
    with gzip.open(path, "rt", encoding="utf-8") as fh:
        return field_from_json(json.load(fh))


def save_field(f: FieldGrid, path) -> Path:
    """Dispatch on suffix: ``.json.gz`` for JSON, anything else binary."""
    return write_field_json(f, path) if str(path).endswith(".json.gz") else write_field(f, path)


def load_field(path) -> FieldGrid:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_field(path)
    if head[:2] == b"\x1f\x8b":
        return read_field_json(path)
    raise ValueError(f"unrecognised field file {path}")


# --------------------------------------------------------------------------
# masks


def write_pbm(mask, path) -> Path:
    """Binary (P4) PBM; set cells are black (1).  Row 0 of the array is the first image row."""
    m = np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ValueError("mask must be 2-D")
    h, w = m.shape
    packed = np.packbits(m, axis=1)  # pads each row to a whole byte
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(f"P4\n{w} {h}\n".encode("ascii"))
        fh.write(packed.tobytes())
    return path


def read_pbm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    while len(tokens) < 3:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace before the raster
    if tokens[0] != b"P4":
        raise ValueError("only binary PBM (P4) is supported")
    w, h = int(tokens[1]), int(tokens[2])
    row_bytes = (w + 7) // 8
    raster = np.frombuffer(data[pos:pos + row_bytes * h], dtype=np.uint8).reshape(h, row_bytes)
    return np.unpackbits(raster, axis=1)[:, :w].astype(bool)


def mask_to_rle(mask) -> dict:
    """Run lengths of the row-major flattened mask, starting with a run of ``first``."""
    m = np.asarray(mask, dtype=bool)
    flat = m.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    return {"shape": list(m.shape), "first": int(flat[0]) if flat.size else 0,
            "runs": np.diff(bounds).astype(int).tolist()}


def rle_to_mask(obj: dict) -> np.ndarray:
    shape = tuple(obj["shape"])
    runs = np.asarray(obj["runs"], dtype=np.int64)
    if runs.sum() != math.prod(shape):
        raise ValueError("run lengths do not add up to the mask size")
    vals = (np.arange(runs.size) + obj["first"]) % 2
    return np.repeat(vals.astype(bool), runs).reshape(shape)


def write_rle_json(mask, path, **meta) -> Path:
    obj = mask_to_rle(mask)
    obj.update(meta)
    path = Path(path)
    path.write_text(json.dumps(obj))
    return path


def read_rle_json(path) -> np.ndarray:
    return rle_to_mask(json.loads(Path(path).read_text()))


def write_boundary_csv(cells, dist, path) -> Path:
    """Boundary cells as ``col_x`` (column index), ``col_y`` (row index) and distance."""
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, 2)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["col_x", "col_y", "dist"])
        for (r, c) in cells:
            wr.writerow([int(c), int(r), repr(float(dist[r, c]))])
    return path


def read_boundary_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    cells = rows[:, [1, 0]].astype(np.int64)
    return cells, rows[:, 2]


# --------------------------------------------------------------------------
# estimates and curves


def write_estimate_csv(est, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scale", "count", "log_scale", "log_count"])
        for s, c in zip(est.scales, est.counts):
            wr.writerow([repr(float(s)), repr(float(c)), repr(math.log(s)), repr(math.log(c))])
    return path


def write_estimate_json(est, path, **extra) -> Path:
    obj = est.summary()
    obj.update(extra)
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2))
    return path


def write_plot_data(x, y, path, header: str | None = None) -> Path:
    """Two whitespace-separated columns; non-finite values are written as ``nan``."""
    path = Path(path)
    np.savetxt(path, np.column_stack([np.asarray(x, float), np.asarray(y, float)]),
               fmt="%.17g", header=header or "", comments="# ")
    return path


SPECTRUM_HEADER = ["alpha", "count", "dim_est", "dim_stderr", "dim_pred"]


def write_spectrum_csv(alpha, count, dim_est, dim_stderr, dim_pred, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(SPECTRUM_HEADER)
        for row in zip(alpha, count, dim_est, dim_stderr, dim_pred):
            wr.writerow([repr(float(row[0])), repr(float(row[1]))] + [repr(float(v)) for v in row[2:]])
    return path
