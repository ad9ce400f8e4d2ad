"""Binary raster ("OPFD") and CSV export of simulated field samples.

Raster layout, all little-endian:

    bytes 0-3   magic "OPFD"
    u16         format version (1)
    u16         domain dimension d
    u16         value dimension m
    u16         number of grid axes (1 for an unstructured point list)
    u32 x axes  point counts per axis (row-major ordering of the values)
    64 bytes    ASCII hex SHA-256 configuration hash
    f64 x N*m   field values, row-major (point-major, component-minor)

CSV files carry the hash and replicate index as comment lines, then one row
per point: the d point coordinates followed by the m field values.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .fields import FieldSample

__all__ = ["RasterData", "write_raster", "read_raster", "write_csv"]

MAGIC = b"OPFD"
VERSION = 1


@dataclass(frozen=True, eq=False)
class RasterData:
    """Decoded raster: dims are the grid axis counts, values (N, m)."""

    version: int
    dim_domain: int
    dim_value: int
    dims: tuple
    config_hash: str
    values: np.ndarray


def write_raster(path, sample: FieldSample, dims=None) -> None:
    """Write one replicate as an OPFD raster.

    ``dims`` are the evaluation-grid axis counts whose row-major
    enumeration produced the sample's points; omitted, the sample is stored
    as a flat list of points.
    """
    values = np.asarray(sample.values, dtype="<f8")
    n, m = values.shape
    d = int(np.asarray(sample.points).shape[1])
    if dims is None:
        dims = (n,)
    dims = tuple(int(x) for x in dims)
    count = 1
    for x in dims:
        count *= x
    if count != n:
        raise ValueError(f"grid dims {dims} enumerate {count} points, sample has {n}")
    digest = sample.config_hash.encode("ascii")
    if len(digest) != 64:
        raise ValueError("config hash must be 64 hex characters")
    header = MAGIC + struct.pack("<HHHH", VERSION, d, m, len(dims))
    header += struct.pack(f"<{len(dims)}I", *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(digest)
        fh.write(np.ascontiguousarray(values).tobytes())


def read_raster(path) -> RasterData:
    """Decode an OPFD raster file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not an OPFD raster (bad magic)")
    version, d, m, n_axes = struct.unpack_from("<HHHH", blob, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported raster version {version}")
    offset = 12
    dims = struct.unpack_from(f"<{n_axes}I", blob, offset)
    offset += 4 * n_axes
    digest = blob[offset : offset + 64].decode("ascii")
    offset += 64
    count = 1
    for x in dims:
        count *= x
    values = np.frombuffer(blob, dtype="<f8", count=count * m, offset=offset)
    return RasterData(
        version=version,
        dim_domain=d,
        dim_value=m,
        dims=tuple(dims),
        config_hash=digest,
        values=values.reshape(count, m).copy(),
    )


def write_csv(path, sample: FieldSample) -> None:
    """Write one replicate as CSV: point coordinates then field values."""
    points = np.asarray(sample.points, dtype=float)
    values = np.asarray(sample.values, dtype=float)
    d = points.shape[1]
    m = values.shape[1]
    lines = [
        f"# config_hash={sample.config_hash}",
        f"# replicate={sample.replicate}",
        ",".join([f"t{j}" for j in range(d)] + [f"x{j}" for j in range(m)]),
    ]
    for p, v in zip(points, values):
        lines.append(",".join(repr(float(x)) for x in (*p, *v)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
