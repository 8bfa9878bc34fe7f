"""Field serialisation and atomic file output."""
from __future__ import annotations

import contextlib
import csv
import os
import struct
import tempfile

import numpy as np

from .errors import ValidationError

MAGIC = b"FLATFLD1"


@contextlib.contextmanager
def atomic_open(path, mode: str = "w", **kwargs):
    """Write to a temporary file beside ``path`` and rename it into place on success."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _runs(mask: np.ndarray) -> np.ndarray:
    """Run lengths of the flattened mask, starting with an exterior run (may be 0)."""
    flat = mask.reshape(-1).astype(np.int8)
    edges = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate([[0], edges, [flat.size]])
    lengths = np.diff(bounds)
    if flat.size and flat[0]:
        lengths = np.concatenate([[0], lengths])
    return lengths.astype(np.uint64)


def field_to_bytes(g, u: np.ndarray) -> bytes:
    """Header (dim, shape, h, origin, mirror flags, mask runs) + interior float64 values."""
    runs = _runs(g.mask)
    parts = [MAGIC, struct.pack("<I", g.dim),
             np.asarray(g.shape, dtype="<i8").tobytes(),
             struct.pack("<d", g.h),
             np.asarray(g.origin, dtype="<f8").tobytes(),
             np.asarray(g.mirror, dtype="u1").tobytes(),
             struct.pack("<Q", runs.size), runs.astype("<u8").tobytes(),
             np.asarray(g.gather(u), dtype="<f8").tobytes()]
    return b"".join(parts)


def field_from_bytes(data: bytes) -> dict:
    """Inverse of field_to_bytes; returns header entries and the full-shape values."""
    if data[:8] != MAGIC:
        raise ValidationError("not a flatcore field file")
    pos = 8
    (dim,) = struct.unpack_from("<I", data, pos); pos += 4
    shape = tuple(int(v) for v in np.frombuffer(data, "<i8", dim, pos)); pos += 8 * dim
    (h,) = struct.unpack_from("<d", data, pos); pos += 8
    origin = np.frombuffer(data, "<f8", dim, pos).copy(); pos += 8 * dim
    mirror = tuple(bool(v) for v in np.frombuffer(data, "u1", dim, pos)); pos += dim
    (nruns,) = struct.unpack_from("<Q", data, pos); pos += 8
    runs = np.frombuffer(data, "<u8", nruns, pos).astype(np.int64); pos += 8 * nruns
    flags = np.zeros(runs.size, dtype=bool)
    flags[1::2] = True
    mask = np.repeat(flags, runs).reshape(shape)
    n = int(mask.sum())
    vals = np.frombuffer(data, "<f8", n, pos)
    if pos + 8 * n != len(data):
        raise ValidationError("field payload length does not match the mask")
    u = np.zeros(mask.size)
    u[np.flatnonzero(mask)] = vals
    return {"dim": dim, "shape": shape, "h": h, "origin": origin, "mirror": mirror,
            "mask": mask, "values": u.reshape(shape)}


def write_field(path, g, u: np.ndarray) -> None:
    with atomic_open(path, "wb") as fh:
        fh.write(field_to_bytes(g, u))


def read_field(path) -> dict:
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def write_field_csv(path, g, u: np.ndarray) -> None:
    """One row per interior cell: centre coordinates then value."""
    names = [f"x{d}" for d in range(g.dim)] + ["value"]
    with atomic_open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for x, v in zip(g.centers, g.gather(u)):
            w.writerow([repr(float(c)) for c in x] + [repr(float(v))])
