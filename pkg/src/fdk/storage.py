"""Binary solution files.

Layout (little endian)::

    b"FDK1"
    float64 alpha, float64 sigma, float64 T
    int64 J, int64 n_cells
    uint32 length + UTF-8 nonlinearity name
    uint32 length + UTF-8 initial-datum spec
    (J + 1) * (n_cells - 1) float64: P_h u0, then U_1 ... U_J
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .fracquad import graded_grid
from .mesh_fem import FeFunction, Mesh1D
from .solver import SpaceTimeSolution

MAGIC = b"FDK1"
_HEAD = struct.Struct("<dddqq")
_LEN = struct.Struct("<I")


class CacheFormatError(ValueError):
    pass


def _write_str(fh: BinaryIO, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(_LEN.pack(len(raw)))
    fh.write(raw)


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise CacheFormatError("truncated solution file")
    return raw


def _read_str(fh: BinaryIO) -> str:
    (n,) = _LEN.unpack(_read_exact(fh, _LEN.size))
    return _read_exact(fh, n).decode("utf-8")


def dump(sol: SpaceTimeSolution, fh: BinaryIO) -> None:
    if sol.u0h is None:
        raise ValueError("solution has no projected initial datum")
    fh.write(MAGIC)
    fh.write(_HEAD.pack(sol.alpha, sol.sigma, sol.T, sol.J, sol.mesh.n_cells))
    _write_str(fh, sol.nonlinearity)
    _write_str(fh, sol.u0_spec)
    data = np.vstack([sol.u0h.coeffs[None, :], sol.values])
    fh.write(data.astype("<f8", copy=False).tobytes(order="C"))


def load(fh: BinaryIO) -> SpaceTimeSolution:
    if _read_exact(fh, 4) != MAGIC:
        raise CacheFormatError("not an FDK1 solution file")
    alpha, sigma, T, J, n_cells = _HEAD.unpack(_read_exact(fh, _HEAD.size))
    name = _read_str(fh)
    u0_spec = _read_str(fh)
    mesh = Mesh1D(int(n_cells))
    count = (J + 1) * mesh.dim
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").reshape(J + 1, mesh.dim)
    if fh.read(1):
        raise CacheFormatError("trailing bytes after solution data")
    grid = graded_grid(int(J), sigma, T)
    return SpaceTimeSolution(
        mesh=mesh,
        times=grid.times,
        values=data[1:].astype(np.float64),
        u0h=FeFunction(mesh, data[0]),
        alpha=alpha,
        sigma=sigma,
        nonlinearity=name,
        u0_spec=u0_spec,
    )


def save_solution(sol: SpaceTimeSolution, path: str | os.PathLike) -> Path:
    """Write atomically: a temporary file in the same directory is renamed into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            dump(sol, fh)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def load_solution(path: str | os.PathLike) -> SpaceTimeSolution:
    with open(path, "rb") as fh:
        return load(fh)
