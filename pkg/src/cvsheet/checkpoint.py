"""Binary checkpoints of a :class:`~cvsheet.evolution.PlasmaState`.

Layout (all little-endian)::

    magic    8 bytes   b"CVSHEET\\x00"
    header   struct "<IIIIdQ"   version, n1, n2, n3, time, step
    payload  float64   vp, vm, Bp, Bm (3 x n1 x n2 x n3 each),
                       Qp, Qm (n1 x n2 x n3 each),
                       f.re, f.im, f_t.re, f_t.im (n1 x n2 each)
    crc      uint32    CRC-32 of header and payload

The payload is the raw state, so a write/read round trip is bit exact.
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .evolution import PlasmaState
from .spectral import FrontField, VolumeField, half_grids

MAGIC = b"CVSHEET\x00"
VERSION = 1
_HEADER = struct.Struct("<IIIIdQ")
_F8 = np.dtype("<f8")


class CheckpointError(ValueError):
    """A checkpoint file is truncated, corrupt or of an unknown version."""


def _blocks(state):
    for fld in (state.vp, state.vm, state.Bp, state.Bm, state.Qp, state.Qm):
        yield fld.data
    for ff in (state.f, state.f_t):
        yield ff.coeffs.real
        yield ff.coeffs.imag


def dumps(state, step=0):
    n1, n2, n3 = state.vp.grid.shape
    header = _HEADER.pack(VERSION, n1, n2, n3, float(state.time), int(step))
    payload = b"".join(np.ascontiguousarray(b, dtype=_F8).tobytes() for b in _blocks(state))
    body = header + payload
    return MAGIC + body + struct.pack("<I", zlib.crc32(body))


def loads(data):
    """Inverse of :func:`dumps`; returns ``(state, step)``."""
    if len(data) < len(MAGIC) + _HEADER.size + 4 or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file")
    body, crc = data[len(MAGIC):-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch")
    version, n1, n2, n3, time, step = _HEADER.unpack_from(body)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    vol, front = (n1, n2, n3), (n1, n2)
    sizes = [(3,) + vol] * 4 + [(1,) + vol] * 2 + [front] * 4
    expected = sum(int(np.prod(s)) for s in sizes) * 8
    raw = body[_HEADER.size:]
    if len(raw) != expected:
        raise CheckpointError(f"payload has {len(raw)} bytes, expected {expected}")
    arrays, off = [], 0
    for s in sizes:
        n = int(np.prod(s))
        arrays.append(np.frombuffer(raw, dtype=_F8, count=n, offset=off).reshape(s).astype(float))
        off += n * 8
    gp, gm = half_grids(n1, n2, n3)
    grids = (gp, gm, gp, gm, gp, gm)
    fields = [VolumeField(g, a) for g, a in zip(grids, arrays[:6])]
    f = FrontField(gp.torus, arrays[6] + 1j * arrays[7])
    f_t = FrontField(gp.torus, arrays[8] + 1j * arrays[9])
    return PlasmaState(*fields, f, f_t, time=time), int(step)


def save(state, path, step=0):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps(state, step))
    tmp.replace(path)
    return path


def load(path):
    return loads(Path(path).read_bytes())
