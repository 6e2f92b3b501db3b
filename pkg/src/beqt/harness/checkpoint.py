"""Binary checkpoints.

Layout (all little-endian)::

    b"BEQT"                 magic
    u32 version             FORMAT_VERSION
    u32 N, u32 dim
    f64 t
    f64 x 8                 a, b, c, L, Gamma, nu, xi, galerkin_n (-1 = unset)
    field block (Q), field block (u)

A field block is ``u32 ncomp, u32 N`` followed by ``ncomp * N * N``
complex coefficients stored as ``(re, im)`` f64 pairs, component-major then
row-major over the full ``N x N`` mode array (unnormalized storage order of
``numpy.fft.fft2``; coefficients are normalized by ``1/N^2``).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from ..evolution import SimState
from ..spectral import QTensorField, SpectralGrid, VectorField, full_spectrum, half_spectrum
from ..tensor_core import NCOMP, ModelParams

MAGIC = b"BEQT"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sIIId")
_PARAMS = struct.Struct("<8d")
_BLOCK = struct.Struct("<II")


class CheckpointError(ValueError):
    """Malformed, truncated or unsupported checkpoint."""


def _block(hat: np.ndarray) -> bytes:
    full = full_spectrum(hat)
    ncomp, N = full.shape[0], full.shape[-1]
    data = np.ascontiguousarray(full, dtype="<c16").tobytes()
    return _BLOCK.pack(ncomp, N) + data


def encode(state: SimState) -> bytes:
    p = state.params
    g = state.grid
    gn = -1.0 if state.galerkin_n is None else float(state.galerkin_n)
    head = _HEAD.pack(MAGIC, FORMAT_VERSION, g.N, p.dim, float(state.t))
    params = _PARAMS.pack(p.a, p.b, p.c, p.L, p.Gamma, p.nu, p.xi, gn)
    return head + params + _block(state.Q.hat) + _block(state.u.hat)


def write_checkpoint(state: SimState, path) -> Path:
    """Write atomically (temporary file then rename)."""
    path = Path(path)
    data = encode(state)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"truncated checkpoint while reading {what} "
                                  f"(need {n} bytes at offset {self.pos}, file has {len(self.data)})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def _read_block(r: _Reader, N: int, ncomp: int, what: str) -> np.ndarray:
    nc, n = _BLOCK.unpack(r.take(_BLOCK.size, f"{what} block header"))
    if nc != ncomp or n != N:
        raise CheckpointError(f"{what} block has ncomp={nc}, N={n}; expected ncomp={ncomp}, N={N}")
    raw = r.take(16 * nc * n * n, f"{what} coefficients")
    full = np.frombuffer(raw, dtype="<c16").reshape(nc, n, n).astype(complex)
    return half_spectrum(full)


def decode(data: bytes, dealias_rule: str = "two_thirds") -> SimState:
    r = _Reader(data)
    magic, version, N, dim, t = _HEAD.unpack(r.take(_HEAD.size, "header"))
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}; not a checkpoint")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} "
                              f"(this build reads version {FORMAT_VERSION})")
    if dim != 2:
        raise CheckpointError(f"unsupported dimension {dim}")
    a, b, c, L, Gamma, nu, xi, gn = _PARAMS.unpack(r.take(_PARAMS.size, "params"))
    try:
        params = ModelParams(a=a, b=b, c=c, L=L, Gamma=Gamma, nu=nu, xi=xi, dim=dim)
        grid = SpectralGrid(N, dim=dim, dealias_rule=dealias_rule)
    except ValueError as exc:
        raise CheckpointError(f"invalid parameters in checkpoint: {exc}") from None
    if not (gn == -1.0 or (gn >= 1 and gn == int(gn))):
        raise CheckpointError(f"invalid galerkin_n {gn}")
    Q_hat = _read_block(r, N, NCOMP[dim], "Q")
    u_hat = _read_block(r, N, dim, "u")
    if r.pos != len(data):
        raise CheckpointError(f"{len(data) - r.pos} trailing bytes after u block")
    return SimState(float(t), QTensorField(grid, Q_hat), VectorField(grid, u_hat), params,
                    None if gn == -1.0 else int(gn))


def read_checkpoint(path, dealias_rule: str = "two_thirds") -> SimState:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return decode(data, dealias_rule)
