"""Compression distance, bit statistics and bit-frequency maps."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .templates import BitGrid, IrisTemplate, density

ZLIB_LEVEL = 9
NCD_MAX = 1.1


def compressor_identity() -> str:
    return f"zlib {zlib.ZLIB_RUNTIME_VERSION} level {ZLIB_LEVEL}"


def compressed_size(data: bytes) -> int:
    return len(zlib.compress(data, ZLIB_LEVEL))


def _payload(x: BitGrid | IrisTemplate, include_mask: bool) -> bytes:
    if isinstance(x, IrisTemplate):
        return x.code.tobytes() + (x.mask.tobytes() if include_mask else b"")
    return x.tobytes()


def ncd(a: BitGrid | IrisTemplate, b: BitGrid | IrisTemplate, include_mask: bool = False) -> float:
    """Normalized compression distance between the packed bytes of two codes.

    (C(ab) - min(C(a), C(b))) / max(C(a), C(b)), clamped to [0, 1.1].
    """
    xa, xb = _payload(a, include_mask), _payload(b, include_mask)
    ca, cb = compressed_size(xa), compressed_size(xb)
    cab = compressed_size(xa + xb)
    val = (cab - min(ca, cb)) / max(ca, cb)
    return float(min(max(val, 0.0), NCD_MAX))


@dataclass(frozen=True)
class BitStats:
    code_mean: float
    code_std: float
    mask_mean: float
    mask_std: float
    count: int = 0


def bit_stats(ts: Sequence[IrisTemplate]) -> BitStats:
    """Mean and population std of per-template 1-bit density, for codes and masks."""
    if len(ts) == 0:
        raise ValueError("bit_stats needs at least one template")
    cd = np.array([density(t.code) for t in ts])
    md = np.array([density(t.mask) for t in ts])
    return BitStats(float(cd.mean()), float(cd.std()), float(md.mean()), float(md.std()), len(ts))


def frequency_map(ts: Sequence[IrisTemplate], use_mask: bool = False) -> np.ndarray:
    """Per-cell fraction of templates whose bit is 1 (of the code, or the mask)."""
    if len(ts) == 0:
        raise ValueError("frequency_map needs at least one template")
    shape = ts[0].shape
    total = np.zeros(shape, dtype=np.int64)
    for t in ts:
        if t.shape != shape:
            raise DimensionError(f"shape mismatch: {t.shape} vs {shape}")
        total += (t.mask if use_mask else t.code).to_bits()
    return total / len(ts)


def write_matrix(m: np.ndarray, path) -> None:
    with open(path, "w") as fh:
        for row in np.atleast_2d(m):
            fh.write(" ".join(f"{v:.6f}" for v in row) + "\n")


def write_pgm(m: np.ndarray, path) -> None:
    """Binary portable graymap (P5), maxval 255; value v maps to round(255 v)."""
    m = np.atleast_2d(m)
    pix = np.clip(np.rint(m * 255), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{m.shape[1]} {m.shape[0]}\n255\n".encode("ascii"))
        fh.write(pix.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = open(path, "rb").read()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary graymap")
    w, h = (int(x) for x in dims.split())
    maxval = int(maxval)
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w) / maxval
