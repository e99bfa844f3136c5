"""Packed binary templates, bitwise mixing and masked fractional Hamming matching.

Bits are stored row-major, one ``uint8`` storage word per 8 columns, most
significant bit first.  The padding bits at the end of every row are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from .errors import ArityError, DimensionError

__all__ = [
    "BitGrid",
    "IrisTemplate",
    "MatchOutcome",
    "Op",
    "MaskPolicy",
    "DEFAULT_SHIFT_RANGE",
    "bitwise_mix",
    "density",
    "hamming_distance",
    "shift_order",
    "probe_scores",
    "rotate_columns",
]

DEFAULT_SHIFT_RANGE = 8


class Op(str, Enum):
    AND = "AND"
    OR = "OR"
    XOR = "XOR"

    @property
    def ufunc(self):
        return {Op.AND: np.bitwise_and, Op.OR: np.bitwise_or, Op.XOR: np.bitwise_xor}[self]


OP_ORDER = (Op.AND, Op.OR, Op.XOR)


class MaskPolicy(str, Enum):
    SAME_OPERATOR = "same"
    INTERSECTION = "intersection"


def _row_bytes(cols: int) -> int:
    return (cols + 7) // 8


@dataclass(frozen=True, eq=False)
class BitGrid:
    """Immutable rows x cols bit matrix backed by packed bytes."""

    rows: int
    cols: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise DimensionError(f"grid shape must be positive, got {self.rows}x{self.cols}")
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.shape != (self.rows, _row_bytes(self.cols)):
            raise DimensionError(
                f"packed data shape {data.shape} does not fit {self.rows}x{self.cols}"
            )
        pad = 8 * data.shape[1] - self.cols
        if pad and np.any(data[:, -1] & np.uint8((1 << pad) - 1)):
            raise ValueError("padding bits must be zero")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_bits(cls, bits) -> "BitGrid":
        arr = np.asarray(bits)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2:
            raise DimensionError("bit matrix must be 2-D")
        arr = arr.astype(bool)
        return cls(arr.shape[0], arr.shape[1], np.packbits(arr, axis=1, bitorder="big"))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitGrid":
        return cls(rows, cols, np.zeros((rows, _row_bytes(cols)), dtype=np.uint8))

    @classmethod
    def ones(cls, rows: int, cols: int) -> "BitGrid":
        return cls.from_bits(np.ones((rows, cols), dtype=bool))

    @classmethod
    def from_bytes(cls, rows: int, cols: int, raw: bytes) -> "BitGrid":
        expected = rows * _row_bytes(cols)
        if len(raw) != expected:
            raise DimensionError(f"expected {expected} bytes for {rows}x{cols}, got {len(raw)}")
        return cls(rows, cols, np.frombuffer(raw, dtype=np.uint8).reshape(rows, -1))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def to_bits(self) -> np.ndarray:
        """Unpacked boolean array of shape (rows, cols)."""
        return np.unpackbits(self.data, axis=1, count=self.cols, bitorder="big").astype(bool)

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def count(self) -> int:
        return int(np.bitwise_count(self.data).sum())

    def invert(self) -> "BitGrid":
        return BitGrid.from_bits(~self.to_bits())

    def __eq__(self, other):
        if not isinstance(other, BitGrid):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    def __hash__(self):
        return hash((self.rows, self.cols, self.data.tobytes()))


def density(g: BitGrid) -> float:
    """Fraction of 1-bits in the grid."""
    return g.count() / (g.rows * g.cols)


def rotate_columns(g: BitGrid, shift: int) -> BitGrid:
    """Circularly rotate every row by ``shift`` columns (positive moves bits right)."""
    if shift % g.cols == 0:
        return g
    return BitGrid.from_bits(np.roll(g.to_bits(), shift, axis=1))


@dataclass(frozen=True)
class IrisTemplate:
    code: BitGrid
    mask: BitGrid
    sample_id: str = ""
    identity_id: str = ""

    def __post_init__(self):
        if self.code.shape != self.mask.shape:
            raise DimensionError(
                f"code {self.code.shape} and mask {self.mask.shape} shapes differ"
            )

    @classmethod
    def full_mask(cls, code: BitGrid, sample_id: str = "", identity_id: str = "") -> "IrisTemplate":
        return cls(code, BitGrid.ones(code.rows, code.cols), sample_id, identity_id)

    @property
    def shape(self) -> tuple[int, int]:
        return self.code.shape

    def same_bits(self, other: "IrisTemplate") -> bool:
        """True when code and mask agree bit-for-bit, ignoring provenance."""
        return self.code == other.code and self.mask == other.mask


@dataclass(frozen=True)
class MatchOutcome:
    """Result of a masked comparison.

    ``score`` is None for an incomparable pair (empty joint mask at every
    shift).  ``disagree``/``valid`` carry the exact ratio behind the score.
    """

    score: float | None
    shift: int = 0
    disagree: int = 0
    valid: int = 0

    @property
    def comparable(self) -> bool:
        return self.score is not None

    @property
    def kind(self) -> str:
        return "Score" if self.score is not None else "Incomparable"

    @classmethod
    def incomparable(cls) -> "MatchOutcome":
        return cls(None, 0, 0, 0)


def _check_shape(templates: Sequence[IrisTemplate]) -> None:
    shape = templates[0].shape
    for t in templates[1:]:
        if t.shape != shape:
            raise DimensionError(f"shape mismatch: {t.shape} vs {shape}")


def bitwise_mix(
    op: Op | str,
    inputs: Sequence[IrisTemplate],
    mask_policy: MaskPolicy | str = MaskPolicy.SAME_OPERATOR,
    sample_id: str | None = None,
    identity_id: str | None = None,
) -> IrisTemplate:
    """Left-fold ``op`` over the input codes (and masks, per ``mask_policy``)."""
    op = Op(op)
    mask_policy = MaskPolicy(mask_policy)
    if len(inputs) < 2:
        raise ArityError(f"mixing needs at least 2 templates, got {len(inputs)}")
    _check_shape(inputs)
    f = op.ufunc
    code = reduce(f, (t.code.data for t in inputs))
    mask_f = f if mask_policy is MaskPolicy.SAME_OPERATOR else np.bitwise_and
    mask = reduce(mask_f, (t.mask.data for t in inputs))
    rows, cols = inputs[0].shape
    if sample_id is None:
        sample_id = f"{op.value}(" + "+".join(t.sample_id for t in inputs) + ")"
    if identity_id is None:
        identity_id = f"{op.value}(" + "+".join(t.identity_id for t in inputs) + ")"
    return IrisTemplate(BitGrid(rows, cols, code), BitGrid(rows, cols, mask), sample_id, identity_id)


def shift_order(shift_range: int) -> list[int]:
    """Shifts in evaluation order: 0, -1, +1, -2, +2, ...

    On equal scores the first shift in this order is reported.
    """
    if shift_range < 0:
        raise ValueError("shift_range must be non-negative")
    out = [0]
    for s in range(1, shift_range + 1):
        out += [-s, s]
    return out


def _popcount_view(a: np.ndarray) -> np.ndarray:
    """Flatten trailing axes and widen to uint64 words when the length allows."""
    flat = a.reshape(a.shape[0], -1)
    if flat.shape[1] % 8 == 0:
        flat = np.ascontiguousarray(flat).view(np.uint64)
    return flat


def _packed_rolls(t: IrisTemplate, shifts: Iterable[int]):
    code_bits = t.code.to_bits()
    mask_bits = t.mask.to_bits()
    for s in shifts:
        yield (
            s,
            np.packbits(np.roll(code_bits, s, axis=1), axis=1, bitorder="big"),
            np.packbits(np.roll(mask_bits, s, axis=1), axis=1, bitorder="big"),
        )


def probe_scores(
    probe: IrisTemplate,
    codes: np.ndarray,
    masks: np.ndarray,
    shift_range: int = DEFAULT_SHIFT_RANGE,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Score one probe against a stack of packed gallery templates.

    ``codes`` and ``masks`` have shape (N, rows, row_bytes).  The shift ``s``
    is applied to each gallery template; internally the probe is rotated by
    ``-s`` instead, which leaves every count unchanged.

    Returns (scores, shifts, disagree, valid); incomparable entries have
    score NaN and valid 0.
    """
    n = codes.shape[0]
    if codes.shape[1:] != probe.code.data.shape or masks.shape != codes.shape:
        raise DimensionError(f"gallery shape {codes.shape[1:]} vs probe {probe.code.data.shape}")
    if shift_range >= probe.code.cols:
        raise ValueError("shift_range must be smaller than the column count")
    gc = _popcount_view(codes)
    gm = _popcount_view(masks)
    best = np.full(n, np.inf)
    best_shift = np.zeros(n, dtype=np.int64)
    best_d = np.zeros(n, dtype=np.int64)
    best_v = np.zeros(n, dtype=np.int64)
    for s, pc, pm in _packed_rolls(probe, [-s for s in shift_order(shift_range)]):
        pc = _popcount_view(pc[None])
        pm = _popcount_view(pm[None])
        vm = gm & pm
        valid = np.bitwise_count(vm).sum(axis=1, dtype=np.int64)
        dis = np.bitwise_count((gc ^ pc) & vm).sum(axis=1, dtype=np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(valid > 0, dis / np.maximum(valid, 1), np.inf)
        better = score < best
        best = np.where(better, score, best)
        best_shift = np.where(better, -s, best_shift)
        best_d = np.where(better, dis, best_d)
        best_v = np.where(better, valid, best_v)
    best[np.isinf(best)] = np.nan
    return best, best_shift, best_d, best_v


def hamming_distance(
    a: IrisTemplate, b: IrisTemplate, shift_range: int = DEFAULT_SHIFT_RANGE
) -> MatchOutcome:
    """Minimum masked fractional Hamming distance over circular column shifts of ``b``."""
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    scores, shifts, dis, valid = probe_scores(
        a, b.code.data[None], b.mask.data[None], shift_range
    )
    if np.isnan(scores[0]):
        return MatchOutcome.incomparable()
    return MatchOutcome(float(scores[0]), int(shifts[0]), int(dis[0]), int(valid[0]))
