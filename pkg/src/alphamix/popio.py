"""Populations of labelled templates, file formats and split protocols.

Binary template layout (all integers big-endian)::

    offset 0  b"AIRC"      magic
    offset 4  u8           format version (1)
    offset 5  u16          rows
    offset 7  u16          cols
    offset 9  code bytes   rows * ceil(cols / 8), row-major, MSB first
    ...       mask bytes   same size as the code block

The manifest is tab-separated text with a header line
``identity_id  sample_id  path``; relative paths resolve against the
manifest's directory.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ManifestError, SplitError, TemplateFormatError
from .templates import BitGrid, IrisTemplate, density

log = logging.getLogger(__name__)

MAGIC = b"AIRC"
FORMAT_VERSION = 1
_HEADER = struct.Struct(">4sBHH")
MANIFEST_FIELDS = ("identity_id", "sample_id", "path")
THREADS_ENV = "ALPHAMIX_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# --------------------------------------------------------------------------
# single-template formats


def encode_template(t: IrisTemplate) -> bytes:
    rows, cols = t.shape
    if rows > 0xFFFF or cols > 0xFFFF:
        raise DimensionError("template shape does not fit the 16-bit header fields")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, rows, cols) + t.code.tobytes() + t.mask.tobytes()


def decode_template(raw: bytes, source: str = "<bytes>", sample_id: str = "", identity_id: str = "") -> IrisTemplate:
    if len(raw) < _HEADER.size:
        raise TemplateFormatError(f"{source}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise TemplateFormatError(f"{source}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise TemplateFormatError(f"{source}: unsupported format version {version}")
    if rows == 0 or cols == 0:
        raise TemplateFormatError(f"{source}: zero-sized template {rows}x{cols}")
    block = rows * ((cols + 7) // 8)
    body = raw[_HEADER.size:]
    if len(body) != 2 * block:
        raise TemplateFormatError(f"{source}: expected {2 * block} payload bytes, found {len(body)}")
    try:
        code = BitGrid.from_bytes(rows, cols, body[:block])
        mask = BitGrid.from_bytes(rows, cols, body[block:])
    except ValueError as exc:
        raise TemplateFormatError(f"{source}: {exc}") from exc
    return IrisTemplate(code, mask, sample_id, identity_id)


def save_template(t: IrisTemplate, path) -> None:
    Path(path).write_bytes(encode_template(t))


def read_template(path, sample_id: str = "", identity_id: str = "") -> IrisTemplate:
    path = Path(path)
    return decode_template(path.read_bytes(), str(path), sample_id, identity_id)


def parse_text_matrix(text: str, source: str = "<text>") -> BitGrid:
    """Parse '0'/'1' characters, one row per line, into a BitGrid."""
    rows = [line.strip() for line in text.splitlines()]
    rows = [r for r in rows if r]
    if not rows:
        raise TemplateFormatError(f"{source}: empty matrix")
    width = len(rows[0])
    for i, r in enumerate(rows, 1):
        if len(r) != width:
            raise TemplateFormatError(f"{source}: row {i} has {len(r)} columns, expected {width}")
        bad = set(r) - {"0", "1"}
        if bad:
            raise TemplateFormatError(f"{source}: row {i} has invalid character {sorted(bad)[0]!r}")
    bits = np.array([[c == "1" for c in r] for r in rows], dtype=bool)
    return BitGrid.from_bits(bits)


def format_text_matrix(g: BitGrid) -> str:
    return "".join("".join("1" if b else "0" for b in row) + "\n" for row in g.to_bits())


def read_text_template(code_path, mask_path=None, sample_id: str = "", identity_id: str = "") -> IrisTemplate:
    code = parse_text_matrix(Path(code_path).read_text(), str(code_path))
    if mask_path is None:
        return IrisTemplate.full_mask(code, sample_id, identity_id)
    mask = parse_text_matrix(Path(mask_path).read_text(), str(mask_path))
    if mask.shape != code.shape:
        raise TemplateFormatError(f"{mask_path}: mask shape {mask.shape} differs from code {code.shape}")
    return IrisTemplate(code, mask, sample_id, identity_id)


# --------------------------------------------------------------------------
# populations


@dataclass(frozen=True)
class AdmissibilityPolicy:
    min_code_density: float = 0.02
    max_code_density: float = 0.98
    min_mask_valid_fraction: float = 0.05

    def __post_init__(self):
        for v in (self.min_code_density, self.max_code_density, self.min_mask_valid_fraction):
            if not 0.0 <= v <= 1.0:
                raise ValueError("admissibility bounds must lie in [0, 1]")
        if self.min_code_density > self.max_code_density:
            raise ValueError("min_code_density exceeds max_code_density")

    def reason(self, t: IrisTemplate) -> str | None:
        """Why ``t`` is inadmissible, or None when it passes."""
        d = density(t.code)
        if d < self.min_code_density:
            return f"code density {d:.4f} below {self.min_code_density}"
        if d > self.max_code_density:
            return f"code density {d:.4f} above {self.max_code_density}"
        m = density(t.mask)
        if m < self.min_mask_valid_fraction:
            return f"mask valid fraction {m:.4f} below {self.min_mask_valid_fraction}"
        return None


@dataclass(frozen=True)
class Rejection:
    identity_id: str
    sample_id: str
    source: str
    reason: str


@dataclass(frozen=True, eq=False)
class Population:
    """Ordered, identity-indexed collection of same-shape templates."""

    samples: tuple[IrisTemplate, ...]
    rejections: tuple[Rejection, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        index: dict[str, list[int]] = {}
        seen: set[str] = set()
        for i, t in enumerate(samples):
            if t.shape != samples[0].shape:
                raise DimensionError(f"sample {t.sample_id!r} has shape {t.shape}, expected {samples[0].shape}")
            if t.sample_id in seen:
                raise ManifestError(f"duplicate sample_id {t.sample_id!r}")
            seen.add(t.sample_id)
            index.setdefault(t.identity_id, []).append(i)
        object.__setattr__(self, "identity_index", {k: tuple(v) for k, v in index.items()})
        if samples:
            codes = np.stack([t.code.data for t in samples])
            masks = np.stack([t.mask.data for t in samples])
        else:
            codes = masks = np.zeros((0, 0, 0), dtype=np.uint8)
        codes.setflags(write=False)
        masks.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "masks", masks)
        labels = {k: n for n, k in enumerate(index)}
        ident = np.array([labels[t.identity_id] for t in samples], dtype=np.int64)
        ident.setflags(write=False)
        object.__setattr__(self, "identity_labels", ident)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i) -> IrisTemplate:
        return self.samples[i]

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples[0].shape

    @property
    def identities(self) -> list[str]:
        """Identity ids in order of first appearance."""
        return list(self.identity_index)

    def identity_mask(self, identity_ids: Iterable[str]) -> np.ndarray:
        """Boolean mask over samples whose identity is in ``identity_ids``."""
        wanted = set(identity_ids)
        return np.array([t.identity_id in wanted for t in self.samples], dtype=bool)

    def restrict(self, identity_ids: Iterable[str]) -> "Population":
        keep = set(identity_ids)
        return Population(tuple(t for t in self.samples if t.identity_id in keep), meta=dict(self.meta))

    def find(self, sample_id: str) -> IrisTemplate:
        for t in self.samples:
            if t.sample_id == sample_id:
                return t
        raise KeyError(sample_id)


def read_manifest(manifest_path) -> list[tuple[str, str, Path]]:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ManifestError(f"{manifest_path}: manifest not found")
    base = manifest_path.parent
    lines = [ln for ln in manifest_path.read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ManifestError(f"{manifest_path}: empty manifest")
    reader = csv.reader(lines, delimiter="\t")
    header = tuple(next(reader))
    if header != MANIFEST_FIELDS:
        raise ManifestError(f"{manifest_path}: header must be {' '.join(MANIFEST_FIELDS)}, got {header}")
    records = []
    for lineno, row in enumerate(reader, 2):
        if len(row) != 3:
            raise ManifestError(f"{manifest_path}: line {lineno} has {len(row)} fields, expected 3")
        ident, sid, rel = row
        p = Path(rel)
        records.append((ident, sid, p if p.is_absolute() else base / p))
    return records


def write_manifest(records: Sequence[tuple[str, str, str]], manifest_path) -> None:
    with open(manifest_path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        w.writerows(records)


def load_population(
    manifest_path,
    policy: AdmissibilityPolicy | None = None,
    threads: int | None = None,
) -> Population:
    """Read every template listed in a manifest, in manifest order.

    Inadmissible samples (when ``policy`` is given) are dropped and recorded
    on ``Population.rejections``.
    """
    records = read_manifest(manifest_path)
    ids = [sid for _, sid, _ in records]
    if len(set(ids)) != len(ids):
        dup = next(s for s in ids if ids.count(s) > 1)
        raise ManifestError(f"{manifest_path}: duplicate sample_id {dup!r}")

    def _load(rec):
        ident, sid, path = rec
        if not path.is_file():
            raise ManifestError(f"{manifest_path}: template file {path} not found")
        return read_template(path, sid, ident)

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            templates = list(pool.map(_load, records))
    else:
        templates = [_load(r) for r in records]

    shape = templates[0].shape
    for t, (_, _, path) in zip(templates, records):
        if t.shape != shape:
            raise ManifestError(f"{path}: shape {t.shape} inconsistent with {shape}")

    kept, rejected = [], []
    for t, (_, _, path) in zip(templates, records):
        why = policy.reason(t) if policy is not None else None
        if why is None:
            kept.append(t)
        else:
            log.warning("rejected %s (%s): %s", t.sample_id, path, why)
            rejected.append(Rejection(t.identity_id, t.sample_id, str(path), why))
    if not kept:
        raise ManifestError(f"{manifest_path}: every sample was rejected")
    return Population(tuple(kept), tuple(rejected))


def save_population(p: Population, out_dir, manifest_name: str = "manifest.tsv") -> Path:
    """Write one AIRC file per sample plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    tdir = out_dir / "templates"
    tdir.mkdir(parents=True, exist_ok=True)
    records = []
    for t in p:
        fname = f"{_safe(t.sample_id)}.airc"
        save_template(t, tdir / fname)
        records.append((t.identity_id, t.sample_id, f"templates/{fname}"))
    manifest = out_dir / manifest_name
    write_manifest(records, manifest)
    return manifest


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


# --------------------------------------------------------------------------
# splits


class SplitMode(str, Enum):
    SAME_SET = "same"
    DISJOINT = "disjoint"


@dataclass(frozen=True)
class SplitSpec:
    """Identity-level train/test protocol.

    With ``seed=None`` the disjoint split takes the first identities in
    manifest order instead of a shuffled subset.
    """

    mode: SplitMode = SplitMode.SAME_SET
    train_fraction: float = 1.0
    seed: int | None = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")


def split(p: Population, spec: SplitSpec) -> tuple[Population, Population]:
    if len(p) == 0:
        raise SplitError("cannot split an empty population")
    if spec.mode is SplitMode.SAME_SET:
        return p, p
    idents = p.identities
    n_train = int(math.floor(spec.train_fraction * len(idents) + 0.5))
    if n_train <= 0 or n_train >= len(idents):
        raise SplitError(
            f"train_fraction {spec.train_fraction} gives {n_train} of {len(idents)} identities for training"
        )
    if spec.seed is None:
        chosen = idents[:n_train]
    else:
        order = np.random.default_rng(spec.seed).permutation(len(idents))
        chosen = [idents[i] for i in order[:n_train]]
    train_set = set(chosen)
    return p.restrict(train_set), p.restrict(set(idents) - train_set)
