"""Markov-chain synthetic codes and simulated populations with planted wolves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecError
from .popio import Population
from .templates import BitGrid, IrisTemplate


@dataclass(frozen=True)
class HmmParams:
    """Two-state chain: each bit repeats its predecessor with probability ``alpha``."""

    alpha: float = 0.9
    rows: int = 20
    cols: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise SpecError("shape must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise SpecError("alpha must lie in [0, 1]")


def markov_bits(rng: np.random.Generator, alpha: float, rows: int, cols: int) -> np.ndarray:
    """Independent per-row chains as a bool array."""
    first = rng.random((rows, 1)) < 0.5
    flips = rng.random((rows, cols - 1)) >= alpha
    toggles = np.concatenate([first, flips], axis=1)
    return (np.cumsum(toggles, axis=1) % 2).astype(bool)


def hmm_code(p: HmmParams) -> BitGrid:
    rng = np.random.default_rng(p.seed)
    return BitGrid.from_bits(markov_bits(rng, p.alpha, p.rows, p.cols))


def hmm_codes(n: int, alpha: float = 0.9, rows: int = 20, cols: int = 512, seed: int = 0) -> list[BitGrid]:
    """``n`` codes from per-code child seeds of ``seed``."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [BitGrid.from_bits(markov_bits(np.random.default_rng(c), alpha, rows, cols)) for c in children]


@dataclass(frozen=True)
class SimPopulationSpec:
    n_identities: int = 50
    samples_per_identity: int = 4
    intra_flip_rate: float = 0.05
    wolf_count: int = 3
    wolf_blend_arity: int = 5
    mask_density: float = 0.85
    seed: int = 0
    alpha: float = 0.9
    rows: int = 20
    cols: int = 512

    def __post_init__(self):
        if self.n_identities <= 0 or self.samples_per_identity <= 0:
            raise SpecError("identity and sample counts must be positive")
        if not 0.0 <= self.intra_flip_rate < 0.5:
            raise SpecError("intra_flip_rate must lie in [0, 0.5)")
        if not 0 <= self.wolf_count <= self.n_identities:
            raise SpecError("wolf_count must lie in [0, n_identities]")
        if self.wolf_blend_arity < 3:
            raise SpecError("wolf_blend_arity must be at least 3")
        if self.wolf_count and self.wolf_blend_arity > self.n_identities - self.wolf_count:
            raise SpecError(
                f"wolf_blend_arity {self.wolf_blend_arity} exceeds the "
                f"{self.n_identities - self.wolf_count} ordinary prototypes"
            )
        if not 0.0 < self.mask_density <= 1.0:
            raise SpecError("mask_density must lie in (0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise SpecError("alpha must lie in [0, 1]")


def majority_vote(bits: np.ndarray) -> np.ndarray:
    """Bitwise majority over axis 0; ties take the first input's bit."""
    votes = bits.sum(axis=0, dtype=np.int64) * 2
    k = bits.shape[0]
    return np.where(votes == k, bits[0], votes > k)


def identity_name(i: int, width: int) -> str:
    return f"{i:0{width}d}"


def synth_population(spec: SimPopulationSpec) -> Population:
    """Population of HMM prototypes plus noisy samples, with ``wolf_count`` planted wolves.

    Wolf identities are picked at random; their prototypes are majority votes
    over ``wolf_blend_arity`` ordinary prototypes.  ``meta['wolf_identities']``
    lists them.  Every identity draws from its own child seed, so output does
    not depend on generation order.
    """
    root = np.random.SeedSequence(spec.seed)
    layout_seq, *ident_seqs = root.spawn(spec.n_identities + 1)
    layout = np.random.default_rng(layout_seq)
    wolves = sorted(int(i) for i in layout.choice(spec.n_identities, spec.wolf_count, replace=False))
    wolf_set = set(wolves)
    ordinary = [i for i in range(spec.n_identities) if i not in wolf_set]

    shape = (spec.rows, spec.cols)
    protos: dict[int, np.ndarray] = {}
    rngs = [np.random.default_rng(s) for s in ident_seqs]
    for i in ordinary:
        protos[i] = markov_bits(rngs[i], spec.alpha, *shape)
    blends = {}
    for i in wolves:
        chosen = rngs[i].choice(len(ordinary), spec.wolf_blend_arity, replace=False)
        blends[i] = [ordinary[c] for c in chosen]
        protos[i] = majority_vote(np.stack([protos[j] for j in blends[i]]))

    width = len(str(spec.n_identities - 1))
    sw = len(str(spec.samples_per_identity - 1))
    samples = []
    for i in range(spec.n_identities):
        ident = identity_name(i, width)
        rng = rngs[i]
        for s in range(spec.samples_per_identity):
            flips = rng.random(shape) < spec.intra_flip_rate
            mask = rng.random(shape) < spec.mask_density
            code = protos[i] ^ flips
            samples.append(
                IrisTemplate(BitGrid.from_bits(code), BitGrid.from_bits(mask), f"{ident}_{s:0{sw}d}", ident)
            )
    meta = {
        "wolf_identities": [identity_name(i, width) for i in wolves],
        "wolf_blends": {identity_name(i, width): [identity_name(j, width) for j in blends[i]] for i in wolves},
    }
    return Population(tuple(samples), meta=meta)


def hmm_population(n: int, alpha: float = 0.9, rows: int = 20, cols: int = 512, seed: int = 0) -> Population:
    """``n`` full-mask HMM codes, one identity each."""
    width = len(str(max(n - 1, 0)))
    codes = hmm_codes(n, alpha, rows, cols, seed)
    return Population(tuple(
        IrisTemplate.full_mask(c, f"hmm{i:0{width}d}", f"hmm{i:0{width}d}") for i, c in enumerate(codes)
    ))
