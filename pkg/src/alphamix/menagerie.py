"""Coverage (the attack reward) and wolf selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .calibration import score_matrix
from .errors import DimensionError
from .popio import Population
from .templates import DEFAULT_SHIFT_RANGE, IrisTemplate, probe_scores


@dataclass(frozen=True)
class CoverageReport:
    sample_matches: int
    identity_matches: int
    matched_identities: frozenset
    threshold: float
    fmr_label: float | None = None
    identity_total: int = 0
    sample_total: int = 0

    @property
    def identity_fraction(self) -> float:
        """Share of evaluated identities with at least one matching sample."""
        return self.identity_matches / self.identity_total if self.identity_total else 0.0


def match_vector(t: IrisTemplate, p: Population, tau: float, shift_range: int = DEFAULT_SHIFT_RANGE) -> np.ndarray:
    """Boolean vector over samples of ``p``: score <= tau (incomparable is False)."""
    if t.shape != p.shape:
        raise DimensionError(f"template shape {t.shape} vs population {p.shape}")
    scores, _, _, _ = probe_scores(t, p.codes, p.masks, shift_range)
    with np.errstate(invalid="ignore"):
        return scores <= tau


def coverage(
    t: IrisTemplate,
    p: Population,
    tau: float,
    exclude_identities: Iterable[str] = (),
    shift_range: int = DEFAULT_SHIFT_RANGE,
    fmr_label: float | None = None,
    matches: np.ndarray | None = None,
) -> CoverageReport:
    """Sample- and identity-level coverage of ``t`` over ``p`` at threshold ``tau``.

    ``matches`` short-circuits scoring when the match vector is already known.
    """
    if matches is None:
        matches = match_vector(t, p, tau, shift_range)
    keep = ~p.identity_mask(exclude_identities)
    hit = matches & keep
    matched = frozenset(p.samples[i].identity_id for i in np.flatnonzero(hit))
    idents = {p.samples[i].identity_id for i in np.flatnonzero(keep)}
    return CoverageReport(
        sample_matches=int(hit.sum()),
        identity_matches=len(matched),
        matched_identities=matched,
        threshold=float(tau),
        fmr_label=fmr_label,
        identity_total=len(idents),
        sample_total=int(keep.sum()),
    )


@dataclass(frozen=True)
class WolfRecord:
    sample: IrisTemplate
    false_match_count: int
    matched_identities: frozenset

    @property
    def key(self) -> tuple[str, str]:
        return (self.sample.identity_id, self.sample.sample_id)


def false_match_counts(
    p: Population, tau: float, matrix: np.ndarray
) -> tuple[np.ndarray, list[frozenset]]:
    """Per-sample count of foreign samples scoring <= tau, plus the identities hit."""
    lab = p.identity_labels
    with np.errstate(invalid="ignore"):
        hit = (matrix <= tau) & (lab[:, None] != lab[None, :])
    counts = hit.sum(axis=1)
    idents = [frozenset(p.samples[j].identity_id for j in np.flatnonzero(row)) for row in hit]
    return counts, idents


def select_wolves(
    train: Population,
    tau: float,
    min_matches: int = 1,
    max_per_identity: int = 1,
    max_wolves: int | None = None,
    shift_range: int = DEFAULT_SHIFT_RANGE,
    matrix: np.ndarray | None = None,
) -> list[WolfRecord]:
    """Samples that falsely match at least ``min_matches`` foreign samples, strongest first.

    Ties in count are broken by (identity_id, sample_id).  At most
    ``max_per_identity`` wolves are kept per identity.
    """
    if matrix is None:
        matrix = score_matrix(train, shift_range)
    counts, idents = false_match_counts(train, tau, matrix)
    order = sorted(
        (i for i in range(len(train)) if counts[i] >= min_matches),
        key=lambda i: (-int(counts[i]), train[i].identity_id, train[i].sample_id),
    )
    taken: dict[str, int] = {}
    wolves = []
    for i in order:
        ident = train[i].identity_id
        if taken.get(ident, 0) >= max_per_identity:
            continue
        taken[ident] = taken.get(ident, 0) + 1
        wolves.append(WolfRecord(train[i], int(counts[i]), idents[i]))
        if max_wolves is not None and len(wolves) >= max_wolves:
            break
    return wolves


def export_wolves(wolves: Sequence[WolfRecord], path) -> None:
    with open(path, "w") as fh:
        fh.write("identity_id\tsample_id\tfalse_matches\tidentities_matched\n")
        for w in wolves:
            fh.write(f"{w.sample.identity_id}\t{w.sample.sample_id}\t{w.false_match_count}\t{len(w.matched_identities)}\n")
