"""Imposter score distributions and FMR-indexed decision thresholds."""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError
from .popio import Population, default_threads
from .templates import DEFAULT_SHIFT_RANGE, probe_scores


def score_matrix(p: Population, shift_range: int = DEFAULT_SHIFT_RANGE, threads: int | None = None) -> np.ndarray:
    """Symmetric N x N matrix of best-shift scores; NaN marks incomparable pairs and the diagonal."""
    n = len(p)
    out = np.full((n, n), np.nan)

    def _row(i):
        if i + 1 >= n:
            return i, np.empty(0)
        s, _, _, _ = probe_scores(p[i], p.codes[i + 1:], p.masks[i + 1:], shift_range)
        return i, s

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(_row, range(n)))
    else:
        rows = [_row(i) for i in range(n)]
    for i, s in rows:
        out[i, i + 1:] = s
        out[i + 1:, i] = s
    return out


@dataclass(frozen=True, eq=False)
class ScoreDistribution:
    scores: np.ndarray
    pair_count: int
    incomparable_count: int = 0

    def __post_init__(self):
        s = np.sort(np.asarray(self.scores, dtype=float))
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)
        if self.pair_count != len(s) + self.incomparable_count:
            raise CalibrationError("pair_count must equal scored pairs plus incomparable pairs")

    def __len__(self) -> int:
        return len(self.scores)

    @classmethod
    def from_scores(cls, scores) -> "ScoreDistribution":
        s = np.asarray(scores, dtype=float)
        return cls(s, len(s), 0)


def imposter_scores(
    p: Population,
    shift_range: int = DEFAULT_SHIFT_RANGE,
    matrix: np.ndarray | None = None,
) -> ScoreDistribution:
    """One score per unordered cross-identity sample pair.

    A precomputed :func:`score_matrix` may be passed to avoid rescoring.
    """
    if len(p.identity_index) < 2:
        raise CalibrationError("imposter scores need at least two identities")
    if matrix is None:
        matrix = score_matrix(p, shift_range)
    lab = p.identity_labels
    iu, ju = np.triu_indices(len(p), k=1)
    cross = lab[iu] != lab[ju]
    vals = matrix[iu[cross], ju[cross]]
    ok = ~np.isnan(vals)
    return ScoreDistribution(vals[ok], int(cross.sum()), int((~ok).sum()))


@dataclass(frozen=True)
class Threshold:
    """Decision threshold chosen for a requested FMR.

    ``no_match`` flags the sentinel case where even the smallest imposter
    score exceeds the budget; ``tau`` then sits just below that score.
    """

    tau: float
    fmr: float
    achieved_fmr: float
    no_match: bool = False

    def __float__(self) -> float:
        return self.tau


def _budget(fmr: float, n: int) -> int:
    # largest c with c / n <= fmr in float arithmetic
    c = min(n, int(math.floor(fmr * n)))
    while c < n and (c + 1) / n <= fmr:
        c += 1
    while c > 0 and c / n > fmr:
        c -= 1
    return c


def threshold_at_fmr(d: ScoreDistribution, fmr: float) -> Threshold:
    """Largest observed score whose empirical FMR does not exceed ``fmr``."""
    if len(d) == 0:
        raise CalibrationError("empty score distribution")
    if not 0.0 < fmr <= 1.0:
        raise ValueError("fmr must lie in (0, 1]")
    s = d.scores
    n = len(s)
    c = _budget(fmr, n)
    if c > 0:
        v = s[c - 1]
        # step below any tie group that would push the count past the budget
        while bisect_right(s, v) > c:
            lo = bisect_left(s, v)
            if lo == 0:
                break
            v = s[lo - 1]
        if bisect_right(s, v) <= c:
            return Threshold(float(v), fmr, bisect_right(s, v) / n)
    return Threshold(math.nextafter(float(s[0]), -math.inf), fmr, 0.0, no_match=True)


def fmr_at_threshold(d: ScoreDistribution, tau: float) -> float:
    if len(d) == 0:
        raise CalibrationError("empty score distribution")
    return bisect_right(d.scores, float(tau)) / len(d)


def export_scores(d: ScoreDistribution, path) -> None:
    """One score per line, ascending, repr precision."""
    with open(path, "w") as fh:
        for v in d.scores:
            fh.write(f"{float(v)!r}\n")
