"""Alpha-wolf enumeration, alpha-mammal hill climbing and cross-encoding evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArityError, DimensionError, SearchError
from .menagerie import CoverageReport, WolfRecord, coverage
from .popio import Population
from .templates import (
    DEFAULT_SHIFT_RANGE,
    OP_ORDER,
    IrisTemplate,
    MaskPolicy,
    Op,
    bitwise_mix,
    density,
    probe_scores,
)

log = logging.getLogger(__name__)

MAX_ENUMERATION_K = 4


class Origin(str, Enum):
    ALPHA_WOLF = "alpha-wolf"
    ALPHA_MAMMAL = "alpha-mammal"


@dataclass(frozen=True)
class SearchStep:
    iteration: int
    action: str  # "append" or "remove"
    sample_id: str
    coverage: int
    state: tuple[str, ...]


@dataclass(frozen=True)
class MixtureRecord:
    template: IrisTemplate
    operator: Op
    seed_ids: tuple[tuple[str, str], ...]
    origin: Origin
    mask_policy: MaskPolicy = MaskPolicy.SAME_OPERATOR
    trace: tuple[SearchStep, ...] = ()
    order: int = 0
    reward: int | None = None

    @property
    def k(self) -> int:
        return len(self.seed_ids)

    @property
    def seed_identities(self) -> frozenset:
        return frozenset(i for i, _ in self.seed_ids)

    @property
    def label(self) -> str:
        return f"{self.operator.value}(" + "+".join(s for _, s in self.seed_ids) + ")"


def _mix(op: Op, members: Sequence[IrisTemplate], mask_policy: MaskPolicy) -> IrisTemplate:
    if len(members) == 1:
        return members[0]
    return bitwise_mix(op, members, mask_policy)


def _record(op, members, mask_policy, origin, order=0, trace=(), reward=None) -> MixtureRecord:
    seeds = tuple((t.identity_id, t.sample_id) for t in members)
    label = f"{op.value}(" + "+".join(s for _, s in seeds) + ")"
    mixed = _mix(op, members, mask_policy)
    template = IrisTemplate(mixed.code, mixed.mask, label, label)
    return MixtureRecord(template, op, seeds, origin, mask_policy, tuple(trace), order, reward)


def remix(record: MixtureRecord, population: Population) -> IrisTemplate:
    """Rebuild a mixture from its provenance against the population it came from."""
    by_id = {t.sample_id: t for t in population}
    members = [by_id[sid] for _, sid in record.seed_ids]
    return _mix(record.operator, members, record.mask_policy)


def passes_density(t: IrisTemplate, density_filter: tuple[float, float] | None) -> bool:
    """False iff the code density falls strictly outside [lo, hi]."""
    if density_filter is None:
        return True
    lo, hi = density_filter
    d = density(t.code)
    return not (d > hi or d < lo)


def _ordered_ops(operators: Iterable) -> list[Op]:
    ops = {Op(o) for o in operators}
    if not ops:
        raise SearchError("at least one operator is required")
    return [o for o in OP_ORDER if o in ops]


# --------------------------------------------------------------------------
# alpha-wolves


def enumerate_alpha_wolves(
    wolves: Sequence[WolfRecord | IrisTemplate],
    k_values: Iterable[int] = (2, 3, 4),
    operators: Iterable = OP_ORDER,
    mask_policy: MaskPolicy | str = MaskPolicy.SAME_OPERATOR,
) -> list[MixtureRecord]:
    """All C(n, k) combinations of the seeds for each k and operator.

    Order: k ascending, combinations lexicographic in seed order, then
    AND < OR < XOR.
    """
    seeds = [w.sample if isinstance(w, WolfRecord) else w for w in wolves]
    ks = sorted(set(k_values))
    if not ks:
        raise SearchError("no k values requested")
    if ks[0] < 2:
        raise ArityError("alpha-wolves mix at least 2 seeds")
    if ks[-1] > MAX_ENUMERATION_K:
        raise SearchError(f"k is capped at {MAX_ENUMERATION_K} for enumeration")
    if len(seeds) < ks[-1]:
        raise SearchError(f"{len(seeds)} wolves cannot supply k={ks[-1]}")
    ops = _ordered_ops(operators)
    mask_policy = MaskPolicy(mask_policy)
    out = []
    for k in ks:
        for combo in combinations(seeds, k):
            for op in ops:
                out.append(_record(op, combo, mask_policy, Origin.ALPHA_WOLF, order=len(out)))
    return out


@dataclass(frozen=True)
class Evaluation:
    record: MixtureRecord
    code_density: float
    admitted: bool
    reports: Mapping[float, CoverageReport] = field(default_factory=dict)


def evaluate_mixtures(
    mixtures: Sequence[MixtureRecord],
    test: Population,
    thresholds: Mapping[float, float],
    density_filter: tuple[float, float] | None = None,
    shift_range: int = DEFAULT_SHIFT_RANGE,
    exclude_seeds: bool = True,
) -> list[Evaluation]:
    """Score every mixture once and derive coverage at each (fmr -> tau) threshold.

    Mixtures rejected by the density filter are returned with ``admitted``
    False and no reports.
    """
    out = []
    for m in mixtures:
        if m.template.shape != test.shape:
            raise DimensionError(f"mixture shape {m.template.shape} vs population {test.shape}")
        d = density(m.template.code)
        if not passes_density(m.template, density_filter):
            out.append(Evaluation(m, d, False))
            continue
        scores, _, _, _ = probe_scores(m.template, test.codes, test.masks, shift_range)
        excl = m.seed_identities if exclude_seeds else ()
        reports = {}
        for fmr, tau in thresholds.items():
            with np.errstate(invalid="ignore"):
                hits = scores <= tau
            reports[fmr] = coverage(m.template, test, tau, excl, fmr_label=fmr, matches=hits)
        out.append(Evaluation(m, d, True, reports))
    return out


def best_alpha_wolf(
    mixtures: Sequence[MixtureRecord],
    test: Population,
    tau: float,
    density_filter: tuple[float, float] | None = None,
    shift_range: int = DEFAULT_SHIFT_RANGE,
    exclude_seeds: bool = True,
    fmr_label: float | None = None,
) -> tuple[MixtureRecord, CoverageReport]:
    """Mixture with the highest identity coverage on ``test``; ties go to the earliest enumerated."""
    evals = evaluate_mixtures(mixtures, test, {fmr_label: tau}, density_filter, shift_range, exclude_seeds)
    admitted = [e for e in evals if e.admitted]
    if not admitted:
        raise SearchError("every mixture was removed by the density filter")
    best = min(admitted, key=lambda e: (-e.reports[fmr_label].identity_matches, e.record.order))
    return best.record, best.reports[fmr_label]


# --------------------------------------------------------------------------
# alpha-mammals


@dataclass(frozen=True)
class SearchConfig:
    operators: tuple[Op, ...] = OP_ORDER
    max_iterations: int = 100
    lateral_move_budget: int = 10
    lateral_cutoff_size: int = 3
    density_filter: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(_ordered_ops(self.operators)))
        if min(self.max_iterations, self.lateral_move_budget, self.lateral_cutoff_size) < 0:
            raise ValueError("search budgets must be non-negative")
        if self.density_filter is not None:
            lo, hi = self.density_filter
            if not lo < hi:
                raise ValueError("density filter needs lo < hi")


class _Rewarder:
    """Reward: count of training samples matched at tau, contributors included."""

    def __init__(self, train: Population, tau: float, op: Op, mask_policy: MaskPolicy,
                 shift_range: int, density_filter):
        self.train = train
        self.tau = tau
        self.op = op
        self.mask_policy = mask_policy
        self.shift_range = shift_range
        self.density_filter = density_filter
        self.cache: dict[tuple[int, ...], int | None] = {}

    def __call__(self, state: tuple[int, ...], use_filter: bool = True) -> int | None:
        key = (state, use_filter)
        if key in self.cache:
            return self.cache[key]
        t = _mix(self.op, [self.train[i] for i in state], self.mask_policy)
        if use_filter and not passes_density(t, self.density_filter):
            val = None
        else:
            scores, _, _, _ = probe_scores(t, self.train.codes, self.train.masks, self.shift_range)
            with np.errstate(invalid="ignore"):
                val = int((scores <= self.tau).sum())
        self.cache[key] = val
        return val


def hill_climb(
    train: Population,
    tau: float,
    operator: Op | str,
    config: SearchConfig = SearchConfig(),
    mask_policy: MaskPolicy | str = MaskPolicy.SAME_OPERATOR,
    shift_range: int = DEFAULT_SHIFT_RANGE,
) -> MixtureRecord:
    """Greedy append/remove local search over the set of mixed samples.

    Each iteration scans single-sample appends (manifest order) then
    single-sample removals (state order) and takes the best unvisited
    neighbour, first scanned winning ties.  Equal-coverage (lateral) moves
    are accepted only while the current set has at most
    ``config.lateral_cutoff_size`` members and the lateral budget lasts;
    larger sets need a strict improvement.  The search also stops once
    every training sample is covered, since no move can improve on that.
    """
    op = Op(operator)
    mask_policy = MaskPolicy(mask_policy)
    n = len(train)
    reward = _Rewarder(train, tau, op, mask_policy, shift_range, config.density_filter)
    state: tuple[int, ...] = ()
    current = 0
    visited = {frozenset()}
    lateral_used = 0
    trace: list[SearchStep] = []

    for iteration in range(1, config.max_iterations + 1):
        best = None  # (coverage, state, action, sample index)
        neighbours = [("append", state + (k,), k) for k in range(n) if k not in state]
        if len(state) > 1:
            neighbours += [("remove", tuple(i for i in state if i != k), k) for k in state]
        for action, cand, k in neighbours:
            if frozenset(cand) in visited:
                continue
            cov = reward(cand)
            if cov is None:
                continue
            if best is None or cov > best[0]:
                best = (cov, cand, action, k)
        if best is None and not state:
            # every single sample failed the density filter; fall back to the best raw sample
            for k in range(n):
                cov = reward((k,), use_filter=False)
                if best is None or cov > best[0]:
                    best = (cov, (k,), "append", k)
        if best is None:
            break
        cov, cand, action, k = best
        if state and cov <= current:
            lateral_ok = (
                cov == current
                and len(state) <= config.lateral_cutoff_size
                and lateral_used < config.lateral_move_budget
            )
            if not lateral_ok:
                break
            lateral_used += 1
        visited.add(frozenset(cand))
        state, current = cand, cov
        trace.append(SearchStep(iteration, action, train[k].sample_id, cov,
                                tuple(train[i].sample_id for i in state)))
        log.debug("iter %d %s %s -> %d", iteration, action, train[k].sample_id, cov)
        if current >= n:
            break

    members = [train[i] for i in state]
    return _record(op, members, mask_policy, Origin.ALPHA_MAMMAL, trace=trace, reward=current)


def alpha_mammals(
    train: Population,
    tau: float,
    config: SearchConfig = SearchConfig(),
    mask_policy: MaskPolicy | str = MaskPolicy.SAME_OPERATOR,
    shift_range: int = DEFAULT_SHIFT_RANGE,
) -> list[MixtureRecord]:
    """One hill-climbed mixture per configured operator."""
    return [hill_climb(train, tau, op, config, mask_policy, shift_range) for op in config.operators]


# --------------------------------------------------------------------------
# cross-encoding attacks


class ThresholdSide(str, Enum):
    ATTACK = "attack"
    TARGET = "target"


@dataclass(frozen=True)
class CrossAttackRow:
    mixture: MixtureRecord
    source: str
    side: ThresholdSide
    tau: float
    report: CoverageReport


def cross_attack(
    mixtures: Sequence[MixtureRecord],
    target: Population,
    tau_attack: float,
    tau_target: float,
    sides: Iterable[ThresholdSide | str] = (ThresholdSide.ATTACK, ThresholdSide.TARGET),
    source: str = "",
    shift_range: int = DEFAULT_SHIFT_RANGE,
    exclude_seeds: bool = True,
    fmr_label: float | None = None,
) -> list[CrossAttackRow]:
    """Coverage of each mixture on ``target`` under the attacker's and/or the target's threshold.

    Rows are ordered mixture-major, then by side as given.
    """
    sides = [ThresholdSide(s) for s in sides]
    taus = {ThresholdSide.ATTACK: tau_attack, ThresholdSide.TARGET: tau_target}
    rows = []
    for m in mixtures:
        if m.template.shape != target.shape:
            raise DimensionError(f"mixture shape {m.template.shape} vs target {target.shape}")
        scores, _, _, _ = probe_scores(m.template, target.codes, target.masks, shift_range)
        excl = m.seed_identities if exclude_seeds else ()
        for side in sides:
            tau = taus[side]
            with np.errstate(invalid="ignore"):
                hits = scores <= tau
            rep = coverage(m.template, target, tau, excl, fmr_label=fmr_label, matches=hits)
            rows.append(CrossAttackRow(m, source, side, float(tau), rep))
    return rows
