"""Command-line entry point: ``alphamix <command> [options]``.

Exit status: 0 success, 1 empty or degenerate result, 2 input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import bit_stats, compressor_identity, frequency_map, ncd, write_matrix, write_pgm
from .attacks import (
    SearchConfig,
    ThresholdSide,
    alpha_mammals,
    cross_attack,
    enumerate_alpha_wolves,
    evaluate_mixtures,
)
from .calibration import (
    ScoreDistribution,
    export_scores,
    fmr_at_threshold,
    imposter_scores,
    score_matrix,
    threshold_at_fmr,
)
from .config import ExperimentConfig, resolve
from .errors import AlphaMixError
from .menagerie import coverage, export_wolves, select_wolves
from .popio import (
    AdmissibilityPolicy,
    Population,
    SplitSpec,
    load_population,
    read_text_template,
    save_population,
    save_template,
    split,
)
from .synthgen import SimPopulationSpec, hmm_population, synth_population
from .templates import OP_ORDER, MaskPolicy, Op

log = logging.getLogger("alphamix")

TABLE_OPS = ("OR", "AND", "XOR")  # cell order used by the coverage tables


class Degenerate(Exception):
    """Run finished without a usable result (exit status 1)."""


class Busy(AlphaMixError):
    pass


# --------------------------------------------------------------------------
# output helpers


@contextmanager
def output_lock(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".alphamix.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise Busy(f"{out} is in use by another run (remove {lock} if stale)")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def fmt_fmr(f: float) -> str:
    return f"{f * 100:g}%"


class Report:
    """Structured JSON-lines report plus an aligned text summary."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.command = command
        self.cfg = cfg
        self.records: list[dict] = []
        self.lines: list[str] = []

    @property
    def header(self) -> dict:
        return {
            "kind": "header",
            "command": self.command,
            "tool": "alphamix",
            "version": __version__,
            "seed": self.cfg.seed,
            "config_digest": self.cfg.digest(),
            "compressor": compressor_identity(),
            "config": _jsonable(self.cfg.as_dict()),
        }

    def add(self, **record) -> None:
        self.records.append(_jsonable(record))

    def text(self, line: str = "") -> None:
        self.lines.append(line)

    def write(self, out: Path) -> None:
        with open(out / f"{self.command}_report.jsonl", "w") as fh:
            for rec in [self.header] + self.records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        h = self.header
        top = [
            f"alphamix {h['version']} {self.command}",
            f"seed {h['seed']}  config {h['config_digest'][:16]}  compressor {h['compressor']}",
            "",
        ]
        (out / f"{self.command}_summary.txt").write_text("\n".join(top + self.lines) + "\n")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [_jsonable(v) for v in items]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def aligned_table(header: list[str], rows: list[list[str]]) -> list[str]:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    fmt = lambda r: "  ".join(str(c).rjust(w) for c, w in zip(r, widths))
    return [fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]


def coverage_cell(values: dict) -> str:
    return "/".join(f"{values[o]:.1f}" if values.get(o) is not None else "-" for o in TABLE_OPS)


def _figure(cfg: ExperimentConfig, fn, *args) -> None:
    if not cfg.figures:
        return
    from . import plotting

    getattr(plotting, fn)(*args)


# --------------------------------------------------------------------------
# shared pipeline pieces


def _population(path, label="manifest") -> Population:
    if not path:
        raise AlphaMixError(f"--{label.replace('_', '-')} is required")
    return load_population(path)


def _split(cfg: ExperimentConfig, p: Population):
    return split(p, SplitSpec(cfg.split, cfg.train_fraction, cfg.seed))


def _thresholds(d: ScoreDistribution, fmrs) -> dict:
    return {f: threshold_at_fmr(d, f) for f in fmrs}


def _matrix_and_dist(p: Population, cfg: ExperimentConfig):
    m = score_matrix(p, cfg.shift_range)
    return m, imposter_scores(p, cfg.shift_range, m)


def _wolves(cfg, train, report):
    m, d = _matrix_and_dist(train, cfg)
    th = threshold_at_fmr(d, cfg.wolf_fmr)
    report.text(f"wolf selection: FMR {fmt_fmr(cfg.wolf_fmr)} -> tau {th.tau:.6f}"
                + (" (no-match sentinel)" if th.no_match else ""))
    wolves = select_wolves(train, th.tau, cfg.min_matches, cfg.max_per_identity, cfg.max_wolves,
                           cfg.shift_range, m)
    return wolves, th, m, d


# --------------------------------------------------------------------------
# commands


def cmd_import(cfg: ExperimentConfig, out: Path) -> int:
    """Input manifest rows: identity_id, sample_id, code text path[, mask text path]."""
    if not cfg.manifest:
        raise AlphaMixError("--manifest (text-matrix input list) is required")
    src = Path(cfg.manifest)
    base = src.parent
    policy = AdmissibilityPolicy(cfg.min_code_density, cfg.max_code_density, cfg.min_mask_valid)
    rows = [r for r in csv.reader(src.read_text().splitlines(), delimiter="\t") if r and not r[0].startswith("#")]
    if rows and rows[0][:2] == ["identity_id", "sample_id"]:
        rows = rows[1:]
    kept, rejected = [], []
    for n, r in enumerate(rows, 1):
        if len(r) not in (3, 4):
            raise AlphaMixError(f"{src}: row {n} needs 3 or 4 fields")
        ident, sid, code = r[:3]
        mask = r[3] if len(r) == 4 and r[3] else None
        t = read_text_template(base / code, base / mask if mask else None, sid, ident)
        why = policy.reason(t)
        if why:
            rejected.append((ident, sid, code, why))
        else:
            kept.append(t)
    if not kept:
        raise AlphaMixError(f"{src}: no admissible templates")
    save_population(Population(tuple(kept)), out)
    with open(out / "rejections.tsv", "w") as fh:
        fh.write("identity_id\tsample_id\tsource\treason\n")
        for rec in rejected:
            fh.write("\t".join(rec) + "\n")
    rep = Report("import", cfg)
    rep.text(f"imported {len(kept)} templates, rejected {len(rejected)}")
    for t in kept:
        rep.add(kind="template", identity_id=t.identity_id, sample_id=t.sample_id, status="ok")
    for ident, sid, code, why in rejected:
        rep.add(kind="template", identity_id=ident, sample_id=sid, status="rejected", reason=why)
        rep.text(f"  rejected {sid}: {why}")
    rep.write(out)
    return 0


def cmd_calibrate(cfg: ExperimentConfig, out: Path) -> int:
    p = _population(cfg.manifest)
    m, d = _matrix_and_dist(p, cfg)
    export_scores(d, out / "imposter_scores.txt")
    lab = p.identity_labels
    iu, ju = np.triu_indices(len(p), k=1)
    same = lab[iu] == lab[ju]
    genuine = m[iu[same], ju[same]]
    genuine = genuine[~np.isnan(genuine)]
    rep = Report("calibrate", cfg)
    rep.text(f"{len(p)} samples, {len(p.identity_index)} identities, "
             f"{d.pair_count} imposter pairs ({d.incomparable_count} incomparable)")
    rows = []
    ths = _thresholds(d, cfg.fmr)
    for f, th in ths.items():
        fnmr = float((genuine > th.tau).mean()) if len(genuine) else None
        rep.add(kind="threshold", fmr=f, tau=th.tau, empirical_fmr=fmr_at_threshold(d, th.tau),
                no_match=th.no_match, fnmr=fnmr)
        rows.append([fmt_fmr(f), f"{th.tau:.6f}", f"{fmr_at_threshold(d, th.tau):.6f}",
                     "-" if fnmr is None else f"{fnmr:.4f}", "yes" if th.no_match else ""])
    rep.lines += aligned_table(["FMR", "tau", "empirical FMR", "FNMR", "no-match"], rows)
    rep.write(out)
    _figure(cfg, "plot_score_histogram", d.scores, {f: t.tau for f, t in ths.items()},
            out / "calibrate_scores.png", genuine)
    return 0


def cmd_wolves(cfg: ExperimentConfig, out: Path) -> int:
    p = _population(cfg.manifest)
    train, _ = _split(cfg, p)
    rep = Report("wolves", cfg)
    wolves, th, _, _ = _wolves(cfg, train, rep)
    export_wolves(wolves, out / "wolves.tsv")
    for rank, w in enumerate(wolves, 1):
        rep.add(kind="wolf", rank=rank, identity_id=w.sample.identity_id, sample_id=w.sample.sample_id,
                false_matches=w.false_match_count, identities_matched=len(w.matched_identities))
    rep.lines += aligned_table(
        ["rank", "identity", "sample", "false matches", "identities"],
        [[str(i), w.sample.identity_id, w.sample.sample_id, str(w.false_match_count),
          str(len(w.matched_identities))] for i, w in enumerate(wolves, 1)],
    )
    rep.write(out)
    if wolves:
        _figure(cfg, "plot_wolf_counts", [w.sample.sample_id for w in wolves],
                [w.false_match_count for w in wolves], out / "wolves.png")
    if not wolves:
        log.warning("no wolves found at tau %.6f", th.tau)
        raise Degenerate("no wolves found")
    return 0


def _save_mixtures(records, out: Path) -> None:
    mdir = out / "mixtures"
    mdir.mkdir(exist_ok=True)
    manifest = [("identity_id", "sample_id", "path")]
    for r in records:
        name = f"mix{r.order:04d}_{r.operator.value}.airc"
        save_template(r.template, mdir / name)
        manifest.append((r.template.identity_id, r.template.sample_id, name))
    with open(mdir / "manifest.tsv", "w") as fh:
        for row in manifest:
            fh.write("\t".join(row) + "\n")


def _mixture_log(evals, fmrs, path) -> None:
    with open(path, "w") as fh:
        cols = ["order", "origin", "operator", "k", "seeds", "code_density", "mask_density", "admitted"]
        cols += [f"users_{fmt_fmr(f)}" for f in fmrs]
        fh.write("\t".join(cols) + "\n")
        for e in evals:
            r = e.record
            vals = [str(r.order), r.origin.value, r.operator.value, str(r.k),
                    ",".join(s for _, s in r.seed_ids), f"{e.code_density:.6f}",
                    f"{r.template.mask.count() / (r.template.shape[0] * r.template.shape[1]):.6f}",
                    "1" if e.admitted else "0"]
            vals += [str(e.reports[f].identity_matches) if e.admitted else "" for f in fmrs]
            fh.write("\t".join(vals) + "\n")


def _attack_alphawolf(cfg, out, rep) -> int:
    p = _population(cfg.manifest)
    train, test = _split(cfg, p)
    wolves, _, mtrain, dtrain = _wolves(cfg, train, rep)
    if len(wolves) < 2:
        raise Degenerate(f"only {len(wolves)} wolves found; need at least 2 to mix")
    ks = sorted(k for k in cfg.k if k <= len(wolves))
    if len(ks) < len(cfg.k):
        log.warning("dropping k values above the %d available wolves", len(wolves))
    mixtures = enumerate_alpha_wolves(wolves, ks, cfg.operators, cfg.mask_policy)
    dtest = dtrain if test is train else imposter_scores(test, cfg.shift_range)
    ths = _thresholds(dtest, cfg.fmr)
    taus = {f: t.tau for f, t in ths.items()}
    evals = evaluate_mixtures(mixtures, test, taus, cfg.density_filter, cfg.shift_range)
    _mixture_log(evals, cfg.fmr, out / "attack_mixtures.tsv")
    if cfg.save_mixtures:
        _save_mixtures(mixtures, out)
    rep.text(f"{len(wolves)} wolves: " + ", ".join(w.sample.sample_id for w in wolves))
    rep.text(f"{len(mixtures)} mixtures, {sum(e.admitted for e in evals)} admitted by the density filter")
    for f, th in ths.items():
        rep.add(kind="threshold", fmr=f, tau=th.tau, no_match=th.no_match)
    rep.text("")
    rep.text("Proportion of users (%) covered @ FMR for OR/AND/XOR (best alpha-wolf)")
    table, curves = [], {}
    for k in ks:
        cells = []
        for f in cfg.fmr:
            best = {}
            for op in cfg.operators:
                cands = [e for e in evals if e.admitted and e.record.k == k and e.record.operator.value == op]
                if not cands:
                    continue
                top = min(cands, key=lambda e: (-e.reports[f].identity_matches, e.record.order))
                cov = top.reports[f]
                best[op] = 100.0 * cov.identity_fraction
                rep.add(kind="coverage", k=k, fmr=f, operator=op, percent=best[op],
                        identities=cov.identity_matches, identity_total=cov.identity_total,
                        samples=cov.sample_matches, best=top.record.label)
                curves.setdefault(f"{op} k={k}", []).append((f, best[op]))
            cells.append(coverage_cell(best))
        table.append([str(k)] + cells)
    rep.lines += aligned_table(["k"] + [fmt_fmr(f) for f in cfg.fmr], table)
    for e in evals:
        rec = dict(kind="mixture", order=e.record.order, operator=e.record.operator, k=e.record.k,
                   seeds=[s for _, s in e.record.seed_ids], code_density=e.code_density, admitted=e.admitted)
        if e.admitted:
            rec["identities"] = {fmt_fmr(f): e.reports[f].identity_matches for f in cfg.fmr}
        rep.add(**rec)
    _figure(cfg, "plot_coverage_curves", curves, out / "attack_coverage.png", "Alpha-wolf coverage")
    dens = {op: [e.code_density for e in evals if e.record.operator.value == op] for op in cfg.operators}
    _figure(cfg, "plot_density_scatter", dens, out / "attack_density.png")
    return 0


def _attack_alphamammal(cfg, out, rep) -> int:
    p = _population(cfg.manifest)
    train, test = _split(cfg, p)
    mtrain, dtrain = _matrix_and_dist(train, cfg)
    th = threshold_at_fmr(dtrain, cfg.search_fmr)
    rep.text(f"search: FMR {fmt_fmr(cfg.search_fmr)} -> tau {th.tau:.6f}, {len(train)} training samples")
    if th.no_match:
        raise Degenerate("search threshold is the no-match sentinel; nothing can be covered")
    scfg = SearchConfig(tuple(cfg.operators), cfg.max_iterations, cfg.lateral_budget,
                        cfg.lateral_cutoff, cfg.density_filter)
    mammals = alpha_mammals(train, th.tau, scfg, cfg.mask_policy, cfg.shift_range)
    for i, m in enumerate(mammals):
        object.__setattr__(m, "order", i)
    dtest = dtrain if test is train else imposter_scores(test, cfg.shift_range)
    ths = _thresholds(dtest, cfg.fmr)
    evals = evaluate_mixtures(mammals, test, {f: t.tau for f, t in ths.items()}, None, cfg.shift_range)
    _mixture_log(evals, cfg.fmr, out / "attack_mixtures.tsv")
    with open(out / "attack_trace.tsv", "w") as fh:
        fh.write("operator\titeration\taction\tsample_id\tcoverage\tstate\n")
        for m in mammals:
            for s in m.trace:
                fh.write(f"{m.operator.value}\t{s.iteration}\t{s.action}\t{s.sample_id}\t{s.coverage}\t{','.join(s.state)}\n")
    if cfg.save_mixtures:
        _save_mixtures(mammals, out)
    cells, curves = [], {}
    for f in cfg.fmr:
        vals = {}
        for e in evals:
            op = e.record.operator.value
            cov = e.reports[f]
            vals[op] = 100.0 * cov.identity_fraction
            rep.add(kind="coverage", fmr=f, operator=op, percent=vals[op], identities=cov.identity_matches,
                    identity_total=cov.identity_total, samples=cov.sample_matches, best=e.record.label)
            curves.setdefault(op, []).append((f, vals[op]))
        cells.append(coverage_cell(vals))
    for e in evals:
        m = e.record
        rep.add(kind="mixture", operator=m.operator, k=m.k, seeds=[s for _, s in m.seed_ids],
                training_coverage=m.reward, steps=len(m.trace), code_density=e.code_density)
        rep.text(f"{m.operator.value}: {m.k} samples [{', '.join(s for _, s in m.seed_ids)}], "
                 f"training coverage {m.reward}, {len(m.trace)} steps")
    rep.text("")
    rep.text("Proportion of users (%) covered @ FMR for OR/AND/XOR (alpha-mammal)")
    rep.lines += aligned_table(["search"] + [fmt_fmr(f) for f in cfg.fmr], [[fmt_fmr(cfg.search_fmr)] + cells])
    _figure(cfg, "plot_trace", {m.operator.value: [s.coverage for s in m.trace] for m in mammals},
            out / "attack_trace.png")
    _figure(cfg, "plot_coverage_curves", curves, out / "attack_coverage.png", "Alpha-mammal coverage")
    return 0


def _attack_cross(cfg, out, rep) -> int:
    src = _population(cfg.manifest)
    target = _population(cfg.target_manifest, "target_manifest")
    if src.shape != target.shape:
        raise AlphaMixError(f"attack templates {src.shape} and target templates {target.shape} differ in shape")
    wolves, _, _, dsrc = _wolves(cfg, src, rep)
    if len(wolves) < 2:
        raise Degenerate(f"only {len(wolves)} wolves found; need at least 2 to mix")
    ks = sorted(k for k in cfg.k if k <= len(wolves))
    mixtures = enumerate_alpha_wolves(wolves, ks, cfg.operators, cfg.mask_policy)
    dtgt = imposter_scores(target, cfg.shift_range)
    th_src, th_tgt = _thresholds(dsrc, cfg.fmr), _thresholds(dtgt, cfg.fmr)
    rep.text(f"{len(mixtures)} mixtures from {len(wolves)} wolves against {len(target)} target samples")
    cells = {ThresholdSide.ATTACK: [], ThresholdSide.TARGET: []}
    with open(out / "attack_cross.tsv", "w") as fh:
        fh.write("order\toperator\tk\tseeds\tthreshold\tfmr\ttau\tidentities\tpercent\n")
        for f in cfg.fmr:
            rows = cross_attack(mixtures, target, th_src[f].tau, th_tgt[f].tau,
                                source=Path(cfg.manifest).stem, shift_range=cfg.shift_range, fmr_label=f)
            for r in rows:
                fh.write(f"{r.mixture.order}\t{r.mixture.operator.value}\t{r.mixture.k}\t"
                         f"{','.join(s for _, s in r.mixture.seed_ids)}\t{r.side.value}\t{f!r}\t{r.tau!r}\t"
                         f"{r.report.identity_matches}\t{100 * r.report.identity_fraction:.4f}\n")
            for side in cells:
                best = {}
                for op in cfg.operators:
                    cands = [r for r in rows if r.side is side and r.mixture.operator.value == op]
                    top = min(cands, key=lambda r: (-r.report.identity_matches, r.mixture.order))
                    best[op] = 100.0 * top.report.identity_fraction
                    rep.add(kind="coverage", threshold=side, fmr=f, tau=top.tau, operator=op,
                            percent=best[op], identities=top.report.identity_matches, best=top.mixture.label)
                cells[side].append(coverage_cell(best))
    rep.text("")
    rep.text("Proportion of users (%) covered @ FMR for OR/AND/XOR (cross-encoding)")
    rep.lines += aligned_table(["threshold"] + [fmt_fmr(f) for f in cfg.fmr],
                               [["tau_attack"] + cells[ThresholdSide.ATTACK], ["tau_target"] + cells[ThresholdSide.TARGET]])
    return 0


ATTACK_MODES = {"alphawolf": _attack_alphawolf, "alphamammal": _attack_alphamammal, "cross": _attack_cross}


def cmd_attack(cfg: ExperimentConfig, out: Path, mode: str) -> int:
    rep = Report("attack", cfg)
    rep.text(f"mode {mode}")
    try:
        return ATTACK_MODES[mode](cfg, out, rep)
    finally:
        rep.write(out)


def cmd_synth(cfg: ExperimentConfig, out: Path) -> int:
    rep = Report("synth", cfg)
    if cfg.kind == "hmm":
        p = hmm_population(cfg.n, cfg.alpha, cfg.rows, cfg.cols, cfg.seed)
    elif cfg.kind == "population":
        spec = SimPopulationSpec(cfg.n_identities, cfg.samples_per_identity, cfg.flip_rate, cfg.wolf_count,
                                 cfg.wolf_arity, cfg.mask_density, cfg.seed, cfg.alpha, cfg.rows, cfg.cols)
        p = synth_population(spec)
        rep.add(kind="planted_wolves", identities=p.meta["wolf_identities"], blends=p.meta["wolf_blends"])
        rep.text("planted wolves: " + ", ".join(p.meta["wolf_identities"]))
    else:
        raise AlphaMixError(f"unknown synth kind {cfg.kind!r} (hmm or population)")
    save_population(p, out)
    rep.text(f"{len(p)} templates of shape {p.shape[0]}x{p.shape[1]} written to manifest.tsv")
    for t in p:
        rep.add(kind="template", identity_id=t.identity_id, sample_id=t.sample_id)
    rep.write(out)
    return 0


def cmd_analyze(cfg: ExperimentConfig, out: Path) -> int:
    p = _population(cfg.manifest)
    rep = Report("analyze", cfg)
    st = bit_stats(list(p))
    rep.add(kind="bit_stats", code_mean=st.code_mean, code_std=st.code_std,
            mask_mean=st.mask_mean, mask_std=st.mask_std, count=st.count)
    rep.text(f"{len(p)} templates: code {st.code_mean:.4f} +/- {st.code_std:.4f}, "
             f"mask {st.mask_mean:.4f} +/- {st.mask_std:.4f}")
    fc = frequency_map(list(p))
    fm = frequency_map(list(p), use_mask=True)
    write_matrix(fc, out / "freq_code.txt")
    write_matrix(fm, out / "freq_mask.txt")
    write_pgm(fc, out / "freq_code.pgm")
    write_pgm(fm, out / "freq_mask.pgm")
    ref = load_population(cfg.against) if cfg.against else None
    pairs = []
    if ref is None:
        pairs = [(a, b) for i, a in enumerate(p) for b in list(p)[i + 1:]]
    else:
        pairs = [(a, b) for a in p for b in ref]
    vals = []
    with open(out / "ncd.tsv", "w") as fh:
        fh.write("sample_a\tsample_b\tncd\n")
        for a, b in pairs:
            v = ncd(a, b, include_mask=cfg.ncd_mask)
            vals.append(v)
            fh.write(f"{a.sample_id}\t{b.sample_id}\t{v:.6f}\n")
    if vals:
        arr = np.array(vals)
        rep.add(kind="ncd", pairs=len(vals), mean=float(arr.mean()), min=float(arr.min()), max=float(arr.max()))
        rep.text(f"NCD over {len(vals)} pairs: mean {arr.mean():.4f}, min {arr.min():.4f}, max {arr.max():.4f}")
    rep.write(out)
    _figure(cfg, "plot_heatmaps", {"frequency of 1s (code)": fc, "frequency of 1s (mask)": fm},
            out / "analyze_heatmap.png")
    return 0


# --------------------------------------------------------------------------
# argument parsing


def _common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="key = value config file (flags take precedence)")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--shift-range", type=int, help="circular column shifts tried each way (default 8)")
    sp.add_argument("--no-figures", dest="figures", action="store_const", const=False,
                    help="skip matplotlib figures")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="alphamix", description="Dictionary attacks on binary iris templates.")
    ap.add_argument("--version", action="version", version=f"alphamix {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("import", help="convert text-matrix templates to AIRC + manifest")
    _common(sp)
    sp.add_argument("--manifest", help="TSV: identity_id, sample_id, code path[, mask path]")
    sp.add_argument("--min-code-density", type=float)
    sp.add_argument("--max-code-density", type=float)
    sp.add_argument("--min-mask-valid", type=float)

    sp = sub.add_parser("calibrate", help="imposter distribution and thresholds per FMR")
    _common(sp)
    sp.add_argument("--manifest")
    sp.add_argument("--fmr", help="comma list, e.g. 0.001%%,0.01%%,0.1%%,1%%")

    sp = sub.add_parser("wolves", help="rank wolf samples")
    _common(sp)
    _split_args(sp)
    sp.add_argument("--manifest")
    sp.add_argument("--wolf-fmr")
    sp.add_argument("--min-matches", type=int)
    sp.add_argument("--max-per-identity", type=int)
    sp.add_argument("--max-wolves", type=int)

    sp = sub.add_parser("attack", help="alpha-wolf, alpha-mammal or cross-encoding attack")
    _common(sp)
    _split_args(sp)
    sp.add_argument("--mode", choices=sorted(ATTACK_MODES), required=True)
    sp.add_argument("--manifest")
    sp.add_argument("--target-manifest", help="target encoding (cross mode)")
    sp.add_argument("--fmr")
    sp.add_argument("--wolf-fmr")
    sp.add_argument("--search-fmr")
    sp.add_argument("--operators", help="comma list of AND,OR,XOR")
    sp.add_argument("--k", help="comma list of seed counts (2..4)")
    sp.add_argument("--mask-policy", choices=[m.value for m in MaskPolicy])
    sp.add_argument("--min-matches", type=int)
    sp.add_argument("--max-per-identity", type=int)
    sp.add_argument("--max-wolves", type=int)
    sp.add_argument("--density-filter", help="lo,hi bounds on mixture code density, or 'off'")
    sp.add_argument("--max-iterations", type=int)
    sp.add_argument("--lateral-budget", type=int)
    sp.add_argument("--lateral-cutoff", type=int)
    sp.add_argument("--save-mixtures", action="store_const", const=True)

    sp = sub.add_parser("synth", help="generate HMM codes or a simulated population")
    _common(sp)
    sp.add_argument("--kind", choices=["hmm", "population"])
    sp.add_argument("--n", type=int, help="number of HMM codes")
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--rows", type=int)
    sp.add_argument("--cols", type=int)
    sp.add_argument("--n-identities", type=int)
    sp.add_argument("--samples-per-identity", type=int)
    sp.add_argument("--flip-rate", type=float)
    sp.add_argument("--wolf-count", type=int)
    sp.add_argument("--wolf-arity", type=int)
    sp.add_argument("--mask-density", type=float)

    sp = sub.add_parser("analyze", help="bit statistics, frequency maps and NCD")
    _common(sp)
    sp.add_argument("--manifest")
    sp.add_argument("--against", help="reference manifest for NCD (default: all pairs within the set)")
    sp.add_argument("--ncd-mask", action="store_const", const=True, help="include mask bytes in NCD")
    return ap


def _split_args(sp) -> None:
    sp.add_argument("--split", choices=["same", "disjoint"])
    sp.add_argument("--train-fraction", type=float)


COMMANDS = {
    "import": cmd_import,
    "calibrate": cmd_calibrate,
    "wolves": cmd_wolves,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose", "mode")}
    try:
        cfg = resolve(flags, args.config)
        if cfg.mask_policy not in {m.value for m in MaskPolicy}:
            raise ValueError(f"unknown mask policy {cfg.mask_policy!r}")
        for op in cfg.operators:
            Op(op)
        out = Path(cfg.out)
        with output_lock(out):
            if args.command == "attack":
                return cmd_attack(cfg, out, args.mode)
            return COMMANDS[args.command](cfg, out)
    except Degenerate as exc:
        print(f"alphamix: {exc}", file=sys.stderr)
        return 1
    except (AlphaMixError, ValueError, OSError, KeyError) as exc:
        print(f"alphamix: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
