"""Experiment configuration: defaults, key-value config files and flag overrides.

Precedence is command-line flag > config file > built-in default.  A config
file holds ``key = value`` lines; ``#`` starts a comment and keys use the
long flag names with dashes or underscores.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .templates import DEFAULT_SHIFT_RANGE


def parse_fmr(text) -> float:
    """'0.01%' -> 1e-4; a bare number is taken as a fraction."""
    s = str(text).strip()
    if s.endswith("%"):
        val = float(s[:-1]) / 100.0
    else:
        val = float(s)
    if not 0.0 < val <= 1.0:
        raise ValueError(f"FMR {text!r} outside (0, 1]")
    return val


def parse_fmr_list(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(parse_fmr(t) for t in text)
    return tuple(parse_fmr(t) for t in str(text).split(",") if t.strip())


def parse_int_list(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(t) for t in text)
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def parse_str_list(text) -> tuple[str, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(str(t).strip().upper() for t in text)
    return tuple(t.strip().upper() for t in str(text).split(",") if t.strip())


def parse_bounds(text) -> tuple[float, float] | None:
    if text is None or str(text).strip().lower() in ("", "none", "off"):
        return None
    if isinstance(text, (list, tuple)):
        lo, hi = text
    else:
        lo, hi = str(text).split(",")
    lo, hi = float(lo), float(hi)
    if not lo < hi:
        raise ValueError("density filter needs lo < hi")
    return (lo, hi)


def parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_str(text):
    return None if text is None or str(text).strip() == "" else str(text)


@dataclass(frozen=True)
class ExperimentConfig:
    manifest: str | None = None
    target_manifest: str | None = None
    against: str | None = None
    out: str = "alphamix-out"
    seed: int = 0
    shift_range: int = DEFAULT_SHIFT_RANGE
    fmr: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 1e-2)
    wolf_fmr: float = 1e-4
    search_fmr: float = 1e-3
    operators: tuple[str, ...] = ("AND", "OR", "XOR")
    k: tuple[int, ...] = (2, 3, 4)
    mask_policy: str = "same"
    split: str = "same"
    train_fraction: float = 1.0
    min_matches: int = 1
    max_per_identity: int = 1
    max_wolves: int = 6
    density_filter: tuple[float, float] | None = None
    max_iterations: int = 100
    lateral_budget: int = 10
    lateral_cutoff: int = 3
    min_code_density: float = 0.02
    max_code_density: float = 0.98
    min_mask_valid: float = 0.05
    kind: str = "population"
    n: int = 10
    alpha: float = 0.9
    rows: int = 20
    cols: int = 512
    n_identities: int = 50
    samples_per_identity: int = 4
    flip_rate: float = 0.05
    wolf_count: int = 3
    wolf_arity: int = 5
    mask_density: float = 0.85
    ncd_mask: bool = False
    save_mixtures: bool = False
    figures: bool = True

    def digest(self) -> str:
        """SHA-256 over the settings that influence results (output location excluded)."""
        d = asdict(self)
        d.pop("out")
        d.pop("figures")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        return d


PARSERS = {
    "manifest": _opt_str,
    "target_manifest": _opt_str,
    "against": _opt_str,
    "out": str,
    "seed": int,
    "shift_range": int,
    "fmr": parse_fmr_list,
    "wolf_fmr": parse_fmr,
    "search_fmr": parse_fmr,
    "operators": parse_str_list,
    "k": parse_int_list,
    "mask_policy": lambda s: str(s).strip().lower(),
    "split": lambda s: str(s).strip().lower(),
    "train_fraction": float,
    "min_matches": int,
    "max_per_identity": int,
    "max_wolves": int,
    "density_filter": parse_bounds,
    "max_iterations": int,
    "lateral_budget": int,
    "lateral_cutoff": int,
    "min_code_density": float,
    "max_code_density": float,
    "min_mask_valid": float,
    "kind": lambda s: str(s).strip().lower(),
    "n": int,
    "alpha": float,
    "rows": int,
    "cols": int,
    "n_identities": int,
    "samples_per_identity": int,
    "flip_rate": float,
    "wolf_count": int,
    "wolf_arity": int,
    "mask_density": float,
    "ncd_mask": parse_bool,
    "save_mixtures": parse_bool,
    "figures": parse_bool,
}

assert set(PARSERS) == {f.name for f in fields(ExperimentConfig)}


def read_config_file(path) -> dict:
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.read_string("[experiment]\n" + text, source=str(path))
    out = {}
    for key, val in cp["experiment"].items():
        name = key.replace("-", "_")
        if name not in PARSERS:
            raise ValueError(f"{path}: unknown config key {key!r}")
        out[name] = PARSERS[name](val)
    return out


def resolve(flags: dict, config_path=None) -> ExperimentConfig:
    """Merge defaults, config file values and non-None flag values."""
    values = {}
    if config_path:
        values.update(read_config_file(config_path))
    for name, val in flags.items():
        if val is not None and name in PARSERS:
            values[name] = PARSERS[name](val)
    return ExperimentConfig(**values)
