"""Template-level dictionary attacks on binary iris codes."""

__version__ = "0.1.0"

from .templates import (  # noqa: E402
    BitGrid,
    IrisTemplate,
    MaskPolicy,
    MatchOutcome,
    Op,
    bitwise_mix,
    density,
    hamming_distance,
)
from .popio import AdmissibilityPolicy, Population, SplitSpec, load_population, read_template, save_template, split  # noqa: E402
from .calibration import ScoreDistribution, fmr_at_threshold, imposter_scores, threshold_at_fmr  # noqa: E402
from .menagerie import CoverageReport, WolfRecord, coverage, select_wolves  # noqa: E402
from .attacks import (  # noqa: E402
    MixtureRecord,
    SearchConfig,
    best_alpha_wolf,
    cross_attack,
    enumerate_alpha_wolves,
    hill_climb,
)
from .synthgen import HmmParams, SimPopulationSpec, hmm_code, synth_population  # noqa: E402
from .analysis import BitStats, bit_stats, frequency_map, ncd  # noqa: E402
