"""Monte Carlo laboratory for interacting branching random walks on groups."""
from .groups import GroupElement, GroupSpec, StepDistribution, compose, inverse, word_length
from .offspring import OffspringDistribution, gamma_critical, gamma_truncate, ugw_root_law
from .engine import Caps, FamilyTree, classify_survival_regime, run_brw
from .spectral import green_partial_sum, return_probability_series, spectral_radius
from .truncated import run_truncated, survival_sweep
from .competing import AdaptedMode, CompetingConfig, Species, run_adapted, run_competing

__version__ = "0.1.0"

__all__ = [
    "AdaptedMode", "Caps", "CompetingConfig", "FamilyTree", "GroupElement", "GroupSpec",
    "OffspringDistribution", "Species", "StepDistribution", "classify_survival_regime", "compose",
    "gamma_critical", "gamma_truncate", "green_partial_sum", "inverse", "return_probability_series",
    "run_adapted", "run_brw", "run_competing", "run_truncated", "spectral_radius", "survival_sweep",
    "ugw_root_law", "word_length",
]
