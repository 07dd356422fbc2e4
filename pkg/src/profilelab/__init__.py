"""Simulation and verification toolkit for profiles of random weighted b-ary trees.

The toolkit grows discrete trees by uniform leaf replacement, evaluates the
profile-polynomial martingales and their normalizing constants, computes the
admissible parameter ranges and large-deviation normalizations, samples the
martingale limit from its distributional fixed-point equation, and provides
exact small-size oracles for desk-scale verification.
"""

from profilelab.weight_model import (
    MarginalLaw,
    WeightModel,
    marginal,
    preset,
    model_from_json,
    sample_weights,
    validate,
    PRESET_NAMES,
)
from profilelab.tree_sim import (
    GrowthTrace,
    Profile,
    Tree,
    grow,
    profile,
    replay,
    sample_tau,
    subtree_fractions,
    yule_limit_samples,
)

__all__ = [
    "MarginalLaw",
    "WeightModel",
    "marginal",
    "preset",
    "model_from_json",
    "sample_weights",
    "validate",
    "PRESET_NAMES",
    "GrowthTrace",
    "Profile",
    "Tree",
    "grow",
    "profile",
    "replay",
    "sample_tau",
    "subtree_fractions",
    "yule_limit_samples",
]

__version__ = "0.1.0"
