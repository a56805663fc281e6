"""Monte-Carlo density evolution and bit-wise puncturing design for
non-binary LDPC code ensembles over the BIAWGN channel."""

from .gf import Field, field_new
from .ensemble import (DegreeDistribution, Ensemble, PunctDistribution,
                       clustering_distribution, design_rate,
                       mixed_distribution, node_fraction, overall_fraction,
                       punctured_rate, regular_ensemble,
                       spreading_distribution)
from .mcde import McdeConfig, ThresholdEstimate, Trajectory, evolve, threshold_search

__all__ = [
    "Field", "field_new", "DegreeDistribution", "Ensemble",
    "PunctDistribution", "clustering_distribution", "design_rate",
    "mixed_distribution", "node_fraction", "overall_fraction",
    "punctured_rate", "regular_ensemble", "spreading_distribution",
    "McdeConfig", "ThresholdEstimate", "Trajectory", "evolve",
    "threshold_search",
]
