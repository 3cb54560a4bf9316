"""Possibilistic inference with outer probability measures."""
from .gaussian import GaussianDensity, GaussianPossibility
from .hypotheses import ClutterModel, Hypothesis, MaxMixture
from .mixed_kalman import ConditionalGaussianOPM, ModelMatrices
from .possibility import DiscreteOPM, PossibilityGrid

__version__ = "0.1.0"

__all__ = [
    "ClutterModel", "ConditionalGaussianOPM", "DiscreteOPM", "GaussianDensity", "GaussianPossibility",
    "Hypothesis", "MaxMixture", "ModelMatrices", "PossibilityGrid",
]
