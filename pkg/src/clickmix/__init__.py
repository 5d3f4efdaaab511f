"""Finite mixtures of first-order Markov models for click sequences.

Discrete-time (with or without self-transitions) and continuous-time mixtures
fitted by EM, for clustering and semi-supervised classification.
"""

from .continuous import ContinuousMixtureModel, GeneratorMatrix
from .discrete import DiscreteMixtureModel, Variant
from .em import EmConfig, FitFailure, FitResult, ModelKind, classify, fit, sweep
from .seqdata import ClickSequence, Dataset, parse_dataset, write_dataset

__all__ = [
    "ClickSequence",
    "ContinuousMixtureModel",
    "Dataset",
    "DiscreteMixtureModel",
    "EmConfig",
    "FitFailure",
    "FitResult",
    "GeneratorMatrix",
    "ModelKind",
    "Variant",
    "classify",
    "fit",
    "parse_dataset",
    "sweep",
    "write_dataset",
]

__version__ = "0.1.0"
