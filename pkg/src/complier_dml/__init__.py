"""Debiased estimation of complier parameters with automatic balancing weights."""

__version__ = "0.1.0"

from .dataset import IVDataset, load_csv, partition_folds, save_csv
from .dictionary import DictionarySpec, simulation_spec
from .moments import TargetSpec
from .riesz import RieszHyper
from .crossfit import EstimatorConfig, TrimPolicy, cross_fit_estimate, estimate

__all__ = [
    "IVDataset", "load_csv", "save_csv", "partition_folds", "DictionarySpec",
    "simulation_spec", "TargetSpec", "RieszHyper", "EstimatorConfig", "TrimPolicy",
    "cross_fit_estimate", "estimate", "__version__",
]
