"""Proximity kernel: density-adaptive similarity for incomplete tabular data."""

from .binning import BinAssignment, BinModel, assign_all, assign_bin, fit_bin_centers
from .dataset import DataError, Dataset, FeatureKind, inject_mcar, load_csv
from .encoder import Level, Representation, encode_dataset
from .estimator import MeanModeImputer, ProximityKernelEncoder
from .kernel import GramMatrix, gram, kernel_value, min_eigenvalue, proximity_kernel

__all__ = [
    "BinAssignment", "BinModel", "DataError", "Dataset", "FeatureKind", "GramMatrix", "Level",
    "MeanModeImputer", "ProximityKernelEncoder", "Representation", "assign_all", "assign_bin",
    "encode_dataset", "fit_bin_centers", "gram", "inject_mcar", "kernel_value", "load_csv",
    "min_eigenvalue", "proximity_kernel",
]

__version__ = "0.1.0"
