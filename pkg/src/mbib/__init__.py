"""Markov-blanket information bottleneck toolkit.

Imputes a target variable that is missing in a shifted deployment domain by
compressing onto its Markov blanket, where the conditional is transportable.
"""

from .errors import MbibError
from .graph import Dag, format_dag, load_dag, parse_dag, save_dag
from .sem import (
    Dataset,
    Mechanism,
    SemSpec,
    ShiftSpec,
    apply_shift,
    dataset_from_csv,
    dataset_to_csv,
    exogenous_stretch,
    implied_covariance,
    preset,
    sample,
)
from .gib import GibModel, beta_to_dim, build_cca_operator, fit_gib, load_gib, save_gib
from .vib import VibConfig, VibModel, dnn_config, fit_vib, load_vib, save_vib
from .evaluation import (
    GaussianBnImputer,
    Metrics,
    baseline_gaussian_bn,
    mb_invariance_diagnostic,
    metrics,
)

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "Dataset",
    "GaussianBnImputer",
    "GibModel",
    "MbibError",
    "Mechanism",
    "Metrics",
    "SemSpec",
    "ShiftSpec",
    "VibConfig",
    "VibModel",
    "__version__",
    "apply_shift",
    "baseline_gaussian_bn",
    "beta_to_dim",
    "build_cca_operator",
    "dataset_from_csv",
    "dataset_to_csv",
    "dnn_config",
    "exogenous_stretch",
    "fit_gib",
    "fit_vib",
    "format_dag",
    "implied_covariance",
    "load_dag",
    "load_gib",
    "load_vib",
    "mb_invariance_diagnostic",
    "metrics",
    "parse_dag",
    "preset",
    "sample",
    "save_dag",
    "save_gib",
    "save_vib",
]
