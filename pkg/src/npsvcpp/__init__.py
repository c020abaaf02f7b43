"""Nonparallel SVM family: kernel and deep NPSVC++ with a TWSVM baseline.

Estimators follow the fit/predict idiom; the array-level trainers,
solvers, and data utilities are importable directly for diagnostics
and testing.
"""

from .data import (
    Dataset,
    fit_standardizer,
    load_dataset,
    make_dataset,
    parse_csv_dataset,
    parse_libsvm,
    split_dataset,
    standardize,
    Standardizer,
)
from .deep import DeepConfig, DeepNPSVC, fit_deep_npsvc
from .errors import (
    ConfigError,
    DatasetError,
    DegenerateDataError,
    DegenerateModelError,
    DivergenceError,
    ModelFormatError,
    ModelVersionError,
    NonConvergedError,
    NotPositiveDefiniteError,
    NumericalError,
    ParseError,
    RankDeficiencyError,
    ShapeMismatchError,
)
from .graphs import knn_graph, normalized_laplacian
from .kernels import KernelSpec, gaussian_bandwidth, gram_factor, kernel_matrix
from .knpsvc import (
    KernelNPSVC,
    KnpsvcConfig,
    TWSVM,
    fit_kernel_npsvc,
    fit_twsvm,
)
from .model_io import load_model, load_model_file, save_model, save_model_file
from .solvers import (
    gpi_maximize,
    power_iteration_norm,
    solve_box_qp,
    solve_simplex_qp,
    stiefel_project,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Dataset",
    "DatasetError",
    "DeepConfig",
    "DeepNPSVC",
    "DegenerateDataError",
    "DegenerateModelError",
    "DivergenceError",
    "KernelNPSVC",
    "KernelSpec",
    "KnpsvcConfig",
    "ModelFormatError",
    "ModelVersionError",
    "NonConvergedError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "ParseError",
    "RankDeficiencyError",
    "ShapeMismatchError",
    "Standardizer",
    "TWSVM",
    "fit_deep_npsvc",
    "fit_kernel_npsvc",
    "fit_standardizer",
    "fit_twsvm",
    "gaussian_bandwidth",
    "gpi_maximize",
    "gram_factor",
    "kernel_matrix",
    "knn_graph",
    "load_dataset",
    "load_model",
    "load_model_file",
    "make_dataset",
    "normalized_laplacian",
    "parse_csv_dataset",
    "parse_libsvm",
    "power_iteration_norm",
    "save_model",
    "save_model_file",
    "solve_box_qp",
    "solve_simplex_qp",
    "split_dataset",
    "standardize",
    "stiefel_project",
]
