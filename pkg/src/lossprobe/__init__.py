"""
lossprobe: fitness-landscape analysis of feed-forward network loss surfaces.

Progressive gradient walks sample a network's weight space; the samples are
read as loss-gradient clouds, Hessian curvature classes, attractor clusters
and accuracy statistics.
"""

__version__ = "0.1.0"

from .calculus import (  # noqa: E402
    CapExceeded,
    NonSymmetricError,
    eigvals_sym,
    fd_hessian,
    grad_norm,
    gradient,
    hessian,
    loss_and_gradient,
    numeric_gradient,
)
from .data import (  # noqa: E402
    Dataset,
    IdxCountMismatchError,
    IdxError,
    IdxMagicError,
    IdxTruncatedError,
    Split,
    fetch_mnist,
    load_mnist_dir,
    load_mnist_idx,
    read_idx,
    xor_dataset,
)
from .landscape import (  # noqa: E402
    ColourMode,
    CurvatureClass,
    CurvatureUnavailable,
    Stationarity,
    aggregate_accuracy,
    attractor_summary,
    build_lg_cloud,
    classify_curvature,
    classify_stationary,
    cluster_losses,
    curvature_histogram,
)
from .nn import Architecture, Batch, accuracy, forward, init_uniform, loss, param_count  # noqa: E402
from .walk import (  # noqa: E402
    BatchPolicy,
    DataSource,
    Direction,
    GradientMode,
    Granularity,
    Sample,
    WalkConfig,
    WalkTrace,
    epsilon_from_granularity,
    run_gradient_walk,
    run_random_walk,
    walk_count,
)
from .experiment import ExperimentConfig, expand_grid, run_experiment  # noqa: E402
from .io import emit_summary_json, emit_traces_csv, read_traces_csv  # noqa: E402

__all__ = [
    "__version__",
    "accuracy",
    "aggregate_accuracy",
    "Architecture",
    "attractor_summary",
    "Batch",
    "BatchPolicy",
    "build_lg_cloud",
    "CapExceeded",
    "ColourMode",
    "classify_curvature",
    "classify_stationary",
    "cluster_losses",
    "curvature_histogram",
    "CurvatureClass",
    "CurvatureUnavailable",
    "Dataset",
    "DataSource",
    "Direction",
    "eigvals_sym",
    "emit_summary_json",
    "emit_traces_csv",
    "epsilon_from_granularity",
    "expand_grid",
    "ExperimentConfig",
    "fd_hessian",
    "fetch_mnist",
    "forward",
    "grad_norm",
    "gradient",
    "GradientMode",
    "Granularity",
    "hessian",
    "IdxCountMismatchError",
    "IdxError",
    "IdxMagicError",
    "IdxTruncatedError",
    "init_uniform",
    "load_mnist_dir",
    "load_mnist_idx",
    "loss",
    "loss_and_gradient",
    "NonSymmetricError",
    "numeric_gradient",
    "param_count",
    "read_idx",
    "read_traces_csv",
    "run_experiment",
    "run_gradient_walk",
    "run_random_walk",
    "Sample",
    "Split",
    "Stationarity",
    "walk_count",
    "WalkConfig",
    "WalkTrace",
    "xor_dataset",
]
