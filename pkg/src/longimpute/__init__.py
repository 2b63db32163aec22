"""Trajectory reconstruction for sparse longitudinal data by low-rank matrix
completion over a spline basis."""

__version__ = "0.1.0"

from ._kernels import BACKEND as KERNEL_BACKEND
from .basis import BasisMatrix, TimeGrid, default_basis, make_bspline_basis, orthonormalize, snap_to_grid
from .completion import (
    FitPath,
    LambdaFit,
    default_lambda_path,
    estimate_mean_curve,
    hard_impute,
    impute,
    objective,
    refit_with_new_data,
    soft_impute,
)
from .data import (
    ObservationRecord,
    SparseMatrix,
    SplitAssignment,
    discretize,
    project,
    project_complement,
    read_long_csv,
    split,
    write_long_csv,
    write_wide_csv,
)
from .evaluation import CvReport, cross_validate, mse, null_model
from .multivariate import (
    LatentEmbedding,
    StackedDesign,
    bivariate_eiv,
    bivariate_eiv_partial,
    constant_block,
    make_design,
    multivariate_impute,
)
from .regression import RegressionModel, sparse_longitudinal_regression, sparse_regression
from .simulation import SimulationSpec, gen_cohort, gen_covariance, simulate_study
from .svt import ThresholdedSVD, hard_svt, soft_svt
