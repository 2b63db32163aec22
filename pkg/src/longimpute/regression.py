"""Regression of a sparsely observed process on subject-level covariates or on
latent scores of other sparse processes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .completion import (
    DEFAULT_EPS,
    DEFAULT_MAX_ITER,
    _relative_change,
    basis_values,
    check_orthonormal,
    estimate_mean_curve,
    lambda_path,
)
from .data import SparseMatrix
from .errors import ConfigurationError, DimensionError, SingularityError
from .multivariate import LatentEmbedding, MultivariateFit, StackedDesign, multivariate_impute
from .svt import soft_svt

__all__ = [
    "RegressionModel",
    "LongitudinalRegressionFit",
    "sparse_regression",
    "regress_on_scores",
    "sparse_longitudinal_regression",
]

log = logging.getLogger(__name__)

XTX_MAX_COND = 1e12


@dataclass
class RegressionModel:
    """Coefficients ``A`` (d x K) of ``Y ~ X A B'``."""

    A: np.ndarray
    basis: np.ndarray
    labels: list[str]
    lam: float = 0.0
    n_iter: int = 0
    converged: bool = True
    trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    mean_curve: np.ndarray | None = None

    def predict(self, X) -> np.ndarray:
        out = np.asarray(X, dtype=float) @ self.A @ self.basis.T
        if self.mean_curve is not None:
            out = out + self.mean_curve
        return out


def _gram_solver(X: np.ndarray):
    XtX = X.T @ X
    cond = np.linalg.cond(XtX)
    if not np.isfinite(cond) or cond > XTX_MAX_COND:
        raise SingularityError(f"X'X is singular or ill-conditioned (condition number {cond:.3g})")
    L = np.linalg.cholesky(XtX)

    def solve(rhs):
        return np.linalg.solve(L.T, np.linalg.solve(L, rhs))

    return solve


def _fit_one(Y, vals, X, Bv, solve, lam, A0, eps, max_iter):
    A = np.array(A0, dtype=float, copy=True)
    G, rss = _kernels.residual_update(Y.indptr, Y.cols, vals, np.ascontiguousarray(X @ A), Bv)
    nuc = np.linalg.svd(A, compute_uv=False).sum() if lam > 0 and A.any() else 0.0
    trace = [0.5 * rss + lam * nuc]
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        A_new = solve(X.T @ G)
        nuc = 0.0
        if lam > 0:
            s = soft_svt(A_new, lam)
            A_new, nuc = s.reconstruct(), s.nuclear_norm
        crit = _relative_change(A_new, A)
        A = A_new
        G, rss = _kernels.residual_update(Y.indptr, Y.cols, vals, np.ascontiguousarray(X @ A), Bv)
        trace.append(0.5 * rss + lam * nuc)
        if crit < eps:
            converged = True
            break
    if not converged:
        log.warning("regression lambda=%.6g: no convergence after %d iterations", lam, max_iter)
    return A, n_iter, converged, np.asarray(trace)


def _setup(Y: SparseMatrix, X, B, center: bool):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != Y.n_rows:
        raise DimensionError(f"covariates {X.shape} do not match {Y.n_rows} subjects")
    Bv = basis_values(B)
    if Bv.shape[0] != Y.n_cols:
        raise DimensionError(f"basis has {Bv.shape[0]} rows, data has {Y.n_cols} columns")
    check_orthonormal(Bv)
    mean_curve = estimate_mean_curve(Y, Bv) if center else None
    vals = Y.values if mean_curve is None else Y.values - mean_curve[Y.cols]
    return X, Bv, np.ascontiguousarray(vals, dtype=float), mean_curve


def sparse_regression(
    Y: SparseMatrix,
    X,
    B,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    lam: float = 0.0,
    labels: Sequence[str] | None = None,
    center: bool = False,
) -> RegressionModel:
    """Least squares ``min_A ||P_Omega(Y - X A B')||^2`` by impute-then-OLS iterations.

    Starts from ``A = 0``. With ``lam > 0`` each OLS step is followed by
    soft thresholding of ``A``; that is an exact majorize-minimize step only
    when ``X`` has orthonormal columns.
    """
    X, Bv, vals, mean_curve = _setup(Y, X, B, center)
    solve = _gram_solver(X)
    A0 = np.zeros((X.shape[1], Bv.shape[1]))
    A, n_iter, converged, trace = _fit_one(Y, vals, X, Bv, solve, lam, A0, eps, max_iter)
    labels = list(labels) if labels is not None else [f"x{j}" for j in range(X.shape[1])]
    return RegressionModel(A, Bv, labels, float(lam), n_iter, converged, trace, mean_curve)


def regress_on_scores(
    Y: SparseMatrix,
    U,
    B,
    path: Sequence[float],
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    center: bool = False,
) -> list[RegressionModel]:
    """Nuclear-norm penalized regression on scores ``U``, warm-started along ``path``."""
    U, Bv, vals, mean_curve = _setup(Y, U, B, center)
    if U.shape[1] == 0:
        raise ConfigurationError("latent dimension is 0; nothing to regress on")
    solve = _gram_solver(U)
    A = np.zeros((U.shape[1], Bv.shape[1]))
    labels = [f"score{j}" for j in range(U.shape[1])]
    models = []
    for lam in lambda_path(path):
        A, n_iter, converged, trace = _fit_one(Y, vals, U, Bv, solve, lam, A, eps, max_iter)
        models.append(RegressionModel(A, Bv, labels, float(lam), n_iter, converged, trace, mean_curve))
    return models


@dataclass
class LongitudinalRegressionFit:
    step1: MultivariateFit
    embedding: LatentEmbedding
    scores: np.ndarray
    models: list[RegressionModel]

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.models])

    def predict(self, index: int = -1) -> np.ndarray:
        return self.models[index].predict(self.scores)


def sparse_longitudinal_regression(
    Y: SparseMatrix,
    covariates: StackedDesign,
    path: Sequence[float],
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    step1_lambda: float | None = None,
    d2: int | None = None,
    B=None,
    center: bool = False,
    step1: MultivariateFit | None = None,
) -> LongitudinalRegressionFit:
    """Two-step regression of ``Y`` on other sparse processes.

    Step 1 embeds the covariate blocks jointly and keeps the orthonormal
    subject scores ``U``; step 2 fits ``Y ~ U A B'`` with a nuclear penalty
    on ``A`` for each lambda in ``path``.

    ``step1_lambda`` selects the step-1 solution (default: smallest lambda on
    the default path). ``d2`` truncates the scores; by default all nonzero
    components of the selected solution are kept. ``B`` is the response
    basis and defaults to the first covariate block's basis. A precomputed
    step-1 fit may be passed as ``step1``.
    """
    if Y.n_rows != covariates.n_rows:
        raise DimensionError(f"response has {Y.n_rows} rows, covariates have {covariates.n_rows}")
    if step1 is None:
        step1 = multivariate_impute(
            covariates, None if step1_lambda is None else [step1_lambda], eps=eps, max_iter=max_iter
        )
    idx = -1 if step1_lambda is None else step1.path.index_of(step1_lambda)
    emb = step1.embeddings[idx]
    k = emb.rank if d2 is None else int(d2)
    if k <= 0 or k > emb.rank:
        raise ConfigurationError(f"latent dimension must be in [1, {emb.rank}], got {k}")
    U = emb.U[:, :k]
    Bv = covariates.blocks[0].basis if B is None else basis_values(B)
    models = regress_on_scores(Y, U, Bv, path, eps=eps, max_iter=max_iter, center=center)
    return LongitudinalRegressionFit(step1, emb, U, models)
