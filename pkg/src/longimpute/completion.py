"""Soft- and hard-thresholded matrix completion over a spline basis.

Both solvers alternate between filling the unobserved cells of ``Y`` with the
current fit ``W B'`` and thresholding the singular values of the filled
matrix projected onto the basis. Because ``B`` has orthonormal columns the
filled-and-projected matrix is ``W + P_Omega(Y - W B') B``, which only needs
the residuals on observed cells; that step runs in :mod:`._kernels`.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .basis import BasisMatrix
from .data import SparseMatrix
from .errors import ConfigurationError, ContractError, DimensionError, PreconditionError
from .svt import ThresholdedSVD, hard_svt, soft_svt, svd_rank

__all__ = [
    "LambdaFit",
    "FitPath",
    "lambda_path",
    "default_lambda_path",
    "estimate_mean_curve",
    "objective",
    "soft_impute",
    "hard_impute",
    "impute",
    "refit_with_new_data",
]

log = logging.getLogger(__name__)

DEFAULT_EPS = 1e-5
DEFAULT_MAX_ITER = 500
ORTHO_TOL = 1e-8


def basis_values(B) -> np.ndarray:
    if isinstance(B, BasisMatrix):
        return np.ascontiguousarray(B.values)
    return np.ascontiguousarray(np.asarray(B, dtype=float))


def check_orthonormal(B: np.ndarray, tol: float = ORTHO_TOL) -> None:
    gram = B.T @ B
    err = np.max(np.abs(gram - np.eye(B.shape[1]))) if B.size else 0.0
    if err > tol:
        raise ContractError(f"basis columns are not orthonormal (max |B'B - I| = {err:.3g})")


def lambda_path(values: Iterable[float]) -> np.ndarray:
    """Normalize to a strictly decreasing, non-negative grid."""
    lam = np.unique(np.asarray(list(values), dtype=float))[::-1]
    if lam.size == 0:
        raise ConfigurationError("lambda path is empty")
    if not np.all(np.isfinite(lam)) or lam[-1] < 0:
        raise ConfigurationError("lambda values must be finite and >= 0")
    return lam


def _relative_change(W_new: np.ndarray, W_old: np.ndarray) -> float:
    den = float(np.sum(W_old * W_old))
    num = float(np.sum((W_new - W_old) ** 2))
    if den == 0.0:
        return 0.0 if not np.any(W_new) else 1.0
    return num / den


@dataclass
class LambdaFit:
    """Solution for one regularization level."""

    lam: float
    W: np.ndarray
    rank: int
    objective: float
    n_iter: int
    converged: bool
    trace: np.ndarray = field(repr=False)


@dataclass
class FitPath:
    """Per-lambda solutions of one completion run.

    ``data`` is the matrix the path was fit on (uncentered); ``mean_curve``,
    when set, was subtracted from the observations before fitting and is
    added back by :meth:`impute`.
    """

    fits: list[LambdaFit]
    basis: np.ndarray
    data: SparseMatrix
    method: str = "soft"
    eps: float = DEFAULT_EPS
    max_iter: int = DEFAULT_MAX_ITER
    mean_curve: np.ndarray | None = None
    status: str = "ok"
    max_rank: int | None = None

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([f.lam for f in self.fits])

    @property
    def converged(self) -> bool:
        return all(f.converged for f in self.fits)

    def __len__(self) -> int:
        return len(self.fits)

    def __getitem__(self, i) -> LambdaFit:
        return self.fits[i]

    def index_of(self, lam: float) -> int:
        hits = np.flatnonzero(np.isclose(self.lambdas, lam, rtol=1e-12, atol=0.0))
        if hits.size == 0:
            raise KeyError(f"lambda {lam} not on this path")
        return int(hits[0])

    def impute(self, index: int = -1, rows=None) -> np.ndarray:
        return impute(self.fits[index].W, self.basis, rows=rows, mean_curve=self.mean_curve)


def default_lambda_path(Y: SparseMatrix, B, n: int = 20, ratio: float = 100.0, mean_curve=None) -> np.ndarray:
    """``n`` log-spaced values from the top singular value of ``P_Omega(Y) B`` down by ``ratio``."""
    Bv = basis_values(B)
    vals = Y.values if mean_curve is None else Y.values - np.asarray(mean_curve)[Y.cols]
    G, _ = _kernels.residual_update(
        Y.indptr, Y.cols, np.ascontiguousarray(vals), np.zeros((Y.n_rows, Bv.shape[1])), Bv
    )
    d1 = np.linalg.norm(G, 2) if G.size else 0.0
    if d1 == 0.0:
        return np.array([0.0])
    return np.geomspace(d1, d1 / ratio, n)


def estimate_mean_curve(Y: SparseMatrix, B, ridge: float = 1e-6) -> np.ndarray:
    """Population mean curve: ridge-regularized basis least squares on all observed cells."""
    Bv = basis_values(B)
    if Y.nnz == 0:
        return np.zeros(Bv.shape[0])
    Bo = Bv[Y.cols]
    c = np.linalg.solve(Bo.T @ Bo + ridge * np.eye(Bv.shape[1]), Bo.T @ Y.values)
    return Bv @ c


def objective(W, Y: SparseMatrix, B, lam: float, mean_curve=None) -> float:
    """``0.5 * ||P_Omega(Y) - P_Omega(W B')||_F^2 + lam * ||W||_*``."""
    W = np.asarray(W, dtype=float)
    Bv = basis_values(B)
    if W.shape != (Y.n_rows, Bv.shape[1]) or Bv.shape[0] != Y.n_cols:
        raise DimensionError(f"W {W.shape} and B {Bv.shape} do not fit Y {Y.shape}")
    fitted = np.einsum("ij,ij->i", W[Y.rows], Bv[Y.cols])
    if mean_curve is not None:
        fitted = fitted + np.asarray(mean_curve)[Y.cols]
    resid = Y.values - fitted
    nuc = np.linalg.svd(W, compute_uv=False).sum() if W.size else 0.0
    return 0.5 * float(resid @ resid) + lam * float(nuc)


def _soft_penalty(s: ThresholdedSVD, lam: float) -> float:
    return lam * s.nuclear_norm


def _hard_penalty(s: ThresholdedSVD, lam: float) -> float:
    # hard thresholding at lam is the exact minimizer of 0.5||X - W||^2 + 0.5 lam^2 rank(W)
    return 0.5 * lam * lam * s.rank


def _run_lambda(
    Y: SparseMatrix,
    vals: np.ndarray,
    B: np.ndarray,
    lam: float,
    W0: np.ndarray,
    eps: float,
    max_iter: int,
    threshold: Callable[[np.ndarray, float], ThresholdedSVD],
    penalty: Callable[[ThresholdedSVD, float], float],
) -> LambdaFit:
    W = np.array(W0, dtype=float, copy=True)
    G, rss = _kernels.residual_update(Y.indptr, Y.cols, vals, W, B)
    s0 = threshold(W, 0.0) if np.any(W) else None
    pen = penalty(s0, lam) if s0 is not None else 0.0
    trace = [0.5 * rss + pen]
    converged = False
    n_iter = 0
    rank = s0.rank if s0 is not None else 0
    for n_iter in range(1, max_iter + 1):
        s = threshold(G, lam)
        W_new = s.reconstruct()
        crit = _relative_change(W_new, W)
        W = W_new
        rank = s.rank
        G, rss = _kernels.residual_update(Y.indptr, Y.cols, vals, W, B)
        trace.append(0.5 * rss + penalty(s, lam))
        if crit < eps:
            converged = True
            break
    if not converged:
        log.warning("lambda=%.6g: no convergence after %d iterations", lam, max_iter)
    return LambdaFit(float(lam), W, rank, trace[-1], n_iter, converged, np.asarray(trace))


def _prepare(Y: SparseMatrix, B, mean_curve):
    Bv = basis_values(B)
    if Bv.shape[0] != Y.n_cols:
        raise DimensionError(f"basis has T={Bv.shape[0]} rows but Y has {Y.n_cols} columns")
    check_orthonormal(Bv)
    vals = Y.values
    if mean_curve is not None:
        mean_curve = np.asarray(mean_curve, dtype=float)
        if mean_curve.shape != (Y.n_cols,):
            raise DimensionError("mean curve length must equal the number of grid points")
        vals = vals - mean_curve[Y.cols]
    return Bv, np.ascontiguousarray(vals, dtype=float), mean_curve


def _empty_path(Y, Bv, lam, method, eps, max_iter, mean_curve, max_rank=None) -> FitPath:
    warnings.warn("no observed entries; returning zero coefficients", RuntimeWarning, stacklevel=3)
    zero = np.zeros((Y.n_rows, Bv.shape[1]))
    fits = [LambdaFit(float(l), zero.copy(), 0, 0.0, 0, True, np.zeros(1)) for l in lam]
    return FitPath(fits, Bv, Y, method, eps, max_iter, mean_curve, status="empty", max_rank=max_rank)


def soft_impute(
    Y: SparseMatrix,
    B,
    path: Sequence[float] | None = None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    center: bool = False,
    mean_curve=None,
    W0=None,
) -> FitPath:
    """Nuclear-norm regularized completion along a decreasing lambda path.

    The first lambda starts from ``W0`` (zeros by default); each later lambda
    is warm-started from the previous solution.

    Parameters
    ----------
    Y : SparseMatrix
        Observed ``N x T`` data.
    B : BasisMatrix or array
        ``T x K`` basis with orthonormal columns.
    path : sequence of float, optional
        Regularization levels; sorted into decreasing order. Defaults to
        :func:`default_lambda_path`.
    eps : float
        Stop when ``||W_new - W_old||_F^2 / ||W_old||_F^2 < eps``.
    max_iter : int
        Iteration cap per lambda.
    center : bool
        Estimate and subtract a mean curve first (ignored if ``mean_curve``
        is given).
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    if mean_curve is None and center:
        mean_curve = estimate_mean_curve(Y, B)
    Bv, vals, mean_curve = _prepare(Y, B, mean_curve)
    lam = lambda_path(path) if path is not None else default_lambda_path(Y, Bv, mean_curve=mean_curve)
    if Y.nnz == 0:
        return _empty_path(Y, Bv, lam, "soft", eps, max_iter, mean_curve)
    W = np.zeros((Y.n_rows, Bv.shape[1])) if W0 is None else np.asarray(W0, dtype=float)
    if W.shape != (Y.n_rows, Bv.shape[1]):
        raise DimensionError(f"initial W has shape {W.shape}, expected {(Y.n_rows, Bv.shape[1])}")
    fits = []
    for l in lam:
        fit = _run_lambda(Y, vals, Bv, l, W, eps, max_iter, soft_svt, _soft_penalty)
        fits.append(fit)
        W = fit.W
    return FitPath(fits, Bv, Y, "soft", eps, max_iter, mean_curve)


def hard_impute(
    Y: SparseMatrix,
    B,
    path: Sequence[float] | None,
    warm: FitPath,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    max_rank: int | None = None,
) -> FitPath:
    """Rank-penalized completion, each lambda started from the soft solution ``warm``.

    Uses ``warm.mean_curve`` so both paths live in the same centered frame.
    ``max_rank`` optionally caps the number of retained singular values.
    """
    if not eps > 0:
        raise ConfigurationError(f"eps must be > 0, got {eps}")
    lam = warm.lambdas if path is None else lambda_path(path)
    warm_idx = []
    for l in lam:
        try:
            warm_idx.append(warm.index_of(l))
        except KeyError:
            raise ConfigurationError(f"warm-start path has no solution for lambda={l}") from None
    Bv, vals, mean_curve = _prepare(Y, B, warm.mean_curve)
    if Y.nnz == 0:
        return _empty_path(Y, Bv, lam, "hard", eps, max_iter, mean_curve, max_rank)
    threshold = hard_svt if max_rank is None else (lambda X, l: hard_svt(X, l, max_rank))
    starts = [warm.fits[i].W for i in warm_idx]
    if max_rank is not None:
        # a start above the rank cap would break monotone descent on the first step
        starts = [hard_svt(W, 0.0, max_rank).reconstruct() for W in starts]
    fits = [
        _run_lambda(Y, vals, Bv, l, W0, eps, max_iter, threshold, _hard_penalty)
        for l, W0 in zip(lam, starts)
    ]
    return FitPath(fits, Bv, Y, "hard", eps, max_iter, mean_curve, max_rank=max_rank)


def impute(W, B, rows=None, mean_curve=None) -> np.ndarray:
    """Fitted trajectories ``W B'`` (plus the mean curve) for the requested rows."""
    W = np.asarray(W, dtype=float)
    Bv = basis_values(B)
    if rows is not None:
        rows = np.atleast_1d(np.asarray(rows))
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        if rows.size and (rows.min() < -W.shape[0] or rows.max() >= W.shape[0]):
            raise IndexError(f"row index out of range for {W.shape[0]} subjects")
        W = W[rows]
    out = W @ Bv.T
    if mean_curve is not None:
        out = out + np.asarray(mean_curve)[None, :]
    return out


def refit_with_new_data(fit: FitPath, Y_new: SparseMatrix, mode: str = "new_observations") -> FitPath:
    """Update every per-lambda solution with additional data.

    ``new_observations``: ``Y_new`` has the same rows as the fitted data and
    its entries are merged in (new values win on shared cells).
    ``new_subjects``: ``Y_new`` holds only the new subjects, appended as rows
    with zero initial coefficients. Each must have at least as many
    observations as the largest rank on the path.
    """
    Y_old = fit.data
    K = fit.basis.shape[1]
    if mode == "new_observations":
        if Y_new.shape != Y_old.shape:
            raise DimensionError(f"new data has shape {Y_new.shape}, fit has {Y_old.shape}")
        Y = Y_old.merge(Y_new)
        starts = [f.W for f in fit.fits]
    elif mode == "new_subjects":
        if Y_new.n_cols != Y_old.n_cols:
            raise DimensionError("new subjects must live on the same grid")
        need = max((f.rank for f in fit.fits), default=0)
        counts = Y_new.row_counts()
        short = np.flatnonzero(counts < need)
        if short.size:
            raise PreconditionError(
                f"new subject row {int(short[0])} has {int(counts[short[0]])} observations; "
                f"at least {need} (the rank of W) are required"
            )
        Y = Y_old.append_rows(Y_new)
        pad = np.zeros((Y_new.n_rows, K))
        starts = [np.vstack([f.W, pad]) for f in fit.fits]
    else:
        raise ConfigurationError(f"unknown refit mode {mode!r}")

    Bv, vals, mean_curve = _prepare(Y, fit.basis, fit.mean_curve)
    if fit.method == "soft":
        threshold, penalty = soft_svt, _soft_penalty
    else:
        threshold = hard_svt if fit.max_rank is None else (lambda X, l: hard_svt(X, l, fit.max_rank))
        penalty = _hard_penalty
    fits = [
        _run_lambda(Y, vals, Bv, f.lam, W0, fit.eps, fit.max_iter, threshold, penalty)
        for f, W0 in zip(fit.fits, starts)
    ]
    return replace(fit, fits=fits, data=Y)
