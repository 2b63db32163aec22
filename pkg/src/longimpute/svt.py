"""Soft and hard singular value thresholding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ValidationError

__all__ = ["ThresholdedSVD", "soft_svt", "hard_svt", "svd_rank"]

RANK_RTOL = 1e-10


def svd_rank(d: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Number of singular values above ``rtol * d[0]`` (and above zero)."""
    d = np.asarray(d)
    if d.size == 0 or d[0] <= 0:
        return 0
    return int(np.sum(d > rtol * d[0]))


@dataclass(frozen=True)
class ThresholdedSVD:
    U: np.ndarray
    d: np.ndarray
    V: np.ndarray
    rank: int

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.d) @ self.V.T

    @property
    def nuclear_norm(self) -> float:
        return float(self.d.sum())


def _svd(X) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValidationError("SVT expects a 2-d matrix")
    if not np.all(np.isfinite(X)):
        raise DataError("matrix contains non-finite entries")
    if X.size == 0:
        return np.zeros((X.shape[0], 0)), np.zeros(0), np.zeros((X.shape[1], 0))
    U, d, Vt = np.linalg.svd(X, full_matrices=False)
    return U, d, Vt.T


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not lam >= 0:
        raise ValidationError(f"threshold must be >= 0, got {lam}")
    return lam


def _pack(U, d, V) -> ThresholdedSVD:
    r = svd_rank(d)
    d = d.copy()
    d[r:] = 0.0
    return ThresholdedSVD(U, d, V, r)


def soft_svt(X, lam: float) -> ThresholdedSVD:
    """Shrink every singular value of ``X`` by ``lam`` and clamp at zero.

    The reconstruction is the minimizer of ``0.5 * ||X - W||_F^2 + lam * ||W||_*``.
    """
    lam = _check_lambda(lam)
    U, d, V = _svd(X)
    return _pack(U, np.maximum(d - lam, 0.0), V)


def hard_svt(X, lam: float, max_rank: int | None = None) -> ThresholdedSVD:
    """Keep singular values ``>= lam`` unchanged and zero the rest.

    ``max_rank`` additionally truncates to the leading ``max_rank`` values.
    """
    lam = _check_lambda(lam)
    U, d, V = _svd(X)
    keep = d >= lam
    if max_rank is not None:
        keep[max_rank:] = False
    return _pack(U, np.where(keep, d, 0.0), V)
