"""Joint low-rank embedding of several sparse processes, and the bivariate
errors-in-variables decomposition built on it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .completion import (
    DEFAULT_EPS,
    DEFAULT_MAX_ITER,
    FitPath,
    basis_values,
    check_orthonormal,
    soft_impute,
)
from .data import SparseMatrix
from .errors import DimensionError, SingularityError, ValidationError
from .svt import svd_rank

__all__ = [
    "Block",
    "StackedDesign",
    "LatentEmbedding",
    "MultivariateFit",
    "robust_scale",
    "constant_block",
    "make_design",
    "multivariate_impute",
    "bivariate_eiv",
    "bivariate_eiv_partial",
]

MAD_TO_SD = 1.4826
V11_MAX_COND = 1e10


def robust_scale(values) -> float:
    """Default block weight: ``1 / (1.4826 * MAD)``, falling back to ``1 / sd`` then 1."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return 1.0
    mad = MAD_TO_SD * np.median(np.abs(v - np.median(v)))
    if mad > 0:
        return 1.0 / mad
    sd = v.std()
    return 1.0 / sd if sd > 0 else 1.0


@dataclass(frozen=True)
class Block:
    data: SparseMatrix
    basis: np.ndarray
    gamma: float
    name: str = ""

    @property
    def K(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class StackedDesign:
    """Side-by-side layout ``(g1 X1 : g2 X2 : ...)`` with block-diagonal basis."""

    blocks: tuple[Block, ...]
    matrix: SparseMatrix
    basis: np.ndarray
    col_offsets: np.ndarray
    coef_offsets: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.matrix.n_rows

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.blocks]

    def coef_slice(self, i: int) -> slice:
        return slice(int(self.coef_offsets[i]), int(self.coef_offsets[i + 1]))

    def col_slice(self, i: int) -> slice:
        return slice(int(self.col_offsets[i]), int(self.col_offsets[i + 1]))

    def block_index(self, key) -> int:
        if isinstance(key, str):
            return self.names.index(key)
        return int(key)


def constant_block(values, observed=None, name: str = "") -> tuple[SparseMatrix, np.ndarray]:
    """A time-constant covariate as an ``N x 1`` matrix with basis ``[[1]]``."""
    v = np.asarray(values, dtype=float)
    obs = ~np.isnan(v) if observed is None else np.asarray(observed, dtype=bool)
    rows = np.flatnonzero(obs)
    return SparseMatrix(v.size, 1, rows, np.zeros(rows.size, np.intp), v[rows]), np.ones((1, 1))


def make_design(blocks: Sequence, names: Sequence[str] | None = None) -> StackedDesign:
    """Build a stacked design from ``(Y, B)`` or ``(Y, B, gamma)`` tuples.

    A missing or ``None`` gamma defaults to :func:`robust_scale` of the block's
    observed values.
    """
    if len(blocks) == 0:
        raise ValidationError("design needs at least one block")
    built = []
    for i, spec in enumerate(blocks):
        Y, B = spec[0], spec[1]
        gamma = spec[2] if len(spec) > 2 else None
        Bv = basis_values(B)
        if Bv.shape[0] != Y.n_cols:
            raise DimensionError(f"block {i}: basis has {Bv.shape[0]} rows, data has {Y.n_cols} columns")
        check_orthonormal(Bv)
        g = robust_scale(Y.values) if gamma is None else float(gamma)
        if not g > 0:
            raise ValidationError(f"block {i}: scale must be > 0, got {g}")
        name = names[i] if names is not None else f"block{i}"
        built.append(Block(Y, Bv, g, name))
    N = built[0].data.n_rows
    for b in built:
        if b.data.n_rows != N:
            raise DimensionError(f"block {b.name!r} has {b.data.n_rows} rows, expected {N}")
    col_off = np.cumsum([0] + [b.data.n_cols for b in built])
    coef_off = np.cumsum([0] + [b.K for b in built])
    rows = np.concatenate([b.data.rows for b in built])
    cols = np.concatenate([b.data.cols + o for b, o in zip(built, col_off)])
    vals = np.concatenate([b.gamma * b.data.values for b in built])
    stacked = SparseMatrix(N, int(col_off[-1]), rows, cols, vals)
    basis = block_diag(*[b.basis for b in built])
    return StackedDesign(tuple(built), stacked, basis, col_off, coef_off)


@dataclass
class LatentEmbedding:
    """``W = U diag(S) V'`` for one lambda, with loadings sliced per block."""

    lam: float
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    block_loadings: list[np.ndarray] = field(repr=False)

    @property
    def rank(self) -> int:
        return int(self.S.size)

    @property
    def W(self) -> np.ndarray:
        return (self.U * self.S) @ self.V.T


def _embed(W: np.ndarray, lam: float, design: StackedDesign) -> LatentEmbedding:
    U, S, Vt = np.linalg.svd(W, full_matrices=False)
    r = svd_rank(S)
    U, S, V = U[:, :r], S[:r], Vt[:r].T
    loadings = [V[design.coef_slice(i)] for i in range(len(design.blocks))]
    return LatentEmbedding(float(lam), U, S, V, loadings)


@dataclass
class MultivariateFit:
    design: StackedDesign
    path: FitPath
    embeddings: list[LatentEmbedding]

    @property
    def lambdas(self) -> np.ndarray:
        return self.path.lambdas

    def coefficients(self, index: int = -1, block=None) -> np.ndarray:
        """Stacked coefficients, or one block's slice rescaled back to data units."""
        W = self.path.fits[index].W
        if block is None:
            return W
        i = self.design.block_index(block)
        return W[:, self.design.coef_slice(i)] / self.design.blocks[i].gamma

    def impute(self, block, index: int = -1) -> np.ndarray:
        """Fitted curves of one block in its original units."""
        i = self.design.block_index(block)
        b = self.design.blocks[i]
        W = self.path.fits[index].W[:, self.design.coef_slice(i)]
        out = W @ b.basis.T
        if self.path.mean_curve is not None:
            out = out + self.path.mean_curve[self.design.col_slice(i)]
        return out / b.gamma


def multivariate_impute(
    design: StackedDesign,
    path: Sequence[float] | None = None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    center: bool = False,
) -> MultivariateFit:
    """Soft-thresholded completion of the stacked, scaled system, SVD-decomposed per lambda."""
    fit = soft_impute(design.matrix, design.basis, path, eps=eps, max_iter=max_iter, center=center)
    embeddings = [_embed(f.W, f.lam, design) for f in fit.fits]
    return MultivariateFit(design, fit, embeddings)


def _eiv_decompose(M: np.ndarray, K: int, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    U, s, Vt = np.linalg.svd(M, full_matrices=True)
    V = Vt.T
    V11 = V[:K, :K]
    V21 = V[K:, :K]
    cond = np.linalg.cond(V11)
    if not np.isfinite(cond) or cond > V11_MAX_COND:
        raise SingularityError(f"leading loading block is singular (condition number {cond:.3g})")
    # (I : gamma A) = (V11')^-1 [V11' V21']
    A = np.linalg.solve(V11.T, V21.T) / gamma
    W = (U[:, :K] * s[:K]) @ V11.T
    return W, A


def bivariate_eiv(X, Y, B, gamma: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Fit ``X ~ W B'`` and ``Y ~ W A B'`` jointly by truncated SVD of ``(XB : gamma YB)``.

    Both matrices must be fully observed ``N x T``. Returns ``(W, A)`` with
    ``W`` of shape ``N x K`` and ``A`` of shape ``K x K``.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    Bv = basis_values(B)
    if X.shape != Y.shape or X.shape[1] != Bv.shape[0]:
        raise DimensionError(f"X {X.shape}, Y {Y.shape} and B {Bv.shape} do not conform")
    if not gamma > 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValidationError("bivariate fit needs fully observed, finite X and Y")
    check_orthonormal(Bv)
    M = np.hstack([X @ Bv, gamma * (Y @ Bv)])
    return _eiv_decompose(M, Bv.shape[1], gamma)


def bivariate_eiv_partial(
    X: SparseMatrix,
    Y: SparseMatrix,
    B,
    gamma: float = 1.0,
    lam: float | None = None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse version: complete ``(X : gamma Y)`` jointly, then decompose.

    ``lam`` defaults to the smallest value of the default path.
    """
    design = make_design([(X, B, 1.0), (Y, B, gamma)])
    fit = multivariate_impute(design, None if lam is None else [lam], eps=eps, max_iter=max_iter)
    M = fit.path.fits[-1].W
    return _eiv_decompose(M, basis_values(B).shape[1], gamma)
