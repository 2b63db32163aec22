"""Scoring, the population-mean baseline, and grid search by held-out error."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .completion import (
    DEFAULT_EPS,
    DEFAULT_MAX_ITER,
    basis_values,
    default_lambda_path,
    hard_impute,
    soft_impute,
)
from .data import SparseMatrix, SplitAssignment
from .errors import ConfigurationError, DataError, DimensionError, ValidationError
from .multivariate import StackedDesign, make_design, multivariate_impute
from .regression import regress_on_scores

__all__ = ["mse", "null_model", "CvReport", "cross_validate", "METHODS"]

METHODS = ("soft", "hard", "regression", "multivariate")


def mse(predicted, truth, S=None, mode: str = "curve") -> float:
    """Mean squared error.

    ``mode="curve"``: ``S`` is a set of rows and the error is averaged over
    all ``T`` points of each listed curve (all rows when ``S`` is None).
    ``mode="entry"``: ``S`` is a collection of ``(row, col)`` pairs.
    """
    P = np.asarray(predicted, dtype=float)
    Q = np.asarray(truth, dtype=float)
    if P.shape != Q.shape:
        raise DimensionError(f"prediction {P.shape} and truth {Q.shape} differ in shape")
    if mode == "curve":
        rows = np.arange(P.shape[0]) if S is None else np.asarray(sorted(S) if isinstance(S, set) else S, dtype=np.intp)
        if rows.size == 0:
            raise ValidationError("empty evaluation set")
        diff = P[rows] - Q[rows]
        return float(np.sum(diff * diff) / (P.shape[1] * rows.size))
    if mode == "entry":
        pairs = np.asarray(sorted(S) if isinstance(S, set) else S, dtype=np.intp).reshape(-1, 2)
        if pairs.shape[0] == 0:
            raise ValidationError("empty evaluation set")
        diff = P[pairs[:, 0], pairs[:, 1]] - Q[pairs[:, 0], pairs[:, 1]]
        return float(np.mean(diff * diff))
    raise ValidationError(f"unknown mse mode {mode!r}")


def entry_mse(predicted, Y: SparseMatrix) -> float:
    """MSE of ``predicted`` against the observed entries of ``Y``."""
    if Y.nnz == 0:
        raise ValidationError("empty evaluation set")
    d = np.asarray(predicted)[Y.rows, Y.cols] - Y.values
    return float(np.mean(d * d))


def null_model(Y: SparseMatrix) -> np.ndarray:
    """Per-time-point mean of observed values, linearly interpolated over empty columns."""
    if Y.nnz == 0:
        raise DataError("null model needs at least one observation")
    sums = np.bincount(Y.cols, weights=Y.values, minlength=Y.n_cols)
    counts = np.bincount(Y.cols, minlength=Y.n_cols)
    have = counts > 0
    x = np.arange(Y.n_cols)
    # np.interp holds the end values constant outside the observed range
    return np.interp(x, x[have], sums[have] / counts[have])


@dataclass
class CvReport:
    method: str
    grid_kind: str
    grid: list[float]
    validation_mse: list[float]
    selected: float
    test_mse: float
    seed: int | None = None
    test_curve_mse: float | None = None
    step1_lambda: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: v for k, v in d.items() if v is not None and v != {}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.grid_kind, "validation_mse", "selected"])
            for g, v in zip(self.grid, self.validation_mse):
                w.writerow([repr(float(g)), repr(float(v)), int(g == self.selected)])


def _argmin_first(values: Sequence[float]) -> int:
    """Index of the minimum; the earliest candidate wins ties."""
    v = np.asarray(values, dtype=float)
    best = np.min(v)
    return int(np.flatnonzero(v == best)[0])


def _as_design(covariates) -> StackedDesign:
    if covariates is None:
        raise ConfigurationError("this method needs covariate blocks")
    if isinstance(covariates, StackedDesign):
        return covariates
    return make_design(list(covariates))


def cross_validate(
    Y: SparseMatrix,
    B,
    grid: Sequence[float],
    split: SplitAssignment,
    method: str = "soft",
    grid_kind: str = "lambda",
    covariates=None,
    truth=None,
    eps: float = DEFAULT_EPS,
    max_iter: int = DEFAULT_MAX_ITER,
    center: bool = False,
    seed: int | None = None,
    step1_grid: Sequence[float] | None = None,
    target_gamma: float | None = None,
) -> CvReport:
    """Pick a regularization level by validation error, refit, and score on test.

    Fits use only the training entries of ``Y``; each candidate is scored
    by entrywise MSE on the validation entries. The minimizer (ties broken
    toward larger lambda / smaller rank) is refit on training plus
    validation entries and scored on the test entries. When ``truth`` (dense
    ``N x T``) is given, the curve-mode error over the rows holding test
    entries is reported as ``test_curve_mse``.

    ``method="regression"`` regresses ``Y`` on latent scores of
    ``covariates``; the covariate embedding level is searched jointly over
    ``step1_grid`` (default: the covariates' own default lambda path).
    ``method="multivariate"`` embeds ``covariates`` together with ``Y`` and
    reads predictions off the ``Y`` block.
    """
    if method not in METHODS:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {METHODS}")
    if grid_kind not in ("lambda", "rank"):
        raise ConfigurationError(f"unknown grid kind {grid_kind!r}")
    if grid_kind == "rank" and method != "hard":
        raise ConfigurationError(f"rank grids are only supported for method 'hard', not {method!r}")
    values = np.unique(np.asarray(list(grid), dtype=float))
    if values.size == 0:
        raise ConfigurationError("candidate grid is empty")
    if grid_kind == "rank":
        if np.any(values < 1) or np.any(values != np.round(values)):
            raise ConfigurationError("rank grid must hold positive integers")
        candidates = values  # ascending: smaller rank wins ties
    else:
        if np.any(values < 0):
            raise ConfigurationError("lambda grid must be >= 0")
        candidates = values[::-1]  # descending: larger lambda wins ties

    train = split.matrix(Y, "train")
    val = split.matrix(Y, "validation")
    test = split.matrix(Y, "test")
    if val.nnz == 0:
        raise ConfigurationError("validation set is empty")
    Bv = basis_values(B)

    step1_lambda = None
    if method == "regression":
        design = _as_design(covariates)
        if step1_grid is None:
            s1 = default_lambda_path(design.matrix, design.basis)
        else:
            s1 = np.unique(np.asarray(list(step1_grid), dtype=float))[::-1]
        step1 = multivariate_impute(design, s1, eps=eps, max_iter=max_iter)
        scores = []
        per_step1 = []
        for i, emb in enumerate(step1.embeddings):
            if emb.rank == 0:
                per_step1.append([np.inf] * candidates.size)
                continue
            models = regress_on_scores(train, emb.U, Bv, candidates, eps=eps, max_iter=max_iter, center=center)
            per_step1.append([entry_mse(m.predict(emb.U), val) for m in models])
        table = np.array(per_step1)  # step1 x step2, both descending
        if not np.isfinite(table).any():
            raise ConfigurationError("every step-1 solution has rank 0; lower the step-1 grid")
        flat = _argmin_first(table.ravel())
        i1, i2 = divmod(flat, candidates.size)
        step1_lambda = float(s1[i1])
        selected = float(candidates[i2])
        scores = table[i1].tolist()
        emb = step1.embeddings[i1]
        refit_path = candidates[: i2 + 1]
        model = regress_on_scores(
            split.matrix(Y, "train", "validation"), emb.U, Bv, refit_path, eps=eps, max_iter=max_iter, center=center
        )[-1]
        prediction = model.predict(emb.U)
        extra = {"step1_grid": s1.tolist(), "validation_table": table.tolist()}
    else:
        if method == "soft":
            fit = soft_impute(train, Bv, candidates, eps=eps, max_iter=max_iter, center=center)
            preds = [fit.impute(i) for i in range(len(fit))]
        elif method == "hard":
            preds = _hard_predictions(train, Bv, candidates, grid_kind, eps, max_iter, center)
        else:
            design, target = _joint_design(covariates, train, Bv, target_gamma)
            mfit = multivariate_impute(design, candidates, eps=eps, max_iter=max_iter, center=center)
            preds = [mfit.impute(target, i) for i in range(len(mfit.path))]
        scores = [entry_mse(p, val) for p in preds]
        k = _argmin_first(scores)
        selected = float(candidates[k])
        trval = split.matrix(Y, "train", "validation")
        if method == "soft":
            fit = soft_impute(trval, Bv, candidates[: k + 1], eps=eps, max_iter=max_iter, center=center)
            prediction = fit.impute(-1)
        elif method == "hard":
            prediction = _hard_predictions(trval, Bv, candidates[: k + 1], grid_kind, eps, max_iter, center)[-1]
        else:
            design, target = _joint_design(covariates, trval, Bv, target_gamma)
            mfit = multivariate_impute(design, candidates[: k + 1], eps=eps, max_iter=max_iter, center=center)
            prediction = mfit.impute(target, -1)
        extra = {}

    test_mse = entry_mse(prediction, test) if test.nnz else float("nan")
    curve = None
    if truth is not None and test.nnz:
        curve = mse(prediction, truth, np.unique(test.rows), mode="curve")
    order = np.argsort(candidates)
    return CvReport(
        method=method,
        grid_kind=grid_kind,
        grid=[float(candidates[i]) for i in order],
        validation_mse=[float(scores[i]) for i in order],
        selected=selected,
        test_mse=test_mse,
        seed=seed,
        test_curve_mse=curve,
        step1_lambda=step1_lambda,
        extra=extra,
    )


def _hard_predictions(Y, Bv, candidates, grid_kind, eps, max_iter, center):
    if grid_kind == "lambda":
        soft = soft_impute(Y, Bv, candidates, eps=eps, max_iter=max_iter, center=center)
        hard = hard_impute(Y, Bv, candidates, soft, eps=eps, max_iter=max_iter)
        return [hard.impute(i) for i in range(len(hard))]
    soft = soft_impute(Y, Bv, None, eps=eps, max_iter=max_iter, center=center)
    lam = [soft.lambdas[-1]]
    out = []
    for r in candidates:
        hard = hard_impute(Y, Bv, lam, soft, eps=eps, max_iter=max_iter, max_rank=int(r))
        out.append(hard.impute(-1))
    return out


def _joint_design(covariates, Y, Bv, target_gamma):
    blocks = list(covariates.blocks) if isinstance(covariates, StackedDesign) else list(covariates or [])
    specs = []
    names = []
    for i, b in enumerate(blocks):
        if hasattr(b, "data"):
            specs.append((b.data, b.basis, b.gamma))
            names.append(b.name or f"block{i}")
        else:
            specs.append(tuple(b))
            names.append(f"block{i}")
    specs.append((Y, Bv, target_gamma))
    names.append("__target__")
    return make_design(specs, names), "__target__"
