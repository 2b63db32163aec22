"""Time grids and spline bases evaluated on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .errors import DegeneracyError, DimensionError, RangeError, ValidationError

__all__ = [
    "TimeGrid",
    "BasisMatrix",
    "make_bspline_basis",
    "orthonormalize",
    "snap_to_grid",
    "default_basis",
]

DEFAULT_T = 51
DEFAULT_K = 7
DEFAULT_DEGREE = 3


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """``T`` equidistant points spanning ``[t_min, t_max]``."""

    t_min: float
    t_max: float
    T: int = DEFAULT_T
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 2:
            raise ValidationError(f"grid needs T >= 2 points, got {self.T}")
        if not (np.isfinite(self.t_min) and np.isfinite(self.t_max)):
            raise ValidationError("grid bounds must be finite")
        if not self.t_max > self.t_min:
            raise ValidationError(
                f"grid bounds must satisfy t_min < t_max, got [{self.t_min}, {self.t_max}]"
            )
        object.__setattr__(self, "T", int(self.T))
        object.__setattr__(self, "t_min", float(self.t_min))
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(
            self, "points", _frozen(np.linspace(self.t_min, self.t_max, self.T))
        )

    @property
    def spacing(self) -> float:
        return (self.t_max - self.t_min) / (self.T - 1)

    def __len__(self) -> int:
        return self.T


@dataclass(frozen=True)
class BasisMatrix:
    """A ``T x K`` basis evaluated on a grid.

    ``knots`` and ``degree`` are kept when the matrix came from B-splines so
    the same functions can be re-evaluated at arbitrary times via :meth:`evaluate`.
    For an orthonormalized basis ``transform`` maps raw spline values to the
    orthonormal columns (``values = raw @ transform``).
    """

    values: np.ndarray
    grid: TimeGrid | None
    orthonormal: bool = False
    knots: np.ndarray | None = field(default=None, repr=False)
    degree: int | None = None
    transform: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.ndim != 2:
            raise DimensionError("basis values must be a 2-d array")
        if v.shape[1] > v.shape[0]:
            raise DimensionError(f"basis has K={v.shape[1]} > T={v.shape[0]}")
        if self.grid is not None and v.shape[0] != self.grid.T:
            raise DimensionError(
                f"basis has {v.shape[0]} rows but grid has T={self.grid.T}"
            )
        object.__setattr__(self, "values", _frozen(v))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def gram(self) -> np.ndarray:
        return self.values.T @ self.values

    def evaluate(self, times) -> np.ndarray:
        """Evaluate the basis functions at arbitrary ``times`` (len(times) x K)."""
        if self.knots is None or self.degree is None:
            raise ValidationError("basis carries no spline definition to re-evaluate")
        times = np.asarray(times, dtype=float)
        raw = BSpline.design_matrix(times, self.knots, self.degree).toarray()
        if self.transform is not None:
            raw = raw @ self.transform
        return raw


def _clamped_knots(t_min: float, t_max: float, K: int, degree: int) -> np.ndarray:
    n_interior = K - degree - 1
    inner = np.linspace(t_min, t_max, n_interior + 2)
    return np.r_[[t_min] * degree, inner, [t_max] * degree]


def make_bspline_basis(grid: TimeGrid, K: int = DEFAULT_K, degree: int = DEFAULT_DEGREE) -> BasisMatrix:
    """B-splines with equally spaced interior knots, evaluated on ``grid``.

    The knot vector is clamped at both ends, so every row sums to one.
    """
    if degree < 0:
        raise ValidationError(f"spline degree must be >= 0, got {degree}")
    if K < degree + 1:
        raise ValidationError(f"need K >= degree + 1, got K={K}, degree={degree}")
    if K > grid.T:
        raise DimensionError(f"K={K} basis functions do not fit on T={grid.T} points")
    knots = _clamped_knots(grid.t_min, grid.t_max, K, degree)
    values = BSpline.design_matrix(grid.points, knots, degree).toarray()
    return BasisMatrix(values, grid, orthonormal=False, knots=_frozen(knots), degree=degree)


def orthonormalize(B: BasisMatrix, tol: float = 1e-10) -> BasisMatrix:
    """Orthonormal basis for the column space of ``B`` via thin QR.

    Column signs are fixed so the first nonzero entry of each column is positive.
    """
    X = B.values
    sv = np.linalg.svd(X, compute_uv=False)
    cutoff = tol * max(sv[0], 1.0) if sv.size else 0.0
    rank = int(np.sum(sv > cutoff))
    if rank < B.K:
        raise DegeneracyError(
            f"basis is rank deficient: {B.K - rank} of {B.K} columns are linearly dependent"
        )
    Q, R = np.linalg.qr(X)
    signs = np.empty(Q.shape[1])
    for k in range(Q.shape[1]):
        nz = np.flatnonzero(np.abs(Q[:, k]) > 1e-14)
        signs[k] = np.sign(Q[nz[0], k]) if nz.size else 1.0
    Q = Q * signs
    R = R * signs[:, None]
    # values = X @ R^-1; compose with any earlier transform
    transform = np.linalg.inv(R)
    if B.transform is not None:
        transform = B.transform @ transform
    return BasisMatrix(
        Q,
        B.grid,
        orthonormal=True,
        knots=B.knots,
        degree=B.degree,
        transform=_frozen(transform),
    )


def default_basis(grid: TimeGrid, K: int = DEFAULT_K, degree: int = DEFAULT_DEGREE) -> BasisMatrix:
    """Orthonormalized cubic B-spline basis, the one the solvers expect."""
    return orthonormalize(make_bspline_basis(grid, K, degree))


def snap_to_grid(times, grid: TimeGrid) -> np.ndarray:
    """Index of the nearest grid point for each time; midpoint ties go to the lower index."""
    t = np.atleast_1d(np.asarray(times, dtype=float))
    bad = ~np.isfinite(t) | (t < grid.t_min) | (t > grid.t_max)
    if bad.any():
        v = t[np.flatnonzero(bad)[0]]
        raise RangeError(f"time {v!r} outside grid range [{grid.t_min}, {grid.t_max}]")
    pts = grid.points
    hi = np.clip(np.searchsorted(pts, t, side="left"), 1, grid.T - 1)
    lo = hi - 1
    pick_lo = (t - pts[lo]) <= (pts[hi] - t)
    return np.where(pick_lo, lo, hi).astype(np.intp)
