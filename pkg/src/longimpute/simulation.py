"""Synthetic cohorts of spline curves with group structure, sparsely observed with noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import TimeGrid, make_bspline_basis
from .data import ObservationRecord, SparseMatrix, discretize
from .errors import ValidationError

__all__ = [
    "SimulationSpec",
    "SimulationResult",
    "decay_spectrum",
    "gen_covariance",
    "gen_cohort",
    "simulate_study",
]

VARIABLES = ("X1", "X2", "Y")


def decay_spectrum(K: int, head) -> np.ndarray:
    """``head`` followed by ``0.1 * exp(-(k-1))`` for 1-based positions ``k > len(head)``."""
    head = list(head)
    tail = [0.1 * np.exp(-(k - 1)) for k in range(len(head) + 1, K + 1)]
    return np.array((head + tail)[:K], dtype=float)


def r1(K: int = 7) -> np.ndarray:
    return decay_spectrum(K, [1.0, 0.4, 0.005])


def r2(K: int = 7) -> np.ndarray:
    return decay_spectrum(K, [1.3, 0.2, 0.005])


def _eigvecs(K: int, rng: np.random.Generator) -> np.ndarray:
    R = rng.standard_normal((K, K))
    _, _, Vt = np.linalg.svd(R)
    return Vt.T


def gen_covariance(r, rng: np.random.Generator) -> np.ndarray:
    """Symmetric PSD matrix with spectrum ``r`` and Haar-like random eigenvectors."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValidationError("spectrum entries must be >= 0")
    V = _eigvecs(r.size, rng)
    Q = (V * r) @ V.T
    return 0.5 * (Q + Q.T)


def gen_cohort(r_a, r_b, K: int, N: int, rng: np.random.Generator) -> np.ndarray:
    """Two-component Gaussian mixture of coefficient vectors.

    The first ``N // 3`` rows come from ``N(2 mu, M(r_a))``, the rest from
    ``N(-mu, M(r_b))`` where ``mu ~ N(0, I_K)`` is drawn once per call.
    """
    if N < 3:
        raise ValidationError(f"cohort needs N >= 3, got {N}")
    r_a = np.asarray(r_a, dtype=float)
    r_b = np.asarray(r_b, dtype=float)
    if r_a.size != K or r_b.size != K:
        raise ValidationError("spectra must have K entries")
    if np.any(r_a < 0) or np.any(r_b < 0):
        raise ValidationError("spectra must be >= 0")
    Va = _eigvecs(K, rng)
    Vb = _eigvecs(K, rng)
    mu = rng.standard_normal(K)
    n1 = N // 3
    za = rng.standard_normal((n1, K))
    zb = rng.standard_normal((N - n1, K))
    # draws from N(m, V diag(r) V') as m + V (sqrt(r) * z)
    top = 2 * mu + (za * np.sqrt(r_a)) @ Va.T
    bottom = -mu + (zb * np.sqrt(r_b)) @ Vb.T
    return np.vstack([top, bottom])


@dataclass(frozen=True)
class SimulationSpec:
    N: int = 100
    T_gen: int = 31
    T_fit: int = 51
    K: int = 7
    degree: int = 3
    obs_fraction: float = 0.10
    noise_sd: float = 0.25
    seed: int = 0
    shared_mask: bool = False
    t_min: float = 0.0
    t_max: float = 1.0

    def __post_init__(self):
        if not 0 < self.obs_fraction <= 1:
            raise ValidationError(f"obs_fraction must be in (0, 1], got {self.obs_fraction}")
        if self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")
        if self.N < 3:
            raise ValidationError("N must be >= 3")
        if self.K > min(self.T_gen, self.T_fit):
            raise ValidationError("K cannot exceed the grid sizes")


@dataclass
class SimulationResult:
    spec: SimulationSpec
    grid: TimeGrid
    matrices: dict[str, SparseMatrix]
    truth: dict[str, np.ndarray]
    coefficients: dict[str, np.ndarray]
    records: list[ObservationRecord] = field(repr=False)
    subject_ids: list[str] = field(repr=False)

    @property
    def X1(self) -> SparseMatrix:
        return self.matrices["X1"]

    @property
    def X2(self) -> SparseMatrix:
        return self.matrices["X2"]

    @property
    def Y(self) -> SparseMatrix:
        return self.matrices["Y"]


def simulate_study(spec: SimulationSpec = SimulationSpec()) -> SimulationResult:
    """Generate ``X1, X2, Z`` cohorts, set ``Y = Z + X1 + X2`` and observe sparsely.

    Curves are evaluated on the generation grid, a Bernoulli(``obs_fraction``)
    mask is drawn per variable (one shared mask if ``spec.shared_mask``), noise
    is added to observed cells, and the resulting records are snapped onto the
    fitting grid. Ground truth is the noiseless curves on the fitting grid.
    """
    rng = np.random.default_rng(spec.seed)
    K, N = spec.K, spec.N
    ra, rb = r1(K), r2(K)
    X1 = gen_cohort(ra, rb, K, N, rng)
    X2 = gen_cohort(ra, rb, K, N, rng)
    Z = gen_cohort(ra, rb, K, N, rng)
    coefs = {"X1": X1, "X2": X2, "Y": Z + X1 + X2}

    gen_grid = TimeGrid(spec.t_min, spec.t_max, spec.T_gen)
    fit_grid = TimeGrid(spec.t_min, spec.t_max, spec.T_fit)
    B_gen = make_bspline_basis(gen_grid, K, spec.degree)
    B_fit = make_bspline_basis(fit_grid, K, spec.degree)

    subject_ids = [f"s{i:04d}" for i in range(N)]
    masks = {}
    shared = rng.random((N, spec.T_gen)) < spec.obs_fraction if spec.shared_mask else None
    records: list[ObservationRecord] = []
    for var in VARIABLES:
        curves = coefs[var] @ B_gen.values.T
        mask = shared if shared is not None else rng.random((N, spec.T_gen)) < spec.obs_fraction
        masks[var] = mask
        r, c = np.nonzero(mask)
        noisy = curves[r, c] + spec.noise_sd * rng.standard_normal(r.size)
        pts = gen_grid.points
        records.extend(
            ObservationRecord(subject_ids[i], var, float(pts[j]), float(v)) for i, j, v in zip(r, c, noisy)
        )

    mats, order = discretize(records, fit_grid) if records else ({}, subject_ids)
    # subjects without any observation still need rows; keep the canonical order
    if order != subject_ids:
        mats = _reorder(mats, order, subject_ids, fit_grid)
    for var in VARIABLES:
        mats.setdefault(var, SparseMatrix(N, fit_grid.T, [], [], [], fit_grid))
    truth = {var: coefs[var] @ B_fit.values.T for var in VARIABLES}
    return SimulationResult(spec, fit_grid, mats, truth, coefs, records, subject_ids)


def _reorder(mats, order, subject_ids, grid):
    pos = {s: i for i, s in enumerate(subject_ids)}
    remap = np.array([pos[s] for s in order], dtype=np.intp)
    return {
        var: SparseMatrix(len(subject_ids), grid.T, remap[m.rows], m.cols, m.values, grid)
        for var, m in mats.items()
    }
