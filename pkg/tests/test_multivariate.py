import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longimpute.basis import TimeGrid, default_basis
from longimpute.completion import default_lambda_path, soft_impute
from longimpute.data import SparseMatrix, split
from longimpute.errors import DimensionError, SingularityError, ValidationError
from longimpute.evaluation import cross_validate
from longimpute.multivariate import (
    bivariate_eiv,
    bivariate_eiv_partial,
    constant_block,
    make_design,
    multivariate_impute,
    robust_scale,
)
from longimpute.simulation import SimulationSpec, simulate_study
from strategies import sparse_matrices

G = TimeGrid(0, 1, 31)
B = default_basis(G, 7).values


def sparse_block(seed, N=15, p=0.4):
    rng = np.random.default_rng(seed)
    return SparseMatrix.from_dense(rng.standard_normal((N, 31)), rng.random((N, 31)) < p)


def eiv_instance(N, seed, noise=0.0, K=7):
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((N, K))
    A = rng.standard_normal((K, K))
    X = W @ B.T + noise * rng.standard_normal((N, 31))
    Y = W @ A @ B.T + noise * rng.standard_normal((N, 31))
    return X, Y, A


def test_single_block_reduces_to_soft_impute():
    Y = sparse_block(0)
    path = [3.0, 1.0, 0.3]
    m = multivariate_impute(make_design([(Y, B, 1.0)]), path)
    s = soft_impute(Y, B, path)
    for a, b in zip(m.path.fits, s.fits):
        np.testing.assert_array_equal(a.W, b.W)


def test_identical_blocks_share_loadings():
    Yd = np.random.default_rng(1).standard_normal((20, 31))
    Y = SparseMatrix.from_dense(Yd)
    m = multivariate_impute(make_design([(Y, B, 1.0), (Y, B, 1.0)]), [0.5])
    V1, V2 = m.embeddings[0].block_loadings
    np.testing.assert_allclose(V1, V2, atol=1e-8)


def test_embedding_invariants():
    d = make_design([(sparse_block(2), B), (sparse_block(3), B)])
    for emb in multivariate_impute(d, [2.0, 0.5]).embeddings:
        np.testing.assert_allclose(emb.U.T @ emb.U, np.eye(emb.rank), atol=1e-8)
        assert np.all(np.diff(emb.S) <= 0)


def test_stacked_basis_orthonormal():
    d = make_design([(sparse_block(4), B), (sparse_block(5), B), constant_block(np.arange(15.0))])
    np.testing.assert_allclose(d.basis.T @ d.basis, np.eye(15), atol=1e-10)
    assert d.basis.shape == (63, 15)
    assert d.col_slice(2) == slice(62, 63)


@given(sparse_matrices(max_rows=10, max_cols=31, min_nnz=1), st.sampled_from([0.25, 2.0, 8.0]), st.floats(0.1, 5))
def test_scaling_covariance(Y, c, gamma):
    Y = SparseMatrix(Y.n_rows, 31, Y.rows, Y.cols, Y.values)
    d1 = make_design([(Y, B, gamma)])
    d2 = make_design([(Y.with_values(Y.values * c), B, gamma / c)])
    np.testing.assert_array_equal(d1.matrix.values, d2.matrix.values)


def test_design_errors():
    with pytest.raises(DimensionError):
        make_design([(sparse_block(0, N=5), B), (sparse_block(1, N=6), B)])
    with pytest.raises(ValidationError):
        make_design([(sparse_block(0), B, 0.0)])
    with pytest.raises(ValidationError):
        make_design([])


def test_robust_scale_defaults():
    assert robust_scale([1.0, 2.0, 3.0, 4.0, 100.0]) == pytest.approx(1 / (1.4826 * 1.0))
    assert robust_scale([0, 0, 0, 0, 2.0]) == pytest.approx(1 / np.std([0, 0, 0, 0, 2.0]))
    assert robust_scale([3.0, 3.0]) == 1.0


def test_constant_block_missing():
    M, Bc = constant_block(np.array([1.0, np.nan, 3.0]))
    assert M.entries == {(0, 0): 1.0, (2, 0): 3.0}
    np.testing.assert_array_equal(Bc, [[1.0]])


def test_impute_returns_data_units():
    Yd = np.random.default_rng(0).standard_normal((10, 31))
    Y = SparseMatrix.from_dense(Yd)
    m = multivariate_impute(make_design([(Y, B, 3.0)], names=["y"]), [0.0])
    np.testing.assert_allclose(m.impute("y"), Yd @ B @ B.T, atol=1e-10)
    np.testing.assert_allclose(m.coefficients(block="y"), Yd @ B, atol=1e-10)


def test_eiv_identity_relation():
    X, _, _ = eiv_instance(60, 0)
    W, A = bivariate_eiv(X, X, B, 1.0)
    np.testing.assert_allclose(A, np.eye(7), atol=1e-6)
    np.testing.assert_allclose(W @ B.T, X, atol=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_eiv_noiseless_recovery(seed):
    X, Y, A = eiv_instance(100, seed)
    W, Ah = bivariate_eiv(X, Y, B, 0.7)
    np.testing.assert_allclose(Ah, A, atol=1e-6)
    np.testing.assert_allclose(W @ Ah @ B.T, Y, atol=1e-6)


def test_eiv_objective_is_truncation_error():
    X, Y, _ = eiv_instance(80, 5, noise=0.3)
    gamma = 1.3
    W, A = bivariate_eiv(X, Y, B, gamma)
    M = np.hstack([X @ B, gamma * Y @ B])
    fit = W @ np.hstack([np.eye(7), gamma * A])
    s = np.linalg.svd(M, compute_uv=False)
    assert abs(np.sum((M - fit) ** 2) - np.sum(s[7:] ** 2)) <= 1e-8 * max(1.0, np.sum(s**2))


def test_eiv_singular_loading_block():
    _, Y, _ = eiv_instance(40, 1)
    with pytest.raises(SingularityError):
        bivariate_eiv(np.zeros_like(Y), Y, B, 1.0)


def test_eiv_rejects_missing():
    X, Y, _ = eiv_instance(20, 0)
    X[0, 0] = np.nan
    with pytest.raises(ValidationError):
        bivariate_eiv(X, Y, B)


def test_eiv_partial_close_to_full_when_dense():
    X, Y, A = eiv_instance(100, 3)
    W, Ah = bivariate_eiv_partial(SparseMatrix.from_dense(X), SparseMatrix.from_dense(Y), B, 1.0, lam=0.0)
    np.testing.assert_allclose(Ah, A, atol=1e-6)


def test_eiv_consistency_trend():
    errs = {}
    for N in (500, 1000):
        errs[N] = np.median(
            [np.linalg.norm(bivariate_eiv(*eiv_instance(N, s, noise=0.1)[:2], B)[1] - eiv_instance(N, s, 0.1)[2])
             for s in range(5)]
        )
    assert errs[1000] < errs[500]


@pytest.mark.slow
def test_joint_embedding_beats_single_variable_on_simulation():
    joint, single = [], []
    for seed in range(5):
        sim = simulate_study(SimulationSpec(seed=seed))
        Bs = default_basis(sim.grid)
        sp = split(sim.Y, rng_seed=seed)
        grid = list(default_lambda_path(sp.matrix(sim.Y, "train"), Bs))
        kw = dict(truth=sim.truth["Y"], center=True)
        joint.append(cross_validate(sim.Y, Bs, grid, sp, "multivariate",
                                    covariates=[(sim.X1, Bs), (sim.X2, Bs)], **kw).test_curve_mse)
        single.append(cross_validate(sim.Y, Bs, grid, sp, "soft", **kw).test_curve_mse)
    assert np.mean(joint) < np.mean(single)
