import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from longimpute.basis import TimeGrid, default_basis
from longimpute.data import SparseMatrix
from longimpute.errors import ConfigurationError, SingularityError
from longimpute.multivariate import make_design
from longimpute.regression import regress_on_scores, sparse_longitudinal_regression, sparse_regression
from oracles import masked_least_squares
from strategies import sparse_matrices

G = TimeGrid(0, 1, 21)
B5 = default_basis(G, 5).values


def ortho_basis(T, K, seed=0):
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((T, K)))
    return Q


def orthonormal_scores(N, d, seed=0):
    return ortho_basis(N, d, seed + 100)


@pytest.mark.parametrize("seed", range(3))
def test_fully_observed_closed_form(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 3))
    Yd = rng.standard_normal((30, 21))
    closed = np.linalg.solve(X.T @ X, X.T @ Yd @ B5)
    one = sparse_regression(SparseMatrix.from_dense(Yd), X, B5, max_iter=1)
    np.testing.assert_allclose(one.A, closed, atol=1e-10)
    full = sparse_regression(SparseMatrix.from_dense(Yd), X, B5)
    assert full.converged
    np.testing.assert_allclose(full.A, closed, atol=1e-10)


def test_identity_design():
    Yd = np.random.default_rng(1).standard_normal((8, 21))
    m = sparse_regression(SparseMatrix.from_dense(Yd), np.eye(8), B5)
    np.testing.assert_allclose(m.A, Yd @ B5, atol=1e-10)


def test_sparse_matches_vectorized_normal_equations():
    rng = np.random.default_rng(7)
    N, d, K, T = 30, 2, 3, 21
    B = default_basis(G, K, degree=2).values
    X = rng.standard_normal((N, d))
    Yd = X @ rng.standard_normal((d, K)) @ B.T + 0.5 * rng.standard_normal((N, T))
    mask = rng.random((N, T)) < 0.4
    A_ref, rss_ref = masked_least_squares(Yd, mask, X, B)
    m = sparse_regression(SparseMatrix.from_dense(Yd, mask), X, B, eps=1e-20, max_iter=20000)
    rss = 2 * m.trace[-1]
    assert abs(rss - rss_ref) <= 1e-6
    np.testing.assert_allclose(m.A, A_ref, atol=1e-5)


def test_stationarity_full_observation():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((25, 4))
    Yd = rng.standard_normal((25, 21))
    m = sparse_regression(SparseMatrix.from_dense(Yd), X, B5)
    g = X.T @ (Yd - X @ m.A @ B5.T) @ B5
    assert np.linalg.norm(g) <= 1e-6 * max(1.0, np.linalg.norm(Yd))


def test_singular_design():
    X = np.ones((10, 2))
    Y = SparseMatrix.from_dense(np.zeros((10, 21)))
    with pytest.raises(SingularityError, match="condition number"):
        sparse_regression(Y, X, B5)


@settings(max_examples=50)
@given(sparse_matrices(max_rows=15, max_cols=21, min_nnz=3), st.integers(1, 3), st.floats(0, 2))
def test_alg3_trace_monotone(Y, d, lam):
    Y = SparseMatrix(max(Y.n_rows, d + 1), 21, Y.rows, Y.cols, Y.values)
    U = orthonormal_scores(Y.n_rows, d)
    for model in (sparse_regression(Y, U, B5, max_iter=100, lam=lam),):
        t = model.trace
        assert np.all(np.diff(t) <= 1e-9 * max(1.0, t[0]))


def test_scores_closed_form_lambda_zero():
    rng = np.random.default_rng(0)
    U = orthonormal_scores(20, 3)
    Yd = rng.standard_normal((20, 21))
    m = regress_on_scores(SparseMatrix.from_dense(Yd), U, B5, [0.0])[0]
    np.testing.assert_allclose(m.A, U.T @ Yd @ B5, atol=1e-10)


def test_rotation_invariance():
    rng = np.random.default_rng(4)
    U = orthonormal_scores(25, 3)
    R, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    Yd = rng.standard_normal((25, 21))
    Y = SparseMatrix.from_dense(Yd, rng.random(Yd.shape) < 0.5)
    a = regress_on_scores(Y, U, B5, [0.0], eps=1e-14, max_iter=3000)[0]
    b = regress_on_scores(Y, U @ R, B5, [0.0], eps=1e-14, max_iter=3000)[0]
    np.testing.assert_allclose(a.predict(U), b.predict(U @ R), atol=1e-8)


def test_self_regression_reproduces_response():
    rng = np.random.default_rng(5)
    Yd = rng.standard_normal((40, 5)) @ B5.T
    Y = SparseMatrix.from_dense(Yd)
    design = make_design([(Y, B5, 1.0)], names=["y"])
    fit = sparse_longitudinal_regression(Y, design, [1e-3, 0.0], step1_lambda=0.0)
    np.testing.assert_allclose(fit.predict(-1), Yd, atol=1e-6)


def test_penalized_path_shrinks_coefficients():
    rng = np.random.default_rng(6)
    U = orthonormal_scores(30, 3)
    Y = SparseMatrix.from_dense(rng.standard_normal((30, 21)), rng.random((30, 21)) < 0.5)
    models = regress_on_scores(Y, U, B5, [5.0, 1.0, 0.0])
    norms = [np.linalg.svd(m.A, compute_uv=False).sum() for m in models]
    assert norms[0] <= norms[1] <= norms[2]
    for m in models:
        assert np.all(np.diff(m.trace) <= 1e-9 * max(1.0, m.trace[0]))


def test_latent_dimension_checks():
    rng = np.random.default_rng(0)
    Y = SparseMatrix.from_dense(rng.standard_normal((10, 21)))
    design = make_design([(Y, B5, 1.0)])
    with pytest.raises(ConfigurationError):
        sparse_longitudinal_regression(Y, design, [0.0], step1_lambda=1e6)
    with pytest.raises(ConfigurationError):
        sparse_longitudinal_regression(Y, design, [0.0], step1_lambda=0.0, d2=0)


def test_d2_truncates_scores():
    rng = np.random.default_rng(2)
    Y = SparseMatrix.from_dense(rng.standard_normal((12, 21)))
    design = make_design([(Y, B5, 1.0)])
    fit = sparse_longitudinal_regression(Y, design, [0.0], step1_lambda=0.0, d2=2)
    assert fit.scores.shape == (12, 2) and fit.models[0].A.shape == (2, 5)
