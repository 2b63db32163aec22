"""Independent reference implementations used as test oracles.

None of these import the package under test.
"""

import numpy as np


def cox_de_boor(x, knots, degree):
    """B-spline design matrix by the textbook recursion, one basis function at a time."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n_basis = len(knots) - degree - 1
    last = knots[-1]

    def N(i, p, t):
        if p == 0:
            if knots[i] <= t < knots[i + 1]:
                return 1.0
            # right end belongs to the last non-empty span
            if t == last and knots[i] < knots[i + 1] == last:
                return 1.0
            return 0.0
        left = 0.0
        if knots[i + p] != knots[i]:
            left = (t - knots[i]) / (knots[i + p] - knots[i]) * N(i, p - 1, t)
        right = 0.0
        if knots[i + p + 1] != knots[i + 1]:
            right = (knots[i + p + 1] - t) / (knots[i + p + 1] - knots[i + 1]) * N(i + 1, p - 1, t)
        return left + right

    return np.array([[N(i, degree, t) for i in range(n_basis)] for t in x])


def clamped_knots(a, b, K, degree):
    inner = np.linspace(a, b, K - degree + 1)
    return np.concatenate([[a] * degree, inner, [b] * degree])


def nuclear_prox_objective(X, W, lam):
    return 0.5 * np.sum((X - W) ** 2) + lam * np.linalg.svd(W, compute_uv=False).sum()


def subgradient_prox(X, lam, starts=20, iters=5000, seed=0):
    """Minimum of 0.5||X - W||^2 + lam ||W||_* found by subgradient descent.

    All starts run as one batch with steps ``1 / (k + 1)``; the best
    objective seen on any start is returned.
    """
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((starts,) + X.shape) * np.abs(X).max()
    best = np.inf
    for k in range(iters):
        U, s, Vt = np.linalg.svd(W, full_matrices=False)
        obj = 0.5 * np.sum((X - W) ** 2, axis=(1, 2)) + lam * s.sum(axis=1)
        best = min(best, obj.min())
        keep = (s > 1e-12)[:, None, :]
        g = (W - X) + lam * np.einsum("bik,bjk->bij", U * keep, np.swapaxes(Vt, 1, 2))
        W = W - g / (k + 1)
    return float(best)


def masked_least_squares(Y_dense, mask, X, B):
    """argmin_A sum over observed cells of (Y - X A B')^2 via the vectorized normal equations.

    With vec(X A B') = (B kron X) vec(A) in column-major order.
    """
    d, K = X.shape[1], B.shape[1]
    design = np.kron(B, X)  # (T*N) x (K*d), rows in column-major cell order
    obs = mask.ravel(order="F")
    y = Y_dense.ravel(order="F")[obs]
    Dm = design[obs]
    a = np.linalg.solve(Dm.T @ Dm, Dm.T @ y)
    A = a.reshape((d, K), order="F")
    resid = y - Dm @ a
    return A, float(resid @ resid)


def truncated_svd(X, r):
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    return (U[:, :r] * s[:r]) @ Vt[:r]


def nearest_index(times, points):
    """Linear scan; ties go to the earlier grid point."""
    out = []
    for t in np.atleast_1d(times):
        best, arg = np.inf, -1
        for k, p in enumerate(points):
            if abs(p - t) < best:
                best, arg = abs(p - t), k
        out.append(arg)
    return np.array(out)
