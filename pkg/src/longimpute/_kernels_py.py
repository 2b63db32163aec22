"""Pure numpy implementation of the sparse residual kernels.

Used when the compiled extension is unavailable or ``LONGIMPUTE_PURE=1``.
"""

import numpy as np
import scipy.sparse as sp


def residual_update(indptr, cols, vals, W, B):
    """Return ``(W + R @ B, ||R||_F^2)`` with ``R = P_Omega(Y - W B')``.

    ``indptr``/``cols``/``vals`` are the CSR structure of the observed entries.
    When ``B`` has orthonormal columns the first output equals
    ``(P_Omega(Y) + P_Omega_perp(W B')) @ B``.
    """
    n = W.shape[0]
    rows = np.repeat(np.arange(n), np.diff(indptr))
    resid = vals - np.einsum("ij,ij->i", W[rows], B[cols])
    R = sp.csr_matrix((resid, cols, indptr), shape=(n, B.shape[0]))
    return W + R @ B, float(resid @ resid)
