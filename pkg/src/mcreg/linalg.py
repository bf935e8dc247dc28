"""Dense linear-algebra helpers shared by the estimators and the simulator."""
import numpy as np
from scipy.linalg import solve_triangular

PIVOT_TOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky pivot falls below ``PIVOT_TOL``."""

    def __init__(self, index, pivot):
        self.index = index
        self.pivot = pivot
        super().__init__(
            f"matrix is not positive definite: pivot {index} is {pivot:.3e}"
        )


def as_matrix(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"{name} must be a nonempty 2-D array, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def center_columns(M):
    """Subtract column means.

    Returns
    -------
    centered : ndarray (n, m)
    means : ndarray (m,)
    """
    M = as_matrix(M)
    means = M.mean(axis=0)
    return M - means, means


def cholesky_lower(S):
    """Lower Cholesky factor ``L`` with ``L @ L.T == S``.

    Written out column by column so a failure can name its pivot.
    """
    S = as_matrix(S)
    q = S.shape[0]
    if S.shape[1] != q:
        raise ValueError(f"expected a square matrix, got {S.shape}")
    if not np.allclose(S, S.T, rtol=0, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise ValueError("matrix is not symmetric")
    L = np.zeros_like(S)
    for j in range(q):
        row = L[j, :j]
        d = S[j, j] - row @ row
        if not d > PIVOT_TOL:
            raise NotPositiveDefiniteError(j, d)
        ljj = np.sqrt(d)
        L[j, j] = ljj
        if j + 1 < q:
            L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ row) / ljj
    return L


def invert_spd(S):
    """Inverse of a symmetric positive definite matrix via its Cholesky factor."""
    L = cholesky_lower(S)
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    inv = Linv.T @ Linv
    return (inv + inv.T) / 2


def frobenius_norm(M):
    return float(np.sqrt(np.sum(np.square(M))))


def one_norm(M):
    """Maximum absolute column sum."""
    return float(np.abs(M).sum(axis=0).max())


def inf_norm(M):
    """Maximum absolute row sum."""
    return float(np.abs(M).sum(axis=1).max())
