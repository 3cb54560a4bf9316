"""Small dense linear-algebra helpers shared by the filters."""
import numpy as np


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be SPD fails its Cholesky factorization."""


def symmetrize(a):
    return 0.5 * (a + a.T)


def is_symmetric(a, tol=1e-12):
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    return bool(np.all(np.abs(a - a.T) <= tol * scale))


def cholesky(a, what="matrix"):
    """Lower Cholesky factor of ``a``; raises NotPositiveDefiniteError on failure."""
    if a.shape[0] == 0:
        return a.copy()
    if a.shape == (1, 1):
        if not a[0, 0] > 0.0:
            raise NotPositiveDefiniteError(f"{what} is not positive definite: {a[0, 0]!r}")
        return np.sqrt(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from exc


def spd_inv(a, what="matrix"):
    """Inverse of a symmetric positive-definite matrix via its Cholesky factor."""
    n = a.shape[0]
    if n == 0:
        return a.copy()
    if n == 1:
        if not a[0, 0] > 0.0:
            raise NotPositiveDefiniteError(f"{what} is not positive definite: {a[0, 0]!r}")
        return 1.0 / a
    low = cholesky(a, what)
    low_inv = np.linalg.solve(low, np.eye(n))
    return symmetrize(low_inv.T @ low_inv)


def spd_logdet(a, what="matrix"):
    if a.shape[0] == 0:
        return 0.0
    low = cholesky(a, what)
    return 2.0 * float(np.sum(np.log(np.diag(low))))


def mahalanobis_sq(d, cov, what="covariance"):
    """d^T cov^{-1} d for a 1-D offset ``d``."""
    low = cholesky(cov, what)
    if low.shape[0] == 0:
        return 0.0
    z = np.linalg.solve(low, d) if low.shape[0] > 1 else d / low[0, 0]
    return float(z @ z)
