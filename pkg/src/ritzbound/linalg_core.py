"""Dense linear-algebra primitives, seeded randomness and test matrices.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in C (row-major)
order.  Dense eigen/singular value decompositions delegate to LAPACK through
numpy; everything else here is construction and validation.
"""
from dataclasses import dataclass

import numpy as np

UNIT_ROUNDOFF = np.finfo(np.float64).eps / 2


class RankDeficientError(ValueError):
    """Raised by :func:`orth` when a column is (numerically) dependent."""

    def __init__(self, column, ratio):
        super().__init__(
            f"rank deficient: column {column} is dependent on the preceding ones "
            f"(|R[{column},{column}]|/max|R_ii| = {ratio:.3e})"
        )
        self.column = column


@dataclass(frozen=True)
class Spectrum:
    """Sorted real eigenvalues or singular values."""

    values: np.ndarray
    order: str = "ascending"

    def __post_init__(self):
        if self.order not in ("ascending", "descending"):
            raise ValueError(f"order must be 'ascending' or 'descending', got {self.order!r}")
        v = np.asarray(self.values, dtype=np.float64).ravel()
        d = np.diff(v)
        if self.order == "ascending" and np.any(d < 0) or self.order == "descending" and np.any(d > 0):
            raise ValueError(f"values are not sorted {self.order}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def ascending(self):
        return self.values if self.order == "ascending" else self.values[::-1]


def make_rng(seed):
    """Generator on the PCG64 bit stream (stable across platforms and numpy 2.x)."""
    return np.random.Generator(np.random.PCG64(seed))


def as_matrix(A, name="A"):
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def norm2_upper(A):
    """Cheap upper bound on the spectral norm: sqrt(||A||_1 ||A||_inf)."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.sqrt(np.abs(A).sum(axis=0).max() * np.abs(A).sum(axis=1).max()))


def sym_eig(A):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    The input is symmetrized as (A + A^T)/2 after checking that its asymmetry
    is below 1e-12 relative to its Frobenius norm.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"sym_eig needs a square matrix, got shape {A.shape}")
    scale = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-12 * scale:
        raise ValueError("matrix is not symmetric to 1e-12 relative tolerance")
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return Spectrum(w, "ascending"), V


def sym_eigvals(A):
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"sym_eigvals needs a square matrix, got shape {A.shape}")
    return Spectrum(np.linalg.eigvalsh(0.5 * (A + A.T)), "ascending")


def svd(A, full_matrices=False):
    """Singular value decomposition A = U diag(s) V^T with s descending."""
    A = as_matrix(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=full_matrices)
    return U, Spectrum(s, "descending"), Vt.T


def singular_values(A):
    A = as_matrix(A)
    if A.size == 0:
        return Spectrum(np.empty(0), "descending")
    return Spectrum(np.linalg.svd(A, compute_uv=False), "descending")


def orth(A, rtol=None):
    """Orthonormal basis for span(A) via Householder QR.

    Raises :class:`RankDeficientError` naming the first column whose
    R-diagonal falls below ``rtol`` times the largest one.
    """
    A = as_matrix(A)
    m, k = A.shape
    if k > m:
        raise ValueError(f"orth needs cols <= rows, got shape {A.shape}")
    if k == 0:
        return np.zeros((m, 0))
    Q, R = np.linalg.qr(A)
    d = np.abs(np.diag(R))
    if rtol is None:
        rtol = max(m, k) * np.finfo(np.float64).eps
    top = d.max()
    bad = np.flatnonzero(d <= rtol * top) if top > 0 else np.arange(k)
    if bad.size:
        j = int(bad[0])
        raise RankDeficientError(j, d[j] / top if top > 0 else 0.0)
    return Q


def orthogonal_complement(Q):
    """Columns completing an orthonormal Q (n x k) to an orthogonal n x n matrix."""
    n, k = Q.shape
    full, _ = np.linalg.qr(Q, mode="complete")
    return np.ascontiguousarray(full[:, k:])


def haar_orthogonal(n, rng, cols=None):
    """Haar-distributed orthogonal matrix (or its first ``cols`` columns).

    QR of an i.i.d. standard Gaussian matrix, with the columns rescaled by
    the signs of diag(R) so the distribution is exactly Haar.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    cols = n if cols is None else cols
    if not 1 <= cols <= n:
        raise ValueError(f"cols must be in [1, {n}], got {cols}")
    G = rng.standard_normal((n, cols))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return np.ascontiguousarray(Q * signs)


def sym_with_spectrum(D, rng):
    """Symmetric V diag(D) V^T with Haar V."""
    D = np.asarray(D, dtype=np.float64).ravel()
    V = haar_orthogonal(D.size, rng)
    A = (V * D) @ V.T
    return 0.5 * (A + A.T)


def geometric_singular_values(n, kappa):
    if kappa < 1:
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if n == 1:
        return np.ones(1)
    return kappa ** (-np.arange(n) / (n - 1))


def geometric_randsvd(m, n, kappa, rng):
    """m x n matrix with singular values from 1 down to 1/kappa, geometrically.

    Mirrors MATLAB's ``gallery('randsvd', [m, n], kappa)`` default mode:
    sigma_i = kappa^(-(i-1)/(n-1)) with Haar singular vectors.
    """
    if not m >= n >= 1:
        raise ValueError(f"need m >= n >= 1, got m={m}, n={n}")
    s = geometric_singular_values(n, kappa)
    U = haar_orthogonal(m, rng, cols=n)
    V = haar_orthogonal(n, rng)
    return np.ascontiguousarray((U * s) @ V.T)
