"""Perturbation structures produced by projection-based extraction.

A symmetric extraction rotates A into

    [ diag(theta)   E^T ]
    [ E             A2  ]

and a singular value extraction rotates a rectangular A into

    [ diag(theta)   E^T ]
    [ F             A2  ]

Only the Ritz values and the column norms of E (and F) are needed by the
bounds in practice; the blocks themselves and the tail are kept when the
extraction is run in ``exact`` mode so that exact gaps can be evaluated.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linalg_core import (
    as_matrix,
    norm2_upper,
    orthogonal_complement,
    singular_values,
    sym_eigvals,
)

TAIL_MODES = ("exact", "approximate")


def _check_orthonormal(Q, name, tol=1e-10):
    Q = as_matrix(Q, name)
    k = Q.shape[1]
    err = np.linalg.norm(Q.T @ Q - np.eye(k), 2) if k else 0.0
    if err > tol:
        raise ValueError(f"{name} is not orthonormal: ||{name}^T {name} - I||_2 = {err:.3e}")
    return Q


@dataclass
class SymmetricPerturbation:
    """Available information after a symmetric Rayleigh-Ritz extraction.

    ``residual_vectors`` (n x k, columns A x_i - theta_i x_i) have the same
    Gram matrix as E, so block norms can be taken from either.
    ``tail_spectrum`` holds lambda(A2) and is present only in exact mode.
    ``tail_estimate`` optionally holds stand-in values for lambda(A2) that
    are available in practice, e.g. Ritz values discarded by oversampling.
    """

    theta: np.ndarray
    residual_norms: np.ndarray
    residual_block: np.ndarray | None = None
    residual_vectors: np.ndarray | None = None
    tail_matrix: np.ndarray | None = None
    tail_spectrum: np.ndarray | None = None
    tail_mode: str = "approximate"
    tail_estimate: np.ndarray | None = None
    ritz_vectors: np.ndarray | None = None
    flags: list = field(default_factory=list)

    kind = "symmetric"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).ravel()
        self.residual_norms = np.asarray(self.residual_norms, dtype=np.float64).ravel()
        if self.theta.shape != self.residual_norms.shape:
            raise ValueError("theta and residual_norms must have the same length")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
        for name in ("tail_spectrum", "tail_estimate"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.sort(np.asarray(v, dtype=np.float64).ravel()))
        if self.tail_mode == "exact" and self.tail_spectrum is None:
            raise ValueError("exact tail mode needs tail_spectrum")

    @property
    def k(self):
        return self.theta.size

    def block_norm(self, idx=None):
        """Spectral norm of E restricted to columns ``idx`` (all when None).

        Falls back to the Frobenius norm of the residual norms, an upper
        bound, when neither E nor the residual vectors are stored.
        """
        idx = slice(None) if idx is None else idx
        for M in (self.residual_block, self.residual_vectors):
            if M is not None:
                sub = M[:, idx]
                return float(np.linalg.norm(sub, 2)) if sub.size else 0.0
        return float(np.sqrt(np.sum(self.residual_norms[idx] ** 2)))

    @property
    def block_norm_is_exact(self):
        return self.residual_block is not None or self.residual_vectors is not None

    def assemble(self):
        """Full block matrix [[diag(theta), E^T], [E, A2]]."""
        if self.residual_block is None or self.tail_matrix is None:
            raise ValueError("assembly needs residual_block and tail_matrix (exact mode)")
        k = self.k
        N = k + self.tail_matrix.shape[0]
        out = np.zeros((N, N))
        out[:k, :k] = np.diag(self.theta)
        out[k:, :k] = self.residual_block
        out[:k, k:] = self.residual_block.T
        out[k:, k:] = self.tail_matrix
        return out


@dataclass
class SvdPerturbation:
    """Available information after a two-sided (or one-sided) SVD extraction.

    ``residual_norms_e[i]`` = ||A^T u_i - theta_i v_i||, ``residual_norms_f[i]``
    = ||A v_i - theta_i u_i||.  ``tail_spectrum`` holds sigma(A2) (descending)
    in exact mode.
    """

    theta: np.ndarray
    residual_norms_e: np.ndarray
    residual_norms_f: np.ndarray
    e_block: np.ndarray | None = None
    f_block: np.ndarray | None = None
    tail_matrix: np.ndarray | None = None
    tail_spectrum: np.ndarray | None = None
    tail_mode: str = "approximate"
    shape: tuple | None = None
    left_vectors: np.ndarray | None = None
    right_vectors: np.ndarray | None = None
    flags: list = field(default_factory=list)

    kind = "svd"

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).ravel()
        self.residual_norms_e = np.asarray(self.residual_norms_e, dtype=np.float64).ravel()
        self.residual_norms_f = np.asarray(self.residual_norms_f, dtype=np.float64).ravel()
        if not self.theta.shape == self.residual_norms_e.shape == self.residual_norms_f.shape:
            raise ValueError("theta and residual norm arrays must have the same length")
        if self.tail_mode not in TAIL_MODES:
            raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
        if self.tail_spectrum is not None:
            self.tail_spectrum = -np.sort(-np.asarray(self.tail_spectrum, dtype=np.float64).ravel())
        if self.tail_mode == "exact" and self.tail_spectrum is None:
            raise ValueError("exact tail mode needs tail_spectrum")

    @property
    def k(self):
        return self.theta.size

    @property
    def residual_weights(self):
        """(||E_i||^2 + ||F_i||^2) / 2 per index."""
        return 0.5 * (self.residual_norms_e**2 + self.residual_norms_f**2)

    def block_norms(self):
        """(||E||_2, ||F||_2), or Frobenius upper bounds when blocks are absent."""
        out = []
        for block, norms in ((self.e_block, self.residual_norms_e), (self.f_block, self.residual_norms_f)):
            if block is not None:
                out.append(float(np.linalg.norm(block, 2)) if block.size else 0.0)
            else:
                out.append(float(np.sqrt(np.sum(norms**2))))
        return tuple(out)

    @property
    def block_norm_is_exact(self):
        return self.e_block is not None and self.f_block is not None

    def assemble(self):
        """Full block matrix [[diag(theta), E^T], [F, A2]]."""
        if self.e_block is None or self.f_block is None or self.tail_matrix is None:
            raise ValueError("assembly needs e_block, f_block and tail_matrix (exact mode)")
        k = self.k
        mt, nt = self.tail_matrix.shape
        out = np.zeros((k + mt, k + nt))
        out[:k, :k] = np.diag(self.theta)
        out[:k, k:] = self.e_block.T
        out[k:, :k] = self.f_block
        out[k:, k:] = self.tail_matrix
        return out


def rayleigh_ritz(A, Q1, tail_mode="exact", keep=None):
    """Rayleigh-Ritz extraction of the symmetric perturbation structure.

    ``keep`` retains only the smallest ``keep`` Ritz pairs in the leading
    block (oversampling); the discarded Ritz values become the approximate
    tail estimate.  In exact mode the tail is the compression of A onto the
    orthogonal complement of the retained Ritz vectors.
    """
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    Q1 = _check_orthonormal(Q1, "Q1")
    if tail_mode not in TAIL_MODES:
        raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
    k = Q1.shape[1]
    keep = k if keep is None else keep
    if not 1 <= keep <= k:
        raise ValueError(f"keep must be in [1, {k}], got {keep}")
    AQ = A @ Q1
    H = Q1.T @ AQ
    theta, Y = np.linalg.eigh(0.5 * (H + H.T))
    X = Q1 @ Y[:, :keep]
    R = AQ @ Y[:, :keep] - X * theta[:keep]
    norms = np.linalg.norm(R, axis=0)
    p = SymmetricPerturbation(
        theta=theta[:keep],
        residual_norms=norms,
        residual_vectors=R,
        ritz_vectors=X,
        tail_mode="approximate",
        tail_estimate=theta[keep:] if keep < k else None,
    )
    if tail_mode == "exact":
        W = orthogonal_complement(X)
        AW = A @ W
        A2 = W.T @ AW
        A2 = 0.5 * (A2 + A2.T)
        p.residual_block = W.T @ R
        p.tail_matrix = A2
        p.tail_spectrum = sym_eigvals(A2).values
        p.tail_mode = "exact"
    return p


def petrov_galerkin(A, Q1, Q2, tail_mode="exact"):
    """Petrov-Galerkin extraction of the SVD perturbation structure.

    theta are the singular values of Q1^T A Q2 (k = cols of Q1 <= cols of Q2).
    Block sizes follow the factor shapes: the tail is (m-k) x (n-k), and
    when Q2 has k2 > k columns the first k2-k rows of E are zero.
    """
    A = as_matrix(A)
    m, n = A.shape
    Q1 = _check_orthonormal(Q1, "Q1")
    Q2 = _check_orthonormal(Q2, "Q2")
    if Q1.shape[0] != m or Q2.shape[0] != n:
        raise ValueError("Q1 must have m rows and Q2 must have n rows")
    k, k2 = Q1.shape[1], Q2.shape[1]
    if k2 < k:
        raise ValueError(f"Q2 needs at least as many columns as Q1 ({k2} < {k})")
    if tail_mode not in TAIL_MODES:
        raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
    M = Q1.T @ A @ Q2
    X, s, Yt = np.linalg.svd(M, full_matrices=True)
    Y = Yt.T
    U = Q1 @ X
    V = Q2 @ Y
    Vk = V[:, :k]
    F_res = A @ Vk - U * s
    E_res = A.T @ U - Vk * s
    p = SvdPerturbation(
        theta=s,
        residual_norms_e=np.linalg.norm(E_res, axis=0),
        residual_norms_f=np.linalg.norm(F_res, axis=0),
        shape=(m, n),
        left_vectors=U,
        right_vectors=Vk,
    )
    if tail_mode == "exact":
        U_perp = orthogonal_complement(Q1)
        V_rest = np.hstack([V[:, k:], orthogonal_complement(Q2)])
        # rows: [U | U_perp], cols: [V_k | V_rest]
        p.e_block = V_rest.T @ (A.T @ U)
        p.f_block = U_perp.T @ (A @ Vk)
        p.tail_matrix = U_perp.T @ A @ V_rest
        p.tail_spectrum = singular_values(p.tail_matrix).values
        p.tail_mode = "exact"
    return p


def hmt_structure(A, Q1, tail_mode="exact"):
    """Perturbation structure of the one-sided (randomized SVD) approximation Q1 Q1^T A.

    The right residual block is zero by construction.
    """
    A = as_matrix(A)
    m, n = A.shape
    Q1 = _check_orthonormal(Q1, "Q1")
    if Q1.shape[0] != m:
        raise ValueError("Q1 must have m rows")
    if tail_mode not in TAIL_MODES:
        raise ValueError(f"tail_mode must be one of {TAIL_MODES}")
    k = Q1.shape[1]
    B = Q1.T @ A
    U0, s, V0t = np.linalg.svd(B, full_matrices=True)
    V_all = V0t.T
    V0, V0_perp = V_all[:, :k], V_all[:, k:]
    U = Q1 @ U0
    F_res = A @ V0 - U * s
    p = SvdPerturbation(
        theta=s,
        residual_norms_e=np.zeros(k),
        residual_norms_f=np.linalg.norm(F_res, axis=0),
        shape=(m, n),
        left_vectors=U,
        right_vectors=V0,
    )
    p.flags.append("one_sided")
    if tail_mode == "exact":
        Q1_perp = orthogonal_complement(Q1)
        AV0 = A @ V0
        p.e_block = np.zeros((n - k, k))
        p.f_block = Q1_perp.T @ AV0
        p.tail_matrix = Q1_perp.T @ A @ V0_perp
        p.tail_spectrum = singular_values(p.tail_matrix).values
        p.tail_mode = "exact"
    return p


@dataclass
class LanczosFactorization:
    """A Q1 = Q1 T + coupling * next_vector * e_k^T with T tridiagonal."""

    basis: np.ndarray
    diagonal: np.ndarray
    offdiagonal: np.ndarray
    coupling: float
    next_vector: np.ndarray | None
    breakdown: bool = False

    @property
    def k(self):
        return self.diagonal.size

    def tridiagonal(self):
        return np.diag(self.diagonal) + np.diag(self.offdiagonal, 1) + np.diag(self.offdiagonal, -1)

    def recurrence_residual(self, A):
        R = A @ self.basis - self.basis @ self.tridiagonal()
        if self.next_vector is not None:
            R[:, -1] -= self.coupling * self.next_vector
        return float(np.linalg.norm(R, 2))


def lanczos(A, v0, k, breakdown_rtol=1e-14):
    """k steps of Lanczos with full two-pass Gram-Schmidt reorthogonalization.

    Stops early, with ``breakdown=True``, when the next coupling falls below
    ``breakdown_rtol`` times an upper bound on ||A||_2.
    """
    A = as_matrix(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("A must be square")
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    v0 = np.asarray(v0, dtype=np.float64).ravel()
    nv = np.linalg.norm(v0)
    if nv == 0:
        raise ValueError("zero start vector")
    if abs(nv - 1.0) > 1e-12:
        raise ValueError(f"start vector must have unit norm, got {nv}")
    tol = breakdown_rtol * max(norm2_upper(A), np.finfo(np.float64).tiny)
    basis_rows, alpha, beta, w = kernels.lanczos_recurrence(A, np.ascontiguousarray(v0), k, tol)
    steps = alpha.size
    coupling = float(beta[-1])
    broke = coupling < tol
    return LanczosFactorization(
        basis=np.ascontiguousarray(basis_rows.T),
        diagonal=alpha.copy(),
        offdiagonal=beta[:-1].copy(),
        coupling=0.0 if broke else coupling,
        next_vector=None if broke else w / coupling,
        breakdown=bool(broke or steps < k),
    )


def lanczos_to_perturbation(f, keep, A=None, tail_mode=None):
    """Symmetric perturbation structure of a Lanczos factorization.

    The ``keep`` smallest Ritz values form the leading block.  Each retained
    residual column has a single nonzero, coupling * U[k-1, i], in the first
    tail coordinate (the direction of the next Lanczos vector).

    With ``A`` given (default exact mode) the tail is the compression of A
    onto [next_vector, discarded Ritz vectors, complement], E is recomputed
    numerically in that basis and lambda(A2) is exact.  Without ``A`` the
    discarded Ritz values stand in for lambda(A2) and the structure is
    flagged approximate.
    """
    k = f.k
    if not 1 <= keep <= k:
        raise ValueError(f"keep must be in [1, {k}], got {keep}")
    if tail_mode is None:
        tail_mode = "exact" if A is not None else "approximate"
    if tail_mode == "exact" and A is None:
        raise ValueError("exact tail mode needs A")
    theta_all, U = np.linalg.eigh(f.tridiagonal())
    theta = theta_all[:keep]
    coeffs = f.coupling * U[-1, :keep]
    if tail_mode == "approximate":
        tail_dim = max(k - keep, 0) + (1 if f.next_vector is not None else 0)
        E = np.zeros((max(tail_dim, 1), keep))
        E[0] = coeffs
        p = SymmetricPerturbation(
            theta=theta,
            residual_norms=np.abs(coeffs),
            residual_block=E,
            tail_estimate=theta_all[keep:] if keep < k else None,
            tail_mode="approximate",
            ritz_vectors=f.basis @ U[:, :keep],
        )
        p.flags.append("tail_from_discarded_ritz_values")
        return p
    A = as_matrix(A)
    X = f.basis @ U[:, :keep]
    X_rest = f.basis @ U[:, keep:]
    lead = [f.next_vector[:, None]] if f.next_vector is not None else []
    W0 = np.hstack(lead + [X_rest])
    known = np.hstack([X, W0])
    W = np.hstack([W0, orthogonal_complement(known)])
    A2 = W.T @ A @ W
    A2 = 0.5 * (A2 + A2.T)
    E = W.T @ (A @ X)
    return SymmetricPerturbation(
        theta=theta,
        residual_norms=np.linalg.norm(E, axis=0),
        residual_block=E,
        tail_matrix=A2,
        tail_spectrum=sym_eigvals(A2).values,
        tail_mode="exact",
        tail_estimate=theta_all[keep:] if keep < k else None,
        ritz_vectors=X,
    )
