"""Trial-subspace generators: block subspace iteration, basic LOBPCG, sketches.

These exist to produce realistic Ritz pairs (extremal pairs converging
first, graded residuals), not to be competitive eigensolvers.
"""
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import kernels
from .extraction import lanczos
from .linalg_core import as_matrix, haar_orthogonal, make_rng

log = logging.getLogger(__name__)


@dataclass
class IterationConfig:
    block_size: int
    max_iters: int
    target: str = "smallest"
    power_passes: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.target not in ("smallest", "largest"):
            raise ValueError(f"target must be 'smallest' or 'largest', got {self.target!r}")
        if self.power_passes not in (1, 2):
            raise ValueError(f"power_passes must be 1 or 2, got {self.power_passes}")


def _qr_rank(Y, rtol):
    Q, R = np.linalg.qr(Y)
    d = np.abs(np.diag(R))
    top = d.max() if d.size else 0.0
    bad = np.flatnonzero(d <= rtol * top) if top > 0 else np.arange(d.size)
    return Q, bad


def orth_rerandomize(Y, rng, counters=None, rtol=None):
    """Orthonormalize Y, replacing numerically dependent columns by random ones."""
    n, k = Y.shape
    rtol = max(n, k) * np.finfo(np.float64).eps if rtol is None else rtol
    Y = np.array(Y, dtype=np.float64)
    for _ in range(5):
        Q, bad = _qr_rank(Y, rtol)
        if not bad.size:
            return Q
        if counters is not None:
            counters["rerandomized_columns"] += int(bad.size)
        log.debug("re-randomizing %d dependent columns", bad.size)
        Y[:, bad] = rng.standard_normal((n, bad.size)) * np.linalg.norm(Y) / np.sqrt(n * k)
    raise RuntimeError("could not complete a full-rank basis after re-randomization")


def spectral_shift(A, target, rng, steps=30):
    """Shift c making the target end of the spectrum dominant in |c - lambda|.

    Starts from the Gershgorin interval and tightens the far end with a
    short Lanczos run: the extreme Ritz value plus its residual norm.  Any
    c beyond the spectrum's midpoint preserves the ordering, and the
    Lanczos estimate is far past it after a few steps.
    """
    n = A.shape[0]
    lo, hi = kernels.gershgorin(A)
    v = rng.standard_normal(n)
    f = lanczos(A, v / np.linalg.norm(v), min(steps, n))
    w, U = np.linalg.eigh(f.tridiagonal())
    res = f.coupling * np.abs(U[-1])
    if target == "smallest":
        return min(hi, w[-1] + res[-1])
    return max(lo, w[0] - res[0])


def subspace_iteration(A, cfg, counters=None):
    """Shifted block power iteration, Q <- orth(p(A) Q), ``cfg.max_iters`` times.

    p(A) = cI - A for the smallest end and A - cI for the largest, with c
    from :func:`spectral_shift`.
    """
    A = as_matrix(A)
    n = A.shape[0]
    if cfg.block_size > n:
        raise ValueError(f"block size {cfg.block_size} exceeds n={n}")
    counters = Counter() if counters is None else counters
    rng = make_rng(cfg.seed)
    c = spectral_shift(A, cfg.target, rng)
    if cfg.target == "smallest":
        P = c * np.eye(n) - A
    else:
        P = A - c * np.eye(n)
    Q = haar_orthogonal(n, rng, cols=cfg.block_size)
    for _ in range(cfg.max_iters):
        Q = orth_rerandomize(P @ Q, rng, counters)
    return Q


def _rayleigh_ritz_basis(A, S, k, target):
    H = S.T @ (A @ S)
    w, C = np.linalg.eigh(0.5 * (H + H.T))
    if target == "largest":
        w, C = w[::-1], C[:, ::-1]
    return w, C


def lobpcg_basic(A, X0, iters, target="smallest", counters=None):
    """Unpreconditioned block LOBPCG without locking.

    Each iteration performs Rayleigh-Ritz on orth([X, R, P]), R = AX - X Theta
    and P the previous search direction.  When [X, R, P] is numerically
    rank deficient P is dropped for that iteration; if [X, R] alone is still
    deficient, only its independent directions are kept.
    """
    A = as_matrix(A)
    n = A.shape[0]
    X = as_matrix(X0, "X0")
    k = X.shape[1]
    if 3 * k > n:
        raise ValueError(f"LOBPCG needs 3k <= n (k={k}, n={n})")
    counters = Counter() if counters is None else counters
    rtol = 1e-10
    w, C = _rayleigh_ritz_basis(A, X, k, target)
    X = X @ C
    theta = w
    P = None
    for _ in range(iters):
        R = A @ X - X * theta
        rn = np.linalg.norm(R, axis=0)
        if not np.any(rn > 0):
            break
        blocks = [R] if P is None else [R, P]
        S = _extend_basis(X, blocks, rtol)
        if S is None and P is not None:
            counters["lobpcg_dropped_p"] += 1
            S = _extend_basis(X, [R], rtol)
        if S is None:
            counters["lobpcg_truncated_r"] += 1
            S = _extend_basis(X, [R], rtol, truncate=True)
        w, C = _rayleigh_ritz_basis(A, S, k, target)
        X_new = S @ C[:, :k]
        # search direction: component of the update outside span(X)
        P = S[:, k:] @ C[k:, :k]
        X = X_new
        theta = w[:k]
    return X


def _extend_basis(X, blocks, rtol, truncate=False):
    """Orthonormal [X, W] with span(W) = span(blocks) minus span(X)."""
    W = np.hstack([b / np.maximum(np.linalg.norm(b, axis=0), np.finfo(float).tiny) for b in blocks])
    for _ in range(2):
        W -= X @ (X.T @ W)
    if truncate:
        U, s, _ = np.linalg.svd(W, full_matrices=False)
        keep = s > rtol * max(s.max(initial=0.0), 1.0)
        return np.hstack([X, U[:, keep]])
    Q, R = np.linalg.qr(W)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= rtol * max(d.max(), 1.0):
        return None
    Q -= X @ (X.T @ Q)
    Q, _ = np.linalg.qr(Q)
    return np.hstack([X, Q])


def sketch_subspaces(A, k, power_passes, rng):
    """Gaussian range sketches for the left and right singular subspaces.

    One pass: Q1 = orth(A G1), Q2 = orth(A^T G2).  Two passes apply
    A A^T A (resp. A^T A A^T) instead, re-orthonormalizing between products.
    """
    A = as_matrix(A)
    m, n = A.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k must be in [1, {min(m, n)}], got {k}")
    if power_passes not in (1, 2):
        raise ValueError(f"power_passes must be 1 or 2, got {power_passes}")
    G1 = rng.standard_normal((n, k))
    G2 = rng.standard_normal((m, k))
    Q1 = np.linalg.qr(A @ G1)[0]
    Q2 = np.linalg.qr(A.T @ G2)[0]
    if power_passes == 2:
        Q1 = np.linalg.qr(A @ np.linalg.qr(A.T @ Q1)[0])[0]
        Q2 = np.linalg.qr(A.T @ np.linalg.qr(A @ Q2)[0])[0]
    return np.ascontiguousarray(Q1), np.ascontiguousarray(Q2)
