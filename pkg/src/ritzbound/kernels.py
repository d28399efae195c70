"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with ``numba.njit`` and a
vectorized pure-numpy version.  Both are always importable (``*_numba`` and
``*_numpy``); the unsuffixed name dispatches to the compiled one unless the
environment variable ``RITZBOUND_DISABLE_JIT`` is set to a truthy value or
numba is missing.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

JIT_DISABLED = os.environ.get("RITZBOUND_DISABLE_JIT", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)
USING_JIT = numba is not None and not JIT_DISABLED


def _njit(fn):
    if numba is None:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# Amplification factors d_i = 1 / (delta_i - sum_j w_j / g_ij)
# ---------------------------------------------------------------------------


def _amplification_loop(delta, weights, pair_gaps, mirror_gaps, use_mirror):
    k = delta.shape[0]
    out = np.full(k, np.nan)
    terms = np.empty(2 * k)
    for i in range(k):
        if not delta[i] > 0.0:
            continue
        ok = True
        nt = 0
        for j in range(k):
            if j == i:
                continue
            g = pair_gaps[i, j]
            if not g > 0.0:
                ok = False
                break
            terms[nt] = weights[j] / g
            nt += 1
        if ok and use_mirror:
            for j in range(k):
                g = mirror_gaps[i, j]
                if not g > 0.0:
                    ok = False
                    break
                terms[nt] = weights[j] / g
                nt += 1
        if not ok:
            continue
        # delta minus the terms in descending order, Neumaier compensation
        t = np.sort(terms[:nt])[::-1]
        s = delta[i]
        c = 0.0
        for m in range(nt):
            x = -t[m]
            y = s + x
            if abs(s) >= abs(x):
                c += (s - y) + x
            else:
                c += (x - y) + s
            s = y
        denom = s + c
        if denom > 0.0:
            out[i] = 1.0 / denom
    return out


amplification_numba = _njit(_amplification_loop)


def _neumaier_rows(terms, start):
    """Row-wise compensated sum start + terms[:, 0] + terms[:, 1] + ..."""
    s = np.array(start, dtype=np.float64)
    c = np.zeros(terms.shape[0])
    for col in terms.T:
        y = s + col
        big = np.abs(s) >= np.abs(col)
        c += np.where(big, (s - y) + col, (col - y) + s)
        s = y
    return s + c


def amplification_numpy(delta, weights, pair_gaps, mirror_gaps, use_mirror):
    delta = np.asarray(delta, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    k = delta.shape[0]
    offdiag = ~np.eye(k, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(offdiag, pair_gaps, 1.0)
        ok = np.all(g > 0.0, axis=1) & (delta > 0.0)
        terms = np.where(offdiag, weights[None, :] / g, 0.0)
        if use_mirror:
            ok &= np.all(mirror_gaps > 0.0, axis=1)
            terms = np.concatenate([terms, weights[None, :] / mirror_gaps], axis=1)
        terms = np.where(ok[:, None], terms, 0.0)
        terms = np.sort(-terms, axis=1)
        denom = _neumaier_rows(terms, delta)
        ok &= denom > 0.0
        return np.where(ok, 1.0 / np.where(ok, denom, 1.0), np.nan)


# ---------------------------------------------------------------------------
# Lanczos with full (two-pass classical Gram-Schmidt) reorthogonalization
# ---------------------------------------------------------------------------


def _lanczos_loop(A, v0, k, breakdown_tol):
    n = A.shape[0]
    basis = np.zeros((k, n))  # row j holds q_{j+1}
    alpha = np.zeros(k)
    beta = np.zeros(k)
    basis[0] = v0
    steps = k
    w = np.zeros(n)
    for j in range(k):
        q = basis[j]
        w = A @ q
        alpha[j] = q @ w
        w = w - alpha[j] * q
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        for _ in range(2):
            h = basis[: j + 1] @ w
            w = w - basis[: j + 1].T @ h
            alpha[j] += h[j]
        beta[j] = np.sqrt(w @ w)
        if beta[j] < breakdown_tol:
            steps = j + 1
            break
        if j + 1 < k:
            basis[j + 1] = w / beta[j]
    return basis[:steps], alpha[:steps], beta[:steps], w


lanczos_numba = _njit(_lanczos_loop)


def lanczos_numpy(A, v0, k, breakdown_tol):
    n = A.shape[0]
    Q = np.zeros((n, k))
    alpha = np.zeros(k)
    beta = np.zeros(k)
    Q[:, 0] = v0
    steps = k
    w = np.zeros(n)
    for j in range(k):
        w = A @ Q[:, j]
        alpha[j] = Q[:, j] @ w
        w -= alpha[j] * Q[:, j]
        if j > 0:
            w -= beta[j - 1] * Q[:, j - 1]
        Qj = Q[:, : j + 1]
        for _ in range(2):
            h = Qj.T @ w
            w -= Qj @ h
            alpha[j] += h[j]
        beta[j] = np.linalg.norm(w)
        if beta[j] < breakdown_tol:
            steps = j + 1
            break
        if j + 1 < k:
            Q[:, j + 1] = w / beta[j]
    return np.ascontiguousarray(Q[:, :steps].T), alpha[:steps], beta[:steps], w


# ---------------------------------------------------------------------------
# Gershgorin interval of a square matrix
# ---------------------------------------------------------------------------


def _gershgorin_loop(A):
    n = A.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        for j in range(n):
            if j != i:
                r += abs(A[i, j])
        lo = min(lo, A[i, i] - r)
        hi = max(hi, A[i, i] + r)
    return lo, hi


gershgorin_numba = _njit(_gershgorin_loop)


def gershgorin_numpy(A):
    d = np.diag(A)
    r = np.abs(A).sum(axis=1) - np.abs(d)
    return float(np.min(d - r)), float(np.max(d + r))


if USING_JIT:
    amplification = amplification_numba
    lanczos_recurrence = lanczos_numba
    gershgorin = gershgorin_numba
else:
    amplification = amplification_numpy
    lanczos_recurrence = lanczos_numpy
    gershgorin = gershgorin_numpy
