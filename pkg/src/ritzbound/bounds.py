"""A posteriori error bounds for Ritz values and approximate singular values.

All bounds take a perturbation structure (see :mod:`ritzbound.extraction`)
and a :class:`GapData` computed from it in either ``exact`` mode (gaps to
the true tail spectrum) or ``approximate`` mode (gaps estimated from
information available after the extraction).

Per-index results are returned as a :class:`Bound`, whose ``values`` array
holds NaN where the bound's positivity preconditions fail.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .linalg_core import UNIT_ROUNDOFF, as_matrix

GAP_MODES = ("exact", "approximate")

# Soundness slack and roundoff floor, in units of u * ||A||_2.
SOUNDNESS_SLACK = 64
ROUNDOFF_FLOOR = 1e3

# the per-column residual bound ||E_i|| is not guaranteed (theta = (0, 0), E_1 = 0, E_2 != 0
# pushes lambda_1 below 0), so it is reported but not certified
GUARANTEED = ("thm_main", "thm_cluster", "thm_svd", "lili", "offdiag_quadratic", "classical")


@dataclass
class GapData:
    """Gap quantities for every Ritz index, already offset by the residuals.

    ``pair_gaps[i, j]`` is |theta_i - theta_j| minus the offset of index i
    (diagonal is NaN); ``mirror_gaps[i, j]`` is |theta_i + theta_j| minus the
    offset (singular value case only).
    """

    eta: np.ndarray
    delta: np.ndarray
    pair_gaps: np.ndarray
    offsets: np.ndarray
    mode: str
    mirror_gaps: np.ndarray | None = None
    classical_gap: np.ndarray | None = None
    flags: list = field(default_factory=list)


@dataclass
class Bound:
    name: str
    values: np.ndarray
    amplification: np.ndarray | None = None
    heuristic: bool = False
    flags: tuple = ()

    @property
    def applicable(self):
        return ~np.isnan(self.values)

    def __len__(self):
        return self.values.size

    def __getitem__(self, i):
        v = self.values[i]
        return None if np.isnan(v) else float(v)


@dataclass(frozen=True)
class ClusterSpec:
    """Ritz indices ``start, ..., stop - 1`` (0-based), all within center +- radius."""

    start: int
    stop: int
    center: float
    radius: float

    def __post_init__(self):
        if not 0 <= self.start < self.stop:
            raise ValueError(f"empty or negative index range [{self.start}, {self.stop})")
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")

    @property
    def indices(self):
        return np.arange(self.start, self.stop)


def _nearest_distance(points, sorted_values):
    """min_j |x - v_j| for each x, with v sorted ascending (inf if v empty)."""
    points = np.asarray(points, dtype=np.float64)
    if sorted_values is None or sorted_values.size == 0:
        return np.full(points.shape, np.inf)
    pos = np.searchsorted(sorted_values, points)
    left = sorted_values[np.clip(pos - 1, 0, sorted_values.size - 1)]
    right = sorted_values[np.clip(pos, 0, sorted_values.size - 1)]
    return np.minimum(np.abs(points - left), np.abs(points - right))


def _pair_matrix(theta, offsets, sign=-1.0):
    G = np.abs(theta[:, None] + sign * theta[None, :]) - offsets[:, None]
    if sign < 0:
        np.fill_diagonal(G, np.nan)
    return G


def _symmetric_tail_distance(p, mode, points):
    """Estimate of min_j |x - lambda_j(A2)| for each x in ``points``."""
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    if mode == "exact":
        if p.tail_spectrum is None or p.tail_mode != "exact":
            raise ValueError("exact gap mode needs the exact tail spectrum")
        return _nearest_distance(points, p.tail_spectrum), None
    if p.tail_estimate is not None and p.tail_estimate.size:
        return _nearest_distance(points, p.tail_estimate), "eta_from_tail_estimate"
    # extremal extraction: the tail lies beyond every Ritz value
    spread = np.max(np.abs(points[:, None] - p.theta[None, :]), axis=1)
    return spread, "eta_from_ritz_spread"


def gaps_symmetric(p, mode, full_spectrum=None):
    """Gaps for the symmetric bounds.

    exact: eta_i = min_j |theta_i - lambda_j(A2)|.
    approximate: eta_i from ``p.tail_estimate`` when present, otherwise
    max_k |theta_i - theta_k| (valid when the extremal eigenvalues are sought
    and well approximated).

    ``full_spectrum`` (eigenvalues of A) enables the classical gap: distance
    from theta_i to the spectrum of A without its eigenvalue closest to theta_i.
    """
    if mode not in GAP_MODES:
        raise ValueError(f"mode must be one of {GAP_MODES}")
    theta = p.theta
    r = p.residual_norms
    eta, how = _symmetric_tail_distance(p, mode, theta)
    flags = [how] if how else []
    g = GapData(
        eta=eta,
        delta=eta - r,
        pair_gaps=_pair_matrix(theta, r),
        offsets=r.copy(),
        mode=mode,
        flags=flags,
    )
    if full_spectrum is not None:
        lam = np.sort(np.asarray(full_spectrum, dtype=np.float64).ravel())
        g.classical_gap = classical_gaps(theta, lam, matched=matched_ranks(p))
    return g


def classical_gaps(theta, spectrum, matched=None):
    """Distance from each theta_i to ``spectrum`` minus its closest member.

    The classical bound controls the distance to the closest eigenvalue.  When
    ``matched[i]`` (position in the ascending spectrum) is given and the closest
    eigenvalue sits elsewhere, the gap is set to NaN.
    """
    lam = np.sort(np.asarray(spectrum, dtype=np.float64).ravel())
    out = np.full(theta.size, np.inf)
    if lam.size < 2:
        return out
    pos = np.searchsorted(lam, theta)
    for i, (t, q) in enumerate(zip(theta, pos)):
        lo = max(q - 2, 0)
        cand = lam[lo : q + 2]
        dist = np.abs(cand - t)
        order = np.argsort(dist, kind="stable")
        out[i] = dist[order[1]]
        if matched is not None:
            near = lo + order[0]
            if near != matched[i] and dist[order[0]] != abs(lam[matched[i]] - t):
                out[i] = np.nan
    return out


def gaps_svd(p, mode):
    """Gaps for the singular value bounds.

    The offset is s_i = sqrt((||E_i||^2 + ||F_i||^2) / 2) and
    delta_i = min(|theta_i|, eta_i) - s_i, the |theta_i| term accounting for
    the zero eigenvalues of the augmented tail.  Approximate mode replaces
    min_j |theta_i - sigma_j(A2)| by min_{j != i} |theta_i - theta_j|.
    """
    if mode not in GAP_MODES:
        raise ValueError(f"mode must be one of {GAP_MODES}")
    theta = p.theta
    s = np.sqrt(p.residual_weights)
    flags = []
    if mode == "exact":
        if p.tail_spectrum is None or p.tail_mode != "exact":
            raise ValueError("exact gap mode needs the exact tail spectrum")
        eta = _nearest_distance(theta, np.sort(p.tail_spectrum))
    else:
        D = np.abs(theta[:, None] - theta[None, :])
        np.fill_diagonal(D, np.inf)
        eta = D.min(axis=1) if theta.size > 1 else np.full(1, np.inf)
        flags.append("eta_from_neighbor_gap")
    if p.shape is not None and p.shape[0] == p.shape[1]:
        flags.append("square_zero_row_augmented")
    return GapData(
        eta=eta,
        delta=np.minimum(np.abs(theta), eta) - s,
        pair_gaps=_pair_matrix(theta, s),
        mirror_gaps=_pair_matrix(theta, s, sign=1.0),
        offsets=s,
        mode=mode,
        flags=flags,
    )


def _as_float_array(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def bound_thm_main(p, g):
    """d_i ||E_i||^2 with d_i = 1 / (delta_i - sum_{j != i} ||E_j||^2 / delta_ij)."""
    w = p.residual_norms**2
    G = _as_float_array(g.pair_gaps)
    d = kernels.amplification(_as_float_array(g.delta), _as_float_array(w), G, G, False)
    return Bound("thm_main", d * w, amplification=d, flags=tuple(g.flags))


def _amplify_one(delta, terms):
    """1 / (delta - sum(terms)) with the kernel's summation order, NaN if not positive."""
    if not delta > 0 or np.any(~(terms[1] > 0)):
        return np.nan
    t = np.sort(-(terms[0] / terms[1]))
    den = kernels._neumaier_rows(t[None, :], [delta])[0]
    return 1.0 / den if den > 0 else np.nan


def detect_clusters(theta, rtol=1e-6):
    """Greedy grouping of sorted Ritz values.

    Consecutive values closer than ``rtol * spread`` are merged.  Each
    group gets center = midpoint and radius = max distance to the center;
    isolated values become singletons with radius 0.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if theta.size == 0:
        return []
    if np.any(np.diff(theta) < 0):
        raise ValueError("theta must be sorted ascending")
    spread = theta[-1] - theta[0]
    tau = rtol * spread
    out = []
    start = 0
    for i in range(1, theta.size + 1):
        if i == theta.size or theta[i] - theta[i - 1] > tau:
            block = theta[start:i]
            if block.size == 1:
                out.append(ClusterSpec(start, i, float(block[0]), 0.0))
            else:
                c = 0.5 * (block[0] + block[-1])
                out.append(ClusterSpec(start, i, float(c), float(np.max(np.abs(block - c)))))
            start = i
    return out


def _complete_clusters(clusters, theta):
    """Validate clusters and fill uncovered indices with singletons."""
    k = theta.size
    owner = np.full(k, -1)
    for c_idx, c in enumerate(clusters):
        if c.stop > k:
            raise ValueError(f"cluster [{c.start}, {c.stop}) exceeds k={k}")
        if np.any(owner[c.start : c.stop] >= 0):
            raise ValueError("clusters overlap")
        owner[c.start : c.stop] = c_idx
        # a few ulps of slack: 1 + 1e-10 is not exactly representable
        tol = c.radius + 4 * UNIT_ROUNDOFF * abs(c.center)
        outside = np.abs(theta[c.start : c.stop] - c.center) > tol
        if np.any(outside):
            j = c.start + int(np.flatnonzero(outside)[0])
            raise ValueError(f"theta[{j}] = {theta[j]!r} lies outside {c.center!r} +- {c.radius!r}")
    full = list(clusters)
    for i in np.flatnonzero(owner < 0):
        full.append(ClusterSpec(int(i), int(i) + 1, float(theta[i]), 0.0))
    return sorted(full, key=lambda c: c.start)


def bound_thm_cluster(p, clusters, g):
    """Cluster bound d_I ||E_I||_2^2 for every index of every cluster.

    Indices not covered by ``clusters`` are treated as singletons with
    radius 0, which reproduces :func:`bound_thm_main`.  ``g`` supplies the
    gap mode only; cluster gaps are measured from the cluster center.
    """
    theta = p.theta
    r = p.residual_norms
    w = r**2
    k = theta.size
    values = np.full(k, np.nan)
    amp = np.full(k, np.nan)
    flags = set(g.flags)
    for c in _complete_clusters(list(clusters), theta):
        idx = c.indices
        if idx.size == 1:
            e_norm = float(r[idx[0]])
        else:
            e_norm = p.block_norm(idx)
            if not p.block_norm_is_exact:
                flags.add("cluster_norm_frobenius")
        tail, how = _symmetric_tail_distance(p, g.mode, [c.center])
        if how:
            flags.add(how)
        delta_I = tail[0] - c.radius - e_norm
        mask = np.ones(k, dtype=bool)
        mask[idx] = False
        gaps = np.abs(theta[mask] - c.center) - c.radius - e_norm
        d = _amplify_one(delta_I, (w[mask], gaps))
        amp[idx] = d
        values[idx] = d * e_norm**2
    return Bound("thm_cluster", values, amplification=amp, flags=tuple(sorted(flags)))


def bound_thm_svd(p, g):
    """d_i (||E_i||^2 + ||F_i||^2) / 2 for approximate singular values."""
    w = p.residual_weights
    d = kernels.amplification(
        _as_float_array(g.delta),
        _as_float_array(w),
        _as_float_array(g.pair_gaps),
        _as_float_array(g.mirror_gaps),
        True,
    )
    return Bound("thm_svd", d * w, amplification=d, flags=tuple(g.flags))


def bound_weyl(p):
    """||E_i|| (symmetric) or max(||E_i||, ||F_i||) (singular values).

    The per-column form is a comparison baseline, not a certified bound.
    """
    if p.kind == "svd":
        v = np.maximum(p.residual_norms_e, p.residual_norms_f)
    else:
        v = p.residual_norms.copy()
    return Bound("weyl", v, flags=("per_column_form",))


def _whole_block_norm(p):
    if p.kind == "svd":
        return max(p.block_norms())
    return p.block_norm()


def _svd_tail_gap(p, g):
    # the augmented tail also holds zeros when A2 is rectangular, so |theta_i| caps the gap
    return np.minimum(np.abs(p.theta), g.eta) if p.kind == "svd" else g.eta


def bound_lili(p, g):
    """2 x^2 / (eta_i + sqrt(eta_i^2 + 4 x^2)), x = ||E||_2 or max(||E||_2, ||F||_2).

    For singular values eta_i is capped by |theta_i|, as in :func:`gaps_svd`.
    """
    x = _whole_block_norm(p)
    eta = _svd_tail_gap(p, g)
    if x == 0:
        v = np.zeros_like(eta)
    else:
        with np.errstate(invalid="ignore"):
            v = 2 * x**2 / (eta + np.sqrt(eta**2 + 4 * x**2))
        v = np.where(np.isinf(eta), 0.0, v)
    flags = tuple(g.flags) + (() if p.block_norm_is_exact else ("block_norm_frobenius",))
    return Bound("lili", v, flags=flags)


def bound_offdiag_quadratic(p, g):
    """2 M^2 / (gap_i - 2M), M = max(||E||_2, ||F||_2), with theta_i standing in for sigma_i."""
    if p.kind != "svd":
        raise TypeError("bound_offdiag_quadratic applies to singular value structures")
    M = _whole_block_norm(p)
    gap = _svd_tail_gap(p, g)
    if M == 0:
        v = np.zeros_like(gap)
    else:
        den = gap - 2 * M
        ok = den > 0
        v = np.where(ok, 2 * M**2 / np.where(ok, den, 1.0), np.nan)
        v = np.where(np.isinf(gap), 0.0, v)
    flags = tuple(g.flags) + ("theta_for_sigma",)
    if not p.block_norm_is_exact:
        flags += ("block_norm_frobenius",)
    return Bound("offdiag_quadratic", v, flags=flags)


def bound_classical(p, g):
    """||E_i||^2 / gap_i, gap_i the distance from theta_i to lambda(A) minus its nearest member."""
    if g.classical_gap is None:
        raise ValueError("classical bound needs the full spectrum of A (pass full_spectrum to gaps_symmetric)")
    r2 = p.residual_norms**2
    gap = g.classical_gap
    ok = gap > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(ok, r2 / np.where(ok, gap, 1.0), np.nan)
    v = np.where((r2 == 0) & ~np.isnan(gap), 0.0, v)
    return Bound("classical", v)


def bound_asymptotic(p, g):
    """Leading-order estimate ||E_i||^2 / eta_i (not a guaranteed bound)."""
    w = p.residual_weights if p.kind == "svd" else p.residual_norms**2
    eta = g.eta
    ok = eta > 0
    v = np.where(ok, w / np.where(ok, eta, 1.0), np.nan)
    v = np.where(w == 0, 0.0, v)
    return Bound("asymptotic", v, heuristic=True, flags=tuple(g.flags))


def jordan_wielandt_augment(A):
    """Symmetric [[0, A], [A^T, 0]], whose eigenvalues are +-sigma_i(A) plus |m - n| zeros."""
    A = as_matrix(A)
    m, n = A.shape
    out = np.zeros((m + n, m + n))
    out[:m, m:] = A
    out[m:, :m] = A.T
    return out


def symmetric_bounds(p, g, clusters=None):
    """Every symmetric bound that ``g`` supports, keyed by name."""
    out = {
        "thm_main": bound_thm_main(p, g),
        "thm_cluster": bound_thm_cluster(p, detect_clusters(p.theta) if clusters is None else clusters, g),
        "weyl": bound_weyl(p),
        "lili": bound_lili(p, g),
        "asymptotic": bound_asymptotic(p, g),
    }
    if g.classical_gap is not None:
        out["classical"] = bound_classical(p, g)
    return out


def svd_bounds(p, g):
    return {
        "thm_svd": bound_thm_svd(p, g),
        "weyl": bound_weyl(p),
        "lili": bound_lili(p, g),
        "offdiag_quadratic": bound_offdiag_quadratic(p, g),
        "asymptotic": bound_asymptotic(p, g),
    }


@dataclass
class BoundReport:
    index: int
    theta: float
    residual_e: float
    residual_f: float | None
    exact_value: float | None
    exact_error: float | None
    bounds: dict
    gap_mode: str
    below_roundoff: bool = False

    def violations(self, slack):
        """Names of guaranteed bounds exceeded by the exact error by more than ``slack``."""
        if self.exact_error is None or self.below_roundoff:
            return []
        return [
            name
            for name, v in self.bounds.items()
            if name in GUARANTEED and v is not None and self.exact_error > v + slack
        ]


def matched_ranks(p):
    """Position of each theta_i in the merged, sorted list of theta and the tail spectrum.

    Ascending for symmetric structures, descending for singular values.  This
    is the pairing under which the perturbation theorems compare theta_i with
    an exact value; it reduces to i whenever the Ritz values precede the tail.
    Without a tail spectrum the rank is i.
    """
    ranks = np.arange(p.k)
    tail = p.tail_spectrum
    if tail is None or not np.size(tail):
        return ranks
    tail = np.sort(np.asarray(tail, dtype=np.float64))
    if p.kind == "svd":
        ahead = tail.size - np.searchsorted(tail, p.theta, side="right")
    else:
        ahead = np.searchsorted(tail, p.theta, side="left")
    return ranks + ahead


def match_and_report(p, exact_spectrum, bounds, gap_mode, norm_a=None):
    """Pair theta_i with exact values and assemble per-index reports.

    Symmetric structures hold the smallest Ritz values (ascending) and are
    matched with the eigenvalues in ascending order; singular value
    structures hold the largest (descending), matched in descending order.
    The i-th value is paired with the exact value at :func:`matched_ranks`,
    which is plain sorted order unless a tail value falls among the thetas.
    ``norm_a`` (an estimate of ||A||_2) enables the roundoff flag.
    """
    k = p.k
    exact = None
    if exact_spectrum is not None:
        vals = np.sort(np.asarray(exact_spectrum, dtype=np.float64).ravel())
        if vals.size < k:
            raise ValueError(f"exact spectrum has {vals.size} values, need at least {k}")
        if p.kind == "svd":
            vals = vals[::-1]
        ranks = matched_ranks(p)
        if ranks[-1] >= vals.size:
            ranks = np.arange(k)
        exact = vals[ranks]
    floor = ROUNDOFF_FLOOR * UNIT_ROUNDOFF * norm_a if norm_a is not None else None
    reports = []
    for i in range(k):
        err = None if exact is None else float(abs(p.theta[i] - exact[i]))
        if p.kind == "svd":
            re, rf = float(p.residual_norms_e[i]), float(p.residual_norms_f[i])
        else:
            re, rf = float(p.residual_norms[i]), None
        reports.append(
            BoundReport(
                index=i,
                theta=float(p.theta[i]),
                residual_e=re,
                residual_f=rf,
                exact_value=None if exact is None else float(exact[i]),
                exact_error=err,
                bounds={name: b[i] for name, b in bounds.items()},
                gap_mode=gap_mode,
                below_roundoff=bool(err is not None and floor is not None and err < floor),
            )
        )
    return reports


def soundness_slack(norm_a):
    return SOUNDNESS_SLACK * UNIT_ROUNDOFF * norm_a
