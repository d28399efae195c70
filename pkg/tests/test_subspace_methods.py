from collections import Counter

import numpy as np
import pytest

from ritzbound.extraction import petrov_galerkin, rayleigh_ritz
from ritzbound.linalg_core import geometric_randsvd, haar_orthogonal, make_rng, sym_with_spectrum
from ritzbound.subspace_methods import (
    IterationConfig,
    lobpcg_basic,
    orth_rerandomize,
    sketch_subspaces,
    spectral_shift,
    subspace_iteration,
)


def orthonormality(Q):
    return np.linalg.norm(Q.T @ Q - np.eye(Q.shape[1]), 2)


@pytest.mark.parametrize(
    "kwargs",
    [dict(block_size=0, max_iters=1), dict(block_size=1, max_iters=0), dict(block_size=1, max_iters=1, target="middle")],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        IterationConfig(**kwargs)


def test_subspace_iteration_diagonal_full_block():
    A = np.diag([4.0, 1.0, 3.0, 2.0])
    Q = subspace_iteration(A, IterationConfig(4, 200))
    p = rayleigh_ritz(A, Q)
    np.testing.assert_allclose(p.theta, [1, 2, 3, 4], atol=1e-13)
    assert p.residual_norms.max() < 1e-13
    # a signed permutation
    np.testing.assert_allclose(np.sort(np.abs(Q).max(axis=0)), np.ones(4), atol=1e-12)


def test_subspace_iteration_grades_residuals():
    A = sym_with_spectrum(np.arange(1.0, 501), make_rng(0))
    Q = subspace_iteration(A, IterationConfig(50, 100, seed=1))
    assert orthonormality(Q) <= 1e-12
    r = rayleigh_ritz(A, Q, tail_mode="approximate").residual_norms
    assert r[-1] >= 10 * r[0]


def test_subspace_iteration_largest_end():
    A = sym_with_spectrum(np.arange(1.0, 101), make_rng(3))
    Q = subspace_iteration(A, IterationConfig(5, 400, target="largest", seed=2))
    theta = rayleigh_ritz(A, Q, tail_mode="approximate").theta
    np.testing.assert_allclose(theta, [96, 97, 98, 99, 100], atol=0.5)


def test_subspace_iteration_deterministic():
    A = sym_with_spectrum(np.arange(1.0, 61), make_rng(4))
    cfg = IterationConfig(6, 10, seed=9)
    assert subspace_iteration(A, cfg).tobytes() == subspace_iteration(A, cfg).tobytes()


def test_spectral_shift_beyond_spectrum():
    A = sym_with_spectrum(np.arange(1.0, 301), make_rng(5))
    c = spectral_shift(A, "smallest", make_rng(6))
    # the far end is covered, and tighter than the Gershgorin estimate
    assert 300 - 1e-8 <= c < np.abs(A).sum(axis=1).max()
    assert spectral_shift(A, "largest", make_rng(6)) <= 1 + 1e-8


def test_orth_rerandomize_replaces_dependent_columns():
    rng = make_rng(7)
    v = rng.standard_normal(20)
    Y = np.column_stack([v, 2 * v, rng.standard_normal(20)])
    counters = Counter()
    Q = orth_rerandomize(Y, rng, counters)
    assert counters["rerandomized_columns"] == 1
    assert orthonormality(Q) <= 1e-12


def test_lobpcg_invariant_subspace_is_fixed():
    D = np.arange(1.0, 31)
    V = haar_orthogonal(30, make_rng(8))
    A = (V * D) @ V.T
    A = 0.5 * (A + A.T)
    X = lobpcg_basic(A, V[:, :5], 5)
    p = rayleigh_ritz(A, X, tail_mode="approximate")
    np.testing.assert_allclose(p.theta, D[:5], atol=1e-12)
    assert p.residual_norms.max() < 1e-11


def test_lobpcg_ritz_sum_decreases():
    A = sym_with_spectrum(np.arange(1.0, 501), make_rng(9))
    X0 = haar_orthogonal(500, make_rng(10), cols=50)
    sums = []
    for iters in (0, 1, 2, 5, 10, 20, 40):
        X = lobpcg_basic(A, X0, iters) if iters else X0
        sums.append(rayleigh_ritz(A, X, tail_mode="approximate").theta.sum())
    assert np.all(np.diff(sums) <= 1e-12 * abs(sums[0]))
    assert sums[-1] < sums[1] < sums[0]
    assert orthonormality(X) <= 1e-12


def test_lobpcg_needs_room():
    with pytest.raises(ValueError, match="3k"):
        lobpcg_basic(np.eye(8), np.eye(8)[:, :3], 2)


def test_lobpcg_converges_to_smallest():
    A = sym_with_spectrum(np.arange(1.0, 301), make_rng(11))
    counters = Counter()
    X = lobpcg_basic(A, haar_orthogonal(300, make_rng(12), cols=10), 60, counters=counters)
    p = rayleigh_ritz(A, X, tail_mode="approximate")
    np.testing.assert_allclose(p.theta, np.arange(1.0, 11), atol=1e-8)


@pytest.mark.parametrize("passes", [1, 2])
def test_sketch_orthonormal_and_deterministic(passes):
    A = geometric_randsvd(60, 30, 1e4, make_rng(13))
    Q1, Q2 = sketch_subspaces(A, 8, passes, make_rng(14))
    assert Q1.shape == (60, 8) and Q2.shape == (30, 8)
    assert orthonormality(Q1) <= 1e-12 and orthonormality(Q2) <= 1e-12
    R1, R2 = sketch_subspaces(A, 8, passes, make_rng(14))
    assert Q1.tobytes() == R1.tobytes() and Q2.tobytes() == R2.tobytes()


def test_sketch_orthogonal_input():
    Q = haar_orthogonal(12, make_rng(15))
    Q1, Q2 = sketch_subspaces(Q, 4, 1, make_rng(16))
    assert orthonormality(Q1) <= 1e-12 and orthonormality(Q2) <= 1e-12


def test_double_pass_grades_pg_residuals():
    A = geometric_randsvd(200, 80, 1e12, make_rng(17))
    Q1, Q2 = sketch_subspaces(A, 20, 2, make_rng(18))
    p = petrov_galerkin(A, Q1, Q2, tail_mode="approximate")
    r = np.maximum(p.residual_norms_e, p.residual_norms_f)
    assert r[-1] >= 1e2 * r[0]


def test_sketch_validation():
    A = np.ones((5, 3))
    with pytest.raises(ValueError):
        sketch_subspaces(A, 4, 1, make_rng(0))
    with pytest.raises(ValueError):
        sketch_subspaces(A, 2, 3, make_rng(0))
