import io

import numpy as np
import pytest

from ritzbound.experiments import (
    DEFAULTS,
    PAPER_SCALE,
    SCENARIOS,
    SHARPNESS_COLUMNS,
    SVD_COLUMNS,
    SYMMETRIC_COLUMNS,
    ConfigError,
    ExperimentConfig,
    cluster_spectrum,
    emit_csv,
    format_csv,
    format_metadata,
    run_experiment,
    shifted_errors,
    write_metadata,
)
from ritzbound.linalg_core import make_rng, sym_with_spectrum

SMALL = {
    "eig_uniform": dict(n=60, k=6, iters=30),
    "eig_cluster": dict(n=60, k=12, iters=30),
    "eig_lanczos": dict(n=60, k=30, keep=6),
    "svd_pg": dict(m=60, n=30, k=6, kappa=1e6),
    "svd_hmt": dict(m=60, n=30, k=6, kappa=1e6),
    "svd_pg_vs_hmt": dict(m=60, n=30, k=6, kappa=1e6),
    "sharpness": dict(n=12, k=3),
}


def small(scenario, **kw):
    return ExperimentConfig.for_scenario(scenario, **{**SMALL[scenario], **kw})


@pytest.mark.parametrize(
    "scenario, kw, msg",
    [
        ("eig_uniform", dict(n=300, k=500), "k must not exceed n"),
        ("eig_uniform", dict(k=0), "positive"),
        ("eig_lanczos", dict(keep=200), "keep"),
        ("svd_pg", dict(m=50, n=80), "m must be at least n"),
        ("svd_pg", dict(power_passes=3), "power_passes"),
        ("svd_pg", dict(kappa=0.5), "kappa"),
        ("eig_uniform", dict(method="jacobi"), "method"),
        ("eig_cluster", dict(n=60, k=30), "3k"),
        ("eig_uniform", dict(gap_mode="loose"), "gap_mode"),
    ],
)
def test_config_rejected(scenario, kw, msg):
    with pytest.raises(ConfigError, match=msg):
        ExperimentConfig.for_scenario(scenario, **kw)


def test_config_unknown_scenario_and_missing_fields():
    with pytest.raises(ConfigError, match="unknown scenario"):
        ExperimentConfig.for_scenario("eig_random")
    with pytest.raises(ConfigError, match="needs"):
        ExperimentConfig(scenario="svd_pg", n=10, k=2).validate()


def test_defaults_cover_every_scenario():
    assert set(DEFAULTS) == set(SCENARIOS)
    for s in SCENARIOS:
        ExperimentConfig.for_scenario(s)
    for s in PAPER_SCALE:
        ExperimentConfig.for_scenario(s, paper_scale=True)


def test_paper_scale_settings():
    cfg = ExperimentConfig.for_scenario("eig_uniform", paper_scale=True)
    assert (cfg.n, cfg.k, cfg.iters) == (2000, 100, 40)
    cfg = ExperimentConfig.for_scenario("svd_pg", paper_scale=True)
    assert (cfg.m, cfg.n, cfg.k, cfg.kappa) == (5000, 1000, 200, 1e20)
    assert ExperimentConfig.for_scenario("eig_lanczos", paper_scale=True).k == 400


def test_gap_modes():
    assert small("eig_uniform").gap_modes == ("exact", "approximate")
    assert small("eig_uniform", gap_mode="exact").gap_modes == ("exact",)


def test_cluster_spectrum():
    d = cluster_spectrum(40, make_rng(1))
    assert np.all(np.diff(d) >= 0)
    assert np.all(np.abs(d[19:29] - 20) < 1e-8)
    np.testing.assert_array_equal(d[29:], np.arange(30.0, 41))


# CSV


def test_csv_header_only():
    text = format_csv([], ("a", "b"))
    assert text == "a,b\n"


def test_csv_one_row_two_lines_lf():
    buf = io.StringIO()
    data = emit_csv([{"a": 0.1, "b": None}], ("a", "b"), buf)
    assert buf.getvalue() == "a,b\n0.10000000000000001,\n"
    assert data.count(b"\n") == 2 and b"\r" not in data


def test_csv_quotes_and_bools():
    text = format_csv([{"a": "x,y", "b": True}], ("a", "b"))
    assert text.splitlines()[1] == '"x,y",1'


def test_csv_to_path_and_error(tmp_path):
    path = tmp_path / "r.csv"
    data = emit_csv([{"a": 1}], ("a",), path)
    assert path.read_bytes() == data
    with pytest.raises(OSError, match="nope"):
        emit_csv([], ("a",), tmp_path / "nope" / "r.csv")


def test_metadata_roundtrip(tmp_path):
    meta = {"scenario": "x", "jit": False, "t": 0.5}
    assert format_metadata(meta) == "scenario=x\njit=0\nt=0.5\n"
    write_metadata(meta, tmp_path / "m")
    assert (tmp_path / "m").read_text() == format_metadata(meta)


# runs


@pytest.mark.parametrize("scenario", list(SCENARIOS))
def test_run_columns_and_soundness(scenario):
    res = run_experiment(small(scenario, seed=3))
    expected = SHARPNESS_COLUMNS if scenario == "sharpness" else SVD_COLUMNS if scenario.startswith("svd") else SYMMETRIC_COLUMNS
    assert res.columns == expected
    assert res.rows
    for row in res.rows:
        assert set(row) <= set(res.columns)
    if scenario != "sharpness":
        assert res.metadata["violations"] == 0
        for row in res.rows:
            assert row["gap_mode"] in ("exact", "approximate")
            if row["gap_mode"] == "exact":
                assert "violated" not in row["flags"]
    for key in ("wall_time_s", "jit", "unit_roundoff", "soundness_slack_units", "rerandomized_columns"):
        assert key in res.metadata


def csv_for(cfg):
    res = run_experiment(cfg)
    return format_csv(res.rows, res.columns)


@pytest.mark.parametrize("scenario", list(SCENARIOS))
def test_run_deterministic(scenario):
    a = csv_for(small(scenario, seed=11))
    assert a == csv_for(small(scenario, seed=11))
    assert a != csv_for(small(scenario, seed=12))


def test_rows_per_gap_mode():
    res = run_experiment(small("eig_uniform"))
    modes = [r["gap_mode"] for r in res.rows]
    assert modes.count("exact") == modes.count("approximate") == 6
    assert [r["index"] for r in res.rows[:6]] == [1, 2, 3, 4, 5, 6]
    assert all(r["residual_f"] is None for r in res.rows)


def test_pg_vs_hmt_labels_both_methods():
    res = run_experiment(small("svd_pg_vs_hmt", gap_mode="exact"))
    assert {r["method"] for r in res.rows} == {"pg", "hmt"}


def test_sharpness_rows_cover_eps_sweep():
    res = run_experiment(small("sharpness"))
    assert sorted({r["eps"] for r in res.rows}) == [1e-5, 1e-4, 1e-3]
    for r in res.rows:
        assert r["bound_over_error"] >= 1


def test_shifted_errors_match_dense_eigenvalues():
    # moderate perturbation so plain eigenvalues are accurate enough to compare
    rng = make_rng(2)
    A = sym_with_spectrum(np.arange(1.0, 9), rng)
    theta = np.diag(A)[:3].copy()
    d = shifted_errors(A, theta)
    np.testing.assert_allclose(theta + d, np.arange(1.0, 4), atol=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize("scenario", list(PAPER_SCALE))
def test_paper_scale_runs(scenario):
    res = run_experiment(ExperimentConfig.for_scenario(scenario, paper_scale=True, gap_mode="exact"))
    assert res.metadata["violations"] == 0


def test_sharpness_errors_match_extended_precision():
    mpmath = pytest.importorskip("mpmath")
    from ritzbound.experiments import _streams, sharpness_structure

    (rng,) = _streams(0, 1)
    theta, c, E0 = sharpness_structure(12, 3, rng)
    A = np.zeros((12, 12))
    A[:3, :3] = np.diag(theta)
    A[3:, :3] = 1e-5 * E0
    A[:3, 3:] = 1e-5 * E0.T
    A[3:, 3:] = c * np.eye(9)
    with mpmath.workdps(50):
        ev = sorted(mpmath.eigsy(mpmath.matrix(A.tolist()), eigvals_only=True))
        ref = np.array([float(ev[i] - theta[i]) for i in range(3)])
    np.testing.assert_allclose(shifted_errors(A, theta), ref, rtol=1e-12)
