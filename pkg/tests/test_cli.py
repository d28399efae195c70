import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ritzbound.cli import (
    parse_and_dispatch,
    read_structure,
    structure_from_dict,
    structure_to_dict,
    write_structure,
)
from ritzbound.experiments import SCENARIOS
from ritzbound.extraction import petrov_galerkin, rayleigh_ritz
from ritzbound.linalg_core import geometric_randsvd, haar_orthogonal, make_rng, sym_with_spectrum
from ritzbound.subspace_methods import sketch_subspaces


def call(argv):
    out, err = io.StringIO(), io.StringIO()
    code = parse_and_dispatch(argv, out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_run_writes_csv_and_meta(tmp_path):
    path = tmp_path / "r.csv"
    code, _, _ = call(
        ["run", "--scenario", "eig_uniform", "--n", "300", "--k", "30", "--seed", "7", "--gap-mode", "both", "--out", str(path)]
    )
    assert code == 0
    lines = path.read_text().splitlines()
    assert lines[0].startswith("index,theta,exact_value")
    assert len(lines) == 1 + 2 * 30
    meta = dict(line.split("=", 1) for line in (tmp_path / "r.csv.meta").read_text().splitlines())
    assert meta["scenario"] == "eig_uniform" and meta["config_seed"] == "7"
    assert meta["violations"] == "0"


def test_run_to_stdout():
    code, out, _ = call(["run", "--scenario", "sharpness", "--n", "10", "--k", "2"])
    assert code == 0
    assert out.splitlines()[0].startswith("eps,index")
    assert len(out.splitlines()) == 1 + 3 * 2


def test_k_larger_than_n_is_usage_error():
    code, _, err = call(["run", "--scenario", "eig_uniform", "--k", "500", "--n", "300"])
    assert code == 2
    assert "k must not exceed n" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--scenario", "eig_uniform", "--bogus"],
        ["run", "--scenario", "nope"],
        ["run"],
        [],
        ["bound"],
    ],
)
def test_argparse_errors_exit_two(argv, capsys):
    assert call(argv)[0] == 2
    assert "usage" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert call(["run", "--help"])[0] == 0
    text = capsys.readouterr().out
    assert "--power-passes" in text and "eig_uniform: n=300" in text


def test_runtime_failures_exit_one(tmp_path):
    code, _, err = call(["bound", "--input", str(tmp_path / "missing.json")])
    assert code == 1 and "missing.json" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert call(["bound", "--input", str(bad)])[0] == 1
    bad.write_text(json.dumps({"kind": "symmetric", "theta": [1.0], "residual_norms_e": [0.1], "extra": 1}))
    code, _, err = call(["bound", "--input", str(bad)])
    assert code == 1 and "extra" in err
    code, _, _ = call(["run", "--scenario", "sharpness", "--out", str(tmp_path / "no" / "dir.csv")])
    assert code == 1


def test_bound_three_by_three(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(
        json.dumps({"kind": "symmetric", "theta": [1.0, 2.0], "residual_norms_e": [0.01, 0.02], "tail_spectrum": [4.0]})
    )
    code, out, _ = call(["bound", "--input", str(path)])
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# gap_mode=exact")
    header = lines[1].split("\t")
    row = dict(zip(header, lines[2].split("\t")))
    assert float(row["thm_main"]) == pytest.approx(3.34494e-5, rel=1e-4)
    assert "classical" not in header


def test_bound_svd_and_not_applicable(tmp_path):
    path = tmp_path / "s.json"
    d = {"kind": "svd", "theta": [2.0], "residual_norms_e": [0.02], "residual_norms_f": [0.01], "tail_spectrum": [1.0]}
    path.write_text(json.dumps(d))
    code, out, _ = call(["bound", "--input", str(path)])
    row = dict(zip(out.splitlines()[1].split("\t"), out.splitlines()[2].split("\t")))
    assert float(row["thm_svd"]) == pytest.approx(2.5403e-4, rel=1e-4)
    d = {"kind": "symmetric", "theta": [1.0, 1.0], "residual_norms_e": [0.01, 0.01], "tail_spectrum": [3.0]}
    path.write_text(json.dumps(d))
    code, out, _ = call(["bound", "--input", str(path)])
    row = dict(zip(out.splitlines()[1].split("\t"), out.splitlines()[2].split("\t")))
    assert code == 0 and row["thm_main"] == "n/a"


def test_bound_exact_without_tail_is_usage_error(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"kind": "symmetric", "theta": [1.0, 2.0], "residual_norms_e": [0.01, 0.02]}))
    assert call(["bound", "--input", str(path), "--gap-mode", "exact"])[0] == 2
    code, out, _ = call(["bound", "--input", str(path)])
    assert code == 0 and "eta_from_ritz_spread" in out


def test_list_scenarios():
    code, out, _ = call(["list-scenarios"])
    assert code == 0
    assert [line.split("\t")[0] for line in out.splitlines()] == list(SCENARIOS)


def assert_same_structure(a, b):
    assert a.kind == b.kind
    for field in ("theta", "tail_spectrum"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
    if a.kind == "svd":
        np.testing.assert_array_equal(a.residual_norms_e, b.residual_norms_e)
        np.testing.assert_array_equal(a.residual_norms_f, b.residual_norms_f)
    else:
        np.testing.assert_array_equal(a.residual_norms, b.residual_norms)


def test_structure_round_trip_from_extractions(tmp_path):
    rng = make_rng(0)
    A = sym_with_spectrum(np.arange(1.0, 41), rng)
    sym = rayleigh_ritz(A, haar_orthogonal(40, rng, cols=5))
    B = geometric_randsvd(50, 20, 1e6, rng)
    svd = petrov_galerkin(B, *sketch_subspaces(B, 4, 1, rng))
    for p in (sym, svd):
        path = tmp_path / f"{p.kind}.json"
        write_structure(p, path)
        q = read_structure(path)
        assert_same_structure(p, q)
        assert structure_to_dict(q) == structure_to_dict(p)


def test_structure_validation():
    with pytest.raises(ValueError, match="missing"):
        structure_from_dict({"kind": "svd", "theta": [1.0]})
    with pytest.raises(ValueError, match="residual_norms_f"):
        structure_from_dict({"kind": "svd", "theta": [1.0], "residual_norms_e": [0.0]})
    with pytest.raises(ValueError, match="kind"):
        structure_from_dict({"kind": "tensor", "theta": [1.0], "residual_norms_e": [0.0]})
    with pytest.raises(ValueError, match="object"):
        structure_from_dict([1, 2])


def test_console_entry_point():
    out = subprocess.run(
        [sys.executable, "-m", "ritzbound", "list-scenarios"], capture_output=True, text=True, check=True
    )
    assert out.stdout.startswith("eig_uniform")
