"""Command-line front end.

    ritzbound run --scenario eig_uniform --n 300 --k 30 --seed 7 --out r.csv
    ritzbound bound --input structure.json
    ritzbound list-scenarios

Exit status: 0 on success, 2 on usage errors, 1 on runtime failures.

Structure files are JSON objects::

    {"kind": "symmetric" | "svd",
     "theta": [...],
     "residual_norms_e": [...],
     "residual_norms_f": [...],      # svd only
     "tail_spectrum": [...]}         # optional; enables exact gaps

For ``kind = "symmetric"`` the residual norms ||A x_i - theta_i x_i|| go in
``residual_norms_e``.  ``tail_spectrum`` holds the eigenvalues (or singular
values) of the trailing block.
"""
import argparse
import json
import logging
import sys

import numpy as np

from . import bounds as bd
from .experiments import (
    DEFAULTS,
    SCENARIOS,
    ConfigError,
    ExperimentConfig,
    emit_csv,
    run_experiment,
    write_metadata,
)
from .extraction import SvdPerturbation, SymmetricPerturbation

log = logging.getLogger("ritzbound")


class UsageError(Exception):
    pass


def structure_to_dict(p):
    """The information a bound needs, as plain lists."""
    d = {"kind": p.kind, "theta": p.theta.tolist()}
    if p.kind == "svd":
        d["residual_norms_e"] = p.residual_norms_e.tolist()
        d["residual_norms_f"] = p.residual_norms_f.tolist()
    else:
        d["residual_norms_e"] = p.residual_norms.tolist()
    if p.tail_spectrum is not None:
        d["tail_spectrum"] = np.asarray(p.tail_spectrum).tolist()
    return d


def structure_from_dict(d):
    if not isinstance(d, dict):
        raise ValueError("structure file must hold a JSON object")
    unknown = set(d) - {"kind", "theta", "residual_norms_e", "residual_norms_f", "tail_spectrum"}
    if unknown:
        raise ValueError(f"unknown structure fields: {', '.join(sorted(unknown))}")
    for key in ("kind", "theta", "residual_norms_e"):
        if key not in d:
            raise ValueError(f"structure file is missing {key!r}")
    tail = d.get("tail_spectrum")
    mode = "approximate" if tail is None else "exact"
    if d["kind"] == "symmetric":
        if d.get("residual_norms_f"):
            raise ValueError("residual_norms_f is only meaningful for kind 'svd'")
        return SymmetricPerturbation(
            theta=d["theta"], residual_norms=d["residual_norms_e"], tail_spectrum=tail, tail_mode=mode
        )
    if d["kind"] == "svd":
        if "residual_norms_f" not in d:
            raise ValueError("kind 'svd' needs residual_norms_f")
        return SvdPerturbation(
            theta=d["theta"],
            residual_norms_e=d["residual_norms_e"],
            residual_norms_f=d["residual_norms_f"],
            tail_spectrum=tail,
            tail_mode=mode,
        )
    raise ValueError(f"kind must be 'symmetric' or 'svd', got {d['kind']!r}")


def write_structure(p, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(structure_to_dict(p), fh, indent=2)
        fh.write("\n")


def read_structure(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return structure_from_dict(data)


def bound_table(p, gap_mode=None):
    """Every applicable bound for a structure read from a file, as text."""
    mode = gap_mode or ("exact" if p.tail_spectrum is not None else "approximate")
    if mode == "exact" and p.tail_spectrum is None:
        raise UsageError("exact gaps need tail_spectrum in the structure file")
    if p.kind == "svd":
        g = bd.gaps_svd(p, mode)
        table = bd.svd_bounds(p, g)
        lead = ["index", "theta", "residual_e", "residual_f"]
    else:
        g = bd.gaps_symmetric(p, mode)
        table = bd.symmetric_bounds(p, g)
        table.pop("classical", None)
        lead = ["index", "theta", "residual_e"]
    names = list(table)
    lines = [f"# gap_mode={mode}" + (f" flags={','.join(g.flags)}" if g.flags else "")]
    lines.append("\t".join(lead + names))
    for i in range(p.k):
        cells = [str(i + 1), f"{p.theta[i]:.10g}"]
        if p.kind == "svd":
            cells += [f"{p.residual_norms_e[i]:.6g}", f"{p.residual_norms_f[i]:.6g}"]
        else:
            cells.append(f"{p.residual_norms[i]:.6g}")
        for name in names:
            v = table[name][i]
            cells.append("n/a" if v is None else f"{v:.6g}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ritzbound",
        description="Residual-based error bounds for Ritz values and approximate singular values.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run",
        help="run an experiment scenario and write CSV",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        epilog="Unset sizes take the scenario's desk-scale default: "
        + "; ".join(f"{s}: " + ", ".join(f"{k}={v}" for k, v in d.items()) for s, d in DEFAULTS.items()),
    )
    run.add_argument("--scenario", required=True, choices=list(SCENARIOS))
    run.add_argument("--n", type=int, help="matrix order (columns for svd scenarios)")
    run.add_argument("--m", type=int, help="rows (svd scenarios)")
    run.add_argument("--k", type=int, help="subspace dimension")
    run.add_argument("--keep", type=int, help="number of Ritz values reported (defaults to k)")
    run.add_argument("--iters", type=int, help="iterations of the subspace method")
    run.add_argument("--power-passes", type=int, choices=(1, 2), help="sketch power passes")
    run.add_argument("--kappa", type=float, help="condition number of the svd test matrix")
    run.add_argument("--method", choices=("subspace", "lobpcg"), help="eigensolver for eig_uniform/eig_cluster")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--gap-mode", choices=("exact", "approximate", "both"), default="both")
    run.add_argument("--paper-scale", action="store_true", help="start from the published sizes (slow)")
    run.add_argument("--out", default="-", help="CSV destination, '-' for standard output")
    run.add_argument("--meta", help="sidecar key=value metadata file (default: OUT.meta when OUT is a file)")

    bound = sub.add_parser("bound", help="print bounds for a structure file")
    bound.add_argument("--input", required=True, help="JSON structure file")
    bound.add_argument("--gap-mode", choices=("exact", "approximate"), help="default: exact when tail_spectrum is given")

    sub.add_parser("list-scenarios", help="list experiment scenarios")
    return parser


def _cmd_run(args, out):
    overrides = {
        k: getattr(args, k) for k in ("n", "m", "k", "keep", "iters", "power_passes", "kappa", "method")
    }
    try:
        cfg = ExperimentConfig.for_scenario(
            args.scenario, paper_scale=args.paper_scale, seed=args.seed, gap_mode=args.gap_mode, **overrides
        )
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    result = run_experiment(cfg)
    if args.out == "-":
        emit_csv(result.rows, result.columns, out)
    else:
        emit_csv(result.rows, result.columns, args.out)
        log.info("wrote %d rows to %s", len(result.rows), args.out)
    meta_path = args.meta or (None if args.out == "-" else args.out + ".meta")
    if meta_path:
        write_metadata(result.metadata, meta_path)
    return 0


def _cmd_bound(args, out):
    p = read_structure(args.input)
    out.write(bound_table(p, args.gap_mode))
    return 0


def _cmd_list(args, out):
    for name, desc in SCENARIOS.items():
        out.write(f"{name}\t{desc}\n")
    return 0


def parse_and_dispatch(argv=None, out=None, err=None):
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=err)
    handler = {"run": _cmd_run, "bound": _cmd_bound, "list-scenarios": _cmd_list}[args.command]
    try:
        return handler(args, out)
    except UsageError as exc:
        err.write(f"ritzbound {args.command}: error: {exc}\n")
        return 2
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        err.write(f"ritzbound {args.command}: {exc}\n")
        return 1


def main():
    sys.exit(parse_and_dispatch())
