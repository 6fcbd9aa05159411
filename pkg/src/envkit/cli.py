"""``envkit`` command line.

Exit codes: 0 success, 1 usage / validation / I/O error, 2 verification
refuted (verdict ``passed = false``). Errors go to stderr prefixed with
``envkit:error:``. Every output file is written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import baire, catalog, envelopes, verify
from .errors import EnvkitError, SchemaError
from .model import (
    AxisGrid,
    MetricSpec,
    ProductGrid,
    atomic_write_text,
    dump_json,
    load,
    parse_grid_spec,
    save,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REFUTED = 2
ERROR_PREFIX = "envkit:error:"

VERIFY_MODES = ("lsc-first", "usc-second", "usc-first", "lsc-second", "joint-lsc-envelope")


class UsageError(EnvkitError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="envkit", description="Semicontinuous envelopes on sampled product-space functions.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("catalog", help="sample a catalog function onto a grid")
    c.add_argument("--name", required=True, help="catalog id, optionally with inline params: constant(c=3)")
    c.add_argument("--grid", required=True, help="x=lin(a,b,n);y=lin(a,b,n) or a JSON file with x_axes/y_axes")
    c.add_argument("--metric", default="linf,linf", help="<linf|l2>,<linf|l2>")
    c.add_argument("--out", required=True)
    for name in ("c", "a", "b", "omega", "scale", "h"):
        c.add_argument(f"--{name}", type=_finite, default=None, help=f"catalog parameter {name}")

    e = sub.add_parser("envelope", help="ball sup/inf envelope in one variable")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--alpha", type=_positive, required=True)
    e.add_argument("--bound", choices=("sup", "inf"), required=True)
    e.add_argument("--var", choices=("first", "second"), required=True)
    e.add_argument("--kernel", choices=("auto", "naive", "separable"), default="auto")
    e.add_argument("--out", required=True)

    s = sub.add_parser("sequence", help="monotone envelope sequence with insertions")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--n", type=_count, required=True)
    s.add_argument("--rho", type=_positive, default=None, help="radius scale (default: half the largest extent)")
    s.add_argument("--kernel", choices=("auto", "naive", "separable"), default="auto")
    s.add_argument("--outdir", required=True)

    i = sub.add_parser("insert", help="continuous insertion between two envelopes")
    i.add_argument("--lower", required=True)
    i.add_argument("--upper", required=True)
    i.add_argument("--out", required=True)

    t = sub.add_parser("truncate", help="clamp to [-level, level]")
    t.add_argument("--in", dest="inp", required=True)
    t.add_argument("--level", type=_positive, required=True)
    t.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="semicontinuity certificate")
    v.add_argument("--in", dest="inp", required=True)
    v.add_argument("--mode", choices=VERIFY_MODES, required=True)
    v.add_argument("--alpha", type=_positive, default=None, help="envelope radius (joint-lsc-envelope)")
    v.add_argument("--tol", type=_positive, required=True)
    v.add_argument("--out", required=True, help="verdict JSON")
    v.add_argument("--profile", default=None, help="profile CSV (default: <out stem>.profile.csv)")
    v.add_argument("--rho", type=_positive, default=None)
    v.add_argument("--levels", type=_count, default=verify.DEFAULT_LEVELS)
    v.add_argument("--max-nodes", type=_count, default=verify.DEFAULT_MAX_NODES)

    r = sub.add_parser("report", help="convergence CSV from a sequence directory")
    r.add_argument("--manifest", required=True, help="sequence directory or its manifest.json")
    r.add_argument("--tol", type=_positive, required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--nodes", default=None, help="per-node gap CSV (default: <out stem>.nodes.csv)")
    return p


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def emit_report(results, path) -> None:
    """Write a ConvergenceReport or DeficiencyProfile as CSV (one row per n / radius)."""
    if isinstance(results, baire.ConvergenceReport):
        gaps = [s.max_gap for s in results.per_n]
        if any(b > a for a, b in zip(gaps, gaps[1:])):
            raise EnvkitError("max_gap column is not nonincreasing; sequence is corrupt")
        rows = [(s.n, s.max_gap, s.mean_gap, s.insertion_lipschitz) for s in results.per_n]
        text = _csv_text(("n", "max_gap", "mean_gap", "insertion_lipschitz"), rows)
    elif isinstance(results, verify.DeficiencyProfile):
        rows = zip(results.radii.tolist(), results.lsc_deficiency.tolist(), results.usc_deficiency.tolist())
        text = _csv_text(("radius", "lsc_deficiency", "usc_deficiency"), rows)
    else:
        raise TypeError(f"cannot emit {type(results).__name__}")
    atomic_write_text(path, text)


def emit_node_gaps(report: baire.ConvergenceReport, grid: ProductGrid, path) -> None:
    header = [f"ix{k}" for k in range(grid.dx)] + [f"iy{k}" for k in range(grid.dy)] + ["gap", "converged"]
    rows = (
        list(idx) + [float(report.per_node_gap[idx]), int(report.converged[idx])]
        for idx in np.ndindex(*report.per_node_gap.shape)
    )
    atomic_write_text(path, _csv_text(header, rows))


def _sibling(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _grid_arg(text: str) -> ProductGrid:
    if os.path.isfile(text):
        try:
            doc = json.loads(Path(text).read_text(encoding="utf-8"))
            return ProductGrid(tuple(AxisGrid(a) for a in doc["x_axes"]), tuple(AxisGrid(a) for a in doc["y_axes"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise SchemaError(f"{text}: not a grid file ({exc})") from None
    return parse_grid_spec(text)


def _cmd_catalog(args) -> int:
    grid = _grid_arg(args.grid)
    params = {k: getattr(args, k) for k in ("c", "a", "b", "omega", "scale", "h") if getattr(args, k) is not None}
    f = catalog.from_catalog(args.name, grid, MetricSpec.parse(args.metric), **params)
    save(f, args.out)
    return EXIT_OK


def _cmd_envelope(args) -> int:
    f = load(args.inp)
    res = envelopes.ball_envelope(f, args.alpha, args.var, args.bound, args.kernel)
    envelopes.save_envelope(res, args.out)
    return EXIT_OK


def _cmd_sequence(args) -> int:
    f = load(args.inp)
    seq = baire.envelope_sequence(f, args.n, args.rho, args.kernel)
    baire.save_sequence(seq, args.outdir)
    return EXIT_OK


def _cmd_insert(args) -> int:
    g = baire.hahn_insert(load(args.lower), load(args.upper))
    save(g, args.out)
    return EXIT_OK


def _cmd_truncate(args) -> int:
    save(baire.truncate(load(args.inp), args.level), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    f = load(args.inp)
    radii = verify.default_radii(f.grid, args.rho, args.levels)
    opts = {"max_nodes": args.max_nodes}
    if args.mode != "joint-lsc-envelope":
        kind, var = args.mode.split("-")
        profile, verdict = verify.check_separate(f, var, kind, radii, args.tol, **opts)
    else:
        if args.alpha is None:
            raise UsageError("--alpha is required for --mode joint-lsc-envelope")
        profile, verdict = verify.verify_envelope_joint_lsc(f, args.alpha, radii, args.tol, **opts)
    doc = dict(verdict.to_json(), mode=args.mode, resampled=profile.resampled,
               refine_factor=profile.refine_factor)
    atomic_write_text(args.out, dump_json(doc))
    emit_report(profile, args.profile or _sibling(args.out, ".profile.csv"))
    if not verdict.passed:
        w = verdict.witness
        print(f"envkit:refuted: {args.mode} deficiency {verdict.trend!r} > tol {verdict.tol!r}"
              f" at node {list(w.node) if w else None}", file=sys.stderr)
        return EXIT_REFUTED
    return EXIT_OK


def _cmd_report(args) -> int:
    seq = baire.load_sequence(args.manifest)
    report = baire.convergence_report(seq, args.tol)
    emit_report(report, args.out)
    emit_node_gaps(report, seq.base.grid, args.nodes or _sibling(args.out, ".nodes.csv"))
    return EXIT_OK


_COMMANDS = {
    "catalog": _cmd_catalog,
    "envelope": _cmd_envelope,
    "sequence": _cmd_sequence,
    "insert": _cmd_insert,
    "truncate": _cmd_truncate,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except (EnvkitError, OSError) as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:  # pragma: no cover
    sys.exit(run())
