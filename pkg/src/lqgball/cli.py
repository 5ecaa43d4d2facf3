"""Command-line entry point ``lqgball``.

Exit codes: 0 success, 1 cross-check mismatch, 2 invalid input,
3 every ball truncated by the grid frame.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys

import numpy as np

from . import crosscheck, formulas, gff, harness, io
from .metric import build_weights, metric_ball, shortest_distances

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_TRUNCATED = 3


def _print_table(rows: list[dict], fmt: str, out=None) -> None:
    out = sys.stdout if out is None else out
    if fmt == "json":
        json.dump(rows, out, indent=1)
        out.write("\n")
        return
    keys = list(rows[0]) if rows else []
    for r in rows[1:]:
        keys += [k for k in r if k not in keys]
    wr = csv.DictWriter(out, fieldnames=keys, restval="", lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)


def cmd_formulas(args) -> int:
    model = formulas.DGammaModel.parse(args.d_model)
    gammas = args.gamma
    if gammas is None:
        gammas = [formulas.SQRT_8_3] if model.kind == "exact" else list(np.linspace(0.1, 1.9, 19))
    rows = []
    for g in gammas:
        p = formulas.make_params(g, model)
        alphas = None
        if args.alpha_grid:
            win = formulas.alpha_window(p)
            alphas = np.linspace(win.lo, win.hi, args.alpha_grid)
        rows += formulas.formula_table(p, alphas)
    _print_table(rows, args.format)
    return EXIT_OK


def _normalization(text: str) -> gff.Normalization:
    if text == "raw":
        return gff.RAW
    if text.startswith("pinned:"):
        return gff.Normalization.pinned(float(text.split(":", 1)[1]))
    raise ValueError(f"normalization must be 'raw' or 'pinned:<radius>', got {text!r}")


def cmd_sample(args) -> int:
    f = gff.sample_field(args.n, args.seed, _normalization(args.normalization), calibration=args.calibration)
    path = io.save_field(f, args.out)
    print(json.dumps({"out": str(path), "n": f.n, "seed": f.seed, "calibration": f.calibration,
                      "min": float(f.values.min()), "max": float(f.values.max())}))
    return EXIT_OK


def cmd_ball(args) -> int:
    f = io.load_field(args.field)
    p = formulas.make_params(args.gamma, formulas.DGammaModel.parse(args.d_model))
    w = build_weights(f, p, topology=args.topology, edge_rule=args.edge_rule)
    d = shortest_distances(w, [f.origin_cell()])
    ball = metric_ball(d, args.s)
    prefix = args.out_prefix
    io.write_pbm(ball.mask, f"{prefix}.pbm")
    io.write_rle_json(ball.mask, f"{prefix}.rle.json", s=ball.radius_s)
    io.write_boundary_csv(ball.boundary, d.dist, f"{prefix}_boundary.csv")
    print(json.dumps({"s": ball.radius_s, "cells": int(ball.mask.sum()),
                      "boundary_cells": int(ball.boundary.shape[0]), "touches_frame": ball.touches_frame}))
    if ball.touches_frame:
        print("warning: ball touches the grid frame (truncated)", file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    failed = 0
    for c in crosscheck.run_all():
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
        failed += not c.passed
    return EXIT_MISMATCH if failed else EXIT_OK


def cmd_calibrate(args) -> int:
    factor = gff.calibrate(args.n, args.replicates, args.seed)
    print(json.dumps({"n": args.n, "replicates": args.replicates, "seed": args.seed,
                      "calibration": factor, "default": gff.DEFAULT_CALIBRATION}))
    return EXIT_OK


def _fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"


def cmd_run(args) -> int:
    cfg = harness.ExperimentConfig.load(args.config)
    res = harness.run_experiment(cfg, workers=args.workers, use_cache=not args.no_cache,
                                 zero_field=args.zero_field)
    formats = [s for s in args.formats.split(",") if s]
    if args.emit_plot_data and "plot" not in formats:
        formats.append("plot")
    paths = harness.emit(res, formats)
    agg = res.aggregates
    print(f"config {res.config_hash:016x}: {agg['valid']}/{agg['replicates']} replicates valid")
    for row in harness.comparison_rows(res):
        print(f"  {row['quantity']:<24} {_fmt(row['estimate'])} +/- {_fmt(row['stderr'])}"
              f"   predicted {_fmt(row['predicted'])}")
    print(f"note: {harness.CAVEAT}")
    for pth in paths:
        print(f"wrote {pth}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lqgball", description="LQG metric-ball boundary experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run an ensemble experiment from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--no-cache", action="store_true")
    sp.add_argument("--formats", default="json,csv,spectrum",
                    help="comma-separated subset of " + ",".join(harness.FORMATS))
    sp.add_argument("--emit-plot-data", action="store_true",
                    help="also write two-column plot files (same as adding 'plot' to --formats)")
    sp.add_argument("--zero-field", action="store_true", help="debug: replace every field by h = 0")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("formulas", help="print the dimension formulas")
    sp.add_argument("--gamma", type=float, nargs="+")
    sp.add_argument("--d-model", default="exact", help="exact | watabiki | quad | user:<value>")
    sp.add_argument("--alpha-grid", type=int, default=0, help="number of alpha values across the window")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_formulas)

    sp = sub.add_parser("sample", help="sample a field and save it")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True, help="output path; a .json.gz suffix selects compressed JSON")
    sp.add_argument("--normalization", default="raw", help="raw | pinned:<radius>")
    sp.add_argument("--calibration", type=float, default=gff.DEFAULT_CALIBRATION)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("ball", help="metric ball around the centre cell of a saved field")
    sp.add_argument("--field", required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--d-model", default="exact")
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--out-prefix", required=True)
    sp.add_argument("--topology", choices=("eight", "four"), default="eight")
    sp.add_argument("--edge-rule", choices=("arith", "geo"), default="arith")
    sp.set_defaults(func=cmd_ball)

    sp = sub.add_parser("oracle-check", help="cross-check fast paths against brute-force oracles")
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("calibrate", help="measure the circle-average calibration factor")
    sp.add_argument("--n", type=int, default=512)
    sp.add_argument("--replicates", type=int, default=400)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_calibrate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except harness.AllTruncatedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_TRUNCATED
    except (ValueError, OverflowError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
