"""Command line entry point.

    vacuumpath evolve --config run.cfg --out results/ref
    vacuumpath sweep --override dim=3 --jobs 4 --out results/d3
    vacuumpath coldatom --override winding=1 --out results/vortex
    vacuumpath reduce --out results/a && vacuumpath evolve --reduced results/a --out results/a

``reduce``, ``instanton`` and ``evolve`` can run as separate stages: pass
``--reduced`` (a reduced.csv or the directory holding it) to reuse an
earlier tabulation.  Without it, ``evolve`` runs the whole pipeline.
Exit status is 2 for configuration errors and 1 for failed runs.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .config import ParseError, RunConfig, ValidationError, apply_overrides, parse_config
from .runs import (RunRecord, default_jobs, load_reduced, run_evolve, run_instanton, run_reduce, run_single,
                   run_sweep)


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value file, or a previous meta.json")
    common.add_argument("--jobs", type=int, default=default_jobs(), help="worker processes (default: all cores)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="vacuumpath", description="Real-time vacuum decay along a family of bubble profiles.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("reduce", parents=[common], help="optimise sigma and tabulate K(R), U(R)")
    p = sub.add_parser("instanton", parents=[common], help="field-level bounce and reduced action")
    p.add_argument("--reduced", type=Path, help="reduced.csv (or its directory) for the reduced action")
    p = sub.add_parser("evolve", parents=[common], help="real-time decay (full pipeline without --reduced)")
    p.add_argument("--reduced", type=Path, help="evolve an existing reduced.csv (or its directory)")
    sub.add_parser("sweep", parents=[common], help="(lambda, eta) grid, one row per point in sweep.csv")
    sub.add_parser("coldatom", parents=[common], help="full pipeline for the two-component condensate")
    return ap


def load_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else RunConfig()
    cfg = apply_overrides(cfg, args.override)
    if args.command == "coldatom" and cfg.system != "coldatom":
        cfg = replace(cfg, system="coldatom")
    return cfg.validate()


def _summary(results: dict) -> dict:
    keys = ("sigma_opt", "S_E", "S_E_field", "S_E_reduced", "gamma_plateau", "plateau_reached", "statistic",
            "points", "error_rows")
    out = {k: results[k] for k in keys if k in results}
    if "reduced" in results:
        out["U_max"] = results["reduced"]["U_max"]
    return out


def _previous_results(path: Path) -> dict:
    meta = (path if path.is_dir() else path.parent) / "meta.json"
    if meta.exists():
        with open(meta) as fh:
            return json.load(fh).get("results", {})
    return {}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except (ParseError, ValidationError) as exc:
        print(f"vacuumpath: {exc}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("vacuumpath: --jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        if args.command == "sweep":
            rows = run_sweep(cfg, args.out, args.jobs)
            results = {"points": len(rows), "error_rows": sum(1 for r in rows if r["error"])}
        elif args.command in ("coldatom",) or (args.command == "evolve" and args.reduced is None):
            results = run_single(cfg, args.out, args.jobs, args.command)
        elif args.command == "reduce":
            run_reduce(cfg, args.out, args.jobs)
            results = _previous_results(args.out)
        else:
            rs = load_reduced(args.reduced) if args.reduced is not None else None
            prev = _previous_results(args.reduced) if rs is not None else {}
            rec = RunRecord(cfg, args.out, args.command)
            if rs is not None:
                rec.results.update({k: prev[k] for k in ("sigma_opt", "S_E", "S_E_field", "S_E_reduced")
                                    if k in prev})
                rec.stage("load", reduced_source=str(args.reduced), reduced={
                    "K0": rs.K0, "Upp0": rs.Upp0, "R_Umax": rs.R_Umax, "U_max": rs.U_max, "dim": rs.dim,
                    "interior": rs.interior, "provenance": rs.provenance})
                if rec.out is not None and args.reduced.resolve() != (rec.out / "reduced.csv").resolve() \
                        and args.reduced.resolve() != rec.out.resolve():
                    rs.to_csv(rec.path("reduced.csv"))
            if args.command == "instanton":
                run_instanton(cfg, rs, record=rec)
            else:
                run_evolve(cfg, rs, record=rec)
            rec.done()
            results = rec.results
    except Exception as exc:
        logging.getLogger("vacuumpath").debug("run failed", exc_info=True)
        print(f"vacuumpath: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    summary = _summary(results)
    print(json.dumps({k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                      for k, v in summary.items()}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
