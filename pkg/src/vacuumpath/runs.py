"""Run orchestration: single runs, thermal ensembles, sweeps and condensate runs.

Every stage writes its artifact as soon as it is available and records
itself in ``meta.json``; a failing stage leaves ``status = "partial"`` and
the error message there before the exception propagates.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from ._jit import numba_enabled
from .coldatom import (CondensateModel, condensate_half_width, condensate_harmonic, condensate_reduced_system,
                       expansion_parameter, field_level_bounce)
from .config import RunConfig
from .evolver import DecayTrace, EvolverConfig, thermal_trace, tuned_dt
from .instanton import (comparison_statistic, euclidean_action_field, optimize_sigma, solve_bounce_field,
                        solve_bounce_reduced)
from .model import AnsatzFamily, ScalarPotential
from .reduction import Grid, ReducedSystem, compute_K, compute_U, default_half_width, second_derivative_at_zero, tabulate
from .search import golden_section

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["lambda", "eta", "sigma_opt", "S_E", "S_E_reduced", "U_max", "gamma_plateau", "statistic", "error"]


def default_jobs() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


# ---------------------------------------------------------------- metadata

def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


class RunRecord:
    """Accumulates results and keeps ``meta.json`` in ``out`` up to date."""

    def __init__(self, cfg: RunConfig, out=None, command: str = "run"):
        self.out = Path(out) if out is not None else None
        self.meta = {
            "command": command,
            "status": "running",
            "config": cfg.to_dict(),
            "results": {},
            "stages": [],
            "environment": {
                "vacuumpath": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
                "numba": numba_enabled(),
            },
        }
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)
            self.flush()

    @property
    def results(self) -> dict:
        return self.meta["results"]

    def stage(self, name: str, **values) -> None:
        self.meta["stages"].append(name)
        self.results.update(values)
        self.flush()

    def fail(self, exc: BaseException) -> None:
        self.meta["status"] = "partial"
        self.meta["error"] = f"{type(exc).__name__}: {exc}"
        self.flush()

    def done(self) -> None:
        self.meta["status"] = "complete"
        self.flush()

    def path(self, name: str):
        return None if self.out is None else self.out / name

    def flush(self) -> None:
        if self.out is None:
            return
        with open(self.out / "meta.json", "w", newline="\n") as fh:
            json.dump(self.meta, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")


# ---------------------------------------------------------------- stages

def relativistic_family(cfg: RunConfig, sigma: float | None = None) -> AnsatzFamily:
    p = ScalarPotential(cfg.eta, cfg.lam)
    if sigma is None:
        sigma = cfg.sigma if cfg.sigma != "optimize" else 0.5 * (cfg.sigma_min + cfg.sigma_max)
    return AnsatzFamily(p, float(sigma), cfg.dim, cfg.variant)


def condensate_model(cfg: RunConfig, sigma: float | None = None) -> CondensateModel:
    if sigma is None:
        sigma = cfg.sigma if cfg.sigma != "optimize" else 0.5 * (cfg.sigma_min + cfg.sigma_max)
    return CondensateModel(cfg.g0, cfg.lam, cfg.eta, cfg.rho_m, cfg.winding, float(sigma))


def _condensate_action(cfg: RunConfig, sigma: float, jobs: int = 1) -> float:
    m = condensate_model(cfg, sigma)
    rs = condensate_reduced_system(m, Grid(-6 * sigma, 6 * sigma, 121), cfg.quad_tol, jobs=jobs)
    return solve_bounce_reduced(rs, cfg.quad_tol).S_E_reduced


def choose_sigma(cfg: RunConfig, jobs: int = 1):
    """``(sigma, S_reduced_at_search)``; the action is None for a fixed sigma."""
    if cfg.sigma != "optimize":
        return float(cfg.sigma), None
    lo, hi = cfg.sigma_min, cfg.sigma_max
    if cfg.system == "relativistic":
        return optimize_sigma(relativistic_family(cfg, lo), (lo, hi), tol=cfg.sigma_tol, quad_tol=cfg.quad_tol)
    s, val = golden_section(lambda x: _condensate_action(cfg, x, jobs), lo, hi, xtol=cfg.sigma_tol * (hi - lo))
    return s, val


def harmonic_data(cfg: RunConfig, sigma: float):
    """``(K(0), U''(0))`` at the false vacuum for the chosen wall width."""
    if cfg.system == "relativistic":
        a = relativistic_family(cfg, sigma)
        K0 = compute_K(a, 0.0, cfg.quad_tol)
        Upp0 = second_derivative_at_zero(lambda x: compute_U(a, x, cfg.quad_tol), 0.05 * sigma)
        return K0, Upp0
    return condensate_harmonic(condensate_model(cfg, sigma), tol=cfg.quad_tol)


def build_reduced(cfg: RunConfig, sigma: float, jobs: int = 1) -> ReducedSystem:
    """Tabulate K and U on the evolution grid.

    The spacing resolves the harmonic width ``(K0 U''0)^(-1/4)`` of the
    initial state with ``points_per_width`` nodes.
    """
    K0, Upp0 = harmonic_data(cfg, sigma)
    dx = (K0 * Upp0) ** -0.25 / cfg.points_per_width
    if cfg.system == "relativistic":
        a = relativistic_family(cfg, sigma)
        L = cfg.half_width or default_half_width(a, cfg.depth, cfg.quad_tol, dx=dx, kdx=cfg.edge_kdx)
        grid = Grid.symmetric(L, dx)
        if cfg.variant == "asymmetric":
            # the far side only has to hold the initial state
            grid = Grid(-10 * math.ceil(L / (10 * dx)) * dx, grid.hi, grid.n)
        return tabulate(a, grid, cfg.quad_tol)
    m = condensate_model(cfg, sigma)
    L = cfg.half_width or condensate_half_width(m, cfg.depth, dx=dx, kdx=cfg.edge_kdx, tol=cfg.quad_tol)
    return condensate_reduced_system(m, Grid.symmetric(L, dx), cfg.quad_tol, jobs=jobs)


def evolver_config(cfg: RunConfig, dx: float) -> EvolverConfig:
    """Time step tuned to the damping target and rounded to divide the output interval."""
    dt = cfg.dt
    if dt is None:
        dt = cfg.output_interval / math.ceil(cfg.output_interval / tuned_dt(cfg.gamma, dx, cfg.dt_target))
    return EvolverConfig(dt=dt, gamma=cfg.gamma, t_final=cfg.t_final, smoothing_window=cfg.smoothing_window,
                         output_interval=cfg.output_interval)


def field_bounce(cfg: RunConfig, sigma: float | None = None):
    """``(S_E, profile)`` of the field-level bounce, or ``(None, None)`` where none is defined."""
    if cfg.system == "relativistic":
        p = ScalarPotential(cfg.eta, cfg.lam)
        b = solve_bounce_field(p, cfg.dim)
        return euclidean_action_field(b, p, cfg.dim), b
    if cfg.winding:
        return None, None
    return field_level_bounce(condensate_model(cfg, sigma))


def evolve_reduced(cfg: RunConfig, rs: ReducedSystem) -> DecayTrace:
    ecfg = evolver_config(cfg, rs.grid.dx)
    return thermal_trace(rs, ecfg, cfg.temperature, cfg.n_max)


def reduced_meta(rs: ReducedSystem) -> dict:
    return {"K0": rs.K0, "Upp0": rs.Upp0, "R_Umax": rs.R_Umax, "U_max": rs.U_max, "dim": rs.dim,
            "interior": rs.interior, "provenance": rs.provenance}


def load_reduced(path) -> ReducedSystem:
    """Read ``reduced.csv``, taking harmonic and barrier data from a sibling ``meta.json``."""
    path = Path(path)
    if path.is_dir():
        path = path / "reduced.csv"
    extra = {}
    meta_path = path.with_name("meta.json")
    if meta_path.exists():
        with open(meta_path) as fh:
            red = json.load(fh).get("results", {}).get("reduced")
        if red:
            extra = dict(red)
    return ReducedSystem.from_csv(path, **extra)


# ---------------------------------------------------------------- runs

def run_reduce(cfg: RunConfig, out=None, jobs: int = 1, record: RunRecord | None = None) -> ReducedSystem:
    rec = record or RunRecord(cfg, out, "reduce")
    try:
        t0 = time.perf_counter()
        sigma, s_search = choose_sigma(cfg, jobs)
        rec.stage("sigma", sigma_opt=sigma, S_E_reduced_search=s_search, sigma_wall_s=time.perf_counter() - t0)
        t0 = time.perf_counter()
        rs = build_reduced(cfg, sigma, jobs)
        if rec.out is not None:
            rs.to_csv(rec.path("reduced.csv"))
        rec.stage("reduce", reduced=reduced_meta(rs), harmonic_width=rs.harmonic_width, omega=rs.omega,
                  grid_points=int(rs.R.size), reduce_wall_s=time.perf_counter() - t0)
    except Exception as exc:
        rec.fail(exc)
        raise
    if record is None:
        rec.done()
    return rs


def run_instanton(cfg: RunConfig, rs: ReducedSystem | None = None, out=None,
                  record: RunRecord | None = None) -> dict:
    """Field-level bounce (written to bounce.csv) and, given ``rs``, the reduced action."""
    rec = record or RunRecord(cfg, out, "instanton")
    try:
        sigma = rs.provenance.get("sigma") if rs is not None else None
        S_field, b = field_bounce(cfg, sigma)
        if b is not None and rec.out is not None:
            b.to_csv(rec.path("bounce.csv"))
        vals = {"S_E_field": S_field}
        if rs is not None:
            red = solve_bounce_reduced(rs, cfg.quad_tol)
            vals.update(S_E_reduced=red.S_E_reduced, turning_point=red.turning_point)
            if S_field is not None:
                vals["reduced_to_field"] = red.S_E_reduced / S_field
        vals["S_E"] = S_field if S_field is not None else vals.get("S_E_reduced")
        rec.stage("instanton", **vals)
    except Exception as exc:
        rec.fail(exc)
        raise
    if record is None:
        rec.done()
    return vals


def run_evolve(cfg: RunConfig, rs: ReducedSystem, out=None, record: RunRecord | None = None) -> DecayTrace:
    rec = record or RunRecord(cfg, out, "evolve")
    try:
        tr = evolve_reduced(cfg, rs)
        if rec.out is not None:
            tr.to_csv(rec.path("trace.csv"))
        G, reached = tr.plateau(cfg.plateau_fraction)
        vals = {"gamma_plateau": G, "plateau_reached": reached, "evolver": tr.metadata.get("evolver"),
                "evolve_wall_s": tr.metadata.get("wall_clock_s"), "temperature": cfg.temperature}
        if "members" in tr.metadata:
            vals["thermal_members"] = tr.metadata["members"]
        S = rec.results.get("S_E")
        if S is not None and G > 0:
            vals["statistic"] = comparison_statistic(G, rs, S)
        rec.stage("evolve", **vals)
    except Exception as exc:
        rec.fail(exc)
        raise
    if record is None:
        rec.done()
    return tr


def run_single(cfg: RunConfig, out=None, jobs: int = 1, command: str = "run") -> dict:
    """reduce -> (sigma optimisation) -> instanton -> evolve, writing every artifact to ``out``.

    Returns the ``results`` block of the metadata.
    """
    cfg = cfg.validate()
    rec = RunRecord(cfg, out, command)
    rs = run_reduce(cfg, jobs=jobs, record=rec)
    run_instanton(cfg, rs, record=rec)
    if cfg.system == "coldatom":
        try:
            m = condensate_model(cfg, rs.provenance["sigma"])
            rec.stage("expansion", expansion_parameter=expansion_parameter(m, rs, tol=cfg.quad_tol))
        except Exception as exc:
            rec.fail(exc)
            raise
    tr = run_evolve(cfg, rs, record=rec)
    rec.done()
    res = dict(rec.results)
    res["trace"] = tr
    return res


def _sweep_point(cfg: RunConfig) -> dict:
    row = {"lambda": cfg.lam, "eta": cfg.eta, "error": ""}
    try:
        res = run_single(cfg)
        row.update(sigma_opt=res["sigma_opt"], S_E=res["S_E"], S_E_reduced=res.get("S_E_reduced"),
                   U_max=res["reduced"]["U_max"], gamma_plateau=res["gamma_plateau"],
                   statistic=res.get("statistic", math.nan))
        if not res["plateau_reached"]:
            row["error"] = "plateau not reached"
    except Exception as exc:  # a failing point becomes an error row
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row


def sweep_configs(cfg: RunConfig):
    return [replace(cfg, lam=float(lam), eta=float(eta)) for lam in cfg.sweep_lambda for eta in cfg.sweep_eta]


def _format_cell(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return "nan"
    return f"{float(v):.16e}"


def run_sweep(cfg: RunConfig, out=None, jobs: int = 1) -> list:
    """Run every (lambda, eta) pair; rows are appended to sweep.csv in grid order."""
    cfg = cfg.validate()
    rec = RunRecord(cfg, out, "sweep")
    points = sweep_configs(cfg)
    problems = []
    for p in points:
        try:
            p.validate()
        except ValueError as exc:
            problems.append(str(exc))
    rows = []
    fh = None
    if rec.out is not None:
        fh = open(rec.path("sweep.csv"), "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
    try:
        if jobs > 1 and len(points) > 1:
            ex = ProcessPoolExecutor(min(jobs, len(points)))
            results = ex.map(_sweep_point, points)
        else:
            ex = None
            results = map(_sweep_point, points)
        for row in results:
            rows.append(row)
            if fh is not None:
                writer.writerow([_format_cell(row.get(c)) for c in SWEEP_COLUMNS])
                fh.flush()
        if ex is not None:
            ex.shutdown()
    except Exception as exc:
        rec.fail(exc)
        raise
    finally:
        if fh is not None:
            fh.close()
    n_err = sum(1 for r in rows if r["error"])
    rec.stage("sweep", points=len(rows), error_rows=n_err, invalid_points=problems)
    rec.done()
    return rows


def read_sweep(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in SWEEP_COLUMNS[:-1]:
            r[k] = float(r[k])
    return rows
