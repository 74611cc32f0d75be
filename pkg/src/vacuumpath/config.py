"""Run configuration: a flat ``key = value`` file.

Lines starting with ``#`` or ``;`` are comments.  Lists are comma
separated.  Keys left unset (or set to ``auto``) are resolved from the
system defaults below, and the fully resolved configuration is what gets
echoed to ``meta.json``.

Keys
----
system              relativistic | coldatom
lambda, eta         potential couplings
dim                 spatial dimension (relativistic: 1, 2 or 3; coldatom: 2)
variant             symmetric | asymmetric | rdependent
sigma               wall width, or ``optimize``
sigma_min/max/tol   search interval and relative tolerance for ``optimize``
g0, rho_m, winding  condensate parameters
points_per_width    grid points per harmonic width of the initial state
depth               the R grid extends until U < -depth * U_max ...
edge_kdx            ... and an outgoing wave reaches k * dR >= edge_kdx
half_width          explicit grid half-width (overrides depth/edge_kdx)
gamma               fourth-derivative damping coefficient
dt, dt_target       time step, or ``auto`` for damping ``dt_target`` per step
t_final, output_interval, smoothing_window, plateau_fraction
temperature, n_max  thermal initial state (0 = ground state)
sweep_lambda, sweep_eta   sweep grid
quad_tol            quadrature tolerance of the reduction
seed                reserved; runs are deterministic
"""
from __future__ import annotations

import configparser
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace

from .model import Variant


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration: " + "; ".join(self.problems))


AUTO = None

# per-system defaults for keys left on auto
_SYSTEM_DEFAULTS = {
    "relativistic": {
        "lam": 1.0, "eta": 16.0, "sigma_min": 0.05, "sigma_max": 2.0, "gamma": 5e-8,
        "t_final": 40.0, "output_interval": 0.01, "smoothing_window": 0.5,
    },
    "coldatom": {
        "lam": 0.25, "eta": 0.8, "sigma_min": 1.0, "sigma_max": 6.0, "gamma": 5e-7,
        "t_final": 600.0, "output_interval": 0.05, "smoothing_window": 2.0,
    },
}


@dataclass
class RunConfig:
    system: str = "relativistic"
    lam: float | None = AUTO
    eta: float | None = AUTO
    dim: int = 2
    variant: str = "symmetric"
    sigma: float | str = "optimize"
    sigma_min: float | None = AUTO
    sigma_max: float | None = AUTO
    sigma_tol: float = 1e-3
    g0: float = 1.0
    rho_m: float = 1.0
    winding: int = 0
    points_per_width: float = 12.0
    depth: float = 20.0
    edge_kdx: float = 2.0
    half_width: float | None = AUTO
    gamma: float | None = AUTO
    dt: float | None = AUTO
    dt_target: float = 1.0
    t_final: float | None = AUTO
    output_interval: float | None = AUTO
    smoothing_window: float | None = AUTO
    plateau_fraction: float = 0.2
    temperature: float = 0.0
    n_max: int | None = AUTO
    sweep_lambda: list = field(default_factory=lambda: [1.0, 1.4, 1.8, 2.3])
    sweep_eta: list = field(default_factory=lambda: [7.0, 10.0, 13.0, 16.0])
    quad_tol: float = 1e-10
    seed: int = 0

    def resolved(self) -> RunConfig:
        """Copy with every ``auto`` key filled from the system defaults."""
        if self.system not in _SYSTEM_DEFAULTS:
            raise ValidationError([f"system: unknown system {self.system!r}"])
        out = replace(self, sweep_lambda=list(self.sweep_lambda), sweep_eta=list(self.sweep_eta))
        for k, v in _SYSTEM_DEFAULTS[self.system].items():
            if getattr(out, k) is None:
                setattr(out, k, v)
        return out

    def validate(self) -> RunConfig:
        cfg = self.resolved()
        bad = []
        positive = ["lam", "eta", "sigma_tol", "g0", "rho_m", "points_per_width", "depth", "edge_kdx",
                    "dt_target", "t_final", "output_interval", "smoothing_window", "quad_tol",
                    "sigma_min", "sigma_max"]
        for k in positive:
            v = getattr(cfg, k)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                bad.append(f"{_key_name(k)}: must be positive (got {v!r})")
        for k in ("half_width", "dt"):
            v = getattr(cfg, k)
            if v is not None and not v > 0:
                bad.append(f"{_key_name(k)}: must be positive or auto (got {v!r})")
        if not cfg.gamma >= 0:
            bad.append(f"gamma: must be non-negative (got {cfg.gamma!r})")
        elif cfg.gamma == 0 and cfg.dt is None:
            bad.append("dt: an automatic time step needs gamma > 0")
        if not cfg.temperature >= 0:
            bad.append(f"temperature: must be non-negative (got {cfg.temperature!r})")
        if not 0 < cfg.plateau_fraction <= 1:
            bad.append("plateau_fraction: must lie in (0, 1]")
        if cfg.sigma != "optimize" and not (isinstance(cfg.sigma, (int, float)) and cfg.sigma > 0):
            bad.append(f"sigma: must be positive or 'optimize' (got {cfg.sigma!r})")
        if not cfg.sigma_min < cfg.sigma_max:
            bad.append("sigma_min: must be below sigma_max")
        if cfg.n_max is not None and cfg.n_max < 0:
            bad.append("n_max: must be non-negative")
        if not cfg.sweep_lambda or not cfg.sweep_eta:
            bad.append("sweep ranges must be non-empty")
        if cfg.system == "relativistic":
            if cfg.dim not in (1, 2, 3):
                bad.append(f"dim: must be 1, 2 or 3 (got {cfg.dim})")
            try:
                Variant(cfg.variant)
            except ValueError:
                bad.append(f"variant: unknown variant {cfg.variant!r}")
        else:
            if cfg.dim != 2:
                bad.append("dim: the condensate reduction is two-dimensional")
            if cfg.winding < 0:
                bad.append("winding: must be non-negative")
            if cfg.lam > 0 and cfg.g0 > 0 and cfg.rho_m > 0:
                if not cfg.lam < 2 * cfg.g0 * cfg.rho_m:
                    bad.append("lambda: false vacuum needs lambda < 2 g0 rho_m")
                gap = cfg.g0 * cfg.rho_m - cfg.lam
                if gap <= 0 or not cfg.eta > cfg.g0 / (2 * gap):
                    bad.append("eta: false vacuum needs eta > g0 / (2 (g0 rho_m - lambda))")
                elif not 2 * cfg.lam < cfg.g0 * cfg.rho_m:
                    bad.append("lambda: false vacuum is unstable to relative density modes unless 2 lambda < g0 rho_m")
        if bad:
            raise ValidationError(bad)
        return cfg

    def to_dict(self) -> dict:
        return {_key_name(k): v for k, v in asdict(self).items()}

    def dumps(self) -> str:
        """Key-value text that parses back to this configuration."""
        lines = []
        for k, v in self.to_dict().items():
            lines.append(f"{k} = {_format_value(v)}")
        return "\n".join(lines) + "\n"


def _key_name(attr: str) -> str:
    return "lambda" if attr == "lam" else attr


def _attr_name(key: str) -> str:
    return "lam" if key == "lambda" else key


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"dim", "winding", "n_max", "seed"}
_STR_KEYS = {"system", "variant"}
_LIST_KEYS = {"sweep_lambda", "sweep_eta"}


def _format_value(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, list):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(key: str, raw: str):
    raw = raw.strip()
    attr = _attr_name(key)
    if raw.lower() == "auto":
        if _FIELDS[attr].default is not AUTO and attr != "sigma":
            raise ValueError("this key has no automatic value")
        return "optimize" if attr == "sigma" else None
    if attr in _STR_KEYS:
        return raw.lower()
    if attr in _LIST_KEYS:
        return [float(x) for x in raw.split(",") if x.strip()]
    if attr == "sigma" and raw.lower() == "optimize":
        return "optimize"
    if attr in _INT_KEYS:
        return int(raw)
    return float(raw)


def _apply(cfg: RunConfig, key: str, raw: str, where: str) -> None:
    key = key.strip().lower()
    if _attr_name(key) not in _FIELDS:
        raise ParseError(f"{where}: unknown key {key!r}")
    try:
        setattr(cfg, _attr_name(key), _convert(key, raw))
    except ValueError as exc:
        raise ParseError(f"{where}: bad value {raw.strip()!r} for {key!r}: {exc}") from exc


def parse_text(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), strict=True)
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text, source=source)
    except configparser.Error as exc:
        # shift reported line numbers back past the implicit section header
        msg = re.sub(r"\[line\s+(\d+)\]", lambda m: f"[line {int(m.group(1)) - 1}]", str(exc))
        raise ParseError(f"{source}: {msg}") from exc
    if cp.sections() != ["run"]:
        raise ParseError(f"{source}: sections are not supported (found {cp.sections()[1:]})")
    lines = text.splitlines()
    cfg = RunConfig()
    for key, raw in cp["run"].items():
        lineno = next((i + 1 for i, ln in enumerate(lines) if ln.split("=")[0].strip() == key), "?")
        _apply(cfg, key, raw, f"{source}:{lineno}")
    return cfg


def parse_config(path) -> RunConfig:
    """Read a key-value file, or the ``config`` block of a previous ``meta.json``."""
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith(".json"):
        try:
            data = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError) as exc:
            raise ParseError(f"{path}: not a run metadata file ({exc})") from exc
        cfg = RunConfig()
        for k, v in data.items():
            _apply(cfg, k, _format_value(v), f"{path}:config.{k}")
        return cfg
    return parse_text(text, str(path))


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    cfg = replace(cfg, sweep_lambda=list(cfg.sweep_lambda), sweep_eta=list(cfg.sweep_eta))
    for item in overrides or ():
        if "=" not in item:
            raise ParseError(f"--override {item!r}: expected key=value")
        k, v = item.split("=", 1)
        _apply(cfg, k, v, f"--override {item!r}")
    return cfg
