"""``key = value`` simulation config files and the figure presets."""
from __future__ import annotations

import math
from pathlib import Path

from .friction import PhysParams
from .lindblad import SimConfig
from .weyl import Grid, Potential


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems) if not isinstance(problems, str) else [problems]
        super().__init__("; ".join(self.problems))


INT_KEYS = {"grid.n", "time.stride", "audit.eigen_every"}
FLOAT_KEYS = {
    "grid.x_min", "grid.x_max", "physics.hbar", "physics.mass", "physics.gamma",
    "physics.lambda", "potential.omega", "initial.x0", "initial.p0", "initial.sigma",
    "time.dt", "time.t_final",
}
OTHER_KEYS = {"potential.type", "potential.coeffs", "output.path"}
KNOWN_KEYS = INT_KEYS | FLOAT_KEYS | OTHER_KEYS
REQUIRED_KEYS = ("grid.n", "grid.x_min", "grid.x_max", "physics.gamma", "physics.lambda",
                 "initial.x0", "initial.p0", "time.dt", "time.t_final")
DEFAULTS = {
    "physics.hbar": 1.0, "physics.mass": 1.0, "potential.type": "free", "potential.omega": 1.0,
    "potential.coeffs": "", "initial.sigma": 1.0, "time.stride": 10, "audit.eigen_every": 100,
}


def _number(key, raw, problems, lineno):
    try:
        v = int(raw) if key in INT_KEYS else float(raw)
    except ValueError:
        problems.append(f"line {lineno}: {key} expects a number, got {raw!r}")
        return None
    if isinstance(v, float) and not math.isfinite(v):
        problems.append(f"line {lineno}: {key} must be finite")
        return None
    return v


def parse_config_text(text: str) -> dict:
    """Parse config text into a dict of typed values (defaults applied)."""
    values: dict = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        if key in INT_KEYS or key in FLOAT_KEYS:
            v = _number(key, raw, problems, lineno)
            if v is not None:
                values[key] = v
        elif key == "potential.coeffs":
            try:
                coeffs = tuple(float(c) for c in raw.split(",") if c.strip())
            except ValueError:
                problems.append(f"line {lineno}: potential.coeffs must be a comma list of numbers")
                continue
            if not all(math.isfinite(c) for c in coeffs):
                problems.append(f"line {lineno}: potential.coeffs must be finite")
                continue
            values[key] = coeffs
        else:
            values[key] = raw
    missing = [k for k in REQUIRED_KEYS if k not in values]
    if missing:
        problems.append("missing required keys: " + ", ".join(missing))
    if problems:
        raise ConfigError(problems)
    return {**DEFAULTS, **values}


def to_sim_config(values: dict) -> SimConfig:
    try:
        coeffs = values["potential.coeffs"]
        return SimConfig(
            grid=Grid(values["grid.n"], values["grid.x_min"], values["grid.x_max"]),
            params=PhysParams(hbar=values["physics.hbar"], m=values["physics.mass"],
                              gamma=values["physics.gamma"], lam=values["physics.lambda"]),
            potential=Potential(values["potential.type"], values["potential.omega"],
                                coeffs if isinstance(coeffs, tuple) else ()),
            x0=values["initial.x0"], p0=values["initial.p0"], sigma_x=values["initial.sigma"],
            dt=values["time.dt"], t_final=values["time.t_final"], stride=values["time.stride"],
            eigen_every=values["audit.eigen_every"],
        )
    except ValueError as err:
        raise ConfigError(str(err)) from None


def load_config(path) -> tuple:
    """Read a config file; returns (SimConfig, output path or None)."""
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    values = parse_config_text(text)
    return to_sim_config(values), values.get("output.path")


def dump_config(cfg: SimConfig, output: str | None = None) -> str:
    pot = cfg.potential
    lines = [
        f"grid.n = {cfg.grid.n}",
        f"grid.x_min = {cfg.grid.x_min!r}",
        f"grid.x_max = {cfg.grid.x_max!r}",
        f"physics.hbar = {cfg.params.hbar!r}",
        f"physics.mass = {cfg.params.m!r}",
        f"physics.gamma = {cfg.params.gamma!r}",
        f"physics.lambda = {cfg.params.lam!r}",
        f"potential.type = {pot.kind}",
        f"potential.omega = {pot.omega!r}",
    ]
    if pot.coeffs:
        lines.append("potential.coeffs = " + ", ".join(repr(float(c)) for c in pot.coeffs))
    lines += [
        f"initial.x0 = {cfg.x0!r}",
        f"initial.p0 = {cfg.p0!r}",
        f"initial.sigma = {cfg.sigma_x!r}",
        f"time.dt = {cfg.dt!r}",
        f"time.t_final = {cfg.t_final!r}",
        f"time.stride = {cfg.stride}",
        f"audit.eigen_every = {cfg.eigen_every}",
    ]
    if output:
        lines.append(f"output.path = {output}")
    return "\n".join(lines) + "\n"


def figure_preset(figure: int) -> SimConfig:
    """Free-particle runs of the two published figures.

    Packet width, grid and time step are not given with the figures; the
    values here are pinned defaults.
    """
    if figure not in (1, 2):
        raise ConfigError(f"no preset for figure {figure}")
    x0, p0 = (10.0, -3.0) if figure == 1 else (-10.0, 3.0)
    return SimConfig(grid=Grid(256, -30.0, 30.0),
                     params=PhysParams(hbar=1.0, m=1.0, gamma=1.0 / 12.0, lam=64.0),
                     x0=x0, p0=p0, sigma_x=1.0, dt=0.005, t_final=12.0, stride=10)


def steady_state_preset() -> SimConfig:
    """Long free-particle run at lam = 2 for the large-time momentum balance.

    The friction term makes the generator stiff (spectral radius about 1e3
    on this grid), so dt sits just inside the RK4 stability bound.
    """
    return SimConfig(grid=Grid(64, -16.0, 16.0),
                     params=PhysParams(hbar=1.0, m=1.0, gamma=0.25, lam=2.0),
                     x0=0.0, p0=1.0, sigma_x=1.0, dt=0.002, t_final=20.0, stride=50,
                     eigen_every=1000)
