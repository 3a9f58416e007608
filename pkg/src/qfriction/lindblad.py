"""Density-matrix propagation of the friction Lindbladian and Ehrenfest checks."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .friction import PhysParams
from .weyl import (
    Grid, Potential, expectation, friction_operator, hamiltonian, hermiticity_error,
    observable_suite,
)

log = logging.getLogger(__name__)

RK4_STABILITY = 2.78  # real-axis extent of the classical RK4 stability region

COLUMNS = ("t", "x_mean", "p_mean", "x2_mean", "xpsym_mean", "p2_mean", "alpha_mean",
           "beta_mean", "delta_mean", "absp_mean", "uprime_mean", "xuprime_mean",
           "puprime_sym_mean", "trace", "purity", "uncert_prod", "min_eig")
OBSERVABLES = ("x", "p", "x2", "xpsym", "p2", "alpha", "beta", "delta", "absp", "uprime",
               "xuprime", "puprime_sym")


class InvariantBreach(RuntimeError):
    pass


class NotConverged(RuntimeError):
    pass


@dataclass
class DensityState:
    rho: np.ndarray
    t: float = 0.0

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    @property
    def purity(self) -> float:
        return float(np.vdot(self.rho.conj().T, self.rho).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))[0])


@dataclass
class SimConfig:
    grid: Grid = field(default_factory=lambda: Grid(256, -30.0, 30.0))
    params: PhysParams = field(default_factory=PhysParams)
    potential: Potential = field(default_factory=Potential)
    x0: float = 10.0
    p0: float = -3.0
    sigma_x: float = 1.0
    dt: float = 0.005
    t_final: float = 12.0
    stride: int = 10
    eigen_every: int = 100
    trace_tol: float = 1e-6
    negativity_tol: float = -1e-5

    def __post_init__(self):
        if not (self.dt > 0 and self.t_final > 0):
            raise ValueError("dt and t_final must be positive")
        if self.stride < 1:
            raise ValueError("record stride must be at least 1")
        if self.sigma_x <= 0:
            raise ValueError("packet width must be positive")

    @property
    def steps(self) -> int:
        n = round(self.t_final / self.dt)
        if abs(n * self.dt - self.t_final) > 1e-9 * self.t_final:
            raise ValueError(f"t_final={self.t_final} is not a multiple of dt={self.dt}")
        return n


def initial_gaussian(grid: Grid, x0: float, p0: float, sigma_x: float, hbar: float) -> DensityState:
    """Pure minimum-uncertainty packet centred at (x0, p0)."""
    if x0 - 8 * sigma_x < grid.x_min or x0 + 8 * sigma_x > grid.x_max:
        raise ValueError(f"packet at x0={x0} with width {sigma_x} is within 8 widths of the boundary")
    if abs(p0) + 4 * hbar / (2 * sigma_x) >= grid.p_max(hbar):
        raise ValueError(f"momentum p0={p0} is not resolved by the grid (p_max={grid.p_max(hbar):g})")
    x = grid.x
    psi = np.exp(-((x - x0) ** 2) / (4 * sigma_x**2) + 1j * p0 * x / hbar)
    psi /= np.linalg.norm(psi)
    return DensityState(np.outer(psi, psi.conj()), 0.0)


class Generator:
    """Lindblad generator with precomputed effective Hamiltonian.

    rhs(rho) = K rho + rho K^dag + (gamma/hbar) A rho A^dag,
    K = -(i/hbar) H - (gamma/(2 hbar)) A^dag A.
    """

    def __init__(self, H, A, params: PhysParams):
        h, g = params.hbar, params.gamma
        self.H = H
        self.A = np.asarray(A)
        self.Adag = self.A.conj().T.copy()
        B = self.Adag @ self.A
        self.K = -1j / h * np.asarray(H) - g / (2 * h) * B
        self.Kdag = self.K.conj().T.copy()
        self.c = g / h
        self.params = params

    def __call__(self, rho):
        out = self.K @ rho
        out += rho @ self.Kdag
        if self.c:
            out += self.c * ((self.A @ rho) @ self.Adag)
        return out

    def spectral_radius(self, iters: int = 60, seed: int = 0) -> float:
        """Power-iteration estimate of the largest |eigenvalue| of the generator."""
        rng = np.random.default_rng(seed)
        n = self.K.shape[0]
        v = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        v = v + v.conj().T
        v /= np.linalg.norm(v)
        est = 0.0
        for _ in range(iters):
            w = self(v)
            est = float(np.linalg.norm(w))
            if est == 0.0:
                break
            v = w / est
        return est


def lindblad_rhs(rho, H, A_mat, params: PhysParams, B=None):
    """-(i/hbar)[H, rho] + (gamma/hbar)(A rho A^dag - {A^dag A, rho}/2)."""
    h, g = params.hbar, params.gamma
    Adag = A_mat.conj().T
    if B is None:
        B = Adag @ A_mat
    out = -1j / h * (H @ rho - rho @ H)
    if g:
        out = out + g / h * (A_mat @ rho @ Adag - 0.5 * (B @ rho + rho @ B))
    return out


@dataclass
class TrajectoryRecord:
    columns: dict
    dt: float = 0.0
    stride: int = 1
    runtime: float = 0.0

    def __post_init__(self):
        missing = [c for c in COLUMNS if c not in self.columns]
        if missing:
            raise ValueError(f"trajectory lacks columns {missing}")
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        t = self.columns["t"]
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def trace_drift(self) -> float:
        return float(np.max(np.abs(self.columns["trace"] - 1.0)))

    @property
    def min_uncertainty(self) -> float:
        return float(np.min(self.columns["uncert_prod"]))

    @property
    def min_audited_eigenvalue(self) -> float:
        e = self.columns["min_eig"]
        e = e[np.isfinite(e)]
        return float(e.min()) if len(e) else math.nan


def _record_row(state: DensityState, ops: dict, audit: bool) -> dict:
    row = {"t": state.t}
    for name in OBSERVABLES:
        row[f"{name}_mean"] = expectation(state.rho, ops[name])
    row["trace"] = state.trace.real
    row["purity"] = state.purity
    var_x = row["x2_mean"] - row["x_mean"] ** 2
    var_p = row["p2_mean"] - row["p_mean"] ** 2
    row["uncert_prod"] = math.sqrt(max(var_x, 0.0) * max(var_p, 0.0))
    row["min_eig"] = state.min_eigenvalue() if audit else math.nan
    return row


def _check_state(state: DensityState, cfg: SimConfig, row: dict):
    drift = abs(state.trace - 1.0)
    if drift > cfg.trace_tol:
        raise InvariantBreach(f"trace drift {drift:.3e} at t={state.t:g}")
    herm = hermiticity_error(state.rho)
    if herm > 1e-10:
        raise InvariantBreach(f"Hermiticity lost ({herm:.3e}) at t={state.t:g}")
    if np.isfinite(row["min_eig"]) and row["min_eig"] < cfg.negativity_tol:
        raise InvariantBreach(f"negative eigenvalue {row['min_eig']:.3e} at t={state.t:g}")


def build_generator(cfg: SimConfig) -> tuple:
    p = cfg.params
    H = hamiltonian(cfg.grid, p, cfg.potential)
    A = friction_operator(cfg.grid, p)
    return Generator(H, A, p), observable_suite(cfg.grid, p, potential=cfg.potential)


def propagate(cfg: SimConfig, progress=None) -> TrajectoryRecord:
    """Classical fixed-step RK4, recording expectations every ``stride`` steps."""
    t0 = time.perf_counter()
    nsteps = cfg.steps
    if nsteps % cfg.stride:
        raise ValueError(f"{nsteps} steps is not a multiple of the record stride {cfg.stride}")
    L, ops = build_generator(cfg)
    radius = L.spectral_radius()
    if radius * cfg.dt >= RK4_STABILITY:
        raise ValueError(f"dt={cfg.dt} exceeds the RK4 stability bound "
                         f"{RK4_STABILITY / radius:.3g} for this generator")
    state = initial_gaussian(cfg.grid, cfg.x0, cfg.p0, cfg.sigma_x, cfg.params.hbar)
    rows = []
    dt = cfg.dt
    rho = state.rho
    for step in range(nsteps + 1):
        if step % cfg.stride == 0:
            audit = cfg.eigen_every > 0 and (step % cfg.eigen_every == 0 or step == nsteps)
            state = DensityState(rho, step * dt)
            row = _record_row(state, ops, audit)
            _check_state(state, cfg, row)
            rows.append(row)
            if progress:
                progress(step, nsteps)
        if step == nsteps:
            break
        k1 = L(rho)
        k2 = L(rho + 0.5 * dt * k1)
        k3 = L(rho + 0.5 * dt * k2)
        k4 = L(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    cols = {c: np.array([r[c] for r in rows]) for c in COLUMNS}
    rec = TrajectoryRecord(cols, dt=dt, stride=cfg.stride, runtime=time.perf_counter() - t0)
    log.info("propagated %d steps in %.1fs, trace drift %.2e", nsteps, rec.runtime, rec.trace_drift)
    return rec


# ------------------------------------------------------------ residual checks

RELATIONS = ("<x>", "<p>", "<x^2>", "<px+xp>", "<p^2>")


@dataclass
class RelationResidual:
    name: str
    max_abs: float
    max_rel: float
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    friction: np.ndarray

    @property
    def max_friction(self) -> float:
        return float(np.max(np.abs(self.friction)))


@dataclass
class ResidualTable:
    rows: list

    def __getitem__(self, name) -> RelationResidual:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def max_rel(self) -> float:
        return max(r.max_rel for r in self.rows)

    def passed(self, rtol: float, atol: float = 1e-9) -> bool:
        """Every relation within ``rtol`` relative or ``atol`` absolute.

        The absolute floor covers relations whose right side vanishes
        identically, where the relative measure only amplifies round-off.
        """
        return all(r.max_rel <= rtol or r.max_abs <= atol for r in self.rows)

    def table(self) -> str:
        lines = [f"{'relation':<10} {'max|res|':>12} {'max rel':>12} {'max|friction|':>14}"]
        for r in self.rows:
            lines.append(f"{r.name:<10} {r.max_abs:12.4e} {r.max_rel:12.4e} {r.max_friction:14.4e}")
        return "\n".join(lines)


def ehrenfest_rhs(rec: TrajectoryRecord, params: PhysParams) -> dict:
    """Per relation: (left column, Hamiltonian part, friction part) of the right side."""
    g, h, m = params.gamma, params.hbar, params.m
    c = rec.columns
    return {
        "<x>": ("x_mean", c["p_mean"] / m, np.zeros_like(c["t"])),
        "<p>": ("p_mean", -c["uprime_mean"], -2 * g * c["p_mean"]),
        "<x^2>": ("x2_mean", c["xpsym_mean"] / m, g * h * c["alpha_mean"]),
        "<px+xp>": ("xpsym_mean", 2 * c["p2_mean"] / m - 2 * c["xuprime_mean"],
                    -2 * g * c["xpsym_mean"] + g * h * c["beta_mean"]),
        "<p^2>": ("p2_mean", -c["puprime_sym_mean"],
                  -4 * g * c["p2_mean"] + g * h * c["delta_mean"]),
    }


def ehrenfest_residuals(rec: TrajectoryRecord, params: PhysParams) -> ResidualTable:
    """Centered-difference time derivatives against the right-hand sides."""
    if len(rec) < 5:
        raise ValueError(f"need at least 5 recorded rows, got {len(rec)}")
    t = rec["t"]
    rows = []
    for name, (col, ham, fric) in ehrenfest_rhs(rec, params).items():
        f = rec[col]
        lhs = (f[2:] - f[:-2]) / (t[2:] - t[:-2])
        r = (ham + fric)[1:-1]
        res = np.abs(lhs - r)
        scale = np.maximum(np.maximum.accumulate(np.abs(r)), 1e-12)
        rows.append(RelationResidual(name, float(res.max()), float((res / scale).max()),
                                     t[1:-1], lhs, r, fric[1:-1]))
    return ResidualTable(rows)


@dataclass
class SteadyStateReport:
    converged: bool
    p2: float
    delta: float
    absp: float
    balance_rel: float
    floor: float
    gap: float
    tol: float

    @property
    def passed(self) -> bool:
        return (self.converged and self.balance_rel <= self.tol
                and self.p2 >= self.floor * (1 - self.tol))

    def table(self) -> str:
        return "\n".join([
            f"steady state: {'PASS' if self.passed else 'FAIL'}"
            f"{'' if self.converged else ' (not converged)'}",
            f"  <p^2>_inf           {self.p2:.6e}",
            f"  hbar<delta>/4       {self.delta:.6e}",
            f"  balance rel. error  {self.balance_rel:.3e}",
            f"  (hbar/lam)^2        {self.floor:.6e}",
            f"  gap hbar<|p|>/lam   {self.gap:.6e}",
        ])


def steady_state_balance(rec: TrajectoryRecord, params: PhysParams, tol: float = 0.01) -> SteadyStateReport:
    """Large-time balance 4 gamma <p^2> = gamma hbar <delta> of the free particle.

    Raises NotConverged unless |d<p^2>/dt| < 1e-3 * 4 gamma <p^2> at the last row.
    """
    if len(rec) < 3:
        raise ValueError("need at least 3 recorded rows")
    g, h, lam = params.gamma, params.hbar, params.lam
    t, p2 = rec["t"], rec["p2_mean"]
    slope = (p2[-1] - p2[-3]) / (t[-1] - t[-3])
    if not (g > 0 and abs(slope) < 1e-3 * 4 * g * p2[-1]):
        raise NotConverged(f"d<p^2>/dt = {slope:.3e} at t = {t[-1]:g}; no fixed point reached")
    delta_term = h * rec["delta_mean"][-1] / 4
    balance = abs(p2[-1] - delta_term) / p2[-1]
    absp = rec["absp_mean"][-1]
    return SteadyStateReport(True, float(p2[-1]), float(delta_term), float(absp),
                             float(balance), (h / lam) ** 2, h * absp / lam, tol)
