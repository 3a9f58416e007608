"""Command-line entry point: ``qfriction verify | simulate | check``.

Exit codes: 0 pass, 1 scientific failure, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import friction as fm
from .config import ConfigError, dump_config, figure_preset, load_config, steady_state_preset
from .expr import DomainError, ExprError, var
from .lindblad import (
    InvariantBreach, NotConverged, SimConfig, ehrenfest_residuals, propagate, steady_state_balance,
)
from .trajio import TrajectoryFormatError, plot_script, read_csv, write_csv

log = logging.getLogger("qfriction")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
CASES = ("ehrenfest", "moyal-zero", "classical-limit", "no-go", "dephasing", "limits")
CASE_TOL = {"ehrenfest": 1e-8}
DEFAULT_TOL = 1e-10
LAMS = (0.5, 1.0, 64.0)
PRESETS = {"figure1": lambda: figure_preset(1), "figure2": lambda: figure_preset(2),
           "steady-state": steady_state_preset}


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ verify

def _branches(arg: str) -> tuple:
    return {"+1": (1,), "-1": (-1,), "both": (1, -1)}[arg]


def run_case(case: str, order: int, samples: int, tol: float | None, seed: int,
             branches=(1, -1), lams=LAMS) -> list:
    """Run one verification case; returns (label, passed, table) triples."""
    tol = tol if tol is not None else CASE_TOL.get(case, DEFAULT_TOL)
    spec = fm.default_spec(count=samples, seed=seed, rtol=tol)
    out = []
    if case == "ehrenfest":
        for s in branches:
            for lam in lams:
                rep = fm.verify_ehrenfest(fm.build_exact_symbols(fm.PhysParams(lam=lam), s),
                                          order, spec)
                out.append((rep.name, rep.passed, rep.table()))
    elif case == "moyal-zero":
        x, lam = var("x"), var("lam")
        for s in branches:
            for label, G in (("2x/lam", 2 * x * lam ** -1), ("x+x^3/3", x + x**3 / 3)):
                b = {"lam": 64.0} if "lam" in label else {}
                rep = fm.verify_zero_order_equations(fm.build_zero_order(G, s), s, spec, b)
                rep.name = f"zero-order equations G={label} sigma={s:+d}"
                out.append((rep.name, rep.passed, rep.table()))
            for lam_v in lams:
                sym = fm.build_exact_symbols(fm.PhysParams(lam=lam_v), s)
                rep = fm.verify_zero_order_match(sym, spec)
                out.append((rep.name, rep.passed, rep.table()))
    elif case == "classical-limit":
        for s in branches:
            for lam in lams:
                rep = fm.verify_classical_limit(fm.build_exact_symbols(fm.PhysParams(lam=lam), s),
                                                spec=spec)
                rep.name = f"classical limit sigma={s:+d} lam={lam:g}"
                out.append((rep.name, rep.passed, rep.table()))
    elif case == "no-go":
        rep = fm.verify_no_go_sample(100, seed, tol)
        out.append(("linear no-go", rep.passed, rep.table()))
    elif case == "dephasing":
        rng = np.random.default_rng(seed)
        for _ in range(5):
            m, kT, g = rng.uniform(0.2, 3.0, size=3)
            p = fm.PhysParams(m=float(m), kT=float(kT), gamma=float(g))
            for s in branches:
                rep = fm.verify_dephasing(p, order, s, spec)
                rep.name += f" sigma={s:+d}"
                out.append((rep.name, rep.passed, rep.table()))
    elif case == "limits":
        rep = fm.verify_limit_identity()
        out.append(("limit identity", rep.passed, rep.table()))
    else:
        raise UsageError(f"unknown case {case!r}")
    return out


def cmd_verify(args) -> int:
    if not 0 <= args.order <= 10:
        raise UsageError("--order must be in 0..10")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    cases = CASES if args.case == "all" else (args.case,)
    ok = True
    for case in cases:
        for label, passed, table in run_case(case, args.order, args.samples, args.tol, args.seed,
                                             _branches(args.branch)):
            print(table)
            ok &= passed
    print(f"verify {args.case}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------- simulate

def _resolve_config(args) -> tuple:
    """SimConfig and configured output path from a config file or a preset."""
    chosen = [a for a in (args.config, args.preset) if a]
    if len(chosen) != 1:
        raise UsageError("give exactly one of CONFIG, --figure or --preset")
    if args.config:
        return load_config(args.config) + (None,)
    return PRESETS[args.preset](), None, args.preset


def _provenance(name: str, cfg: SimConfig) -> list:
    p, g = cfg.params, cfg.grid
    return [
        f"preset {name}: hbar={p.hbar:g} m={p.m:g} lambda={p.lam:g} gamma={p.gamma:.6g} "
        f"x0={cfg.x0:g} p0={cfg.p0:g} potential={cfg.potential.kind}",
        f"preset {name}: pinned defaults sigma_x={cfg.sigma_x:g} n={g.n} "
        f"x in [{g.x_min:g}, {g.x_max:g}] dt={cfg.dt:g} t_final={cfg.t_final:g} "
        f"stride={cfg.stride} eigen_every={cfg.eigen_every} integrator=RK4",
    ]


def cmd_simulate(args) -> int:
    cfg, cfg_out, preset = _resolve_config(args)
    if preset:
        for line in _provenance(preset, cfg):
            print(line)
    out = Path(args.out or cfg_out or "trajectory.csv")
    if args.save_config:
        Path(args.save_config).write_text(dump_config(cfg))
    try:
        cfg.steps
        rec = propagate(cfg, progress=_progress(cfg) if args.verbose else None)
    except ValueError as err:
        raise ConfigError(str(err)) from None
    except InvariantBreach as err:
        print(f"invariant breach: {err}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(rec, out)
    print(f"wrote {len(rec)} rows to {out}")
    print(f"final trace drift      {abs(rec['trace'][-1] - 1):.3e}")
    print(f"max trace drift        {rec.trace_drift:.3e}")
    print(f"min uncertainty prod.  {rec.min_uncertainty:.12f}")
    print(f"min audited eigenvalue {rec.min_audited_eigenvalue:.3e}")
    print(f"runtime                {rec.runtime:.1f} s")
    return EXIT_OK


def _progress(cfg: SimConfig):
    tick = max(cfg.steps // 10, 1)

    def report(step, total):
        if step % tick < cfg.stride:
            log.info("step %d / %d", step, total)
    return report


# ------------------------------------------------------------------- check

def cmd_check(args) -> int:
    cfg, _, _ = _resolve_config(args)
    try:
        rec = read_csv(args.trajectory)
        table = ehrenfest_residuals(rec, cfg.params)
    except (TrajectoryFormatError, ValueError) as err:
        print(f"malformed trajectory: {err}", file=sys.stderr)
        return EXIT_USAGE
    print(table.table())
    ok = table.passed(args.tol, args.atol)
    try:
        ss = steady_state_balance(rec, cfg.params)
        print(ss.table())
        print(f"  large-time form (hbar/lam)^2 = {ss.floor:.6e}; measured gap {ss.gap:.6e}")
        ok &= ss.passed
    except NotConverged as err:
        print(f"steady state: not checked ({err})")
    if args.plot_script:
        Path(args.plot_script).write_text(plot_script(table, f"Ehrenfest relations: {args.trajectory}"))
        print(f"wrote plot script {args.plot_script}")
    print(f"check: {'PASS' if ok else 'FAIL'} (relative tolerance {args.tol:g}, "
          f"absolute {args.atol:g})")
    return EXIT_OK if ok else EXIT_FAIL


# -------------------------------------------------------------------- main

def _add_source(p):
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--figure", type=int, choices=(1, 2), help="figure reproduction preset")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named preset")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfriction", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="symbolic verification suites")
    v.add_argument("--case", choices=CASES + ("all",), default="all")
    v.add_argument("--order", type=int, default=6, help="hbar truncation order N")
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--tol", type=float, default=None,
                   help="relative tolerance (default 1e-8 for ehrenfest, 1e-10 otherwise)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--branch", choices=("+1", "-1", "both"), default="both")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="propagate the master equation, write a trajectory CSV")
    _add_source(s)
    s.add_argument("--out", help="trajectory CSV path")
    s.add_argument("--save-config", help="also write the resolved config here")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("check", help="Ehrenfest residuals of a trajectory CSV")
    c.add_argument("trajectory")
    _add_source(c)
    c.add_argument("--tol", type=float, default=1e-2)
    c.add_argument("--atol", type=float, default=1e-9,
                   help="absolute residual accepted when the right side vanishes")
    c.add_argument("--plot-script", help="write a gnuplot script here")
    c.set_defaults(func=cmd_check)
    return ap


def _thread_limit():
    raw = os.environ.get("FRICTION_THREADS")
    if raw is None or raw.strip() == "":
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"FRICTION_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("FRICTION_THREADS must be at least 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "figure", None):
        if args.preset:
            print("error: --figure and --preset are exclusive", file=sys.stderr)
            return EXIT_USAGE
        args.preset = f"figure{args.figure}"
    try:
        with _thread_limit():
            return args.func(args)
    except (UsageError, ConfigError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ExprError) as err:
        print(f"evaluation failed: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
