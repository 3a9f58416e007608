"""Closed-form quantum friction symbols and the checks they must pass."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermeval

from .expr import (
    HBAR, I, ZERO, Expr, SampleSpec, add, conjugate, const, differentiate, evaluate,
    mul, power, sqrt, substitute, ufunc, var,
)
from .phase_space import (
    GAMMA, P, X, SeriesReport, StarConfig, dissipator_adjoint,
    dissipator_state, series_residual,
)

LAM = var("lam")
MASS = var("m")
KT = var("kT")
SIGMA = var("sigma")


@dataclass(frozen=True)
class PhysParams:
    hbar: float = 1.0
    m: float = 1.0
    gamma: float = 1.0 / 12.0
    lam: float = 64.0
    kT: float = 0.0

    def __post_init__(self):
        for name in ("hbar", "m", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        for name in ("gamma", "kT"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be nonnegative and finite, got {v}")

    def bindings(self) -> dict:
        return {"hbar": self.hbar, "m": self.m, "gamma": self.gamma, "lam": self.lam,
                "kT": self.kT}


def default_spec(**kw) -> SampleSpec:
    opts = dict(count=20, intervals={"x": (-5.0, 5.0), "p": (0.1, 5.0)}, seed=0,
                atol=0.0, rtol=1e-8)
    opts.update(kw)
    return SampleSpec(**opts)


@dataclass
class FrictionSymbols:
    A: Expr
    Adag: Expr
    alpha: Expr
    beta: Expr
    delta: Expr
    sigma: int | Expr
    params: PhysParams

    def bindings(self, **extra) -> dict:
        b = self.params.bindings()
        b.pop("hbar")  # hbar stays symbolic for series expansions
        b.update(extra)
        return b


def build_exact_symbols(params: PhysParams, sigma: int | Expr) -> FrictionSymbols:
    """Friction collapse symbol and the three Ehrenfest corrections, branch form.

    ``sigma`` is +1 or -1, or the variable ``sigma`` when the symbols are to
    be evaluated on a signed momentum lattice.
    """
    if not params.lam > 0:
        raise ValueError("lam must be positive")
    if isinstance(sigma, int) and sigma not in (1, -1):
        raise ValueError("branch sign must be +1 or -1")
    h, L, x, p = HBAR, LAM, X, P
    root = sqrt(L * p + h)
    imag = mul(I, 2 * L * p + h, Fraction(1, 2), power(root, -1))
    real = mul(2, x, power(L, -1), sigma, root)
    A = add(imag, real)
    Adag = add(mul(-1, imag), real)
    alpha = mul(
        add(4 * x**2 * (L * p + h) ** 2, p * L**3 * (L * p + 4 * h), 5 * h**2 * L**2),
        Fraction(1, 4), power(L * p + h, -3))
    beta = mul(-4, sigma, x, power(L, -1))
    delta = mul(4, p * L + h, power(L, -2))
    return FrictionSymbols(A, Adag, alpha, beta, delta, sigma, params)


def build_zero_order(G: Expr, sigma: int) -> Expr:
    """Leading-order collapse symbol for a monotone real function ``G(x)``."""
    dG = differentiate(G, "x")
    return mul(sqrt(mul(2, P, power(dG, -1))), add(I, mul(sigma, G)))


@dataclass
class SuiteReport:
    name: str
    cases: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def table(self) -> str:
        head = f"== {self.name}: {'PASS' if self.passed else 'FAIL'}"
        return "\n".join([head] + [c.table() for c in sorted(self.cases, key=lambda c: c.name)])


def verify_zero_order_equations(A0: Expr, sigma: int, spec: SampleSpec | None = None,
                                bindings: Mapping | None = None) -> SuiteReport:
    spec = spec or default_spec(rtol=1e-10)
    A0c = conjugate(A0)
    dp = add(A0c * differentiate(A0, "p"), -1 * differentiate(A0c, "p") * A0)
    dx = add(A0c * differentiate(A0, "x"), -1 * differentiate(A0c, "x") * A0)
    rep = SuiteReport("zero-order equations")
    rep.cases.append(series_residual(dp, ZERO, 0, spec, bindings, name="p-identity"))
    rep.cases.append(series_residual(dx, mul(-4, I, sigma, P), 0, spec, bindings,
                                     name="x-identity"))
    return rep


def verify_zero_order_match(sym: FrictionSymbols, spec: SampleSpec | None = None) -> SeriesReport:
    """hbar^0 term of the exact symbol against the zero-order family at G = 2x/lam."""
    spec = spec or default_spec(rtol=1e-10)
    A0 = build_zero_order(mul(2, X, power(LAM, -1)), sym.sigma)
    return series_residual(sym.A, A0, 0, spec, sym.bindings(),
                           name=f"hbar^0 of A vs zero-order G=2x/lam sigma={sym.sigma:+d} "
                                f"lam={sym.params.lam:g}")


def ehrenfest_targets(sym: FrictionSymbols) -> list:
    """(name, observable symbol, expected dissipator image) for the five relations."""
    s, g, h = sym.sigma, GAMMA, HBAR
    sp = mul(s, P)
    return [
        ("<x>", X, ZERO),
        ("<p>", sp, mul(-2, g, sp)),
        ("<x^2>", X**2, mul(g, h, sym.alpha)),
        ("<px+xp>", mul(2, sp, X), add(mul(-4, g, sp, X), mul(g, h, sym.beta))),
        ("<p^2>", P**2, add(mul(-4, g, P**2), mul(g, h, sym.delta))),
    ]


def verify_ehrenfest(sym: FrictionSymbols, order: int, spec: SampleSpec | None = None) -> SuiteReport:
    """Dissipator side of the five Ehrenfest relations through hbar**order."""
    spec = spec or default_spec()
    cfg = StarConfig(order, sym.sigma)
    b = sym.bindings()
    rep = SuiteReport(f"ehrenfest sigma={sym.sigma:+d} lam={sym.params.lam:g} N={order}")
    for name, O, expected in ehrenfest_targets(sym):
        D = dissipator_adjoint(sym.A, sym.Adag, O, cfg)
        rep.cases.append(series_residual(D, expected, order, spec, b, name=name))
    return rep


def gaussian_ufunc(x0=0.3, p0=1.7, sx=1.1, sp=0.8) -> Callable:
    """Evaluator for W(x,p) = exp(-(x-x0)^2/(2 sx^2) - (p-p0)^2/(2 sp^2)) and its partials."""

    def factor(u, s, n):
        z = (u - 0.0) / s
        c = np.zeros(n + 1)
        c[n] = 1.0
        return (-1.0 / s) ** n * hermeval(z, c) * np.exp(-0.5 * z * z)

    def W(args, orders):
        x, p = args
        nx, np_ = orders
        return factor(np.asarray(x) - x0, sx, nx) * factor(np.asarray(p) - p0, sp, np_)

    return W


def verify_classical_limit(sym: FrictionSymbols, W: Callable | None = None,
                           spec: SampleSpec | None = None) -> SeriesReport:
    """hbar^0 term of the state-side dissipator against 2 gamma d/dp (p W)."""
    spec = spec or default_spec(rtol=1e-10)
    Wf = ufunc("W", ("x", "p"))
    D = dissipator_state(sym.A, sym.Adag, Wf, StarConfig(0, sym.sigma))
    expected = mul(2, GAMMA, add(Wf, mul(P, differentiate(Wf, "p"))))
    b = sym.bindings(W=W or gaussian_ufunc())
    return series_residual(D, expected, 0, spec, b, name="classical limit")


def verify_linear_no_go(a: complex, b: complex) -> tuple:
    """Leading-order conditions for a collapse symbol linear in x and p.

    Returns (r1, r2) with r1 = Im(conj(a) b) and r2 = Im(conj(a) b) - 2, both
    computed from the symbol algebra; both must vanish for a valid model.
    """
    A = add(mul(const(complex(a)), X), mul(const(complex(b)), P))
    Ac = conjugate(A)
    e1 = add(Ac * differentiate(A, "p"), -1 * differentiate(Ac, "p") * A)
    e2 = add(Ac * differentiate(A, "x"), -1 * differentiate(Ac, "x") * A, mul(4, I, P))
    # e1 = 2i r1 x and e2 = -2i r2 p
    r1 = evaluate(mul(differentiate(e1, "x"), Fraction(1, 2), -1 * I), {})
    r2 = evaluate(mul(differentiate(e2, "p"), Fraction(1, 2), I), {})
    return r1.real, r2.real


@dataclass
class NoGoReport:
    pairs: np.ndarray  # rows of (a, b)
    r: np.ndarray  # rows of (r1, r2) from the symbol algebra
    analytic_err: float
    tol: float

    @property
    def min_of_max(self) -> float:
        return float(np.min(np.max(np.abs(self.r), axis=1)))

    @property
    def passed(self) -> bool:
        return self.min_of_max >= 1.0 and self.analytic_err <= self.tol

    def table(self) -> str:
        lines = [f"== linear no-go: {'PASS' if self.passed else 'FAIL'}",
                 f"  {'a':>22} {'b':>22} {'r1':>10} {'r2':>10}"]
        for (a, b), (r1, r2) in zip(self.pairs, self.r):
            lines.append(f"  {a:22.4f} {b:22.4f} {r1:10.4f} {r2:10.4f}")
        lines.append(f"  min over pairs of max(|r1|,|r2|) = {self.min_of_max:.4f}")
        lines.append(f"  max deviation from (Im(a*b), Im(a*b)-2) = {self.analytic_err:.3e}")
        return "\n".join(lines)


def verify_no_go_sample(count: int = 100, seed: int = 0, tol: float = 1e-10) -> NoGoReport:
    """No linear collapse symbol a x + b p satisfies both leading-order conditions."""
    rng = np.random.default_rng(seed)
    z = rng.uniform(-3, 3, size=(count, 2)) + 1j * rng.uniform(-3, 3, size=(count, 2))
    r = np.array([verify_linear_no_go(a, b) for a, b in z])
    im = np.imag(np.conj(z[:, 0]) * z[:, 1])
    err = float(np.max(np.abs(r - np.stack([im, im - 2], axis=1))))
    return NoGoReport(z, r, err, tol)


def verify_dephasing(params: PhysParams, order: int = 6, sigma: int = 1,
                     spec: SampleSpec | None = None) -> SuiteReport:
    """Dephasing collapse operator sqrt(4 m kT / hbar) x injects 4 m gamma kT into <p^2> only."""
    spec = spec or default_spec(rtol=1e-10)
    A = mul(sqrt(mul(4, MASS, KT, power(HBAR, -1))), X)
    cfg = StarConfig(order, sigma)
    sp = mul(sigma, P)
    b = params.bindings()
    b.pop("hbar")
    rep = SuiteReport(f"dephasing m={params.m:g} kT={params.kT:g} gamma={params.gamma:g}")
    cases = [("<p^2>", P**2, mul(4, MASS, GAMMA, KT)), ("<x>", X, ZERO), ("<x^2>", X**2, ZERO),
             ("<p>", sp, ZERO), ("<px+xp>", mul(2, sp, X), ZERO)]
    for name, O, expected in cases:
        D = dissipator_adjoint(A, A, O, cfg)
        rep.cases.append(series_residual(D, expected, order, spec, b, name=name))
    return rep


@dataclass
class LimitReport:
    points: list
    lams: list
    rel_diffs: list  # one list per point, aligned with lams
    threshold: float = 1e-3

    @property
    def monotone(self) -> bool:
        return all(all(b < a for a, b in zip(r, r[1:])) for r in self.rel_diffs)

    @property
    def passed(self) -> bool:
        return self.monotone and all(r[-1] < self.threshold for r in self.rel_diffs)

    def table(self) -> str:
        lines = [f"== limit identity: {'PASS' if self.passed else 'FAIL'}"]
        for (x, p), r in zip(self.points, self.rel_diffs):
            cells = "  ".join(f"lam={l:g}: {d:.3e}" for l, d in zip(self.lams, r))
            lines.append(f"  (x={x:g}, p={p:g})  {cells}")
        return "\n".join(lines)


def verify_limit_identity(points: Sequence = ((1.0, 1.0), (3.0, 0.5)),
                          lams: Sequence = (1e2, 1e3, 1e4, 1e5), hbar: float = 1.0,
                          sigma: int = 1) -> LimitReport:
    """Relative gap between A and its hbar -> 0 form along a ladder of lam."""
    sym = build_exact_symbols(PhysParams(hbar=hbar), sigma)
    A0 = substitute(sym.A, HBAR, ZERO)
    diffs = []
    for x, p in points:
        row = []
        for lam in lams:
            b = {"x": x, "p": p, "lam": lam, "hbar": hbar}
            a = evaluate(sym.A, b)
            row.append(abs(a - evaluate(A0, b)) / abs(a))
        diffs.append(row)
    return LimitReport(list(points), list(lams), diffs)
