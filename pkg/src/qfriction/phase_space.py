"""Moyal star products, Lindblad dissipators on symbols and series residual checks.

Symbols live in *branch form*: the variable ``p`` stands for ``|p|`` and the
branch sign ``sigma`` carries ``sign(p)``.  Derivatives with respect to the
physical momentum therefore pick up a factor ``sigma``, which is folded into
the star-product prefactor ``(i sigma hbar / 2)**n / n!``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .expr import (
    HBAR, I, ONE, ZERO, DomainError, Expr, SampleSpec, add, const, derivative,
    hbar_series_coefficient, is_zero_numeric, mul, power, series_coefficients, var,
)
from .expr import point_at

X = var("x")
P = var("p")
GAMMA = var("gamma")

DEFAULT_ORDER = 6
MAX_ORDER = 10


@dataclass(frozen=True)
class StarConfig:
    order: int = DEFAULT_ORDER
    sigma: int = 1

    def __post_init__(self):
        if not 0 <= self.order <= MAX_ORDER:
            raise ValueError(f"truncation order must be in [0, {MAX_ORDER}], got {self.order}")
        if self.sigma not in (1, -1):
            raise ValueError(f"branch sign must be +1 or -1, got {self.sigma}")


def _bidiff(f: Expr, g: Expr, n: int, sigma: int) -> Expr:
    """Order-n term of the star product without its hbar**n factor."""
    if n == 0:
        return mul(f, g)
    terms = []
    for k in range(n + 1):
        df = derivative(f, ("p", k), ("x", n - k))
        if df.is_zero():
            continue
        dg = derivative(g, ("x", k), ("p", n - k))
        if dg.is_zero():
            continue
        terms.append(mul(math.comb(n, k) * (-1) ** k, df, dg))
    if not terms:
        return ZERO
    pref = mul(power(mul(I, sigma, Fraction(1, 2)), n), Fraction(1, math.factorial(n)))
    return mul(pref, add(*terms))


def star_series(f, g, order: int, sigma: int) -> list:
    """Graded star product.

    ``f`` and ``g`` are expressions or lists ``[c0, c1, ...]`` meaning
    ``sum_k hbar**k c_k``; the result is such a list truncated at ``order``.
    Every coefficient up to ``order`` is exact.
    """
    F = f if isinstance(f, list) else [f]
    G = g if isinstance(g, list) else [g]
    out = [[] for _ in range(order + 1)]
    for a, fa in enumerate(F):
        if a > order or fa.is_zero():
            continue
        for b, gb in enumerate(G):
            if a + b > order or gb.is_zero():
                continue
            for c in range(order - a - b + 1):
                t = _bidiff(fa, gb, c, sigma)
                if not t.is_zero():
                    out[a + b + c].append(t)
    return [add(*ts) for ts in out]


def collapse(series: list) -> Expr:
    return add(*[mul(power(HBAR, k), c) for k, c in enumerate(series)])


def moyal_star(a: Expr, b: Expr, cfg: StarConfig) -> Expr:
    """``a ⋆ b`` truncated after the hbar**order term."""
    return collapse(star_series(a, b, cfg.order, cfg.sigma))


def _dissipate(triples, cfg: StarConfig, gamma) -> Expr:
    # orders up to N+1 of the bracket are needed: the overall 1/hbar shifts
    # them down to 0..N
    K = cfg.order + 1
    bracket = [[] for _ in range(K + 1)]
    for weight, series in triples:
        for k, c in enumerate(series):
            bracket[k].append(mul(weight, c))
    terms = [mul(power(HBAR, k - 1), add(*cs)) for k, cs in enumerate(bracket)]
    return mul(gamma, add(*terms))


def dissipator_adjoint(A: Expr, Adag: Expr, O: Expr, cfg: StarConfig, gamma=GAMMA) -> Expr:
    """Heisenberg-picture dissipator acting on the observable symbol ``O``.

    (gamma/hbar)[A† ⋆ (O ⋆ A) - (O ⋆ A†) ⋆ A / 2 - A† ⋆ (A ⋆ O) / 2]
    """
    K = cfg.order + 1
    s = cfg.sigma
    t1 = star_series(Adag, star_series(O, A, K, s), K, s)
    t2 = star_series(star_series(O, Adag, K, s), A, K, s)
    t3 = star_series(Adag, star_series(A, O, K, s), K, s)
    half = Fraction(-1, 2)
    return _dissipate([(ONE, t1), (const(half), t2), (const(half), t3)], cfg, gamma)


def dissipator_state(A: Expr, Adag: Expr, W: Expr, cfg: StarConfig, gamma=GAMMA) -> Expr:
    """Dissipator acting on a Wigner function symbol ``W``.

    (gamma/hbar)[A ⋆ W ⋆ A† - W ⋆ A† ⋆ A / 2 - A† ⋆ A ⋆ W / 2]
    """
    K = cfg.order + 1
    s = cfg.sigma
    t1 = star_series(star_series(A, W, K, s), Adag, K, s)
    t2 = star_series(star_series(W, Adag, K, s), A, K, s)
    t3 = star_series(star_series(Adag, A, K, s), W, K, s)
    half = Fraction(-1, 2)
    return _dissipate([(ONE, t1), (const(half), t2), (const(half), t3)], cfg, gamma)


# ---------------------------------------------------------------- residuals

@dataclass
class OrderResidual:
    order: int
    max_abs: float
    max_rel: float
    worst_point: dict
    passed: bool


@dataclass
class SeriesReport:
    name: str
    orders: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.orders)

    @property
    def max_abs(self) -> float:
        return max((o.max_abs for o in self.orders), default=0.0)

    @property
    def max_rel(self) -> float:
        return max((o.max_rel for o in self.orders), default=0.0)

    def failing_orders(self) -> list:
        return [o.order for o in self.orders if not o.passed]

    def table(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for o in self.orders:
            lines.append(f"  order {o.order:2d}  max|r| {o.max_abs:.3e}  max rel {o.max_rel:.3e}"
                         f"  {'ok' if o.passed else 'FAIL'}")
        return "\n".join(lines)


def series_residual(e: Expr, expected: Expr, order: int, spec: SampleSpec,
                    bindings: Mapping | None = None, name: str = "residual",
                    method: str = "jet") -> SeriesReport:
    """Check the hbar-Taylor coefficients of ``e - expected`` vanish for orders 0..order.

    ``method="jet"`` evaluates coefficients by truncated series arithmetic;
    ``method="symbolic"`` extracts each coefficient as an expression first.
    Both use the term-magnitude scale of :func:`is_zero_numeric`.
    """
    diff = add(e, mul(-1, expected))
    b = {k: v for k, v in (bindings or {}).items() if k != HBAR.name}
    report = SeriesReport(name)
    if method == "symbolic":
        for n in range(order + 1):
            c = hbar_series_coefficient(diff, n)
            chk = is_zero_numeric(c, spec, b)
            # re-derive the relative figure for the report
            pts = spec.sample()
            val, mag = series_coefficients(c, HBAR.name, 0, {**b, **pts}, size=spec.count,
                                           magnitude=True)
            rel = _rel(np.abs(val[0]), mag[0])
            report.orders.append(OrderResidual(n, chk.max_abs, float(rel.max()),
                                               chk.worst_point, chk.ok))
        return report
    if method != "jet":
        raise ValueError(f"unknown method {method!r}")
    pts = spec.sample()
    b.update(pts)
    try:
        val, mag = series_coefficients(diff, HBAR.name, order, b, size=spec.count, magnitude=True)
    except DomainError as err:
        if err.index is not None and len(err.index):
            err.point = point_at(pts, int(err.index[0]))
            err.args = (f"{err.args[0]} at {err.point}",)
        raise
    for n in range(order + 1):
        r = np.abs(val[n])
        rel = _rel(r, mag[n])
        ok = bool(np.all(r <= spec.atol + spec.rtol * mag[n]))
        i = int(np.argmax(rel))
        report.orders.append(OrderResidual(n, float(r.max()), float(rel[i]), point_at(pts, i), ok))
    return report


def _rel(r, scale):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(scale > 0, r / np.where(scale > 0, scale, 1.0), r)
