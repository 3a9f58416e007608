import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qfriction.expr import (
    HBAR, ONE, ZERO, Const, DomainError, SampleSpec, UFunc, UnboundSymbolError, add, const,
    derivative, differentiate, evaluate, hbar_series_coefficient, is_zero_numeric, mul, power,
    series_coefficients, sqrt, substitute, ufunc, var,
)

x, p, lam, h = var("x"), var("p"), var("lam"), HBAR
SPEC = SampleSpec(count=20, intervals={"x": (-2.0, 2.0), "p": (0.5, 2.0), "lam": (0.5, 3.0),
                                       "hbar": (0.1, 1.0)}, seed=3)


def same_values(a, b, spec=SPEC):
    return is_zero_numeric(add(a, mul(-1, b)), spec).ok


# -------------------------------------------------------------- differentiate

def test_derivative_of_square_root():
    d = differentiate(sqrt(lam * p + h), "p")
    expected = mul(lam, Fraction(1, 2), power(lam * p + h, Fraction(-1, 2)))
    assert same_values(d, expected)


def test_derivative_of_constant_is_zero():
    assert differentiate(const(7), "x").is_zero()


def test_mixed_partial():
    d = derivative(x**2 * p, ("p", 1), ("x", 1))
    assert d == mul(2, x)


def test_ufunc_derivative_increments_multi_index():
    W = ufunc("W", ("x", "p"))
    d = differentiate(differentiate(W, "p"), "p")
    assert isinstance(d, UFunc) and d.orders == (0, 2)
    assert differentiate(W, "lam").is_zero()


def test_chain_rule_through_ufunc_argument_free_variable():
    W = ufunc("W", ("x", "p"))
    e = mul(x, W)
    d = differentiate(e, "x")
    seen = {}

    def Wf(args, orders):
        seen[orders] = True
        return np.ones_like(np.asarray(args[0], float)) * (1.0 + orders[0])

    val = evaluate(d, {"x": 2.0, "p": 1.0, "W": Wf})
    assert val == pytest.approx(1.0 + 2.0 * 2.0)
    assert (1, 0) in seen


# ------------------------------------------------------------------ evaluate

def test_evaluate_square_root():
    assert evaluate(sqrt(lam * p + h), {"lam": 64, "p": 1, "hbar": 1}) == pytest.approx(math.sqrt(65), rel=1e-15)


def test_evaluate_product():
    assert evaluate(x * p, {"x": 2, "p": 3}) == 6


def test_negative_power_at_zero_radicand_is_domain_error():
    e = power(lam * p + h, Fraction(-1, 2))
    with pytest.raises(DomainError):
        evaluate(e, {"lam": 1.0, "p": -1.0, "hbar": 1.0})


def test_fractional_power_of_negative_is_domain_error():
    with pytest.raises(DomainError):
        evaluate(sqrt(x), {"x": -1.0})


def test_unbound_symbol():
    with pytest.raises(UnboundSymbolError):
        evaluate(x * p, {"x": 1.0})


def test_evaluate_is_bit_reproducible():
    e = add(sqrt(lam * p + h), mul(x, power(p, -3)), mul(const(1j), x**2))
    b = {"x": np.linspace(-1, 1, 7), "p": np.linspace(0.3, 2, 7), "lam": 2.0, "hbar": 0.7}
    a1, a2 = evaluate(e, b), evaluate(e, b)
    assert a1.tobytes() == a2.tobytes()


def test_extended_precision_agrees_with_double():
    e = add(sqrt(lam * p + h), mul(x, power(lam * p + h, Fraction(-3, 2))))
    b = {"x": 0.7, "p": 1.3, "lam": 5.0, "hbar": 0.2}
    hi = evaluate(e, b, dps=40)
    assert complex(hi) == pytest.approx(evaluate(e, b), rel=1e-14)


def test_exact_constants_fold():
    assert power(const(4), Fraction(1, 2)) == const(2)
    assert mul(const(Fraction(1, 3)), 3) == ONE
    assert add(x, mul(-1, x)) == ZERO
    c = const(Fraction(2, 3))
    assert isinstance(c, Const) and c.re == Fraction(2, 3)


# ---------------------------------------------------------------- substitute

def test_substitute_hbar_to_zero():
    e = substitute(sqrt(lam * p + h), "hbar", ZERO)
    assert same_values(e, sqrt(lam * p))
    assert "hbar" not in e.free_symbols


def test_substitute_expression():
    assert same_values(substitute(x + p, "x", 2 * p), 3 * p)


def test_substitute_into_constant():
    c = const(Fraction(5, 7))
    assert substitute(c, "x", p**2 + 1) == c


# ----------------------------------------------------- hbar series coefficient

def test_series_coefficient_of_square_root():
    c = hbar_series_coefficient(sqrt(lam * p + h), 1)
    assert same_values(c, mul(Fraction(1, 2), power(lam * p, Fraction(-1, 2))))


def test_series_coefficient_of_sum():
    assert same_values(hbar_series_coefficient(x + h * p, 0), x)


def test_series_coefficient_of_monomial():
    assert hbar_series_coefficient(h**2, 2) == ONE


def test_jet_and_symbolic_coefficients_agree():
    e = mul(sqrt(lam * p + h), add(x, power(lam * p + 2 * h, -2)), power(1 + h * x**2, Fraction(1, 3)))
    pts = SPEC.sample()
    pts.pop("hbar")
    jet = series_coefficients(e, "hbar", 5, pts, size=SPEC.count)
    for n in range(6):
        sym = evaluate(hbar_series_coefficient(e, n), pts)
        np.testing.assert_allclose(jet[n], sym, rtol=1e-12, atol=1e-12)


def _central_fd(f, n, step):
    """(1/n!) d^n f / dh^n at 0 by the central n-th difference."""
    s = mpmath.mpf(0)
    for k in range(n + 1):
        s += (-1) ** k * math.comb(n, k) * f((mpmath.mpf(n) / 2 - k) * step)
    return s / step**n / math.factorial(n)


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_series_coefficient_matches_finite_difference(n):
    e = mul(sqrt(lam * p + h), add(x, power(lam * p + h, -1)))
    pt = {"x": 0.8, "p": 1.1, "lam": 2.0}
    f = lambda hv: evaluate(e, {**pt, "hbar": hv}, dps=40).real  # noqa: E731
    with mpmath.workdps(40):
        fd = _central_fd(f, n, mpmath.mpf("1e-3"))
    coef = evaluate(hbar_series_coefficient(e, n), pt).real
    assert abs(coef - float(fd)) <= 1e-5 * abs(coef)


# --------------------------------------------------------------- zero testing

def test_zero_test_accepts_identity():
    e = add(sqrt(lam * p + h) * sqrt(lam * p + h), mul(-1, lam * p + h))
    chk = is_zero_numeric(e, SPEC)
    assert chk.ok and chk.max_abs < 1e-12


def test_zero_test_rejects_non_identity():
    spec = SampleSpec(intervals={"x": (1.0, 2.0), "p": (1.0, 2.0)}, seed=1)
    chk = is_zero_numeric(x - p, spec)
    assert not chk.ok and chk.max_abs > 0.1
    assert set(chk.worst_point) == {"x", "p"}


def test_zero_test_reports_offending_point():
    spec = SampleSpec(intervals={"x": (-1.0, 1.0)}, seed=0)
    with pytest.raises(DomainError) as info:
        is_zero_numeric(sqrt(x), spec)
    assert info.value.point is not None and info.value.point["x"] < 0


# ------------------------------------------------------------ property tests

# real leaves keep every power base and radicand positive on the sample box
leaves = st.sampled_from([x, p, const(2), const(Fraction(1, 3)), const(-1), x * p])


def _extend(children):
    return st.one_of(
        st.tuples(children, children).map(lambda t: add(*t)),
        st.tuples(children, children).map(lambda t: mul(*t)),
        st.tuples(children, st.integers(-2, 3)).map(lambda t: power(t[0] * t[0] + 1, t[1])),
        children.map(lambda c: sqrt(c * c + p)),
    )


exprs = st.recursive(leaves, _extend, max_leaves=6)
PROP_SPEC = SampleSpec(count=12, intervals={"x": (-1.5, 1.5), "p": (0.5, 2.0)}, seed=11,
                       atol=1e-10, rtol=1e-10)


@settings(max_examples=60, deadline=None)
@given(exprs, exprs, st.sampled_from(["x", "p"]),
       st.fractions(-5, 5, max_denominator=7), st.fractions(-5, 5, max_denominator=7))
def test_differentiation_is_linear(e1, e2, v, a, b):
    lhs = differentiate(add(mul(a, e1), mul(b, e2)), v)
    rhs = add(mul(a, differentiate(e1, v)), mul(b, differentiate(e2, v)))
    assert is_zero_numeric(add(lhs, mul(-1, rhs)), PROP_SPEC).ok


@settings(max_examples=60, deadline=None)
@given(exprs, exprs, st.sampled_from(["x", "p"]))
def test_product_rule(e1, e2, v):
    lhs = differentiate(mul(e1, e2), v)
    rhs = add(mul(e1, differentiate(e2, v)), mul(differentiate(e1, v), e2))
    assert is_zero_numeric(add(lhs, mul(-1, rhs)), PROP_SPEC).ok


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_derivative_matches_finite_difference(e):
    pt = {"x": 0.37, "p": 1.21}
    d = evaluate(differentiate(e, "x"), pt)
    step = 1e-6
    fd = (evaluate(e, {**pt, "x": pt["x"] + step}) - evaluate(e, {**pt, "x": pt["x"] - step})) / (2 * step)
    assert abs(d - fd) <= 1e-5 * max(1.0, abs(d))
