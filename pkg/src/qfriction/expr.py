"""Minimal computer-algebra kernel over phase-space variables.

Expressions are immutable trees built through the smart constructors
:func:`add`, :func:`mul` and :func:`power` (or the overloaded Python
operators).  The constructors perform best-effort simplification: constant
folding, flattening, merging powers of a common base and collecting like
terms.  Nothing downstream relies on a canonical form; zero tests are done
numerically by :func:`is_zero_numeric`.

Evaluation is generic over an *algebra* so the same tree can be evaluated
on numpy arrays, in extended precision with mpmath, or on truncated power
series in one variable (used for order-by-order series coefficients).
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, NamedTuple, Sequence

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Add", "Mul", "Pow", "UFunc",
    "ExprError", "UnboundSymbolError", "DomainError",
    "const", "var", "ufunc", "add", "mul", "power", "sqrt", "neg", "sub", "div",
    "differentiate", "derivative", "substitute", "conjugate", "evaluate",
    "series_coefficients", "hbar_series_coefficient", "is_zero_numeric",
    "SampleSpec", "ZeroCheck", "additive_terms",
    "ZERO", "ONE", "I", "HBAR",
]


class ExprError(Exception):
    pass


class UnboundSymbolError(ExprError, KeyError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Non-positive radicand or zero raised to a negative power.

    ``index`` holds the flat sample indices where the failure occurred when
    evaluating on arrays; ``point`` is filled in by callers that know the
    sample coordinates.
    """

    def __init__(self, msg, index=None, point=None):
        super().__init__(msg)
        self.index = index
        self.point = point


def _name_hash(name: str) -> int:
    # str hashes are salted per process; crc32 keeps ordering reproducible
    return zlib.crc32(name.encode())


class Expr:
    __slots__ = ("_hash", "_free", "_dcache", "_order", "__weakref__")
    children: tuple = ()

    def _init(self, h):
        self._hash = h
        self._dcache = {}
        self._order = None
        free = frozenset()
        for c in self.children:
            free |= c._free
        self._free = free

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return self._payload() == other._payload()

    def __ne__(self, other):
        return not self == other

    @property
    def free_symbols(self) -> frozenset:
        return self._free

    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.re == 0 and self.im == 0

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return add(self, neg(o))

    def __rsub__(self, o):
        return add(o, neg(self))

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, e):
        return power(self, e)

    def __repr__(self):
        return f"Expr({self})"


class Const(Expr):
    __slots__ = ("re", "im")

    def __init__(self, re: Fraction, im: Fraction = Fraction(0)):
        self.re = re
        self.im = im
        self._init(hash((1, re, im)))

    def _payload(self):
        return (self.re, self.im)

    @property
    def value(self) -> complex:
        return complex(float(self.re), float(self.im))

    def is_real(self):
        return self.im == 0

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*I"
        return f"({self.re}+{self.im}*I)"


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._init(hash((2, _name_hash(name))))
        self._free = frozenset((name,))

    def _payload(self):
        return self.name

    def __str__(self):
        return self.name


class Add(Expr):
    __slots__ = ("children",)

    def __init__(self, terms: tuple):
        self.children = terms
        self._init(hash((3,) + tuple(t._hash for t in terms)))

    def _payload(self):
        return self.children

    def __str__(self):
        return "(" + " + ".join(str(t) for t in self.children) + ")"


class Mul(Expr):
    __slots__ = ("children",)

    def __init__(self, factors: tuple):
        self.children = factors
        self._init(hash((4,) + tuple(f._hash for f in factors)))

    def _payload(self):
        return self.children

    def __str__(self):
        return "*".join(_paren(f) for f in self.children)


class Pow(Expr):
    __slots__ = ("children", "exp")

    def __init__(self, base: Expr, exp: Fraction):
        self.children = (base,)
        self.exp = exp
        self._init(hash((5, base._hash, exp)))

    @property
    def base(self) -> Expr:
        return self.children[0]

    def _payload(self):
        return (self.children, self.exp)

    def __str__(self):
        b = self.base
        return f"({b})^({self.exp})" if isinstance(b, (Add, Mul)) else f"{b}^({self.exp})"


class UFunc(Expr):
    """Uninterpreted function of named variables with a formal derivative multi-index."""

    __slots__ = ("name", "args", "orders")

    def __init__(self, name: str, args: tuple, orders: tuple):
        self.name = name
        self.args = args
        self.orders = orders
        self._init(hash((6, _name_hash(name)) + tuple(_name_hash(a) for a in args) + orders))
        self._free = frozenset(args)

    def _payload(self):
        return (self.name, self.args, self.orders)

    def __str__(self):
        d = "".join(f"_{a}{o}" for a, o in zip(self.args, self.orders) if o)
        return f"{self.name}{d}({','.join(self.args)})"


def _paren(e):
    return f"({e})" if isinstance(e, Add) else str(e)


# ---------------------------------------------------------------- constants

def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, (float, np.floating)):
        if not math.isfinite(v):
            raise ValueError(f"non-finite constant {v}")
        return Fraction(float(v))
    raise TypeError(f"cannot make a rational from {v!r}")


def const(v) -> Const:
    if isinstance(v, Const):
        return v
    if isinstance(v, (complex, np.complexfloating)):
        return Const(_frac(v.real), _frac(v.imag))
    if isinstance(v, tuple):
        return Const(_frac(v[0]), _frac(v[1]))
    return Const(_frac(v))


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
I = Const(Fraction(0), Fraction(1))
HBAR = Var("hbar")


def var(name: str) -> Var:
    return Var(name)


def ufunc(name: str, args: Sequence[str], orders: Sequence[int] | None = None) -> UFunc:
    args = tuple(args)
    orders = tuple(orders) if orders is not None else (0,) * len(args)
    if len(orders) != len(args):
        raise ValueError("derivative multi-index must match the argument list")
    return UFunc(name, args, orders)


def _as_expr(v) -> Expr:
    return v if isinstance(v, Expr) else const(v)


def _cmul(a: Const, b: Const) -> Const:
    return Const(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)


def _cinv(a: Const) -> Const:
    d = a.re * a.re + a.im * a.im
    if d == 0:
        raise DomainError("zero raised to a negative power")
    return Const(a.re / d, -a.im / d)


def _cpow_int(a: Const, n: int) -> Const:
    if n < 0:
        a, n = _cinv(a), -n
    out = ONE
    while n:
        if n & 1:
            out = _cmul(out, a)
        a = _cmul(a, a)
        n >>= 1
    return out


def _rational_root(q: Fraction, e: Fraction):
    """Exact q**e for positive rational q when the result is rational, else None."""
    num, den = q.numerator, q.denominator
    k = e.denominator
    rn = round(num ** (1.0 / k)) if num < 2**900 else None
    rd = round(den ** (1.0 / k)) if den < 2**900 else None
    if rn is None or rd is None:
        return None
    for cn in (rn - 1, rn, rn + 1):
        if cn > 0 and cn**k == num:
            for cd in (rd - 1, rd, rd + 1):
                if cd > 0 and cd**k == den:
                    return Fraction(cn, cd) ** e.numerator
    return None


# -------------------------------------------------------- smart constructors

def _split_coeff(t: Expr):
    """term -> (numeric coefficient, remaining monomial or None)."""
    if isinstance(t, Const):
        return t, None
    if isinstance(t, Mul) and isinstance(t.children[0], Const):
        rest = t.children[1:]
        return t.children[0], (rest[0] if len(rest) == 1 else Mul(rest))
    return ONE, t


def add(*terms) -> Expr:
    flat = []
    stack = [_as_expr(t) for t in reversed(terms)]
    while stack:
        t = stack.pop()
        if isinstance(t, Add):
            stack.extend(reversed(t.children))
        elif (isinstance(t, Mul) and len(t.children) == 2 and isinstance(t.children[0], Const)
              and isinstance(t.children[1], Add)):
            c = t.children[0]
            stack.extend(mul(c, u) for u in reversed(t.children[1].children))
        elif not t.is_zero():
            flat.append(t)
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    cre, cim = Fraction(0), Fraction(0)
    groups: dict = {}
    for t in flat:
        c, rest = _split_coeff(t)
        if rest is None:
            cre += c.re
            cim += c.im
            continue
        prev = groups.get(rest)
        groups[rest] = c if prev is None else Const(prev.re + c.re, prev.im + c.im)
    out = []
    for rest, c in groups.items():
        if c.is_zero():
            continue
        out.append(rest if (c.re == 1 and c.im == 0) else _mul_coeff(c, rest))
    out.sort(key=lambda e: e._hash)
    if cre or cim:
        out.insert(0, Const(cre, cim))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(tuple(out))


def _mul_coeff(c: Const, rest: Expr) -> Expr:
    if isinstance(rest, Mul):
        return Mul((c,) + rest.children)
    return Mul((c, rest))


def mul(*factors) -> Expr:
    coeff = ONE
    groups: dict = {}
    order = []
    stack = [_as_expr(f) for f in reversed(factors)]
    while stack:
        f = stack.pop()
        if isinstance(f, Const):
            if f.is_zero():
                return ZERO
            coeff = _cmul(coeff, f)
            continue
        if isinstance(f, Mul):
            stack.extend(reversed(f.children))
            continue
        if isinstance(f, Pow):
            base, e = f.base, f.exp
        else:
            base, e = f, Fraction(1)
        if base in groups:
            groups[base] += e
        else:
            groups[base] = e
            order.append(base)
    out = []
    reflatten = False
    for base in order:
        e = groups[base]
        if e == 0:
            continue
        if e == 1:
            reflatten = reflatten or isinstance(base, Mul)
            out.append(base)
            continue
        p = power(base, e)
        if isinstance(p, Const):
            coeff = _cmul(coeff, p)
            continue
        if isinstance(p, Mul) or (isinstance(p, Pow) and p.base != base):
            # distribution or exponent merging exposed new factors
            reflatten = True
        out.append(p)
    if reflatten:
        return mul(coeff, *out)
    if coeff.is_zero():
        return ZERO
    out.sort(key=lambda e: e._hash)
    if not out:
        return coeff
    if coeff.re == 1 and coeff.im == 0:
        return out[0] if len(out) == 1 else Mul(tuple(out))
    return Mul((coeff,) + tuple(out))


def power(base, exp) -> Expr:
    base = _as_expr(base)
    e = exp if isinstance(exp, Fraction) else _frac(exp)
    if e == 0:
        return ONE
    if e == 1:
        return base
    if isinstance(base, Const):
        if base.is_zero():
            if e < 0:
                raise DomainError("zero raised to a negative power")
            return ZERO
        if e.denominator == 1:
            return _cpow_int(base, int(e))
        if base.im == 0 and base.re > 0:
            r = _rational_root(base.re, e)
            if r is not None:
                return Const(r)
        return Pow(base, e)
    if isinstance(base, Pow) and e.denominator == 1:
        return power(base.base, base.exp * e)
    if isinstance(base, Mul) and e.denominator == 1:
        return mul(*[power(f, e) for f in base.children])
    return Pow(base, e)


def sqrt(e) -> Expr:
    return power(e, Fraction(1, 2))


def neg(e) -> Expr:
    return mul(const(-1), e)


def sub(a, b) -> Expr:
    return add(a, neg(b))


def div(a, b) -> Expr:
    return mul(a, power(b, -1))


def additive_terms(e: Expr) -> tuple:
    return e.children if isinstance(e, Add) else (e,)


# ----------------------------------------------------------- differentiation

def differentiate(e: Expr, v: str | Var) -> Expr:
    """Exact partial derivative of ``e`` with respect to the variable ``v``."""
    name = v.name if isinstance(v, Var) else v
    return _diff(e, name)


def _diff(e: Expr, v: str) -> Expr:
    if v not in e._free:
        return ZERO
    hit = e._dcache.get(v)
    if hit is not None:
        return hit
    if isinstance(e, Var):
        out = ONE
    elif isinstance(e, Add):
        out = add(*[_diff(t, v) for t in e.children])
    elif isinstance(e, Mul):
        fs = e.children
        terms = []
        for i, f in enumerate(fs):
            df = _diff(f, v)
            if df.is_zero():
                continue
            terms.append(mul(*fs[:i], df, *fs[i + 1:]))
        out = add(*terms)
    elif isinstance(e, Pow):
        db = _diff(e.base, v)
        out = mul(const(e.exp), power(e.base, e.exp - 1), db)
    elif isinstance(e, UFunc):
        terms = []
        for i, a in enumerate(e.args):
            if a == v:
                orders = list(e.orders)
                orders[i] += 1
                terms.append(UFunc(e.name, e.args, tuple(orders)))
        out = add(*terms)
    else:  # pragma: no cover
        raise TypeError(type(e))
    e._dcache[v] = out
    return out


def derivative(e: Expr, *orders: tuple) -> Expr:
    """Repeated partials, e.g. ``derivative(e, ("p", 2), ("x", 1))``."""
    for name, k in orders:
        for _ in range(k):
            e = _diff(e, name)
    return e


def substitute(e: Expr, v: str | Var, r) -> Expr:
    """Replace every occurrence of variable ``v`` by ``r``."""
    name = v.name if isinstance(v, Var) else v
    r = _as_expr(r)
    memo: dict = {}

    def go(n):
        if name not in n._free:
            return n
        key = id(n)
        if key in memo:
            return memo[key]
        if isinstance(n, Var):
            out = r
        elif isinstance(n, Add):
            out = add(*[go(c) for c in n.children])
        elif isinstance(n, Mul):
            out = mul(*[go(c) for c in n.children])
        elif isinstance(n, Pow):
            out = power(go(n.base), n.exp)
        elif isinstance(n, UFunc):
            raise ExprError(f"cannot substitute argument {name!r} of function {n.name}")
        else:  # pragma: no cover
            raise TypeError(type(n))
        memo[key] = out
        return out

    return _iterative(e, go, name)


def _iterative(e, go, name):
    # warm the memo bottom-up so deep trees do not hit the recursion limit
    for n in _postorder(e):
        if name in n._free and not isinstance(n, UFunc):
            go(n)
    return go(e)


def conjugate(e: Expr) -> Expr:
    """Complex conjugate assuming every variable and function is real-valued.

    Valid for fractional powers only off the negative real axis, which the
    positive-radicand domain guarantees.
    """
    memo: dict = {}
    for n in _postorder(e):
        if isinstance(n, Const):
            out = Const(n.re, -n.im)
        elif isinstance(n, (Var, UFunc)):
            out = n
        elif isinstance(n, Add):
            out = add(*[memo[id(c)] for c in n.children])
        elif isinstance(n, Mul):
            out = mul(*[memo[id(c)] for c in n.children])
        else:
            out = power(memo[id(n.base)], n.exp)
        memo[id(n)] = out
    return memo[id(e)]


# ----------------------------------------------------------------- evaluation

def _postorder(root: Expr) -> list:
    if root._order is not None:
        return root._order
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for c in node.children:
            if id(c) not in seen:
                stack.append((c, False))
    root._order = order
    return order


def _run(e: Expr, alg) -> object:
    vals: dict = {}
    for n in _postorder(e):
        if isinstance(n, Add):
            v = alg.add([vals[id(c)] for c in n.children])
        elif isinstance(n, Mul):
            v = alg.mul([vals[id(c)] for c in n.children])
        elif isinstance(n, Pow):
            v = alg.pow(vals[id(n.base)], n.exp)
        else:
            v = alg.leaf(n)
        vals[id(n)] = v
    return vals[id(e)]


def _lookup(bindings, name):
    try:
        return bindings[name]
    except KeyError:
        raise UnboundSymbolError(f"unbound symbol {name!r}") from None


class _ArrayAlgebra:
    """Complex numpy arrays (or scalars) with broadcasting."""

    def __init__(self, bindings):
        self.b = bindings

    def leaf(self, n):
        if isinstance(n, Const):
            return n.value
        if isinstance(n, Var):
            return np.asarray(_lookup(self.b, n.name), dtype=complex)
        fn = _lookup(self.b, n.name)
        args = tuple(np.asarray(_lookup(self.b, a), dtype=float) for a in n.args)
        return np.asarray(fn(args, n.orders), dtype=complex)

    def add(self, vs):
        out = vs[0]
        for v in vs[1:]:
            out = out + v
        return out

    def mul(self, vs):
        out = vs[0]
        for v in vs[1:]:
            out = out * v
        return out

    def pow(self, b, e: Fraction):
        b = np.asarray(b, dtype=complex)
        if e.denominator == 1:
            k = int(e)
            if k < 0:
                bad = b == 0
                if np.any(bad):
                    raise DomainError("zero raised to a negative power", index=np.flatnonzero(bad))
                return 1.0 / b ** (-k)
            return b**k
        re = b.real
        bad = (re <= 0) | (np.abs(b.imag) > 1e-12 * np.abs(re))
        if np.any(bad):
            raise DomainError(f"fractional power {e} of a non-positive radicand",
                              index=np.flatnonzero(np.atleast_1d(bad)))
        return (re ** float(e)).astype(complex)


class _MpAlgebra:
    """Scalar extended-precision evaluation with mpmath."""

    def __init__(self, bindings, mp):
        self.b = bindings
        self.mp = mp

    def leaf(self, n):
        mp = self.mp
        if isinstance(n, Const):
            return mp.mpc(mp.mpf(n.re.numerator) / n.re.denominator,
                          mp.mpf(n.im.numerator) / n.im.denominator)
        if isinstance(n, Var):
            return mp.mpc(_lookup(self.b, n.name))
        fn = _lookup(self.b, n.name)
        args = tuple(_lookup(self.b, a) for a in n.args)
        return mp.mpc(fn(args, n.orders))

    def add(self, vs):
        return self.mp.fsum(vs)

    def mul(self, vs):
        out = vs[0]
        for v in vs[1:]:
            out = out * v
        return out

    def pow(self, b, e: Fraction):
        mp = self.mp
        if e.denominator == 1:
            if b == 0 and e < 0:
                raise DomainError("zero raised to a negative power")
            return b ** int(e)
        if b.real <= 0 or abs(b.imag) > mp.mpf(10) ** (-mp.dps + 5) * abs(b.real):
            raise DomainError(f"fractional power {e} of a non-positive radicand")
        return mp.mpc(mp.power(b.real, mp.mpf(e.numerator) / e.denominator))


class _JetAlgebra:
    """Truncated power series in one variable, coefficients over sample arrays.

    A value is an array of shape (K, S): coefficient k of (v - v0)**k at each
    of S sample points.
    """

    def __init__(self, bindings, name, at, K, S):
        self.b = bindings
        self.name = name
        self.at = at
        self.K = K
        self.S = S

    def _lift(self, v):
        out = np.zeros((self.K, self.S), dtype=complex)
        out[0] = v
        return out

    def leaf(self, n):
        if isinstance(n, Const):
            return self._lift(n.value)
        if isinstance(n, Var):
            if n.name == self.name:
                out = self._lift(self.at)
                if self.K > 1:
                    out[1] = 1.0
                return out
            return self._lift(np.asarray(_lookup(self.b, n.name), dtype=complex))
        fn = _lookup(self.b, n.name)
        pt = {a: (self.at if a == self.name else _lookup(self.b, a)) for a in n.args}
        args = tuple(np.asarray(pt[a], dtype=float) for a in n.args)
        if self.name not in n.args:
            return self._lift(fn(args, n.orders))
        out = np.zeros((self.K, self.S), dtype=complex)
        idx = n.args.index(self.name)
        for k in range(self.K):
            orders = list(n.orders)
            orders[idx] += k
            out[k] = np.asarray(fn(args, tuple(orders))) / math.factorial(k)
        return out

    def add(self, vs):
        out = vs[0].copy()
        for v in vs[1:]:
            out += v
        return out

    def _mul2(self, a, b):
        K = self.K
        out = a[0] * b
        for k in range(1, K):
            out[k:] += a[k] * b[: K - k]
        return out

    def mul(self, vs):
        out = vs[0]
        for v in vs[1:]:
            out = self._mul2(out, v)
        return out

    def pow(self, f, e: Fraction):
        K = self.K
        if e.denominator == 1 and e >= 0:
            k = int(e)
            out, base = None, f
            while k:
                if k & 1:
                    out = base if out is None else self._mul2(out, base)
                k >>= 1
                if k:
                    base = self._mul2(base, base)
            return out
        f0 = f[0]
        if e.denominator == 1:
            bad = f0 == 0
            if np.any(bad):
                raise DomainError("zero raised to a negative power", index=np.flatnonzero(bad))
            g0 = f0 ** int(e)
        else:
            re = f0.real
            bad = (re <= 0) | (np.abs(f0.imag) > 1e-12 * np.abs(re))
            if np.any(bad):
                raise DomainError(f"fractional power {e} of a non-positive radicand",
                                  index=np.flatnonzero(bad))
            g0 = (re ** float(e)).astype(complex)
        g = np.zeros_like(f)
        g[0] = g0
        r = float(e)
        for k in range(1, K):
            acc = np.zeros(self.S, dtype=complex)
            for j in range(1, k + 1):
                acc += (r * j - (k - j)) * f[j] * g[k - j]
            g[k] = acc / (k * f0)
        return g


class _Magnitude:
    """Pairs (value, majorant): the majorant sums absolute values of addends
    at every level, giving the round-off scale of an evaluation."""

    def __init__(self, base):
        self.base = base

    def leaf(self, n):
        v = self.base.leaf(n)
        return v, np.abs(v)

    def add(self, vs):
        return self.base.add([v for v, _ in vs]), sum(m for _, m in vs)

    def mul(self, vs):
        val = self.base.mul([v for v, _ in vs])
        mag = vs[0][1]
        for _, m in vs[1:]:
            mag = self._mmul(mag, m)
        return val, mag

    def _mmul(self, a, b):
        if isinstance(self.base, _JetAlgebra):
            return self.base._mul2(a.astype(complex), b.astype(complex)).real
        return a * b

    def pow(self, vm, e):
        v = self.base.pow(vm[0], e)
        return v, np.abs(v)


def evaluate(e: Expr, bindings: Mapping, dps: int | None = None):
    """Numeric value of ``e`` under ``bindings``.

    ``bindings`` maps variable names to numbers (or numpy arrays, evaluated
    elementwise) and function names to callables ``f(args, orders)``.  With
    ``dps`` the evaluation runs in mpmath at that many decimal digits and
    returns an ``mpc``.
    """
    if dps is not None:
        import mpmath

        with mpmath.workdps(dps):
            return _run(e, _MpAlgebra(bindings, mpmath.mp))
    out = _run(e, _ArrayAlgebra(bindings))
    out = np.asarray(out, dtype=complex)
    return complex(out) if out.ndim == 0 else out


def series_coefficients(e: Expr, name: str, order: int, bindings: Mapping, at: float = 0.0,
                        size: int | None = None, magnitude: bool = False):
    """Taylor coefficients 0..order of ``e`` in variable ``name`` about ``at``.

    Evaluated numerically by truncated series arithmetic at the (array)
    values in ``bindings``.  Returns an array of shape (order+1, S); with
    ``magnitude`` also the term-magnitude majorant of the same shape.
    """
    if size is None:
        sizes = [np.size(v) for k, v in bindings.items() if not callable(v)]
        size = max(sizes) if sizes else 1
    jet = _JetAlgebra(bindings, name, at, order + 1, size)
    if magnitude:
        v, m = _run(e, _Magnitude(jet))
        return np.broadcast_to(v, (order + 1, size)), np.broadcast_to(m, (order + 1, size))
    return np.broadcast_to(_run(e, jet), (order + 1, size))


def hbar_series_coefficient(e: Expr, n: int, v: str | Var = HBAR) -> Expr:
    """Symbolic coefficient of v**n in the Taylor expansion of ``e`` about v=0."""
    if n < 0:
        raise ValueError("order must be nonnegative")
    name = v.name if isinstance(v, Var) else v
    d = e
    for _ in range(n):
        d = _diff(d, name)
    return mul(Fraction(1, math.factorial(n)), substitute(d, name, ZERO))


# ----------------------------------------------------------- zero testing

@dataclass
class SampleSpec:
    """Random sample domain for numeric identity checks."""

    count: int = 20
    intervals: dict = field(default_factory=lambda: {"x": (-5.0, 5.0), "p": (0.1, 5.0)})
    seed: int = 0
    atol: float = 1e-9
    rtol: float = 1e-9

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("sample count must be positive")
        for name, (lo, hi) in self.intervals.items():
            if not lo < hi:
                raise ValueError(f"empty interval for {name}: [{lo}, {hi}]")

    def sample(self) -> dict:
        rng = np.random.default_rng(self.seed)
        return {name: rng.uniform(lo, hi, self.count)
                for name, (lo, hi) in sorted(self.intervals.items())}


class ZeroCheck(NamedTuple):
    ok: bool
    max_abs: float
    worst_point: dict


def point_at(samples: Mapping, i: int) -> dict:
    return {k: float(np.atleast_1d(v)[i]) for k, v in samples.items()}


def is_zero_numeric(e: Expr, spec: SampleSpec, bindings: Mapping | None = None) -> ZeroCheck:
    """Randomized zero test.

    ``e`` passes if at every sample ``|e| <= atol + rtol * scale`` where
    ``scale`` is the sum of magnitudes of its additive terms at all levels.
    """
    pts = spec.sample()
    b = dict(bindings or {})
    b.update(pts)
    try:
        val, mag = _run(e, _Magnitude(_ArrayAlgebra(b)))
    except DomainError as err:
        if err.index is not None and len(err.index):
            err.point = point_at(pts, int(err.index[0]))
            err.args = (f"{err.args[0]} at {err.point}",)
        raise
    val = np.broadcast_to(np.abs(val), (spec.count,))
    mag = np.broadcast_to(mag, (spec.count,))
    ok = bool(np.all(val <= spec.atol + spec.rtol * mag))
    i = int(np.argmax(val))
    return ZeroCheck(ok, float(val[i]), point_at(pts, i))
