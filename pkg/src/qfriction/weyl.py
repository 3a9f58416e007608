"""Periodic coordinate grid and Weyl quantization of phase-space symbols."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
import numpy.polynomial.polynomial as npoly

from .expr import Expr, evaluate
from .friction import SIGMA, FrictionSymbols, PhysParams, build_exact_symbols

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice of cell centres x_j = x_min + (j + 1/2) dx.

    Cell centring makes the lattice mirror-symmetric about the middle of
    [x_min, x_max], so parity maps grid points onto grid points.
    """

    n: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of two, got {self.n}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * (np.arange(self.n) + 0.5)

    def dp(self, hbar: float) -> float:
        return 2 * math.pi * hbar / self.length

    def p(self, hbar: float) -> np.ndarray:
        """Momentum lattice in increasing order, k = -n/2 .. n/2-1."""
        return self.dp(hbar) * np.arange(-self.n // 2, self.n // 2)

    def p_max(self, hbar: float) -> float:
        return math.pi * hbar * self.n / self.length

    def plane_wave(self, k: int, hbar: float) -> np.ndarray:
        return np.exp(1j * self.dp(hbar) * k * self.x / hbar)


class SymbolEvaluator:
    """Evaluate a branch-form expression at signed momenta.

    ``p`` is bound to ``|p|`` and ``sigma`` to ``sign(p)`` with sign(0) = 0.
    """

    def __init__(self, expr: Expr, bindings: Mapping):
        self.expr = expr
        self.bindings = dict(bindings)

    def __call__(self, x, p):
        x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
        b = dict(self.bindings)
        b.update(x=x, p=np.abs(p), sigma=np.sign(p))
        return np.broadcast_to(evaluate(self.expr, b), x.shape)


def symbol_evaluator(expr: Expr, params: PhysParams) -> SymbolEvaluator:
    return SymbolEvaluator(expr, params.bindings())


def weyl_quantize(f: Callable, grid: Grid, hbar: float) -> np.ndarray:
    """Kernel matrix of the Weyl operator with symbol ``f(x, p)``.

    M[j,k] = (1/n) sum_m exp(i p_m (x_j - x_k)/hbar) f((x_j + x_k)/2, p_m);
    the sum over m is an inverse FFT for each of the 2n-1 midpoints.

    On the lattice the momenta +p_N and -p_N at the Nyquist edge are the same
    plane wave, so that column holds the mean of f at both.  This keeps the
    map parity-covariant: a symbol odd in p gives the Nyquist mode eigenvalue 0.
    """
    n = grid.n
    mid = grid.x_min + 0.5 * grid.dx * (np.arange(2 * n - 1) + 1)
    pm = grid.dp(hbar) * np.fft.fftfreq(n, d=1.0 / n)
    F = np.array(f(mid[:, None], pm[None, :]), dtype=complex)
    ny = n // 2
    F[:, ny] = 0.5 * (F[:, ny] + np.asarray(f(mid, np.full_like(mid, -pm[ny]))))
    bad = ~np.isfinite(F)
    if bad.any():
        s, m = np.argwhere(bad)[0]
        raise ValueError(f"symbol is not finite at x={mid[s]:g}, p={pm[m]:g}")
    G = np.fft.ifft(F, axis=1)
    j, k = np.indices((n, n))
    M = G[j + k, (j - k) % n]
    M.setflags(write=False)
    return M


def hermiticity_error(M: np.ndarray) -> float:
    nrm = np.linalg.norm(M)
    return float(np.linalg.norm(M - M.conj().T) / nrm) if nrm else 0.0


@dataclass(frozen=True)
class Potential:
    """U(x): free, harmonic m omega^2 x^2 / 2, or a polynomial with ascending ``coeffs``."""

    kind: str = "free"
    omega: float = 1.0
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("free", "harmonic", "poly"):
            raise ValueError(f"unknown potential type {self.kind!r}")
        if self.kind == "poly" and not self.coeffs:
            raise ValueError("polynomial potential needs coefficients")

    def _poly(self, m: float) -> np.ndarray:
        if self.kind == "free":
            return np.zeros(2)
        if self.kind == "harmonic":
            return np.array([0.0, 0.0, 0.5 * m * self.omega**2])
        return np.append(np.asarray(self.coeffs, dtype=float), 0.0)

    def U(self, x, m: float = 1.0):
        return npoly.polyval(x, self._poly(m))

    def dU(self, x, m: float = 1.0):
        return npoly.polyval(x, npoly.polyder(self._poly(m)))


def hamiltonian(grid: Grid, params: PhysParams, potential: Potential = Potential()) -> np.ndarray:
    m = params.m
    H = np.array(weyl_quantize(lambda x, p: p**2 / (2 * m) + 0 * x, grid, params.hbar))
    H[np.diag_indices(grid.n)] += potential.U(grid.x, m)
    H.setflags(write=False)
    return H


def observable_suite(grid: Grid, params: PhysParams, sym: FrictionSymbols | None = None,
                     potential: Potential = Potential()) -> dict:
    """Operators for every expectation value the Ehrenfest relations involve."""
    if sym is None:
        sym = build_exact_symbols(params, SIGMA)
    h, m = params.hbar, params.m
    dU = lambda x: potential.dU(x, m)  # noqa: E731
    symbols = {
        "x": lambda x, p: x + 0 * p,
        "p": lambda x, p: p + 0 * x,
        "x2": lambda x, p: x**2 + 0 * p,
        "xpsym": lambda x, p: 2 * x * p,
        "p2": lambda x, p: p**2 + 0 * x,
        "alpha": symbol_evaluator(sym.alpha, params),
        "beta": symbol_evaluator(sym.beta, params),
        "delta": symbol_evaluator(sym.delta, params),
        "absp": lambda x, p: np.abs(p) + 0 * x,
        "uprime": lambda x, p: dU(x) + 0 * p,
        "xuprime": lambda x, p: x * dU(x) + 0 * p,
        "puprime_sym": lambda x, p: 2 * p * dU(x),
    }
    suite = {}
    for name, f in symbols.items():
        M = weyl_quantize(f, grid, h)
        err = hermiticity_error(M)
        if err > HERMITIAN_TOL:
            raise ValueError(f"observable {name} is not Hermitian (relative error {err:.2e})")
        suite[name] = M
    return suite


def friction_operator(grid: Grid, params: PhysParams) -> np.ndarray:
    sym = build_exact_symbols(params, SIGMA)
    return weyl_quantize(symbol_evaluator(sym.A, params), grid, params.hbar)


def expectation(rho, M: np.ndarray) -> float:
    """Re Tr(M rho); raises if the imaginary part signals a broken state or operator."""
    r = rho.rho if hasattr(rho, "rho") else rho
    tr = np.sum(M * r.T)
    if abs(tr.imag) > 1e-6:
        raise ValueError(f"expectation has imaginary part {tr.imag:.3e}")
    return float(tr.real)
