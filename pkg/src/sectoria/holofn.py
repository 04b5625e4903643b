"""Vectorised expression trees for holomorphic functions on planar regions."""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence

import numpy as np

from .puiseux import ParseError, PuiseuxPoly, branch_arg

__all__ = [
    "ChartPullback",
    "ChartPushforward",
    "Component",
    "Const",
    "ExpPuiseux",
    "Expr",
    "FnNode",
    "HoloFn",
    "Poly",
    "PowerLog",
    "Product",
    "PuiseuxTerm",
    "Scale",
    "Sum",
    "complex_derivative",
    "parse_expr",
]


def _as_array(z) -> np.ndarray:
    return np.asarray(z, dtype=complex)


def _out(v, z):
    v = np.asarray(v, dtype=complex)
    if v.shape != np.shape(z):
        v = np.broadcast_to(v, np.shape(z)).copy()
    return complex(v) if v.ndim == 0 else v


class HoloFn:
    """A holomorphic function that can be evaluated on arrays of points."""

    label: str = "f"
    domain = None

    def _eval(self, z: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, z):
        z = _as_array(z)
        with np.errstate(over="ignore", invalid="ignore"):
            return _out(self._eval(z), z)

    def __add__(self, other):
        return Sum((self, _lift(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Sum((self, Scale(-1, _lift(other))))

    def __rsub__(self, other):
        return Sum((_lift(other), Scale(-1, self)))

    def __neg__(self):
        return Scale(-1, self)

    def __mul__(self, other):
        if np.isscalar(other):
            return Scale(complex(other), self)
        return Product((self, _lift(other)))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return False

    def __repr__(self):
        return f"<{type(self).__name__} {self.label}>"


def _lift(x) -> HoloFn:
    return x if isinstance(x, HoloFn) else Const(complex(x))


class Const(HoloFn):
    def __init__(self, c: complex):
        self.c = complex(c)
        self.label = repr(self.c) if self.c.imag else repr(self.c.real)

    def _eval(self, z):
        return np.full(z.shape, self.c)

    def is_zero(self):
        return self.c == 0


class Poly(HoloFn):
    """``sum coeffs[k] z^k``."""

    def __init__(self, coeffs: Sequence[complex]):
        self.coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
        self.label = "poly" + str(list(np.round(self.coeffs, 12)))

    def _eval(self, z):
        return np.polyval(self.coeffs[::-1], z) if len(self.coeffs) else np.zeros(z.shape, complex)

    def is_zero(self):
        return not np.any(self.coeffs)


class PuiseuxTerm(HoloFn):
    def __init__(self, p: PuiseuxPoly, branch_center: float = 0.0):
        self.p, self.bc = p, float(branch_center)
        self.label = str(p)

    def _eval(self, z):
        return self.p(z, self.bc)

    def is_zero(self):
        return self.p.is_zero()


class ExpPuiseux(HoloFn):
    """``exp(p(z))`` on the branch centred at ``branch_center``."""

    def __init__(self, p: PuiseuxPoly, branch_center: float = 0.0):
        self.p, self.bc = p, float(branch_center)
        self.label = f"exp({p})"

    def _eval(self, z):
        return np.exp(self.p(z, self.bc))


class PowerLog(HoloFn):
    """``z^rho (log z)^k`` with arguments continued around ``branch_center``."""

    def __init__(self, rho: complex, k: int = 0, branch_center: float = 0.0):
        self.rho, self.k, self.bc = complex(rho), int(k), float(branch_center)
        self.label = f"z^{self.rho}*log(z)^{self.k}"

    def _eval(self, z):
        lg = np.log(np.abs(z)) + 1j * branch_arg(z, self.bc)
        return np.exp(self.rho * lg) * lg**self.k


class Sum(HoloFn):
    def __init__(self, children: Sequence[HoloFn]):
        self.children = tuple(children)
        self.label = " + ".join(c.label for c in self.children)

    def _eval(self, z):
        out = np.zeros(z.shape, complex)
        for c in self.children:
            out = out + c._eval(z)
        return out

    def is_zero(self):
        return all(c.is_zero() for c in self.children)


class Product(HoloFn):
    def __init__(self, children: Sequence[HoloFn]):
        self.children = tuple(children)
        self.label = "*".join(f"({c.label})" for c in self.children)

    def _eval(self, z):
        out = np.ones(z.shape, complex)
        for c in self.children:
            out = out * c._eval(z)
        return out

    def is_zero(self):
        return any(c.is_zero() for c in self.children)


class Scale(HoloFn):
    def __init__(self, c: complex, inner: HoloFn):
        self.c, self.inner = complex(c), inner
        self.label = f"{self.c}*({inner.label})"

    def _eval(self, z):
        return self.c * self.inner._eval(z)

    def is_zero(self):
        return self.c == 0 or self.inner.is_zero()


class ChartPullback(HoloFn):
    """``inner(chart(w))``."""

    def __init__(self, chart, inner: HoloFn):
        self.chart, self.inner = chart, inner
        self.label = f"({inner.label})∘phi"

    def _eval(self, w):
        return self.inner._eval(_as_array(self.chart(w)))

    def is_zero(self):
        return self.inner.is_zero()


class ChartPushforward(HoloFn):
    """``inner(chart^{-1}(z))`` with the preimage taken in ``sector``; NaN off the image."""

    def __init__(self, chart, sector, inner: HoloFn):
        self.chart, self.sector, self.inner = chart, sector, inner
        self.label = f"({inner.label})∘phi^-1"

    def _eval(self, z):
        w, ok = self.chart.invert(z, self.sector)
        out = np.full(z.shape, np.nan + 0j)
        if np.any(ok):
            out[ok] = self.inner._eval(w[ok])
        return out


class FnNode(HoloFn):
    """Wrap a vectorised callable (closed forms, solver handles)."""

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], label: str = "fn", zero: bool = False):
        self.fn, self.label, self._zero = fn, label, zero

    def _eval(self, z):
        return np.asarray(self.fn(z), dtype=complex)

    def is_zero(self):
        return self._zero


class Component(HoloFn):
    """Entry ``k`` of a vector-valued evaluator returning shape ``(m,) + z.shape``."""

    def __init__(self, parent, k: int, label: str | None = None):
        self.parent, self.k = parent, int(k)
        self.label = label or f"{getattr(parent, 'label', 'u')}[{k}]"

    def _eval(self, z):
        return self.parent.evaluate(z)[self.k]

    def is_zero(self):
        return bool(getattr(self.parent, "is_zero", lambda: False)())


def _syntax_offset(text: str) -> int:
    """Position in ``text`` of the first syntax error Python reports (0 if none)."""
    import ast

    py = text.replace("^", "**")
    try:
        ast.parse(py, mode="eval")
        return 0
    except SyntaxError as exc:
        off = max((exc.offset or 1) - 1, 0)
    # map back across the "^" -> "**" rewrite
    pos = i = 0
    while i < off and pos < len(text):
        i += 2 if text[pos] == "^" else 1
        pos += 1
    return pos


class Expr(HoloFn):
    """A closed-form expression in ``z`` parsed with sympy."""

    def __init__(self, text: str):
        import sympy as sp

        self.text = text.strip()
        z = sp.Symbol("z")
        try:
            expr = sp.sympify(self.text.replace("^", "**"), locals={"z": z, "i": sp.I, "I": sp.I})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ParseError(f"cannot parse expression {text!r}", self.text, _syntax_offset(self.text)) from exc
        extra = expr.free_symbols - {z}
        if extra:
            raise ValueError(f"expression {text!r} has unknown symbols {sorted(map(str, extra))}")
        self.expr = expr
        self._zero = expr == 0
        self._f = sp.lambdify(z, expr, modules="numpy")
        self.label = self.text

    def _eval(self, z):
        return np.asarray(self._f(z), dtype=complex)

    def is_zero(self):
        return bool(self._zero)


def parse_expr(text: str) -> HoloFn:
    return Expr(text)


_NODES = 16
_ROOTS = np.exp(2j * math.pi * np.arange(_NODES) / _NODES)


def complex_derivative(f: Callable, z, h):
    """Derivative of a holomorphic ``f`` by the trapezoid rule on ``|zeta - z| = h``.

    Exact up to terms of order ``(h/R)^16`` when ``f`` is holomorphic on a disc
    of radius ``R`` around ``z``.  ``f`` may return a leading component axis.
    """
    z = _as_array(z)
    h = np.broadcast_to(np.asarray(h, dtype=float), z.shape)
    pts = z[..., None] + h[..., None] * _ROOTS
    vals = np.asarray(f(pts))
    return np.mean(vals * np.conj(_ROOTS), axis=-1) / h
