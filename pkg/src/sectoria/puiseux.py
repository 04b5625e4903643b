"""Puiseux polynomials: finite sums c_k z^(k/d) with exact exponents.

Coefficients are complex doubles; exponents are kept as integer numerators
over a shared ramification denominator ``d`` so that all exponent
combinatorics stays exact.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "ParseError",
    "PuiseuxPoly",
    "TruncSeries",
    "branch_arg",
    "compose_chart",
    "format_coef",
    "format_puiseux",
    "lcm_ramification",
    "parse_puiseux",
    "puiseux_add",
    "puiseux_eval",
    "puiseux_mul",
    "series_exp",
    "series_pow1p",
]


class ParseError(ValueError):
    """Text could not be parsed; carries a 1-based line and column."""

    def __init__(self, message: str, text: str = "", pos: int = 0):
        before = text[:pos]
        self.line = before.count("\n") + 1
        self.column = pos - (before.rfind("\n") + 1) + 1
        super().__init__(f"{message} (line {self.line}, column {self.column})")


def branch_arg(z, branch_center: float = 0.0):
    """Argument of ``z`` taken in (branch_center - pi, branch_center + pi]."""
    z = np.asarray(z, dtype=complex)
    return branch_center + np.angle(z * np.exp(-1j * branch_center))


class PuiseuxPoly:
    """Immutable finite sum ``sum_k c_k z^(k/d)``.

    ``terms`` maps the integer numerator ``k`` to a nonzero complex
    coefficient.  The representation is canonical: ``d`` is reduced by the
    gcd of all numerators, and the zero polynomial has ``d == 1``.
    """

    __slots__ = ("_d", "_terms", "_hash")

    def __init__(self, terms: Mapping[int, complex] | None = None, d: int = 1):
        if int(d) != d or d < 1:
            raise ValueError(f"ramification denominator must be a positive integer, got {d!r}")
        d = int(d)
        clean = {}
        for k, c in (terms or {}).items():
            if int(k) != k:
                raise ValueError(f"exponent numerator must be an integer, got {k!r}")
            c = complex(c)
            if c != 0:
                clean[int(k)] = clean.get(int(k), 0) + c
        clean = {k: c for k, c in clean.items() if c != 0}
        if not clean:
            d = 1
        else:
            g = reduce(math.gcd, clean.keys(), d)
            if g > 1:
                d //= g
                clean = {k // g: c for k, c in clean.items()}
        self._d = d
        self._terms = dict(sorted(clean.items()))
        self._hash = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def monomial(cls, coef: complex, exponent) -> "PuiseuxPoly":
        e = Fraction(exponent)
        return cls({e.numerator: coef}, e.denominator)

    @classmethod
    def constant(cls, c: complex) -> "PuiseuxPoly":
        return cls({0: c}, 1)

    @classmethod
    def from_exponents(cls, pairs: Iterable[tuple[object, complex]]) -> "PuiseuxPoly":
        """Build from ``(exponent, coefficient)`` pairs with rational exponents."""
        pairs = [(Fraction(e), complex(c)) for e, c in pairs]
        d = reduce(lambda a, b: a * b // math.gcd(a, b), (e.denominator for e, _ in pairs), 1)
        terms: dict[int, complex] = {}
        for e, c in pairs:
            k = int(e * d)
            terms[k] = terms.get(k, 0) + c
        return cls(terms, d)

    # -- accessors -------------------------------------------------------------
    @property
    def d(self) -> int:
        return self._d

    @property
    def terms(self) -> dict[int, complex]:
        return dict(self._terms)

    def items(self):
        """Pairs ``(exponent: Fraction, coefficient)`` in ascending exponent order."""
        return [(Fraction(k, self._d), c) for k, c in self._terms.items()]

    def exponents(self) -> list[Fraction]:
        return [Fraction(k, self._d) for k in self._terms]

    def is_zero(self) -> bool:
        return not self._terms

    def leading(self) -> tuple[Fraction, complex]:
        """Most negative exponent and its coefficient; ``(0, 0)`` for zero."""
        if not self._terms:
            return Fraction(0), 0j
        k = next(iter(self._terms))
        return Fraction(k, self._d), self._terms[k]

    def constant_term(self) -> complex:
        return self._terms.get(0, 0j)

    def embed(self, d: int) -> dict[int, complex]:
        """Terms rewritten over denominator ``d`` (a multiple of ``self.d``)."""
        if d % self._d:
            raise ValueError(f"cannot embed denominator {self._d} into {d}")
        f = d // self._d
        return {k * f: c for k, c in self._terms.items()}

    # -- arithmetic ------------------------------------------------------------
    def _coerce(self, other) -> "PuiseuxPoly":
        if isinstance(other, PuiseuxPoly):
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return PuiseuxPoly.constant(complex(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        d = _lcm(self._d, other._d)
        terms = self.embed(d)
        for k, c in other.embed(d).items():
            terms[k] = terms.get(k, 0) + c
        return PuiseuxPoly(terms, d)

    __radd__ = __add__

    def __neg__(self):
        return PuiseuxPoly({k: -c for k, c in self._terms.items()}, self._d)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        d = _lcm(self._d, other._d)
        a, b = self.embed(d), other.embed(d)
        terms: dict[int, complex] = {}
        for k1, c1 in a.items():
            for k2, c2 in b.items():
                terms[k1 + k2] = terms.get(k1 + k2, 0) + c1 * c2
        return PuiseuxPoly(terms, d)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if int(n) != n or n < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = PuiseuxPoly.constant(1)
        for _ in range(int(n)):
            out = out * self
        return out

    def derivative(self) -> "PuiseuxPoly":
        return PuiseuxPoly({k - self._d: c * k / self._d for k, c in self._terms.items()}, self._d)

    def chop(self, tol: float = 1e-12) -> "PuiseuxPoly":
        """Drop coefficients below ``tol`` times the largest coefficient modulus."""
        if not self._terms:
            return self
        scale = max(abs(c) for c in self._terms.values())
        return PuiseuxPoly({k: c for k, c in self._terms.items() if abs(c) > tol * scale}, self._d)

    def principal_part(self) -> "PuiseuxPoly":
        return PuiseuxPoly({k: c for k, c in self._terms.items() if k < 0}, self._d)

    def substitute_power(self, l: int) -> "PuiseuxPoly":
        """``p(w^l)`` as a Puiseux polynomial in ``w``."""
        return PuiseuxPoly({k * l: c for k, c in self._terms.items()}, self._d)

    # -- evaluation ------------------------------------------------------------
    def __call__(self, z, branch_center: float = 0.0):
        return puiseux_eval(self, z, branch_center)

    # -- comparison ------------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PuiseuxPoly.constant(other)
        if not isinstance(other, PuiseuxPoly):
            return NotImplemented
        return self._d == other._d and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._d, tuple(self._terms.items())))
        return self._hash

    def isclose(self, other: "PuiseuxPoly", rtol: float = 1e-12, atol: float = 0.0) -> bool:
        """Same exponents, coefficients equal within tolerance."""
        d = _lcm(self._d, other._d)
        a, b = self.embed(d), other.embed(d)
        for k in set(a) | set(b):
            x, y = a.get(k, 0j), b.get(k, 0j)
            if abs(x - y) > atol + rtol * max(abs(x), abs(y)):
                return False
        return True

    def __repr__(self):
        return f"PuiseuxPoly({format_puiseux(self)!r})"

    def __str__(self):
        return format_puiseux(self)


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def puiseux_add(p: PuiseuxPoly, q: PuiseuxPoly) -> PuiseuxPoly:
    return p + q


def puiseux_mul(p: PuiseuxPoly, q: PuiseuxPoly) -> PuiseuxPoly:
    return p * q


def puiseux_eval(p: PuiseuxPoly, z, branch_center: float = 0.0):
    """Evaluate ``p`` at ``z`` with ``z^(1/d)`` on the branch centred at ``branch_center``.

    ``branch_center = 0`` is the branch that is real and positive on the
    positive real axis.  Works elementwise on arrays.
    """
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr == 0):
        raise ValueError("Puiseux polynomial evaluated at z = 0")
    scalar = z_arr.ndim == 0
    log_z = np.log(np.abs(z_arr)) + 1j * branch_arg(z_arr, branch_center)
    out = np.zeros(z_arr.shape, dtype=complex)
    for k, c in p._terms.items():
        if k == 0:
            out = out + c
        else:
            out = out + c * np.exp((k / p._d) * log_z)
    return complex(out) if scalar else out


def lcm_ramification(ps: Iterable[PuiseuxPoly]) -> int:
    return reduce(_lcm, (p.d for p in ps), 1)


# ---------------------------------------------------------------------------
# truncated power series helpers


def series_mul(a, b, n: int) -> np.ndarray:
    """Product of two power series truncated to ``n + 1`` coefficients."""
    return np.convolve(np.asarray(a, complex), np.asarray(b, complex))[: n + 1]


def series_exp(P, n: int) -> np.ndarray:
    """Coefficients of ``exp(P(w))`` up to ``w^n``."""
    P = np.zeros(n + 1, complex) if len(P) == 0 else np.asarray(P, complex)
    P = np.concatenate([P, np.zeros(max(0, n + 1 - len(P)), complex)])[: n + 1]
    f = np.zeros(n + 1, complex)
    f[0] = np.exp(P[0])
    for k in range(1, n + 1):
        j = np.arange(1, k + 1)
        f[k] = np.sum(j * P[j] * f[k - j]) / k
    return f


def series_pow1p(v, e, n: int) -> np.ndarray:
    """Coefficients of ``(1 + v(w))^e`` up to ``w^n`` for ``v(0) = 0``."""
    a = np.zeros(n + 1, complex)
    v = np.asarray(v, complex)
    a[: min(len(v), n + 1)] = v[: n + 1]
    if a[0] != 0:
        raise ValueError("series_pow1p needs v(0) = 0")
    a[0] = 1.0
    e = complex(e)
    f = np.zeros(n + 1, complex)
    f[0] = 1.0
    for k in range(1, n + 1):
        j = np.arange(1, k + 1)
        s = e * np.sum(j * a[j] * f[k - j])
        j2 = np.arange(1, k)
        s -= np.sum(a[j2] * (k - j2) * f[k - j2])
        f[k] = s / k
    return f


@dataclass(frozen=True)
class TruncSeries:
    """Truncated series ``sum_k c_k w^(k/d)`` with an optional remainder bound.

    ``tail_bound`` bounds the discarded remainder on ``{0 < |w| <= radius}``
    intersected with the chart's validity sector.
    """

    d: int
    order: int
    terms: dict = field(default_factory=dict)
    tail_bound: float | None = None
    radius: float | None = None

    def __post_init__(self):
        if any(k > self.order for k in self.terms):
            raise ValueError("stored exponent exceeds the truncation order")
        if self.tail_bound is not None and self.tail_bound < 0:
            raise ValueError("tail_bound must be nonnegative")

    def as_puiseux(self) -> PuiseuxPoly:
        return PuiseuxPoly(self.terms, self.d)

    def __call__(self, w, branch_center: float = 0.0):
        return puiseux_eval(self.as_puiseux(), w, branch_center)


def compose_chart(p: PuiseuxPoly, phi, order: int, branch_center: float = 0.0):
    """Split ``p(phi(w))`` into a principal part and a nonnegative-exponent tail.

    ``phi(w) = w^c u(w)`` with ``u(0) != 0``.  Each term ``a z^e`` becomes
    ``a u(0)^e w^(c e) (1 + v(w))^e`` with ``v = u/u(0) - 1`` expanded by the
    binomial series to ``order`` terms.  ``branch_center`` is the z-plane
    branch used to evaluate ``p``; the w-plane branch is centred on the
    chart's validity bisector.

    Returns ``(principal, tail)`` where ``tail.tail_bound`` bounds
    ``|p(phi(w)) - principal(w) - tail(w)|`` on the validity sector.
    """
    coeffs = np.asarray(phi.coeffs, complex)
    nz = np.flatnonzero(coeffs)
    if len(nz) == 0 or nz[0] == 0:
        raise ValueError("ill-posed chart: need phi(0) = 0 and a nonzero leading coefficient")
    c = int(nz[0])
    u = coeffs[c:]
    u0 = u[0]
    v = u / u0
    v[0] = 0.0
    sector = phi.validity
    # u(0)^e on the branch that keeps arg phi(w) inside the z-branch window
    a0 = float(np.angle(u0))
    a0 += 2 * math.pi * round((branch_center - (c * sector.tau + a0)) / (2 * math.pi))
    log_u0 = math.log(abs(u0)) + 1j * a0

    d = p.d
    principal: dict[int, complex] = {}
    tail: dict[int, complex] = {}
    r = sector.r
    v_trivial = not np.any(v[1:])
    if not v_trivial:
        r_outer, vmax = _binomial_radius(v, r)
    bound = 0.0
    for k, a in p.terms.items():
        e = Fraction(k, d)
        scale = a * np.exp(float(e) * log_u0)
        b = series_pow1p(v, float(e), order) if not v_trivial else np.array([1.0 + 0j])
        for n, bn in enumerate(b):
            if bn == 0:
                continue
            num = c * k + n * d
            target = principal if num < 0 else tail
            target[num] = target.get(num, 0) + scale * bn
        if not v_trivial:
            mf = max((1 - vmax) ** float(e), (1 + vmax) ** float(e))
            q = r / r_outer
            expo = c * float(e) + order + 1
            if expo <= 0:
                raise ValueError("order too small: remainder has a pole at the vertex")
            bound += abs(scale) * mf * r ** (c * float(e)) * q ** (order + 1) / (1 - q)
    tmax = max(tail) if tail else 0
    tail_series = TruncSeries(d=d, order=tmax, terms=tail, tail_bound=bound, radius=r)
    return PuiseuxPoly(principal, d), tail_series


def _binomial_radius(v: np.ndarray, r: float) -> tuple[float, float]:
    """Radius ``R > r`` on whose circle ``|v| <= 1/2``, and the sampled max."""
    theta = np.linspace(0, 2 * np.pi, 512, endpoint=False)
    lo, hi = r, 64 * r
    vmax = np.max(np.abs(np.polyval(v[::-1], hi * np.exp(1j * theta))))
    if vmax <= 0.45:
        return hi, 0.5
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        vm = np.max(np.abs(np.polyval(v[::-1], mid * np.exp(1j * theta))))
        if vm <= 0.45:
            lo = mid
        else:
            hi = mid
    if lo <= r * (1 + 1e-9):
        raise ValueError("chart validity radius too large for a convergent binomial expansion")
    return lo, 0.5


# ---------------------------------------------------------------------------
# text grammar: terms ``c * z^(k/d)`` joined by ``+``/``-``


def format_real(x: float) -> str:
    s = repr(float(x))
    if s.endswith(".0"):
        s = s[:-2]
    return "0" if s == "-0" else s


def format_coef(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return format_real(c.real)
    im = format_real(c.imag)
    sign = "" if im.startswith("-") else "+"
    return f"({format_real(c.real)}{sign}{im}i)"


def format_puiseux(p: PuiseuxPoly) -> str:
    if p.is_zero():
        return "0"
    parts = []
    for e, c in p.items():
        coef = format_coef(c)
        if e == 0:
            parts.append(coef)
        elif e.denominator == 1:
            parts.append(f"{coef}*z^({e.numerator})")
        else:
            parts.append(f"{coef}*z^({e.numerator}/{e.denominator})")
    return " + ".join(parts)


_NUM = r"[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?"
_TOKEN = re.compile(
    rf"\s*(?:(?P<cplx>\(\s*[+-]?{_NUM}\s*[+-]\s*{_NUM}\s*i\s*\))"
    rf"|(?P<imag>\(\s*[+-]?{_NUM}\s*i\s*\))"
    rf"|(?P<num>{_NUM})"
    r"|(?P<z>z)|(?P<op>[-+*^/()]))"
)


def _tokenize(text: str):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", text, bad)
        start = m.start() + (len(m.group(0)) - len(m.group(0).lstrip()))
        kind = m.lastgroup
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def _parse_complex_token(kind: str, s: str) -> complex:
    body = s.strip()[1:-1].replace(" ", "") if kind in ("cplx", "imag") else s
    if kind == "num":
        return complex(float(body))
    if kind == "imag":
        return complex(0, float(body[:-1]))
    m = re.fullmatch(rf"([+-]?{_NUM})([+-]{_NUM})i", body)
    return complex(float(m.group(1)), float(m.group(2)))


def parse_puiseux(text: str) -> PuiseuxPoly:
    """Parse ``c * z^(k/d)`` terms joined by ``+``/``-`` (round-trips ``str``)."""
    toks = _tokenize(text)
    i = 0
    pairs: list[tuple[Fraction, complex]] = []

    def peek():
        return toks[i]

    def expect(kind, value=None):
        nonlocal i
        k, v, pos = toks[i]
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, found {v or k!r}", text, pos)
        i += 1
        return v

    def signed_int():
        nonlocal i
        sign = 1
        if peek()[0] == "op" and peek()[1] in "+-":
            sign = -1 if peek()[1] == "-" else 1
            i += 1
        k, v, pos = peek()
        if k != "num" or not re.fullmatch(r"[0-9]+", v):
            raise ParseError("expected an integer exponent", text, pos)
        i += 1
        return sign * int(v)

    def exponent():
        nonlocal i
        if peek()[0] == "op" and peek()[1] == "(":
            i += 1
            num = signed_int()
            den = 1
            if peek()[0] == "op" and peek()[1] == "/":
                i += 1
                den = signed_int()
                if den <= 0:
                    raise ParseError("exponent denominator must be positive", text, toks[i - 1][2])
            expect("op", ")")
            return Fraction(num, den)
        return Fraction(signed_int())

    def term(sign):
        nonlocal i
        coef = complex(sign)
        k, v, pos = peek()
        have_coef = False
        if k in ("num", "cplx", "imag"):
            coef *= _parse_complex_token(k, v)
            i += 1
            have_coef = True
            if peek()[0] == "op" and peek()[1] == "*":
                i += 1
            else:
                return Fraction(0), coef
        k, v, pos = peek()
        if k != "z":
            if have_coef:
                raise ParseError("expected 'z' after '*'", text, pos)
            raise ParseError(f"expected a coefficient or 'z', found {v or k!r}", text, pos)
        i += 1
        e = Fraction(1)
        if peek()[0] == "op" and peek()[1] == "^":
            i += 1
            e = exponent()
        return e, coef

    sign = 1
    if peek()[0] == "op" and peek()[1] in "+-":
        sign = -1 if peek()[1] == "-" else 1
        i += 1
    pairs.append(term(sign))
    while peek()[0] != "end":
        k, v, pos = peek()
        if k != "op" or v not in "+-":
            raise ParseError(f"expected '+' or '-', found {v!r}", text, pos)
        i += 1
        sign = -1 if v == "-" else 1
        if peek()[0] == "op" and peek()[1] in "+-":
            sign *= -1 if peek()[1] == "-" else 1
            i += 1
        pairs.append(term(sign))
    return PuiseuxPoly.from_exponents(pairs)
