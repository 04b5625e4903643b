"""Formal data of ``P = z^N d/dz + A(z)`` at the origin.

Two routes are implemented:

* scalar operators ``sum a_j(z) (d/dz)^j`` of any order get their
  exponential parts from the Newton polygon plus iterated conjugation by
  ``exp(q)``;
* first-order systems get a truncated fundamental factor ``F`` with
  ``F(z) exp(Lambda(z))`` a fundamental solution: the splitting recursion
  when ``N >= 2`` and ``A(0)`` has distinct eigenvalues, a Frobenius
  recursion when ``N == 1``, a plain power series when ``N == 0``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .puiseux import ParseError, PuiseuxPoly, branch_arg, format_puiseux, parse_puiseux

log = logging.getLogger(__name__)

__all__ = [
    "ExponentialPart",
    "FormalFundamental",
    "GrowthBoundError",
    "OperatorSpec",
    "ScalarOperator",
    "UnsupportedCase",
    "exponential_parts",
    "formal_fundamental",
    "newton_polygon",
    "parse_poly",
    "verify_growth_bounds",
]

RESONANCE_TOL = 1e-10
DEFAULT_ORDER = 20


class UnsupportedCase(ValueError):
    """The operator is outside the supported normal-form cases."""


class GrowthBoundError(ArithmeticError):
    """No polynomial growth exponent M <= 10 fits the samples."""


def parse_poly(text: str) -> np.ndarray:
    """Coefficients (ascending) of a polynomial string such as ``1 + (0+2i)*z^2``."""
    p = parse_puiseux(str(text))
    out = np.zeros(1, complex)
    for e, c in p.items():
        if e < 0 or e.denominator != 1:
            raise ParseError(f"polynomial expected, found exponent {e}", str(text), 0)
        k = int(e)
        if k >= len(out):
            out = np.concatenate([out, np.zeros(k + 1 - len(out), complex)])
        out[k] = c
    return out


def _poly_str(c: np.ndarray) -> str:
    return format_puiseux(PuiseuxPoly({k: v for k, v in enumerate(c) if v != 0}))


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """``z^N u' + A(z) u`` with ``A`` an ``m x m`` matrix of polynomials."""

    m: int
    N: int
    A: np.ndarray  # shape (deg + 1, m, m), ascending powers of z
    disc_radius: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        if A.ndim != 3 or A.shape[1:] != (self.m, self.m):
            raise ValueError(f"A must have shape (deg+1, {self.m}, {self.m}), got {A.shape}")
        if self.m < 1 or self.N < 0:
            raise ValueError("need m >= 1 and N >= 0")
        object.__setattr__(self, "A", A)
        if self.m == 1 and self.N >= 1:
            # the only singularity inside the disc must be the origin
            th = np.linspace(0, 2 * math.pi, 64, endpoint=False)
            rr = np.geomspace(1e-3, 1, 12) * self.disc_radius
            zz = (rr[:, None] * np.exp(1j * th)).ravel()
            if np.min(np.abs(zz**self.N)) <= 0:
                raise ValueError("leading coefficient vanishes on the punctured disc")

    @classmethod
    def from_strings(cls, m: int, N: int, A, disc_radius: float = 1.0) -> "OperatorSpec":
        if len(A) != m or any(len(row) != m for row in A):
            raise ValueError(f"A must be an {m}x{m} array of polynomial strings")
        polys = [[parse_poly(e) for e in row] for row in A]
        deg = max(len(p) for row in polys for p in row)
        arr = np.zeros((deg, m, m), complex)
        for i in range(m):
            for j in range(m):
                arr[: len(polys[i][j]), i, j] = polys[i][j]
        return cls(m, N, arr, disc_radius)

    @classmethod
    def from_json(cls, d: dict) -> "OperatorSpec":
        try:
            m, N = int(d["m"]), int(d["N"])
        except KeyError as exc:
            raise ValueError(f"operator spec is missing field {exc}") from exc
        return cls.from_strings(m, N, d["A"], float(d.get("disc_radius", 1.0)))

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "N": self.N,
            "A": [[_poly_str(self.A[:, i, j]) for j in range(self.m)] for i in range(self.m)],
            "disc_radius": self.disc_radius,
        }

    def A_at(self, z) -> np.ndarray:
        """``A(z)`` with shape ``(m, m) + z.shape``."""
        z = np.asarray(z, dtype=complex)
        out = np.zeros((self.m, self.m) + z.shape, complex)
        zk = np.ones(z.shape, complex)
        for Ak in self.A:
            out += Ak.reshape(Ak.shape + (1,) * z.ndim) * zk
            zk = zk * z
        return out

    def as_scalar(self) -> "ScalarOperator":
        if self.m != 1:
            raise UnsupportedCase("only m = 1 systems are scalar operators")
        a0 = PuiseuxPoly({k: c for k, c in enumerate(self.A[:, 0, 0]) if c != 0})
        return ScalarOperator((a0, PuiseuxPoly.monomial(1, self.N)))


@dataclass(frozen=True)
class ScalarOperator:
    """``sum_j coeffs[j](z) (d/dz)^j``."""

    coeffs: tuple

    def __post_init__(self):
        if not self.coeffs or all(c.is_zero() for c in self.coeffs):
            raise ValueError("degenerate operator: all coefficients vanish")
        if self.coeffs[-1].is_zero():
            raise ValueError("leading coefficient must not vanish identically")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def conjugate(self, q: PuiseuxPoly) -> "ScalarOperator":
        """``exp(-q) ∘ self ∘ exp(q)``, i.e. ``d/dz`` replaced by ``d/dz + q'``."""
        dq = q.derivative()
        power = [PuiseuxPoly.constant(1)]  # coefficients of (d/dz + q')^j
        new = [PuiseuxPoly() for _ in self.coeffs]
        for j, a in enumerate(self.coeffs):
            if j > 0:
                nxt = [PuiseuxPoly() for _ in range(j + 1)]
                for i, b in enumerate(power):
                    nxt[i] = nxt[i] + b.derivative() + dq * b
                    nxt[i + 1] = nxt[i + 1] + b
                power = nxt
            for i, b in enumerate(power):
                new[i] = new[i] + a * b
        scale = max((abs(c) for p in new for _, c in p.items()), default=1.0)
        return ScalarOperator(tuple(p.chop(1e-11 * scale) for p in new))


def _newton_points(op: ScalarOperator) -> list[tuple[int, Fraction, complex]]:
    pts = []
    for j, a in enumerate(op.coeffs):
        if not a.is_zero():
            e, c = a.leading()
            pts.append((j, e - j, c))
    return pts


def _polygon(pts):
    """Regular length and the edges (slope, [points]) of positive slope."""
    vmin = min(v for _, v, _ in pts)
    jstar = max(j for j, v, _ in pts if v == vmin)
    edges = []
    cur = next(p for p in pts if p[0] == jstar)
    while True:
        right = [p for p in pts if p[0] > cur[0]]
        if not right:
            break
        slopes = [(Fraction(p[1] - cur[1]) / (p[0] - cur[0]), p) for p in right]
        s = min(sl for sl, _ in slopes)
        on = [cur] + [p for sl, p in slopes if sl == s]
        on.sort()
        edges.append((s, on))
        cur = on[-1]
    return jstar, edges


def newton_polygon(op) -> list[tuple[Fraction, int]]:
    """``(pole order, multiplicity)`` pairs; pole order 0 is the regular part."""
    if isinstance(op, OperatorSpec):
        op = op.as_scalar()
    pts = _newton_points(op)
    jstar, edges = _polygon(pts)
    out = [(Fraction(0), jstar)] if jstar > 0 else []
    out += [(s, on[-1][0] - on[0][0]) for s, on in edges]
    return out


def _cluster_roots(roots: np.ndarray, tol: float = 1e-6) -> list[tuple[complex, int]]:
    out: list[list] = []
    for r in roots:
        for c in out:
            if abs(r - c[0] / c[1]) <= tol * max(1.0, abs(r)):
                c[0] += r
                c[1] += 1
                break
        else:
            out.append([r, 1])
    return [(c[0] / c[1], c[1]) for c in out]


def _clean(c: complex) -> complex:
    re, im = c.real, c.imag
    re = 0.0 if abs(re) < 1e-14 * max(1, abs(c)) else re
    im = 0.0 if abs(im) < 1e-14 * max(1, abs(c)) else im
    return complex(re, im)


def _scalar_exponents(op: ScalarOperator, q: PuiseuxPoly, s_prev, depth: int = 0) -> list[PuiseuxPoly]:
    if depth > 64:
        raise UnsupportedCase("exponential-part recursion did not terminate")
    pts = _newton_points(op)
    jstar, edges = _polygon(pts)
    out = [q] * jstar if s_prev is not None else [q] * jstar
    for s, on in edges:
        if s_prev is not None and s >= s_prev:
            continue
        j0 = on[0][0]
        char = np.zeros(on[-1][0] - j0 + 1, complex)
        for j, _, c in on:
            char[j - j0] = c
        roots = np.roots(char[::-1])
        for mu, k in _cluster_roots(roots[np.abs(roots) > 0]):
            mu = _clean(complex(mu))
            term = PuiseuxPoly.monomial(-mu / s, -s)
            sub = _scalar_exponents(op.conjugate(term), q + term, s, depth + 1)
            if len(sub) != k:
                log.debug("branch multiplicity %d but %d exponential parts found", k, len(sub))
            out += sub
    return out


def _sort_key(p: PuiseuxPoly):
    e, c = p.leading()
    return (e, -round(c.real, 12), -round(c.imag, 12))


@dataclass(frozen=True)
class ExponentialPart:
    l: int
    lambdas: tuple

    def to_json(self) -> dict:
        return {"l": self.l, "Lambda": [format_puiseux(p) for p in self.lambdas]}

    @classmethod
    def from_json(cls, d: dict) -> "ExponentialPart":
        return cls(int(d["l"]), tuple(parse_puiseux(s) for s in d["Lambda"]))


def exponential_parts(op) -> ExponentialPart:
    """Ramification and diagonal exponential part, sorted canonically.

    Entries are ordered by leading exponent, then by decreasing real and
    imaginary part of the leading coefficient.
    """
    if isinstance(op, ScalarOperator):
        lams = _scalar_exponents(op, PuiseuxPoly(), None)
        if len(lams) != op.order:
            raise UnsupportedCase(f"found {len(lams)} exponential parts for an operator of order {op.order}")
    else:
        lams = list(_system_data(op, order=max(op.N, 1)).lambdas)
    lams = sorted((p.chop(1e-13) for p in lams), key=_sort_key)
    l = 1
    for p in lams:
        l = l * p.d // math.gcd(l, p.d)
    return ExponentialPart(l, tuple(lams))


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True, eq=False)
class _SystemData:
    T: np.ndarray  # constant gauge
    P: np.ndarray  # (order + 1, m, m) series coefficients, P[0] = I
    rho: np.ndarray  # exponents of the z^rho factors
    h: np.ndarray  # (m, order + 2) holomorphic exponent polynomials, ascending
    lambdas: tuple
    nil: np.ndarray | None = None  # nilpotent part of the monodromy exponent, if any


def _eig(A0: np.ndarray, what: str):
    d, T = np.linalg.eig(A0)
    if np.linalg.cond(T) > 1e8:
        raise UnsupportedCase(f"A(0) is not diagonalisable ({what})")
    return d, T


def _regular_singular(op: OperatorSpec, order: int) -> _SystemData:
    """Fundamental matrix ``G(z) P(z) z^J`` for ``z Y' = B(z) Y`` with ``B = -A``.

    Works in exact arithmetic: each step brings ``B(0)`` to Jordan form and,
    while two eigenvalues differ by a positive integer, shears the block of
    the larger one by ``z`` (lowering it by one).  The remaining
    non-resonant system is solved by a Sylvester recursion.
    """
    import sympy as sp
    from scipy.linalg import solve_sylvester

    m = op.m
    z = sp.Symbol("z")

    def exact(c):
        c = complex(c)
        return sp.nsimplify(c.real, rational=True) + sp.I * sp.nsimplify(c.imag, rational=True)

    B = sp.zeros(m, m)
    for k in range(len(op.A)):
        B += -sp.Matrix(m, m, lambda i, j: exact(op.A[k, i, j])) * z**k
    G = sp.eye(m)
    for _ in range(64 * m):
        try:
            V, J = B.subs(z, 0).jordan_form()
        except (sp.MatrixError, NotImplementedError) as exc:
            raise UnsupportedCase(f"cannot put A(0) in Jordan form exactly: {exc}") from exc
        B = (V.inv() * B * V).applyfunc(sp.expand)
        G = G * V
        ev = [sp.nsimplify(J[i, i]) for i in range(m)]
        top = None
        for i in range(m):
            if any((ev[i] - ev[j]).is_integer and (ev[i] - ev[j]) > 0 for j in range(m)):
                if top is None or sp.re(ev[i]) > sp.re(top):
                    top = ev[i]
        if top is None:
            break
        sel = [e == top for e in ev]
        S = sp.diag(*[z if f else 1 for f in sel])
        Si = sp.diag(*[1 / z if f else 1 for f in sel])
        B = (Si * B * S - sp.diag(*[1 if f else 0 for f in sel])).applyfunc(sp.cancel).applyfunc(sp.expand)
        G = G * S
    else:
        raise UnsupportedCase("resonance reduction did not terminate")

    def coeffs(M, n):
        out = np.zeros((n, m, m), complex)
        for i in range(m):
            for j in range(m):
                poly = sp.Poly(M[i, j], z)
                for (k,), c in poly.terms():
                    if k < n:
                        out[k, i, j] = complex(c)
        return out

    Jn = coeffs(J, 1)[0]
    Bc = coeffs(B, order + 1)
    P = np.zeros((order + 1, m, m), complex)
    P[0] = np.eye(m)
    for k in range(1, order + 1):
        R = sum(Bc[j] @ P[k - j] for j in range(1, k + 1))
        # k P_k + P_k J - J P_k = R
        P[k] = solve_sylvester(-Jn, Jn + k * np.eye(m), R)
    Gc = coeffs(G, order + 1)
    Q = np.zeros_like(P)
    for k in range(order + 1):
        Q[k] = sum(Gc[i] @ P[k - i] for i in range(k + 1))
    rho = np.diag(Jn).copy()
    nil = Jn - np.diag(rho)
    zero = tuple(PuiseuxPoly() for _ in range(m))
    return _SystemData(np.eye(m), Q, rho, np.zeros((m, 1), complex), zero, nil if np.any(nil) else None)


def _system_data(op: OperatorSpec, order: int) -> _SystemData:
    m, N = op.m, op.N
    A = np.zeros((order + 1, m, m), complex)
    A[: min(len(op.A), order + 1)] = op.A[: order + 1]
    if N == 0:
        # regular point: power series fundamental matrix of u' = -A u
        P = np.zeros((order + 1, m, m), complex)
        P[0] = np.eye(m)
        for k in range(order):
            P[k + 1] = -sum(A[j] @ P[k - j] for j in range(k + 1)) / (k + 1)
        zero = tuple(PuiseuxPoly() for _ in range(m))
        return _SystemData(np.eye(m), P, np.zeros(m, complex), np.zeros((m, 1), complex), zero)

    if N == 1:
        try:
            d, T = _eig(A[0], "regular singular case")
        except UnsupportedCase:
            return _regular_singular(op, order)
        gap = d[:, None] - d[None, :]
        if np.any((np.abs(gap - np.round(gap.real)) < RESONANCE_TOL) & (np.abs(np.round(gap.real)) >= 1)):
            return _regular_singular(op, order)
        Ti = np.linalg.inv(T)
        B = np.einsum("ij,kjl,lm->kim", Ti, A, T)
        P = np.zeros((order + 1, m, m), complex)
        P[0] = np.eye(m)
        for k in range(1, order + 1):
            R = sum(B[j] @ P[k - j] for j in range(1, k + 1))
            P[k] = -R / (k + gap)
        zero = tuple(PuiseuxPoly() for _ in range(m))
        return _SystemData(T, P, -d, np.zeros((m, 1), complex), zero)

    d, T = _eig(A[0], "irregular case")
    gap = d[:, None] - d[None, :]
    off = ~np.eye(m, dtype=bool)
    if m > 1 and np.min(np.abs(gap[off])) < RESONANCE_TOL:
        raise UnsupportedCase("repeated leading eigenvalues of A(0) (turning point or ramified system)")
    Ti = np.linalg.inv(T)
    B = np.einsum("ij,kjl,lm->kim", Ti, A, T)
    P = np.zeros((order + 1, m, m), complex)
    C = np.zeros((order + 1, m), complex)
    P[0] = np.eye(m)
    C[0] = d
    safe_gap = np.where(off, gap, 1.0)
    for k in range(1, order + 1):
        R = sum(B[j] @ P[k - j] for j in range(1, k + 1))
        R = R - sum(P[k - j] * C[j][None, :] for j in range(1, k))
        if k - N + 1 >= 1:
            R = R + (k - N + 1) * P[k - N + 1]
        C[k] = np.diag(R)
        P[k] = np.where(off, -R / safe_gap, 0)
    lambdas = []
    for i in range(m):
        terms = {k - N + 1: -C[k, i] / (k - N + 1) for k in range(N - 1) if C[k, i] != 0}
        lambdas.append(PuiseuxPoly({e: _clean(c) for e, c in terms.items()}))
    rho = -C[N - 1] if N - 1 <= order else np.zeros(m, complex)
    h = np.zeros((m, order - N + 3), complex)
    for k in range(N, order + 1):
        h[:, k - N + 1] = -C[k] / (k - N + 1)
    return _SystemData(T, P, rho, h, tuple(lambdas))


@dataclass(frozen=True, eq=False)
class FormalFundamental:
    """Truncated ``F`` with ``F exp(Lambda)`` a fundamental solution of ``op``.

    ``F(z) = T P(z) diag(z^rho exp(h(z)))``; columns follow the canonical
    order of the exponential part.
    """

    op: OperatorSpec
    ep: ExponentialPart
    order: int
    T: np.ndarray
    P: np.ndarray
    rho: np.ndarray
    h: np.ndarray
    cert: dict = field(default_factory=dict)
    nil: np.ndarray | None = None

    def _diag(self, z, bc):
        lg = np.log(np.abs(z)) + 1j * branch_arg(z, bc)
        rho = self.rho.reshape((-1,) + (1,) * z.ndim)
        hz = np.stack([np.polyval(hi[::-1], z) for hi in self.h])
        dh = np.stack([np.polyval((hi[1:] * np.arange(1, len(hi)))[::-1], z) if len(hi) > 1 else 0 * z for hi in self.h])
        E = np.exp(rho * lg + hz)
        return E, E * (rho / z + dh)

    def _P(self, z, deriv: bool = True):
        nz = [k for k in range(len(self.P)) if np.any(self.P[k] != 0)]
        top = nz[-1] + 1 if nz else 1
        zs = z[None, None, ...]
        tail = (None,) * z.ndim
        Pz = np.zeros((self.op.m, self.op.m) + z.shape, complex)
        for k in range(top - 1, -1, -1):
            Pz = Pz * zs + self.P[k][(...,) + tail]
        if not deriv:
            return Pz, None
        dP = np.zeros_like(Pz)
        for k in range(top - 1, 0, -1):
            dP = dP * zs + k * self.P[k][(...,) + tail]
        return Pz, dP

    def _log_factor(self, z, bc):
        """``exp(nil log z)`` and ``nil exp(nil log z) / z``, shape ``(m, m) + z.shape``."""
        m = self.op.m
        lg = np.log(np.abs(z)) + 1j * branch_arg(z, bc)
        U = np.zeros((m, m) + z.shape, complex)
        term = np.broadcast_to(np.eye(m)[(...,) + (None,) * z.ndim], U.shape).copy()
        for k in range(m):
            U += term
            term = np.einsum("ij,jk...->ik...", self.nil, term) * lg / (k + 1)
        dU = np.einsum("ij,jk...->ik...", self.nil, U) / z
        return U, dU

    def F(self, z, branch_center: float = 0.0):
        """``F(z)`` with shape ``(m, m) + z.shape``."""
        z = np.asarray(z, dtype=complex)
        if self.nil is not None:
            return self.F_and_dF(z, branch_center)[0]
        E, _ = self._diag(z, branch_center)
        Pz, _ = self._P(z, deriv=False)
        return np.einsum("ij,jk...->ik...", self.T, Pz) * E[None, ...]

    def F_and_dF(self, z, branch_center: float = 0.0):
        z = np.asarray(z, dtype=complex)
        E, dE = self._diag(z, branch_center)
        Pz, dP = self._P(z)
        TP = np.einsum("ij,jk...->ik...", self.T, Pz)
        TdP = np.einsum("ij,jk...->ik...", self.T, dP)
        F = TP * E[None, ...]
        dF = TdP * E[None, ...] + TP * dE[None, ...]
        if self.nil is not None:
            U, dU = self._log_factor(z, branch_center)
            F, dF = (
                np.einsum("ij...,jk...->ik...", F, U),
                np.einsum("ij...,jk...->ik...", dF, U) + np.einsum("ij...,jk...->ik...", F, dU),
            )
        return F, dF

    def lambda_at(self, z, branch_center: float = 0.0):
        z = np.asarray(z, dtype=complex)
        return np.stack([p(z, branch_center) if not p.is_zero() else np.zeros(z.shape, complex) for p in self.ep.lambdas])

    def fundamental(self, z, branch_center: float = 0.0):
        """``F(z) exp(Lambda(z))``."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.F(z, branch_center) * np.exp(self.lambda_at(z, branch_center))[None, ...]

    def residual(self, z, branch_center: float = 0.0) -> np.ndarray:
        """Per-column ``|z^N Phi' + A Phi| / |Phi|`` (max-entry), shape ``(m,) + z.shape``."""
        z = np.asarray(z, dtype=complex)
        F, dF = self.F_and_dF(z, branch_center)
        dL = np.stack([p.derivative()(z, branch_center) if not p.is_zero() else np.zeros(z.shape, complex) for p in self.ep.lambdas])
        Az = self.op.A_at(z)
        zN = z**self.op.N
        R = zN * (dF + F * dL[None, ...]) + np.einsum("ij...,jk...->ik...", Az, F)
        num = np.max(np.abs(R), axis=0)
        den = np.max(np.abs(F), axis=0)
        return num / den

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "exponential_part": self.ep.to_json(),
            "rho": [[r.real + 0.0, r.imag + 0.0] for r in self.rho],
            "log_terms": self.nil is not None,
            "certificate": self.cert,
        }


def formal_fundamental(
    op: OperatorSpec,
    ep: ExponentialPart | None = None,
    order: int = DEFAULT_ORDER,
    sector=None,
    n_samples: int = 256,
) -> FormalFundamental:
    """Truncated fundamental factor; ``cert`` holds fitted ``(K, M)`` on ``sector`` when given."""
    if order < 1:
        raise ValueError("order must be >= 1")
    data = _system_data(op, order)
    lams = [p.chop(1e-13) for p in data.lambdas]
    perm = sorted(range(op.m), key=lambda i: _sort_key(lams[i]))
    ep_own = ExponentialPart(1, tuple(lams[i] for i in perm))
    if ep is not None:
        if len(ep.lambdas) != op.m or not all(a.isclose(b, rtol=1e-9, atol=1e-12) for a, b in zip(ep.lambdas, ep_own.lambdas)):
            raise ValueError("exponential part does not belong to this operator")
    ff = FormalFundamental(
        op,
        ep or ep_own,
        order,
        data.T,
        data.P[:, :, perm],
        data.rho[perm],
        data.h[perm],
        nil=None if data.nil is None else data.nil[np.ix_(perm, perm)],
    )
    if sector is not None:
        K, M = verify_growth_bounds(ff, sector, n_samples)
        ff.cert.update({"K": K, "M": M, "sector": sector.to_json(), "n_samples": n_samples})
    return ff


def _sector_samples(sector, n: int) -> np.ndarray:
    from scipy.stats import qmc

    u = qmc.Halton(d=2, seed=np.random.default_rng(0)).random(n)
    rho = sector.r * 10.0 ** (-3 * u[:, 0])
    th = sector.tau + sector.eta * (2 * u[:, 1] - 1)
    return rho * np.exp(1j * th)


def verify_growth_bounds(ff, sector, n_samples: int = 256) -> tuple[float, float]:
    """Smallest ``M`` (0.25 grid, bisection to 1e-3) with ``K^-1 |z|^M <= |F| <= K |z|^-M``.

    ``ff`` is a ``FormalFundamental`` or any callable returning ``F(z)``
    with a leading ``(m, m)`` or ``(m,)`` shape.  ``M`` is accepted when
    ``max(|F| |z|^M, |z|^M / |F|)`` stops growing as ``|z|`` shrinks: the
    slope of its per-decade maxima against ``-log|z|`` is at most 0.002.
    """
    z = _sector_samples(sector, n_samples)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        Fz = ff.F(z, sector.tau) if hasattr(ff, "F") else np.asarray(ff(z))
        nrm = np.abs(Fz).reshape(-1, len(z)).max(axis=0)
        if hasattr(ff, "F") and ff.op.m > 0:
            det = np.linalg.det(np.moveaxis(Fz, -1, 0)) if Fz.ndim == 3 else Fz
            if np.any(np.abs(det) <= 1e-12):
                raise GrowthBoundError("det F vanishes at a certificate sample point")
        lr = np.log(np.abs(z))
        ln = np.log(nrm)
    if not np.all(np.isfinite(ln)):
        raise GrowthBoundError("F is not finite on the sector samples")
    dec = np.floor(lr / math.log(10)).astype(int)
    decs = np.unique(dec)

    def q(M):
        return np.maximum(ln + M * lr, M * lr - ln)

    def slope(M):
        qq = q(M)
        mx = np.array([np.max(qq[dec == d]) for d in decs])
        return float(np.polyfit(-decs * math.log(10), mx, 1)[0]) if len(decs) > 1 else 0.0

    grid = np.arange(0, 10.0 + 1e-12, 0.25)
    ok = [M for M in grid if slope(M) <= 2e-3]
    if not ok:
        raise GrowthBoundError("no polynomial growth exponent M <= 10 fits (superpolynomial growth)")
    M = float(ok[0])
    if M > 0:
        a, b = M - 0.25, M
        while b - a > 1e-3:
            mid = 0.5 * (a + b)
            a, b = (a, mid) if slope(mid) <= 2e-3 else (mid, b)
        M = b
    K = float(np.exp(np.max(q(M))))
    return K, M
