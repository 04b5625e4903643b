"""The integral operator ``I_{p,z0}(g)(z) = e^{p(z)} ∫_{z0}^{z} e^{-p(ζ)} g(ζ) dζ`` on sectors.

Paths are chosen so that ``|e^{p(z) - p(ζ)}| <= 1`` along them, which is
what keeps the operator from destroying polynomial growth.  The base point
is fixed per sector (so each result is one holomorphic function), and the
phase condition is re-checked at every quadrature node.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geometry import Chart, Sector
from .holofn import Component, Const, HoloFn, complex_derivative
from .puiseux import PuiseuxPoly, branch_arg, compose_chart
from .quadrature import gk15_batch

log = logging.getLogger(__name__)

__all__ = [
    "AmplitudeBound",
    "ArcSegment",
    "ConditioningError",
    "PathError",
    "PathPlan",
    "PathSpec",
    "RadialSegment",
    "SectorSolution",
    "amplitude_bound",
    "build_path",
    "integral_op",
    "p_difference",
    "integral_op_fn",
    "fd_steps",
    "ode_residual",
    "plan_path",
    "solve_on_chart_image",
    "solve_scalar_sector",
    "solve_system_sector",
]

TOL_PHASE = 1e-9
QUAD_RTOL = 1e-10
MAX_SUBDIVISIONS = 2**14
EVAL_CHUNK = 8
DIRECT_RAY_SHARE = 0.5


class PathError(RuntimeError):
    """The phase condition failed on a constructed path."""


class ConditioningError(ArithmeticError):
    """The fundamental factor is numerically singular at a quadrature node."""


# ---------------------------------------------------------------------------
# amplitude bound


@dataclass(frozen=True)
class AmplitudeBound:
    alpha: float
    leading_order: Fraction
    leading_coeff: complex
    rho_star: float

    def to_json(self) -> dict:
        return {
            "alpha": self.alpha,
            "leading_order": str(self.leading_order),
            "leading_coeff": [self.leading_coeff.real, self.leading_coeff.imag],
            "rho_star": self.rho_star if math.isfinite(self.rho_star) else "inf",
        }


def amplitude_bound(p: PuiseuxPoly) -> AmplitudeBound:
    """``alpha = pi / (2 s)`` for leading term ``a z^-s``; ``rho*`` is where it dominates twice over."""
    if p.is_zero():
        return AmplitudeBound(math.pi, Fraction(0), 0j, math.inf)
    if any(e >= 0 for e in p.exponents()):
        raise ValueError("amplitude_bound needs strictly negative exponents")
    e, c = p.leading()
    s = -e
    rest = [(-ee, abs(cc)) for ee, cc in p.items() if ee != e]
    if not rest:
        rho_star = math.inf
    else:
        # |c| rho^-s >= 2 sum |c_j| rho^-s_j  <=>  sum 2|c_j|/|c| rho^(s - s_j) <= 1
        def excess(r):
            return sum(2 * cj / abs(c) * r ** float(s - sj) for sj, cj in rest) - 1

        lo, hi = 0.0, 1.0
        while excess(hi) < 0 and hi < 1e12:
            hi *= 2
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if excess(mid) < 0 else (lo, mid)
        rho_star = lo
    return AmplitudeBound(math.pi / (2 * float(s)), s, complex(c), rho_star)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True)
class RadialSegment:
    angle: float
    rho_from: float
    rho_to: float

    def point(self, t):
        return (self.rho_from + (self.rho_to - self.rho_from) * np.asarray(t)) * np.exp(1j * self.angle)


@dataclass(frozen=True)
class ArcSegment:
    radius: float
    theta_from: float
    theta_to: float

    def point(self, t):
        return self.radius * np.exp(1j * (self.theta_from + (self.theta_to - self.theta_from) * np.asarray(t)))


@dataclass(frozen=True)
class PathSpec:
    segments: tuple
    start: complex
    end: complex

    def points(self, n: int = 64) -> np.ndarray:
        t = np.linspace(0, 1, n)
        return np.concatenate([s.point(t) for s in self.segments]) if self.segments else np.array([self.end])

    @property
    def length(self) -> float:
        tot = 0.0
        for s in self.segments:
            if isinstance(s, RadialSegment):
                tot += abs(s.rho_to - s.rho_from)
            else:
                tot += s.radius * abs(s.theta_to - s.theta_from)
        return tot


@dataclass(frozen=True)
class PathPlan:
    """Fixed base point for one exponent on one sector.

    ``kind == "vertex"``: base point 0, approached along ``theta_b``;
    ``kind == "outer"``: base point ``radius e^{i theta_b}``, where the
    radius is the sector's unless the profile dips inside the sector.
    """

    kind: str
    theta_b: float
    sector: Sector
    p: PuiseuxPoly
    radius: float | None = None

    @property
    def R(self) -> float:
        return self.sector.r if self.radius is None else self.radius

    @property
    def base(self) -> complex:
        return 0j if self.kind == "vertex" else complex(self.R * np.exp(1j * self.theta_b))


def _leading_profile(p: PuiseuxPoly, theta):
    e, c = p.leading()
    return np.real(c * np.exp(1j * float(e) * np.asarray(theta)))


def plan_path(p: PuiseuxPoly, S: Sector, integrable_at_vertex: bool = True) -> PathPlan:
    """Choose the base point for ``p`` on ``S``.

    With ``C(theta)`` the angular profile of the leading term (``Re p ~
    rho^-s C(theta)``), the vertex is used when ``max C > 0`` and the
    outer arc otherwise; ``theta_b`` is the maximiser of ``C`` on the
    closed sector.  For ``p = 0`` the vertex is used when the integrand is
    integrable there.
    """
    if p.is_zero():
        return PathPlan("vertex" if integrable_at_vertex else "outer", S.tau, S, p)
    th = np.linspace(S.alpha, S.beta, 721)
    C = _leading_profile(p, th)
    i = int(np.argmax(C))
    if C[i] > 0:
        return PathPlan("vertex", float(th[i]), S, p)
    # Everything is negative.  An arc at radius R from theta_b to theta keeps
    # Re p above its value at any endpoint of modulus <= r as long as
    # R^-s |C_min| <= r^-s |C(theta)| for the angles beyond the minimum.
    j = int(np.argmin(C))
    far = C[j:] if i < j else C[: j + 1]
    c_far = float(np.max(far))
    if c_far >= 0:
        raise PathError("no admissible base point: the phase profile vanishes inside the sector")
    s = -float(p.leading()[0])
    R = S.r * max(1.0, (C[j] / c_far) ** (1 / s))
    return PathPlan("outer", float(th[i]), S, p, None if R == S.r else 1.02 * R)


def _path_segments(plan: PathPlan, r: float, theta: float):
    """Segments (kind, a, b, fixed) for one endpoint ``r e^{i theta}``.

    kind 0 = radial along angle ``fixed`` from radius a to b, kind 1 = arc of
    radius ``fixed`` from angle a to b.
    """
    p, S = plan.p, plan.sector
    if plan.kind == "vertex":
        # a ray close to a direction where Re p stops growing decays too slowly
        # towards the vertex to integrate; the arc through theta_b is always safe
        direct = p.is_zero() or _leading_profile(p, theta) >= DIRECT_RAY_SHARE * _leading_profile(p, plan.theta_b)
        if direct or abs(theta - plan.theta_b) < 1e-15:
            return [(0, 0.0, r, theta)]
        return [(0, 0.0, r, plan.theta_b), (1, plan.theta_b, theta, r)]
    segs = []
    if abs(theta - plan.theta_b) > 1e-15:
        segs.append((1, plan.theta_b, theta, plan.R))
    if plan.R != r:
        segs.append((0, plan.R, r, theta))
    return segs


def build_path(p: PuiseuxPoly, S: Sector, z: complex, integrable_at_vertex: bool = True, plan: PathPlan | None = None) -> PathSpec:
    """The integration path from the sector's base point to ``z``."""
    ab = amplitude_bound(p)
    if S.amplitude > ab.alpha + 1e-12:
        raise PathError(f"sector amplitude {S.amplitude:.4g} exceeds the bound {ab.alpha:.4g}")
    plan = plan or plan_path(p, S, integrable_at_vertex)
    z = complex(z)
    theta = float(S.angle_of(z))
    segs = []
    for kind, a, b, fixed in _path_segments(plan, abs(z), theta):
        segs.append(RadialSegment(fixed, a, b) if kind == 0 else ArcSegment(fixed, a, b))
    path = PathSpec(tuple(segs), plan.base, z)
    if not p.is_zero():
        pts = path.points(257)
        pts = pts[pts != 0]
        ph = np.max(np.real(p(z, S.tau) - p(pts, S.tau))) if len(pts) else 0.0
        if ph > TOL_PHASE:
            raise PathError(f"phase condition violated on the path to {z}: Re(p(z) - p(zeta)) = {ph:.3g}")
    return path


def p_difference(p: PuiseuxPoly, log_z, L):
    """``p(z) - p(zeta)`` from ``log z`` and ``L = log(zeta / z)``.

    Near the vertex ``|p|`` can reach 1e12 while the difference that
    matters is of order one, so each term is written as
    ``-c z^e expm1(e L)``: with ``L`` known to full relative accuracy the
    result is too.  Where ``zeta^e`` overflows the term is replaced by an
    infinite real part of the right sign, so that ``exp`` of the result is
    0 (or infinite when the phase condition fails there).
    """
    log_z = np.asarray(log_z, complex)
    L = np.asarray(L, complex)
    out = np.zeros(np.broadcast_shapes(log_z.shape, L.shape), complex)
    with np.errstate(all="ignore"):
        for e, c in p.items():
            if e == 0:
                continue
            e = float(e)
            term = -c * np.exp(e * log_z) * np.expm1(e * L)
            big = ~np.isfinite(term)
            if np.any(big):
                # -c zeta^e dominates; only the sign of its real part matters
                ang = np.angle(c) + e * np.imag(log_z + L)
                term = np.where(big, -np.sign(np.cos(ang)) * np.inf + 0j, term)
            out = out + term
    return out


def _chart_log_ratio(chart: Chart, w, Lw):
    """``log(phi(zeta) / phi(w))`` for ``zeta = w e^{Lw}``, accurate for small ``Lw``.

    With ``phi(w) = c_o w^o g(w)`` this is ``o Lw + log1p((g(zeta) - g(w)) / g(w))``;
    the differences ``zeta^k - w^k`` come from ``delta = zeta - w`` by
    ``s_k = zeta s_(k-1) + w^(k-1) delta``, which never subtracts.
    """
    c = chart.coeffs
    o = chart.order
    rest = c[o + 1 :] / c[o]
    if not len(rest):
        return o * Lw
    w = np.broadcast_to(np.asarray(w, complex), np.shape(Lw))
    with np.errstate(all="ignore"):
        delta = w * np.expm1(Lw)
        zeta = w + delta
        s_k, w_k = delta, np.ones_like(w)
        g_w, dg = np.ones_like(w), np.zeros_like(w)
        for a in rest:
            w_k = w_k * w
            g_w = g_w + a * w_k
            dg = dg + a * s_k
            s_k = zeta * s_k + w_k * delta
        return o * Lw + np.log1p(dg / g_w)


# ---------------------------------------------------------------------------
# batched integration engine


def _vertex_cuts(integrand, R, idx, max_halvings: int = 1100) -> np.ndarray:
    """Dyadic shells to keep on each vertex leg ``idx`` (radial from 0 to ``R``).

    With ``v_j = |integrand| * rho`` at ``rho = R 2^-j``, shells are dropped
    from the first ``j > 2`` where ``v_j`` is below 1e-17 of the largest
    value seen so far on that leg.
    """
    cut = np.full(len(idx), max_halvings)
    best = np.zeros(len(idx))
    open_ = np.ones(len(idx), dtype=bool)
    for j0 in range(0, max_halvings, 64):
        if not np.any(open_):
            break
        sel = np.flatnonzero(open_)
        js = np.arange(j0, min(j0 + 64, max_halvings))
        rho = R[idx[sel], None] * 2.0 ** (-js.astype(float))[None, :]
        v = np.abs(integrand(rho, idx[sel])) * rho
        v = np.where(np.isfinite(v), v, 0.0)
        run = np.maximum.accumulate(np.concatenate([best[sel, None], v], axis=1), axis=1)[:, 1:]
        hit = (v <= 1e-17 * run) & (js[None, :] > 2) & (run > 0)
        zero_leg = (run[:, -1] == 0) & (js[-1] >= 127)
        for r, i in enumerate(sel):
            h = np.flatnonzero(hit[r])
            if len(h):
                cut[i] = js[h[0]]
                open_[i] = False
            elif zero_leg[r]:
                cut[i] = 1
                open_[i] = False
        best[sel] = run[:, -1]
    return cut


class SectorSolution:
    """``u = F(z) c(z)`` with ``c_k(z) = ∫ e^{L_k(z) - L_k(ζ)} H_k(ζ) dζ`` along planned paths.

    Works in a ``w``-plane sector ``S`` mapped by ``chart`` (identity when
    ``chart`` is None): ``z = chart(w)``.  ``L_k = Lambda_k`` is evaluated
    in ``z``; paths are planned for ``ptilde_k``, the principal part of
    ``Lambda_k ∘ chart``.
    """

    def __init__(
        self,
        lambdas,
        F,
        H,
        S: Sector,
        m: int,
        branch_center: float | None = None,
        chart: Chart | None = None,
        rtol: float = QUAD_RTOL,
        zero: bool = False,
        label: str = "u",
        dlambdas=None,
    ):
        self.lambdas = tuple(lambdas)
        self.F, self.H = F, H
        self.S, self.m = S, m
        self.chart = chart
        self.bc = S.tau if branch_center is None else float(branch_center)
        self.rtol = rtol
        self._zero = zero
        self.label = label
        self.max_phase = -math.inf
        self.dlambdas = dlambdas or tuple(l.derivative() for l in self.lambdas)
        self.ptilde = []
        for lam in self.lambdas:
            if chart is None or lam.is_zero():
                self.ptilde.append(lam)
            else:
                pr, _ = compose_chart(lam, chart, order=8, branch_center=self.bc)
                self.ptilde.append(pr)
        self.plans = [plan_path(pt, S, self._integrable(k)) for k, pt in enumerate(self.ptilde)]
        self._cache_key = None
        self._cache_val = None

    # -- maps between w and z
    def _phi(self, w):
        return w if self.chart is None else self.chart(w)

    def _dphi(self, w):
        return np.ones_like(w) if self.chart is None else self.chart.derivative(w)

    def _lam(self, k, z):
        lam = self.lambdas[k]
        return np.zeros(np.shape(z), complex) if lam.is_zero() else lam(z, self.bc)

    def _integrable(self, k) -> bool:
        if self._zero:
            return True
        S = self.S
        w = S.r * np.array([1e-8, 1e-4]) * np.exp(1j * S.tau)
        with np.errstate(all="ignore"):
            v = np.abs(np.asarray(self.H(self._phi(w)))[k] * self._dphi(w))
        if not np.all(np.isfinite(v)):
            return False
        if np.all(v == 0):
            return True
        if v[0] == 0:
            return True
        kappa = -math.log(v[0] / v[1]) / math.log(1e-4)
        return kappa < 0.9

    def is_zero(self) -> bool:
        return self._zero

    def components(self) -> list[HoloFn]:
        return [Component(self, k, f"{self.label}[{k}]") for k in range(self.m)]

    def to_w(self, z):
        """Preimages in the sector (identity without a chart); NaN off the domain."""
        z = np.asarray(z, dtype=complex)
        if self.chart is None:
            return z
        w, ok = self.chart.invert(z, self.S)
        return np.where(ok, w, np.nan)

    def evaluate(self, z) -> np.ndarray:
        """``u(z)`` with shape ``(m,) + z.shape``."""
        z = np.asarray(z, dtype=complex)
        key = (z.shape, z.tobytes())
        if key == self._cache_key:
            return self._cache_val
        if self._zero:
            out = np.zeros((self.m,) + z.shape, complex)
        else:
            out = self._evaluate_w(self.to_w(z).reshape(-1), z.reshape(-1)).reshape((self.m,) + z.shape)
        self._cache_key, self._cache_val = key, out
        return out

    def evaluate_w(self, w) -> np.ndarray:
        """``(u ∘ chart)(w)``."""
        w = np.asarray(w, dtype=complex)
        if self._zero:
            return np.zeros((self.m,) + w.shape, complex)
        return self._evaluate_w(w.reshape(-1), self._phi(w).reshape(-1)).reshape((self.m,) + w.shape)

    def _evaluate_w(self, w: np.ndarray, z: np.ndarray) -> np.ndarray:
        good = np.isfinite(w) & (w != 0)
        c = np.full((self.m, len(w)), np.nan + 0j)
        idx = np.flatnonzero(good)
        # points near the vertex need thousands of subintervals each; batching
        # a few at a time keeps the quadrature workspace bounded
        for lo in range(0, len(idx), EVAL_CHUNK):
            sel = idx[lo : lo + EVAL_CHUNK]
            c[:, sel] = self._integrals(w[sel], z[sel])
        Fz = self.F(np.where(good, z, 1.0))
        u = np.einsum("ij...,j...->i...", Fz, c)
        u[:, ~good] = np.nan
        return u

    def _integrals(self, w: np.ndarray, z: np.ndarray) -> np.ndarray:
        S = self.S
        theta = np.asarray(S.angle_of(w), float)
        r = np.abs(w)
        worst_before, self.max_phase = self.max_phase, -math.inf
        probs: list[tuple] = []
        for k, plan in enumerate(self.plans):
            for i in range(len(w)):
                segs = _path_segments(plan, r[i], theta[i])
                for j, (kind, a, b, fixed) in enumerate(segs):
                    probs.append((k, i, kind, a, b, fixed, j == len(segs) - 1))
        if not probs:
            return np.zeros((self.m, len(w)), complex)
        P = np.array(probs, dtype=float)
        comp, point, kind = P[:, 0].astype(int), P[:, 1].astype(int), P[:, 2].astype(int)
        a, b, fixed, last = P[:, 3], P[:, 4], P[:, 5], P[:, 6].astype(bool)
        # width of the peak at the endpoint, in the segment's own parameter
        with np.errstate(divide="ignore"):
            slope = np.stack(
                [np.abs(self.ptilde[k].derivative()(w, S.tau)) if not self.ptilde[k].is_zero() else np.zeros(len(w)) for k in range(self.m)]
            )
            width = 1.0 / (slope[comp, point] * np.where(kind == 1, r[point], 1.0))

        log_w = np.log(r) + 1j * branch_arg(w, S.tau)
        log_zend = np.log(np.abs(z)) + 1j * branch_arg(z, self.bc)

        def integrand(x, pid, check=True):
            kk, ii, kd, fx = comp[pid][:, None], point[pid][:, None], kind[pid][:, None], fixed[pid][:, None]
            arc = kd == 1
            zeta = np.where(arc, fx * np.exp(1j * x), x * np.exp(1j * fx))
            dzeta = np.where(arc, 1j * zeta, np.exp(1j * fx))
            zeta_safe = np.where(zeta == 0, 1e-300, zeta)
            zi = self._phi(zeta_safe)
            Hv = np.asarray(self.H(zi))
            Hk = Hv[kk[:, 0], np.arange(len(pid))]
            # log(zeta / w), exact in the segment parameter near the endpoint
            rw, tw = r[ii], theta[ii]
            with np.errstate(all="ignore"):
                rad = np.where(last[pid][:, None] & ~arc, np.log1p((x - rw) / rw), np.log(np.abs(zeta_safe) / rw))
                Lw = np.where(arc, np.log(fx / rw), rad) + 1j * (np.where(arc, x, fx) - tw)
                Lz = Lw if self.chart is None else _chart_log_ratio(self.chart, w[ii], Lw)
            expo = np.zeros(zi.shape, complex)
            for k in range(self.m):
                if not self.lambdas[k].is_zero():
                    sel = kk[:, 0] == k
                    if np.any(sel):
                        ends = ii[sel, 0]
                        expo[sel] = p_difference(self.lambdas[k], log_zend[ends][:, None], Lz[sel])
                        if check:
                            d = p_difference(self.ptilde[k], log_w[ends][:, None], Lw[sel])
                            self.max_phase = max(self.max_phase, float(np.max(np.real(d))))
            with np.errstate(over="ignore", invalid="ignore"):
                val = np.exp(expo) * Hk * self._dphi(zeta_safe) * dzeta
            return np.where(zeta == 0, 0, val)

        # initial intervals: dyadic shells for vertex legs, plain splits
        # otherwise, plus geometric cuts toward the endpoint where the
        # integrand peaks
        vert = np.flatnonzero((kind == 0) & (a == 0.0))
        cuts = dict(zip(vert, _vertex_cuts(lambda x, j: integrand(x, j, check=False), b, vert)))
        los, his, pids = [], [], []
        for j in range(len(probs)):
            if j in cuts:
                edges = b[j] * 2.0 ** (-np.arange(cuts[j] + 1, dtype=float))[::-1]
                edges[0] = 0.0
            else:
                edges = a[j] + (b[j] - a[j]) * np.linspace(0, 1, 5)
                # a + (b - a) can miss b by an ulp of a, leaving a sliver past the end
                edges[0], edges[-1] = a[j], b[j]
            span = abs(b[j] - a[j])
            if last[j] and np.isfinite(width[j]) and span > 0.01 * width[j]:
                n = min(int(math.ceil(math.log2(span / (0.01 * width[j])))), 200)
                edges = np.concatenate([edges, b[j] - (b[j] - a[j]) * 2.0 ** -np.arange(1, n + 1, dtype=float)])
                edges = np.unique(edges) if b[j] > a[j] else np.unique(edges)[::-1]
            los.append(edges[:-1])
            his.append(edges[1:])
            pids.append(np.full(len(edges) - 1, j))
        lo = np.concatenate(los)
        hi = np.concatenate(his)
        pid = np.concatenate(pids)
        # orientation: integrate from a to b; gk15_batch wants lo < hi, so flip sign when needed
        sign = np.where(lo <= hi, 1.0, -1.0)
        lo2, hi2 = np.minimum(lo, hi), np.maximum(lo, hi)
        # fold the per-interval orientation into separate problems
        flip = sign < 0
        pid2 = pid + flip * len(probs)

        def f2(x, p2):
            return integrand(x, p2 % len(probs))

        # a rough scale for the absolute tolerance
        res = gk15_batch(f2, lo2, hi2, pid2, 2 * len(probs), rtol=self.rtol, atol=0.0, max_intervals=MAX_SUBDIVISIONS)
        vals = res.values[: len(probs)] - res.values[len(probs) :]
        phase, self.max_phase = self.max_phase, max(worst_before, self.max_phase)
        if phase > TOL_PHASE:
            raise PathError(f"phase condition violated at a quadrature node: {phase:.3g}")
        out = np.zeros((self.m, len(w)), complex)
        np.add.at(out, (comp, point), vals)
        return out

    def __repr__(self):
        return f"<SectorSolution {self.label} m={self.m} on {self.S}>"


# ---------------------------------------------------------------------------
# public solvers


def _lift(g) -> HoloFn:
    return g if isinstance(g, HoloFn) else Const(complex(g))


def integral_op(p: PuiseuxPoly, g, S: Sector, z, rtol: float = QUAD_RTOL, branch_center: float | None = None):
    """``I_{p,z0}(g)(z)`` with the sector's fixed base point; vectorised in ``z``."""
    sol = integral_op_fn(p, g, S, rtol=rtol, branch_center=branch_center)
    out = sol.evaluate(z)[0]
    return complex(out) if np.ndim(out) == 0 else out


def integral_op_fn(p: PuiseuxPoly, g, S: Sector, rtol: float = QUAD_RTOL, branch_center: float | None = None) -> SectorSolution:
    ab = amplitude_bound(p)
    if S.amplitude > ab.alpha + 1e-12:
        raise PathError(f"sector amplitude {S.amplitude:.4g} exceeds the bound {ab.alpha:.4g}")
    g = _lift(g)

    def F(z):
        return np.ones((1, 1) + np.shape(z), complex)

    def H(z):
        return g(z)[None, ...]

    return SectorSolution([p], F, H, S, 1, branch_center, rtol=rtol, zero=g.is_zero(), label=f"I[{p}]({g.label})")


def solve_scalar_sector(p: PuiseuxPoly, N: int, a, g, S: Sector, f: HoloFn | None = None, rtol: float = QUAD_RTOL) -> HoloFn:
    """Particular solution of ``z^N u' + a u = g`` as ``f e^p ∫ e^{-p} f^{-1} g / ζ^N``.

    ``f e^p`` must be a homogeneous solution; ``f`` defaults to 1.
    """
    g = _lift(g)
    f = f or Const(1.0)

    def F(z):
        return np.asarray(f(z), complex)[None, None, ...]

    def H(z):
        return (np.asarray(g(z), complex) / np.asarray(f(z), complex) / np.asarray(z) ** N)[None, ...]

    sol = SectorSolution([p], F, H, S, 1, rtol=rtol, zero=g.is_zero(), label="u")
    return sol.components()[0]


def _system_maps(op, ff, g, bc):
    g = [_lift(gi) for gi in g]
    N = op.N
    m = op.m

    def F(z):
        return ff.F(z, bc)

    def H(z):
        z = np.asarray(z, complex)
        Fz = ff.F(z, bc)
        Fm = np.moveaxis(Fz, (0, 1), (-2, -1))
        det = np.abs(np.linalg.det(Fm))
        if np.any(det < 1e-10):
            raise ConditioningError("fundamental factor is nearly singular at a quadrature node")
        gz = np.stack([np.broadcast_to(np.asarray(gi(z), complex), z.shape) for gi in g], axis=-1)
        y = np.linalg.solve(Fm, gz[..., None])[..., 0]
        return np.moveaxis(y, -1, 0) / z[None, ...] ** N

    zero = all(gi.is_zero() for gi in g)
    return F, H, zero, m


def solve_system_sector(op, ff, ep, g, S: Sector, rtol: float = QUAD_RTOL, branch_center: float | None = None) -> SectorSolution:
    """Variation of parameters on a sector: ``u = F e^Λ ∫ e^{-Λ} F^{-1} g / ζ^N``."""
    bc = S.tau if branch_center is None else branch_center
    for lam in ep.lambdas:
        ab = amplitude_bound(lam)
        if S.amplitude > ab.alpha + 1e-12:
            raise PathError(f"sector amplitude {S.amplitude:.4g} exceeds the bound {ab.alpha:.4g} for {lam}")
    F, H, zero, m = _system_maps(op, ff, g, bc)
    return SectorSolution(ep.lambdas, F, H, S, m, bc, rtol=rtol, zero=zero, label="u")


def solve_on_chart_image(op, ep, ff, chart: Chart, S: Sector, g, rtol: float = QUAD_RTOL, branch_center: float | None = None) -> SectorSolution:
    """Solve on ``chart(S)`` by pulling the path integral back to the ``w``-plane."""
    bc = float(np.angle(chart(S.r * 0.5 * np.exp(1j * S.tau)))) if branch_center is None else branch_center
    F, H, zero, m = _system_maps(op, ff, g, bc)
    sol = SectorSolution(ep.lambdas, F, H, S, m, bc, chart=chart, rtol=rtol, zero=zero, label="u")
    for pt in sol.ptilde:
        ab = amplitude_bound(pt)
        if S.amplitude > ab.alpha + 1e-12:
            raise PathError(f"chart sector amplitude {S.amplitude:.4g} exceeds the bound {ab.alpha:.4g} for {pt}")
    return sol


# ---------------------------------------------------------------------------
# residuals


def fd_steps(z, delta, lambdas, bc: float = 0.0):
    """Contour radius for derivative checks: inside the domain and on the scale of ``e^Λ``."""
    z = np.asarray(z, complex)
    h = np.minimum(0.5 * np.asarray(delta), 0.25 * np.abs(z))
    for lam in lambdas:
        if not lam.is_zero():
            d = np.abs(lam.derivative()(z, bc))
            h = np.minimum(h, 0.25 / np.maximum(d, 1e-300))
    return h


def ode_residual(u_eval, op, g, z, h, bc: float = 0.0) -> np.ndarray:
    """``max_i |z^N u_i' + (A u)_i - g_i|`` with ``u'`` from a 16-point contour rule."""
    z = np.asarray(z, complex)
    u = u_eval(z)
    du = complex_derivative(u_eval, z, h)
    Az = op.A_at(z)
    gz = np.stack([np.broadcast_to(np.asarray(_lift(gi)(z), complex), z.shape) for gi in g])
    R = z[None, ...] ** op.N * du + np.einsum("ij...,j...->i...", Az, u) - gz
    return np.max(np.abs(R), axis=0)
