"""Planar geometry near the origin: sectors, polar bands, charts, region trees.

Everything here is vectorised over numpy arrays of complex points.  A
``Region`` answers two questions: membership and distance to its boundary
(the latter through a polyline discretisation of every leaf edge).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .puiseux import PuiseuxPoly, series_exp

log = logging.getLogger(__name__)

__all__ = [
    "Band",
    "Chart",
    "CoverError",
    "CurveSpec",
    "Disc",
    "Intersection",
    "RawSector",
    "Region",
    "Sector",
    "SectorImage",
    "Union",
    "band_to_plane",
    "boundary_distance",
    "chart_from_arc",
    "cover_agreement",
    "cover_band",
    "region_from_json",
    "region_membership",
    "wrap_angle",
]

TWO_PI = 2 * math.pi


class CoverError(RuntimeError):
    """A covering could not be built (degenerate band or failed bisection)."""


def wrap_angle(x):
    """Map angles to (-pi, pi]."""
    return np.angle(np.exp(1j * np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class Sector:
    """Open sector ``{rho e^{i theta}: 0 < rho < r, |theta - tau| < eta}``."""

    tau: float
    eta: float
    r: float

    def __post_init__(self):
        if not (0 < self.eta < math.pi):
            raise ValueError(f"half-amplitude must lie in (0, pi), got {self.eta}")
        if not self.r > 0:
            raise ValueError(f"radius must be positive, got {self.r}")

    @classmethod
    def from_edges(cls, alpha: float, beta: float, r: float) -> "Sector":
        if not alpha < beta:
            raise ValueError("need alpha < beta")
        return cls(0.5 * (alpha + beta), 0.5 * (beta - alpha), r)

    @property
    def alpha(self) -> float:
        return self.tau - self.eta

    @property
    def beta(self) -> float:
        return self.tau + self.eta

    @property
    def amplitude(self) -> float:
        return 2 * self.eta

    def relative_angle(self, z):
        """Angle of ``z`` measured from the bisector, in (-pi, pi]."""
        z = np.asarray(z, dtype=complex)
        return np.angle(z * np.exp(-1j * self.tau))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        rho = np.abs(z)
        ok = (rho > 0) & (rho < self.r) & (np.abs(self.relative_angle(z)) < self.eta)
        return bool(ok) if ok.ndim == 0 else ok

    def angle_of(self, z):
        """Argument of ``z`` continued from the bisector (no wrap inside the sector)."""
        return self.tau + self.relative_angle(z)

    def edges(self, n: int) -> list[np.ndarray]:
        radii = _ray_radii(self.r, n)
        th = np.linspace(self.alpha, self.beta, n)
        return [
            radii * np.exp(1j * self.alpha),
            radii * np.exp(1j * self.beta),
            self.r * np.exp(1j * th),
        ]

    def scaled(self, eta_factor: float = 1.0, r_factor: float = 1.0) -> "Sector":
        return Sector(self.tau, self.eta * eta_factor, self.r * r_factor)

    def to_json(self) -> dict:
        return {"tau": self.tau, "eta": self.eta, "r": self.r}

    @classmethod
    def from_json(cls, d: dict) -> "Sector":
        if "alpha" in d:
            return cls.from_edges(float(d["alpha"]), float(d["beta"]), float(d["r"]))
        return cls(float(d["tau"]), float(d["eta"]), float(d["r"]))


def _ray_radii(r: float, n: int) -> np.ndarray:
    # geometric clustering at the vertex keeps curved images well resolved
    n1 = max(2, n // 2)
    pts = np.concatenate([[0.0], np.geomspace(r * 1e-9, r, n1), np.linspace(0, r, max(2, n - n1))])
    return np.unique(pts)


# ---------------------------------------------------------------------------
# bands


@dataclass(frozen=True)
class CurveSpec:
    """Boundary curve ``theta = poly(rho)`` on ``[0, R]``; real, nonnegative exponents."""

    poly: PuiseuxPoly
    R: float

    def __post_init__(self):
        for e, c in self.poly.items():
            if e < 0:
                raise ValueError("boundary curves need nonnegative exponents")
            if abs(c.imag) > 0:
                raise ValueError("boundary curves need real coefficients")
        vals = self(np.linspace(0, self.R, 257))
        if np.any(vals <= -math.pi) or np.any(vals >= 3 * math.pi):
            raise ValueError("curve leaves the angular range (-pi, 3pi)")

    @classmethod
    def constant(cls, value: float, R: float) -> "CurveSpec":
        return cls(PuiseuxPoly.constant(value), R)

    @property
    def d(self) -> int:
        return self.poly.d

    @property
    def value_at_0(self) -> float:
        return self.poly.constant_term().real

    @property
    def is_constant(self) -> bool:
        return all(e == 0 for e in self.poly.exponents())

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros(rho.shape)
        for e, c in self.poly.items():
            out = out + c.real * (np.power(rho, float(e)) if e != 0 else 1.0)
        return out

    def to_json(self) -> dict:
        return {
            "terms": [
                {"num": e.numerator * (self.poly.d // e.denominator), "den": self.poly.d, "coef": c.real}
                for e, c in self.poly.items()
            ],
            "R": self.R,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CurveSpec":
        pairs = [(Fraction(int(t["num"]), int(t["den"])), float(t["coef"])) for t in d["terms"]]
        return cls(PuiseuxPoly.from_exponents(pairs), float(d["R"]))


@dataclass(frozen=True)
class Band:
    """``{(rho, theta): 0 < rho < R, lower(rho) < theta < upper(rho)}`` under rho e^{i theta}."""

    lower: CurveSpec
    upper: CurveSpec
    R: float
    grid: int = 256

    def __post_init__(self):
        rho = np.concatenate([np.linspace(0, self.R, self.grid + 2)[1:-1], [self.R]])
        gap = self.upper(rho) - self.lower(rho)
        if np.any(gap <= 0):
            raise ValueError("band curves cross or touch on (0, R]")
        if self.upper.value_at_0 < self.lower.value_at_0 - 1e-14:
            raise ValueError("band curves are inverted at 0")
        if np.max(self.upper(rho)) - np.min(self.lower(rho)) >= TWO_PI:
            raise ValueError("band wraps around the origin")

    def contains_polar(self, rho, theta):
        rho = np.asarray(rho, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return (rho > 0) & (rho < self.R) & (self.lower(rho) < theta) & (theta < self.upper(rho))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        rho = np.abs(z)
        base = np.angle(z)
        ok = np.zeros(z.shape, dtype=bool)
        for n in (-1, 0, 1):
            th = base + TWO_PI * n
            ok |= (th > -math.pi) & (th < 3 * math.pi) & self.contains_polar(rho, th)
        return bool(ok) if ok.ndim == 0 else ok

    def theta_range(self, rho_max: float) -> tuple[float, float]:
        rho = np.linspace(0, min(rho_max, self.R), 257)
        return float(np.min(self.lower(rho))), float(np.max(self.upper(rho)))

    def to_json(self) -> dict:
        return {"lower": self.lower.to_json(), "upper": self.upper.to_json(), "R": self.R}

    @classmethod
    def from_json(cls, d: dict) -> "Band":
        R = float(d["R"])
        lo = CurveSpec.from_json({**d["lower"], "R": d["lower"].get("R", R)})
        hi = CurveSpec.from_json({**d["upper"], "R": d["upper"].get("R", R)})
        return cls(lo, hi, R)


def band_to_plane(b: Band, sample: tuple[float, float]) -> complex:
    rho, theta = sample
    if not b.contains_polar(rho, theta):
        raise ValueError(f"({rho}, {theta}) is not in the band")
    return complex(rho * np.exp(1j * theta))


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True, eq=False)
class Chart:
    """Polynomial chart ``phi(w) = sum_k coeffs[k] w^k`` with ``phi(0) = 0``.

    ``validity`` is a sector of the w-plane on whose closure ``phi`` is
    injective.
    """

    coeffs: np.ndarray
    validity: Sector
    label: str = ""
    _dcoeffs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        nz = np.flatnonzero(c)
        if len(nz) == 0 or c[0] != 0:
            raise ValueError("ill-posed chart: need phi(0) = 0 and phi not identically zero")
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "_dcoeffs", c[1:] * np.arange(1, len(c)))

    @property
    def order(self) -> int:
        return int(np.flatnonzero(self.coeffs)[0])

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[self.order])

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.polyval(self.coeffs[::-1], w)
        return complex(out) if out.ndim == 0 else out

    def derivative(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.polyval(self._dcoeffs[::-1], w)
        return complex(out) if out.ndim == 0 else out

    def check_injective(self, sector: Sector | None = None, n_pairs: int = 1000, seed: int = 0) -> bool:
        """Sampled injectivity on the closure of ``sector``."""
        s = sector or self.validity
        rng = np.random.default_rng(seed)
        rho = s.r * np.sqrt(rng.uniform(0, 1, (2, n_pairs)))
        th = s.tau + s.eta * rng.uniform(-1, 1, (2, n_pairs))
        # include edge points explicitly
        th[:, : n_pairs // 4] = s.tau + s.eta * np.sign(th[:, : n_pairs // 4] - s.tau + 1e-300)
        a, b = rho[0] * np.exp(1j * th[0]), rho[1] * np.exp(1j * th[1])
        gap = np.abs(a - b)
        img = np.abs(self(a) - self(b))
        return bool(np.all(img >= 1e-12 * gap))

    def invert(self, z, sector: Sector | None = None, tol: float = 1e-10, max_iter: int = 50):
        """Damped Newton inversion seeded from the leading monomial.

        Returns ``(w, ok)``; ``ok`` is False where Newton did not converge or
        the preimage fell outside ``sector``.
        """
        s = sector or self.validity
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.reshape(-1)
        c, lc = self.order, self.leading
        base = zf / lc
        mod = np.abs(base) ** (1.0 / c)
        ang0 = np.angle(base) / c
        best_w = np.full(zf.shape, np.nan + 0j)
        best_ok = np.zeros(zf.shape, dtype=bool)
        # candidate roots ordered by closeness to the bisector
        cands = [ang0 + TWO_PI * j / c for j in range(c)]
        dist = np.stack([np.abs(wrap_angle(a - s.tau)) for a in cands])
        order = np.argsort(dist, axis=0)
        for rank in range(c):
            ang = np.choose(order[rank], cands) if c > 1 else cands[0]
            todo = ~best_ok
            if not np.any(todo):
                break
            w, conv = self._newton(zf[todo], mod[todo] * np.exp(1j * ang[todo]), tol, max_iter)
            inside = conv & np.asarray(s.contains(w), dtype=bool)
            idx = np.flatnonzero(todo)
            best_w[idx[inside]] = w[inside]
            best_ok[idx[inside]] = True
            fill = idx[~inside & np.isnan(best_w[idx].real)]
            best_w[fill] = w[~inside & np.isnan(best_w[idx].real)]
        n_fail = int(np.sum(~best_ok))
        if n_fail:
            log.debug("chart inversion: %d point(s) not in the chart sector or not converged", n_fail)
        return best_w.reshape(shape), best_ok.reshape(shape)

    def _newton(self, z, w, tol, max_iter):
        scale = np.maximum(np.abs(z), 1e-300)
        res = self(w) - z
        for _ in range(max_iter):
            done = np.abs(res) <= tol * scale
            if np.all(done):
                break
            dphi = self.derivative(w)
            dphi = np.where(dphi == 0, 1e-300, dphi)
            step = np.where(done, 0, res / dphi)
            lam = np.ones(w.shape)
            for _ in range(8):
                w_new = w - lam * step
                r_new = self(w_new) - z
                worse = (np.abs(r_new) > np.abs(res)) & ~done
                if not np.any(worse):
                    break
                lam = np.where(worse, lam * 0.5, lam)
            w, res = w_new, r_new
        return w, np.abs(res) <= tol * scale

    def to_json(self) -> dict:
        return {
            "coeffs": [[c.real, c.imag] for c in self.coeffs],
            "validity": self.validity.to_json(),
            "label": self.label,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Chart":
        coeffs = np.array([complex(a, b) for a, b in d["coeffs"]])
        return cls(coeffs, Sector.from_json(d["validity"]), d.get("label", ""))


def chart_from_arc(
    curve: CurveSpec,
    radius: float | None = None,
    half_amplitude: float | None = None,
    tol: float = 1e-10,
    max_order: int = 120,
) -> Chart:
    """Chart ``phi(t) = t^d exp(i curve(t^d))`` as a truncated power series in ``t``.

    The positive real ``t`` axis maps onto the arc ``rho e^{i curve(rho)}``.
    The truncation order grows until a Cauchy estimate of the remainder on
    the validity disc drops below ``tol``; the radius is halved (at most 30
    times) when ``max_order`` is not enough.
    """
    d = curve.d
    r = (radius if radius is not None else curve.R ** (1.0 / d))
    eta = half_amplitude if half_amplitude is not None else math.pi / (4 * d)
    # P(t) = curve(t^d) is a polynomial in t
    P = np.zeros(max(curve.poly.terms, default=0) + 1, dtype=complex)
    for k, c in curve.poly.terms.items():
        P[k] = c.real
    iP = 1j * P
    theta = np.linspace(0, TWO_PI, 512, endpoint=False)
    for _ in range(30):
        R2 = 2 * r
        Mf = 1.1 * np.max(np.abs(np.exp(np.polyval(iP[::-1], R2 * np.exp(1j * theta)))))
        for n in range(4, max_order + 1):
            remainder = r**d * Mf * 0.5 ** (n + 1) / 0.5
            if remainder <= tol or len(P) == 1:
                E = series_exp(iP, n)
                coeffs = np.concatenate([np.zeros(d, complex), E])
                coeffs[np.abs(coeffs) < 1e-300] = 0
                chart = Chart(np.trim_zeros(coeffs, "b"), Sector(0.0, eta, r), label=f"arc[{curve.poly}]")
                if chart.check_injective():
                    return chart
                eta *= 0.5
                break
        else:
            r *= 0.5
            continue
    raise ArithmeticError("chart_from_arc: expansion remainder not controllable within max_order")


# ---------------------------------------------------------------------------
# regions


def _segment_distance(z: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Min distance from each ``z`` to the segments ``[p0_j, p1_j]``."""
    out = np.full(z.shape, np.inf)
    if len(p0) == 0:
        return out
    dv = p1 - p0
    L2 = np.abs(dv) ** 2
    L2 = np.where(L2 == 0, 1e-300, L2)
    chunk = max(1, int(4e6 // len(p0)))
    for s in range(0, len(z), chunk):
        zz = z[s : s + chunk, None]
        t = np.clip(((zz - p0) * np.conj(dv)).real / L2, 0.0, 1.0)
        out[s : s + chunk] = np.min(np.abs(zz - (p0 + t * dv)), axis=1)
    return out


class Region:
    """Base class of the region tree."""

    kind = "region"

    def contains(self, z):  # pragma: no cover - abstract
        raise NotImplementedError

    def edges(self, n: int) -> list[np.ndarray]:  # pragma: no cover - abstract
        raise NotImplementedError

    def extent(self) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def leaves(self) -> list["Region"]:
        return [self]

    def segments(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        p0, p1 = [], []
        for e in self.edges(n):
            p0.append(e[:-1])
            p1.append(e[1:])
        return np.concatenate(p0), np.concatenate(p1)

    def delta(self, z, n_boundary: int = 256):
        """Distance to the discretised boundary (no membership check)."""
        z = np.asarray(z, dtype=complex)
        p0, p1 = self.segments(n_boundary)
        out = _segment_distance(z.reshape(-1), p0, p1).reshape(z.shape)
        return float(out) if out.ndim == 0 else out

    def _member(self, z):
        return np.asarray(self.contains(z), dtype=bool)


@dataclass(frozen=True, eq=False)
class RawSector(Region):
    sector: Sector
    kind = "sector"

    def contains(self, z):
        return self.sector.contains(z)

    def edges(self, n):
        return self.sector.edges(n)

    def extent(self):
        return self.sector.r

    def to_json(self):
        return {"kind": "sector", **self.sector.to_json()}


@dataclass(frozen=True, eq=False)
class Disc(Region):
    center: complex
    radius: float
    kind = "disc"

    def contains(self, z):
        ok = np.abs(np.asarray(z, dtype=complex) - self.center) < self.radius
        return bool(ok) if np.ndim(ok) == 0 else ok

    def edges(self, n):
        th = np.linspace(0, TWO_PI, n + 1)
        return [self.center + self.radius * np.exp(1j * th)]

    def extent(self):
        return abs(self.center) + self.radius

    def to_json(self):
        c = complex(self.center)
        return {"kind": "disc", "center": [c.real, c.imag], "radius": self.radius}


@dataclass(frozen=True, eq=False)
class SectorImage(Region):
    chart: Chart
    sector: Sector
    kind = "sector_image"

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        _, ok = self.chart.invert(z, self.sector)
        return bool(ok) if ok.ndim == 0 else ok

    def preimage(self, z):
        return self.chart.invert(z, self.sector)

    def edges(self, n):
        return [self.chart(e) for e in self.sector.edges(n)]

    def extent(self):
        return float(np.max(np.abs(self.chart(self.sector.edges(64)[2]))))

    def to_json(self):
        return {"kind": "sector_image", "chart": self.chart.to_json(), "sector": self.sector.to_json()}


@dataclass(frozen=True, eq=False)
class Union(Region):
    children: tuple
    kind = "union"

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        ok = np.zeros(z.shape, dtype=bool)
        for c in self.children:
            ok |= c._member(z)
        return bool(ok) if ok.ndim == 0 else ok

    def leaves(self):
        return [l for c in self.children for l in c.leaves()]

    def edges(self, n):
        return [e for c in self.children for e in c.edges(n)]

    def segments(self, n):
        # keep only boundary pieces not swallowed by a sibling
        p0s, p1s = [], []
        for i, c in enumerate(self.children):
            p0, p1 = c.segments(n)
            mid = 0.5 * (p0 + p1)
            keep = np.ones(len(mid), dtype=bool)
            for j, o in enumerate(self.children):
                if j != i:
                    keep &= ~o._member(mid)
            p0s.append(p0[keep])
            p1s.append(p1[keep])
        return np.concatenate(p0s), np.concatenate(p1s)

    def extent(self):
        return max(c.extent() for c in self.children)

    def to_json(self):
        return {"op": "union", "children": [c.to_json() for c in self.children]}


@dataclass(frozen=True, eq=False)
class Intersection(Region):
    children: tuple
    kind = "intersect"

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        ok = np.ones(z.shape, dtype=bool)
        for c in self.children:
            idx = np.flatnonzero(ok.reshape(-1))
            if len(idx) == 0:
                break
            sub = c._member(z.reshape(-1)[idx])
            flat = ok.reshape(-1)
            flat[idx] = sub
            ok = flat.reshape(z.shape)
        return bool(ok) if ok.ndim == 0 else ok

    def leaves(self):
        return [l for c in self.children for l in c.leaves()]

    def edges(self, n):
        return [e for c in self.children for e in c.edges(n)]

    def delta(self, z, n_boundary: int = 256):
        # for members, distance to the complement of an intersection is the min
        z = np.asarray(z, dtype=complex)
        out = np.min(np.stack([np.asarray(c.delta(z, n_boundary)) for c in self.children]), axis=0)
        return float(out) if np.ndim(out) == 0 else out

    def extent(self):
        return min(c.extent() for c in self.children)

    def to_json(self):
        return {"op": "intersect", "children": [c.to_json() for c in self.children]}


def region_from_json(d: dict) -> Region:
    if "op" in d:
        kids = tuple(region_from_json(c) for c in d["children"])
        if d["op"] == "union":
            return Union(kids)
        if d["op"] in ("intersect", "intersection"):
            return Intersection(kids)
        raise ValueError(f"unknown region op {d['op']!r}")
    kind = d.get("kind")
    if kind == "sector":
        return RawSector(Sector.from_json(d))
    if kind == "disc":
        c = d.get("center", [0.0, 0.0])
        return Disc(complex(c[0], c[1]), float(d["radius"]))
    if kind == "sector_image":
        return SectorImage(Chart.from_json(d["chart"]), Sector.from_json(d["sector"]))
    raise ValueError(f"unknown region leaf kind {kind!r}")


def region_membership(reg: Region, z) -> bool:
    return reg.contains(z)


def boundary_distance(reg: Region, z, n_boundary: int = 256, check: bool = True):
    if check and not np.all(reg._member(z)):
        raise ValueError("boundary_distance: point is not in the region")
    return reg.delta(z, n_boundary)


# ---------------------------------------------------------------------------
# covering a band germ


def _band_samples(b: Band, W: float, n: int, seed: int):
    """Area-uniform samples of a polar box around the band germ of radius ``W``."""
    lo, hi = b.theta_range(W)
    m = 0.25 * (hi - lo) + 0.05
    rng = np.random.default_rng(seed)
    rho = 1.2 * W * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(lo - m, hi + m, n)
    return rho * np.exp(1j * th)


def cover_agreement(b: Band, W: float, pieces: list[Region], n: int = 10_000, seed: int = 0) -> dict:
    """Sampled agreement between ``union(pieces)`` and ``band ∩ {|z| < W}``."""
    z = _band_samples(b, W, n, seed)
    truth = b.contains(z) & (np.abs(z) < W)
    pred = np.zeros(z.shape, dtype=bool)
    for p in pieces:
        pred |= p._member(z)
    return {
        "agreement": float(np.mean(truth == pred)),
        "coverage": float(np.mean(pred[truth])) if truth.any() else 1.0,
        "soundness": float(np.mean(truth[pred])) if pred.any() else 1.0,
        "n_band": int(truth.sum()),
    }


def _split_sector(alpha: float, beta: float, r: float, max_amp: float) -> list[Sector]:
    width = beta - alpha
    n = max(1, math.ceil(width / (0.9 * max_amp)))
    step = width / n
    ov = 0.0 if n == 1 else min(0.1 * step, 0.5 * (max_amp - step))
    out = []
    for i in range(n):
        a = alpha + i * step - (ov if i > 0 else 0.0)
        bb = alpha + (i + 1) * step + (ov if i < n - 1 else 0.0)
        out.append(Sector.from_edges(a, bb, r))
    return out


def cover_band(
    b: Band,
    max_amplitude: float,
    max_radius: float,
    n_check: int = 2000,
    membership_tol: float = 0.999,
    seed: int = 0,
) -> tuple[float, list[Region]]:
    """Cover the germ of ``band`` at 0 by sectors and chart images of sectors.

    Returns ``(W_radius, pieces)`` with ``union(pieces) = band ∩ {|z| < W}``
    up to sampling.  ``max_amplitude`` bounds every z-plane angular width;
    chart sectors in the w-plane are ``max_amplitude / d`` wide.  ``W`` is
    found by halving from ``max_radius`` until injectivity and sampled
    membership both pass (20 halvings at most).
    """
    if max_amplitude <= 0 or max_radius <= 0:
        raise ValueError("max_amplitude and max_radius must be positive")
    max_amplitude = min(max_amplitude, 0.95 * math.pi)
    eta0, xi0 = b.lower.value_at_0, b.upper.value_at_0
    W0 = min(max_radius, b.R)
    if b.lower.is_constant and b.upper.is_constant:
        if xi0 - eta0 <= max_amplitude:
            return W0, [RawSector(Sector.from_edges(eta0, xi0, W0))]
    cusp = abs(xi0 - eta0) <= 1e-12
    dl, dh = b.lower.d, b.upper.d
    if cusp:
        wl = wh = 0.9 * max_amplitude
    else:
        gap = xi0 - eta0
        wl = wh = min(0.9 * max_amplitude, gap / 3)
    last = "no attempt"
    for attempt in range(21):
        W = W0 * 0.5**attempt
        try:
            ch_lo = chart_from_arc(b.lower, radius=(2.0 * W) ** (1.0 / dl), half_amplitude=wl / dl)
            ch_hi = chart_from_arc(b.upper, radius=(2.0 * W) ** (1.0 / dh), half_amplitude=wh / dh)
        except ArithmeticError as exc:
            last = str(exc)
            continue
        rl = (1.5 * W) ** (1.0 / dl)
        rh = (1.5 * W) ** (1.0 / dh)
        if rl > ch_lo.validity.r or rh > ch_hi.validity.r:
            last = "chart validity radius too small"
            continue
        s_lo = Sector.from_edges(0.0, wl / dl, rl)
        s_hi = Sector.from_edges(-wh / dh, 0.0, rh)
        if not (ch_lo.check_injective(s_lo) and ch_hi.check_injective(s_hi)):
            last = "injectivity sampling failed"
            continue
        disc = Disc(0j, W)
        if cusp:
            pieces: list[Region] = [Intersection((SectorImage(ch_lo, s_lo), SectorImage(ch_hi, s_hi), disc))]
        else:
            mids = _split_sector(eta0 + wl / 2, xi0 - wh / 2, W, max_amplitude)
            pieces = [Intersection((SectorImage(ch_lo, s_lo), disc))]
            pieces += [RawSector(s) for s in mids]
            pieces.append(Intersection((SectorImage(ch_hi, s_hi), disc)))
        stats = cover_agreement(b, W, pieces, n=n_check, seed=seed)
        if stats["coverage"] >= membership_tol and stats["soundness"] >= membership_tol:
            return W, sort_pieces(pieces)
        last = f"membership check failed at W={W:.3g}: {stats}"
        log.debug(last)
    raise CoverError(f"cover_band: no admissible neighbourhood after 20 halvings ({last})")


def piece_key(p: Region) -> tuple[float, float]:
    """(bisector angle, radius) of the piece's leading leaf, for stable ordering."""
    leaf = p.leaves()[0]
    if isinstance(leaf, RawSector):
        return (leaf.sector.tau, leaf.sector.r)
    if isinstance(leaf, SectorImage):
        w = 0.5 * leaf.sector.r * np.exp(1j * leaf.sector.tau)
        z = leaf.chart(w)
        return (float(np.angle(z)), float(abs(leaf.chart(leaf.sector.r * np.exp(1j * leaf.sector.tau)))))
    return (0.0, leaf.extent())


def sort_pieces(pieces: list[Region]) -> list[Region]:
    return sorted(pieces, key=piece_key)
