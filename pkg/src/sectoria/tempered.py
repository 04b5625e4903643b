"""Numerical certification of polynomial growth near the boundary of a region.

The central object is a sample of region points stratified by their
distance ``delta`` to the boundary: stratum ``k`` holds points with
``delta`` in ``[2^-(k+1), 2^-k)``.  Growth exponents are read off the
per-stratum maxima of ``|f|`` on a log–log scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .geometry import Chart, Region, Sector, SectorImage, RawSector
from .holofn import ChartPullback, HoloFn

__all__ = [
    "HypothesisError",
    "PullbackReport",
    "StratifiedSample",
    "TemperedCertificate",
    "fit_growth_exponent",
    "lojasiewicz_exponents",
    "pullback_temperedness_check",
    "stratified_sample",
    "tempered_norm",
]

N_STRATA = 21
M_MAX = 20.0
FIT_RESIDUAL = 3.0
TREND_TOL = 0.05


class HypothesisError(ValueError):
    """Input violates a hypothesis the computation relies on."""


@dataclass(frozen=True)
class StratifiedSample:
    z: np.ndarray
    delta: np.ndarray
    stratum: np.ndarray
    seed: int

    def __len__(self):
        return len(self.z)


def _stratum_of(delta: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        k = np.floor(-np.log2(delta)).astype(int)
    return k


def stratified_sample(
    reg: Region,
    per_stratum: int = 512,
    seed: int = 0,
    n_strata: int = N_STRATA,
    n_boundary: int = 256,
) -> StratifiedSample:
    """Region points, ``per_stratum`` of them for each reachable dyadic stratum.

    Candidates are boundary points pushed inward along the segment normal
    by a target distance drawn log-uniformly within each stratum, plus a
    uniform Halton fill of the polar bounding box.  Membership and the true
    distance are recomputed for every candidate, so a candidate is binned
    by where it actually lands.
    """
    p0, p1 = reg.segments(n_boundary)
    seg_len = np.abs(p1 - p0)
    keep = seg_len > 0
    p0, p1, seg_len = p0[keep], p1[keep], seg_len[keep]
    if len(p0) == 0:
        raise ValueError("region has an empty boundary discretisation")
    tangent = (p1 - p0) / seg_len
    halton = qmc.Halton(d=3, seed=np.random.default_rng(seed))
    extent = reg.extent()

    zs, ds, ks = [], [], []
    counts = np.zeros(n_strata, dtype=int)
    for k in range(n_strata):
        want = per_stratum
        lo, hi = 2.0 ** -(k + 1), 2.0**-k
        if lo > extent:
            continue
        for _ in range(6):
            if counts[k] >= per_stratum:
                break
            n = 4 * want
            u = halton.random(n)
            # choose segments uniformly in index, which follows the boundary
            # parametrisation (geometric near the vertex)
            j = np.minimum((u[:, 0] * len(p0)).astype(int), len(p0) - 1)
            base = p0[j] + u[:, 1] * (p1[j] - p0[j])
            d = lo * (hi / lo) ** u[:, 2]
            cand = np.concatenate([base + 1j * tangent[j] * d, base - 1j * tangent[j] * d])
            cand = cand[np.abs(cand) > 0]
            inside = np.asarray(reg.contains(cand), dtype=bool)
            cand = cand[inside]
            if len(cand) == 0:
                continue
            dd = np.asarray(reg.delta(cand, n_boundary))
            kk = _stratum_of(dd)
            sel = np.flatnonzero(kk == k)[: per_stratum - counts[k]]
            zs.append(cand[sel])
            ds.append(dd[sel])
            ks.append(kk[sel])
            counts[k] += len(sel)
            want = max(8, per_stratum - counts[k])
    if not zs:
        raise ValueError("sampled region is empty")
    z = np.concatenate(zs)
    if len(z) == 0:
        raise ValueError("sampled region is empty")
    return StratifiedSample(z, np.concatenate(ds), np.concatenate(ks), seed)


def _log_abs(vals: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.abs(vals)
        out = np.log(a)
    out = np.where(np.isnan(out) | (a == np.inf), np.inf, out)
    return out


def tempered_norm(
    f: HoloFn,
    reg: Region,
    M: float,
    grid_size: int = 512 * N_STRATA,
    seed: int = 0,
    sample: StratifiedSample | None = None,
) -> float:
    """``max delta(z)^M |f(z)|`` over a stratified sample of ``grid_size`` points."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    s = sample or stratified_sample(reg, per_stratum=max(1, grid_size // N_STRATA), seed=seed)
    la = _log_abs(f(s.z))
    with np.errstate(invalid="ignore"):
        lv = la + M * np.log(s.delta)
    m = float(np.max(lv))
    return math.inf if not math.isfinite(m) and m > 0 else float(np.exp(m))


@dataclass(frozen=True)
class TemperedCertificate:
    M: float
    sup: float
    verdict: str
    grid: dict
    strata: list = field(default_factory=list)
    slope: float = math.nan
    residual: float = math.nan

    @property
    def tempered(self) -> bool:
        return self.verdict == "tempered"

    def to_json(self) -> dict:
        return {
            "M": _jf(self.M),
            "sup": _jf(self.sup),
            "verdict": self.verdict,
            "slope": _jf(self.slope),
            "fit_residual": _jf(self.residual),
            "grid": self.grid,
            "strata": self.strata,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TemperedCertificate":
        return cls(
            M=_pf(d["M"]),
            sup=_pf(d["sup"]),
            verdict=d["verdict"],
            grid=d.get("grid", {}),
            strata=d.get("strata", []),
            slope=_pf(d.get("slope")),
            residual=_pf(d.get("fit_residual")),
        )


def _jf(x):
    """JSON-safe float: infinities and NaN become strings."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _pf(x):
    if x is None:
        return math.nan
    return float(x)


M_GRID = np.arange(0.0, M_MAX + 0.125, 0.25)


def _deep_half(n: int) -> slice:
    return slice(min(n // 2, n - 4), None)


def fit_growth_exponent(
    f: HoloFn,
    reg: Region,
    per_stratum: int = 512,
    seed: int = 0,
    sample: StratifiedSample | None = None,
    values: np.ndarray | None = None,
) -> TemperedCertificate:
    """Smallest ``M`` on a 0.25 grid for which ``delta^M |f|`` stops growing.

    For each candidate ``M`` the running maxima of ``log(delta^M |f|)``
    (over all strata up to the current depth) are regressed on the stratum depth ``-log delta``; ``M`` is accepted
    once the regression over the deeper half of the strata drifts upward
    by at most ``TREND_TOL``.  The shallow strata see the far side of the
    region rather than its boundary, so they are left out.  Taking the
    maximum over a whole stratum, rather than the value at the single
    largest ``|f|``, keeps the fit insensitive to where the sampler
    happened to land inside the stratum.

    ``values`` may carry precomputed ``f`` values on ``sample`` (shape
    ``(n,)`` or ``(m, n)``; the max-entry modulus is used for vectors).
    """
    s = sample or stratified_sample(reg, per_stratum=per_stratum, seed=seed)
    vals = f(s.z) if values is None else values
    la = _log_abs(np.asarray(vals))
    if la.ndim > 1:
        la = np.max(la, axis=0)
    la = np.maximum(la, -745.0)  # exact zeros sit at the float floor
    ks = np.unique(s.stratum)
    strata = []
    for k in ks:
        sel = s.stratum == k
        mx = float(np.max(la[sel]))
        strata.append({"k": int(k), "count": int(sel.sum()), "max": _jf(math.exp(mx) if mx < 700 else math.inf)})
    grid = {"count": int(len(s)), "seed": int(s.seed), "min_delta": float(np.min(s.delta))}
    if len(ks) < 4:
        return TemperedCertificate(math.nan, math.nan, "inconclusive", grid, strata)
    if not np.all(np.isfinite(la)):
        return TemperedCertificate(math.inf, math.inf, "not-tempered", grid, strata, slope=math.inf)
    deep = ks[_deep_half(len(ks))]
    x = (deep + 0.5) * math.log(2.0)
    logd = np.log(s.delta)

    def profile(M):
        # running sup of delta^M |f| over delta >= 2^-(k+1): sampling noise only
        # ever lowers a stratum maximum, and the envelope hides those dips
        lv = la + M * logd
        return np.maximum.accumulate([np.max(lv[s.stratum == k]) for k in ks])[_deep_half(len(ks))]

    growth = float(np.polyfit(x, profile(0.0), 1)[0])
    for M in M_GRID:
        g = profile(M)
        if np.polyfit(x, g, 1)[0] <= TREND_TOL:
            break
    else:
        return TemperedCertificate(math.inf, math.inf, "not-tempered", grid, strata, slope=growth)
    M = float(M)
    coef = np.polyfit(x, g, 1)
    fit_res = float(np.max(np.abs(np.polyval(coef, x) - g)))
    sup = float(np.exp(np.max(la + M * logd)))
    verdict = "tempered" if fit_res <= FIT_RESIDUAL else "inconclusive"
    return TemperedCertificate(M, sup, verdict, grid, strata, slope=growth, residual=fit_res)


def lojasiewicz_exponents(f, g, points, r_max: float = 10.0) -> tuple[float, float]:
    """Sample witnesses ``(c, r)`` with ``f >= c g^r`` at every sample point.

    ``r`` is the smallest exponent on a 0.25 grid, refined by bisection to
    1e-3, for which the per-bin minima of ``f / g^r`` do not decay as ``g``
    shrinks dyadically (slope of their log against ``log g`` is <= 0).
    """
    fv = np.asarray(f(points) if callable(f) else f, dtype=float)
    gv = np.asarray(g(points) if callable(g) else g, dtype=float)
    if np.any(fv < 0) or np.any(gv < 0):
        raise HypothesisError("lojasiewicz_exponents needs nonnegative samples")
    if np.any((fv < 1e-12) & (gv > 1e-6)):
        raise HypothesisError("zero set of f is not contained in the zero set of g on the samples")
    pos = (gv > 0) & (fv > 0)
    fv, gv = fv[pos], gv[pos]
    lf, lg = np.log(fv), np.log(gv)
    bins = np.floor(lg / math.log(2.0)).astype(int)
    ub = np.unique(bins)

    def trend(r):
        mins = np.array([np.min(lf[bins == b] - r * lg[bins == b]) for b in ub])
        if len(ub) < 2:
            return 0.0
        return float(np.polyfit(ub * math.log(2.0), mins, 1)[0])

    # trend(r) is decreasing in r; find its first nonpositive value
    grid = np.arange(0.0, r_max + 1e-12, 0.25)
    tr = np.array([trend(r) for r in grid])
    idx = np.flatnonzero(tr <= 1e-9)
    if len(idx) == 0:
        r = r_max
    elif idx[0] == 0:
        r = 0.0
    else:
        a, b = grid[idx[0] - 1], grid[idx[0]]
        while b - a > 1e-3:
            mid = 0.5 * (a + b)
            if trend(mid) <= 1e-9:
                b = mid
            else:
                a = mid
        r = b
    # snap to the nearest multiple of 1e-3 when the bracket allows it
    r = round(r, 3) if trend(round(r, 3)) <= 1e-9 else r
    c = float(np.min(fv / gv**r))
    return c, float(r)


@dataclass(frozen=True)
class PullbackReport:
    image: TemperedCertificate
    pullback: TemperedCertificate
    verdict: str  # consistent | inconsistent | inconclusive
    exponent_ratio: float
    lojasiewicz: dict

    def to_json(self) -> dict:
        return {
            "image": self.image.to_json(),
            "pullback": self.pullback.to_json(),
            "verdict": self.verdict,
            "exponent_ratio": _jf(self.exponent_ratio),
            "lojasiewicz": self.lojasiewicz,
        }


def pullback_temperedness_check(
    h: HoloFn, chart: Chart, sector: Sector, per_stratum: int = 256, seed: int = 0
) -> PullbackReport:
    """Compare growth of ``h`` on ``chart(sector)`` with growth of ``h∘chart`` on ``sector``."""
    image = SectorImage(chart, sector)
    cert_img = fit_growth_exponent(h, image, per_stratum=per_stratum, seed=seed)
    sample_w = stratified_sample(RawSector(sector), per_stratum=per_stratum, seed=seed)
    cert_pb = fit_growth_exponent(ChartPullback(chart, h), RawSector(sector), sample=sample_w)
    verdicts = {cert_img.verdict, cert_pb.verdict}
    if "inconclusive" in verdicts:
        verdict = "inconclusive"
    elif len(verdicts) == 1:
        verdict = "consistent"
    else:
        verdict = "inconsistent"
    ratio = math.nan
    loj: dict = {}
    if cert_img.tempered and cert_pb.tempered:
        ratio = cert_pb.M / cert_img.M if cert_img.M > 0 else (1.0 if cert_pb.M == 0 else math.inf)
        # delta_V(phi(w)) versus delta_U(w) on the sector samples
        w = sample_w.z
        d_u = sample_w.delta
        z = chart(w)
        d_v = np.asarray(image.delta(z))
        a, alpha = lojasiewicz_exponents(d_v, d_u, None)
        b, beta = lojasiewicz_exponents(d_u, d_v, None)
        loj = {"a": a, "alpha": alpha, "b": b, "beta": beta}
    return PullbackReport(cert_img, cert_pb, verdict, ratio, loj)
