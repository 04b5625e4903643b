"""Cover a band germ, solve on every piece, and check the pieces glue.

``cover_and_solve`` is the main entry point.  It refines the covering
until every piece fits the amplitude and radius limits of the
exponential part, solves on each piece by variation of parameters, and
certifies every piece solution by an ODE residual and a growth fit.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import qmc

from .geometry import Band, CoverError, Intersection, RawSector, Region, SectorImage, cover_agreement, cover_band
from .holofn import Expr, FnNode, HoloFn, Poly
from .honda import PathError, SectorSolution, amplitude_bound, fd_steps, ode_residual, solve_on_chart_image, solve_system_sector
from .quadrature import IntegrationError
from .tempered import TemperedCertificate, _jf, fit_growth_exponent, stratified_sample
from .turrittin import ExponentialPart, FormalFundamental, OperatorSpec, UnsupportedCase, exponential_parts, formal_fundamental

log = logging.getLogger(__name__)

__all__ = [
    "PieceResult",
    "SolveReport",
    "Tolerances",
    "cover_and_solve",
    "h1_comparison_experiment",
    "interior_samples",
    "mayer_vietoris_check",
    "polynomial_trials",
]

SCHEMA = "sectoria/1"


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-6
    gluing: float = 1e-6
    membership: float = 0.999
    coefficient_stability: float = 1e-4
    quad_rtol: float = 1e-10
    residual_samples: int = 32
    overlap_samples: int = 64
    cert_per_stratum: int = 16
    max_radius: float = 0.5
    amplitude_margin: float = 0.9
    order: int = 20

    def updated(self, overrides: dict | None) -> "Tolerances":
        if not overrides:
            return self
        unknown = set(overrides) - set(asdict(self))
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(self, **{k: type(getattr(self, k))(v) for k, v in overrides.items()})


@dataclass
class PieceResult:
    id: str
    band: int
    region: Region
    kind: str
    branch_center: float
    solution: SectorSolution | None = None
    residual: float = math.nan
    certificate: TemperedCertificate | None = None
    plans: list = field(default_factory=list)
    error: str | None = None

    def ok(self, tol: Tolerances, gscale: float) -> bool:
        return (
            self.error is None
            and self.residual <= tol.residual * (1 + gscale)
            and self.certificate is not None
            and self.certificate.tempered
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "band": self.band,
            "kind": self.kind,
            "branch_center": self.branch_center,
            "region": self.region.to_json(),
            "paths": self.plans,
            "residual": _jf(self.residual),
            "certificate": self.certificate.to_json() if self.certificate else None,
            "error": self.error,
        }


@dataclass
class SolveReport:
    op: OperatorSpec
    ep: ExponentialPart | None
    ff: FormalFundamental | None
    g: list
    pieces: list
    covers: list
    overlaps: list
    verdict: str
    tolerances: Tolerances
    seed: int
    gscale: float = 0.0
    error: str | None = None

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "operator": self.op.to_json(),
            "exponential_part": self.ep.to_json() if self.ep else None,
            "rhs": [gi.label for gi in self.g],
            "covers": self.covers,
            "pieces": [p.to_json() for p in self.pieces],
            "overlaps": self.overlaps,
            "verdict": self.verdict,
            "seed": self.seed,
            "tolerances": asdict(self.tolerances),
            "error": self.error,
        }

    def pieces_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "band", "kind", "residual", "M", "verdict", "error"])
        for p in self.pieces:
            c = p.certificate
            w.writerow([p.id, p.band, p.kind, repr(p.residual), repr(c.M) if c else "", c.verdict if c else "", p.error or ""])
        return buf.getvalue()

    def samples_csv(self, n: int = 64) -> str:
        """Sampled solution values per piece: z, u, residual and boundary distance."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        m = self.op.m
        head = ["piece", "z_re", "z_im"]
        for k in range(m):
            head += [f"u{k}_re", f"u{k}_im"] if m > 1 else ["u_re", "u_im"]
        w.writerow(head + ["residual", "delta"])
        for p in self.pieces:
            if p.solution is None:
                continue
            z, delta = interior_samples(p.region, n, self.seed, center=p.branch_center)
            u = p.solution.evaluate(z)
            h = fd_steps(z, delta, self.ep.lambdas, p.branch_center)
            res = ode_residual(p.solution.evaluate, self.op, self.g, z, h, p.branch_center)
            for i in range(len(z)):
                row = [p.id, repr(z[i].real), repr(z[i].imag)]
                for k in range(m):
                    row += [repr(u[k, i].real), repr(u[k, i].imag)]
                w.writerow(row + [repr(float(res[i])), repr(float(delta[i]))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# sampling helpers


def _angular_range(reg: Region, center: float) -> tuple[float, float]:
    pts = np.concatenate(reg.edges(64))
    pts = pts[np.abs(pts) > 0]
    ang = center + np.angle(pts * np.exp(-1j * center))
    return float(np.min(ang)), float(np.max(ang))


def interior_samples(reg: Region, n: int, seed: int = 0, center: float = 0.0, min_rel_delta: float = 0.05):
    """``n`` region points with boundary distance at least ``min_rel_delta |z|``.

    Radii are log-uniform over two decades below the region's extent and
    angles uniform over its angular range, both from a Halton sequence.
    """
    ext = reg.extent()
    lo, hi = _angular_range(reg, center)
    halton = qmc.Halton(d=2, seed=np.random.default_rng(seed))
    out_z, out_d = [], []
    got = 0
    for _ in range(20):
        u = halton.random(8 * n)
        rho = ext * 10.0 ** (-2 * u[:, 0])
        th = lo + (hi - lo) * u[:, 1]
        z = rho * np.exp(1j * th)
        z = z[np.asarray(reg.contains(z), dtype=bool)]
        if len(z) == 0:
            continue
        d = np.asarray(reg.delta(z))
        keep = d >= min_rel_delta * np.abs(z)
        out_z.append(z[keep])
        out_d.append(d[keep])
        got += int(keep.sum())
        if got >= n:
            break
    if got == 0:
        raise ValueError("could not sample the region interior")
    z = np.concatenate(out_z)[:n]
    d = np.concatenate(out_d)[:n]
    return z, d


# ---------------------------------------------------------------------------
# pipeline


def _lift_rhs(g, m: int) -> list[HoloFn]:
    if isinstance(g, (str, HoloFn)) or np.isscalar(g):
        g = [g]
    out = []
    for gi in g:
        if isinstance(gi, HoloFn):
            out.append(gi)
        elif isinstance(gi, str):
            out.append(Expr(gi))
        else:
            out.append(Expr(repr(complex(gi)) if complex(gi).imag else repr(complex(gi).real)))
    if len(out) != m:
        raise ValueError(f"right-hand side has {len(out)} components, operator has m = {m}")
    return out


def _piece_branch(piece: Region, band: Band) -> float:
    """Blow-up angle of the piece: its bisector unwrapped near the band's angles."""
    leaf = piece.leaves()[0]
    mid = 0.5 * (band.lower.value_at_0 + band.upper.value_at_0)
    if isinstance(leaf, RawSector):
        return float(leaf.sector.tau)
    w = 0.5 * leaf.sector.r * np.exp(1j * leaf.sector.tau)
    z = leaf.chart(w)
    return float(mid + np.angle(z * np.exp(-1j * mid)))


def solve_piece(op, ep, ff, piece: Region, g, bc: float, tol: Tolerances) -> SectorSolution:
    leaf = piece.leaves()[0]
    if isinstance(leaf, RawSector):
        return solve_system_sector(op, ff, ep, g, leaf.sector, rtol=tol.quad_rtol, branch_center=bc)
    if isinstance(leaf, SectorImage):
        return solve_on_chart_image(op, ep, ff, leaf.chart, leaf.sector, g, rtol=tol.quad_rtol, branch_center=bc)
    raise ValueError(f"cannot solve on a piece led by {type(leaf).__name__}")


def certify_piece(pr: PieceResult, op, ep, g, tol: Tolerances, seed: int) -> None:
    sol = pr.solution
    z, delta = interior_samples(pr.region, tol.residual_samples, seed, center=pr.branch_center)
    h = fd_steps(z, delta, ep.lambdas, pr.branch_center)
    res = ode_residual(sol.evaluate, op, g, z, h, pr.branch_center)
    pr.residual = float(np.max(res))
    sample = stratified_sample(pr.region, per_stratum=tol.cert_per_stratum, seed=seed)
    vals = sol.evaluate(sample.z)
    pr.certificate = fit_growth_exponent(None, pr.region, sample=sample, values=vals)
    pr.plans = [pl.kind for pl in sol.plans]


def _gscale(g, pieces, seed) -> float:
    s = 0.0
    for p in pieces:
        z, _ = interior_samples(p.region, 32, seed, center=p.branch_center)
        for gi in g:
            s = max(s, float(np.max(np.abs(gi(z)))))
    return s


def cover_for(op: OperatorSpec, ep: ExponentialPart, bands, tol: Tolerances, seed: int = 0):
    """Covering of every band with pieces that respect the exponential part's limits."""
    alpha = min(amplitude_bound(l).alpha for l in ep.lambdas)
    rho_star = min(amplitude_bound(l).rho_star for l in ep.lambdas)
    covers, pieces = [], []
    for bi, b in enumerate(bands):
        max_radius = min(rho_star, b.R, op.disc_radius, tol.max_radius)
        W, ps = cover_band(b, tol.amplitude_margin * alpha, max_radius, membership_tol=tol.membership, seed=seed)
        stats = cover_agreement(b, W, ps, n=10_000, seed=seed)
        covers.append({"band": bi, "W_radius": W, "n_pieces": len(ps), "max_amplitude": tol.amplitude_margin * alpha,
                       "max_radius": max_radius, "agreement": stats})
        for j, p in enumerate(ps):
            kind = "sector" if isinstance(p.leaves()[0], RawSector) else "chart"
            pieces.append(PieceResult(f"b{bi}-p{j}", bi, p, kind, _piece_branch(p, b)))
    return covers, pieces


def cover_and_solve(
    op: OperatorSpec,
    bands,
    g,
    tol: Tolerances | None = None,
    seed: int = 0,
    overlaps: bool = True,
    _cover=None,
) -> SolveReport:
    tol = tol or Tolerances()
    g = _lift_rhs(g, op.m)
    try:
        ep = exponential_parts(op)
        ff = formal_fundamental(op, ep, tol.order)
    except UnsupportedCase as exc:
        return SolveReport(op, None, None, g, [], [], [], "failed", tol, seed, error=f"unsupported: {exc}")
    try:
        covers, pieces = _cover if _cover is not None else cover_for(op, ep, bands, tol, seed)
        pieces = [PieceResult(p.id, p.band, p.region, p.kind, p.branch_center) for p in pieces]
    except (CoverError, ArithmeticError, ValueError) as exc:
        return SolveReport(op, ep, ff, g, [], [], [], "failed", tol, seed, error=f"cover: {exc}")
    for pr in pieces:
        try:
            pr.solution = solve_piece(op, ep, ff, pr.region, g, pr.branch_center, tol)
            certify_piece(pr, op, ep, g, tol, seed)
        except (PathError, IntegrationError, ArithmeticError, ValueError) as exc:
            pr.error = f"{type(exc).__name__}: {exc}"
            log.info("piece %s failed: %s", pr.id, pr.error)
    gscale = _gscale(g, pieces, seed)
    n_ok = sum(p.ok(tol, gscale) for p in pieces)
    verdict = "solved" if n_ok == len(pieces) and pieces else ("partial" if n_ok else "failed")
    rep = SolveReport(op, ep, ff, g, pieces, covers, [], verdict, tol, seed, gscale=gscale)
    if overlaps:
        for i, a in enumerate(pieces):
            for b in pieces[i + 1 :]:
                if a.band == b.band and a.solution is not None and b.solution is not None:
                    rec = mayer_vietoris_check(rep, (a.id, b.id))
                    if rec["status"] != "skipped":
                        rep.overlaps.append(rec)
    return rep


# ---------------------------------------------------------------------------
# gluing


def _overlap_points(pa: PieceResult, pb: PieceResult, n: int, seed: int):
    reg = Intersection((pa.region, pb.region))
    try:
        z, _ = interior_samples(reg, n, seed, center=pa.branch_center, min_rel_delta=0.02)
    except ValueError:
        return np.zeros(0, complex)
    return z


def _fit_homogeneous(rep: SolveReport, pa: PieceResult, pb: PieceResult, z: np.ndarray):
    D = pa.solution.evaluate(z) - pb.solution.evaluate(z)  # (m, n)
    with np.errstate(over="ignore", invalid="ignore"):
        Phi = rep.ff.fundamental(z, pa.branch_center)  # (m, m, n)
    m = rep.op.m
    Amat = np.moveaxis(Phi, 2, 0).reshape(-1, m)  # rows (point, component)
    rhs = D.T.reshape(-1)
    good = np.all(np.isfinite(Amat), axis=1) & np.isfinite(rhs)
    Amat, rhs = Amat[good], rhs[good]
    colscale = np.max(np.abs(Amat), axis=0, initial=0.0)
    colscale = np.where(colscale > 0, colscale, 1.0)
    c, *_ = np.linalg.lstsq(Amat / colscale, rhs, rcond=None)
    c = c / colscale
    resid = float(np.max(np.abs(Amat @ c - rhs))) if len(rhs) else math.inf
    ua, ub = pa.solution.evaluate(z), pb.solution.evaluate(z)
    scale = max(1.0, float(np.nanmax(np.abs(ua))), float(np.nanmax(np.abs(ub))))
    # a column matters only if its contribution is visible at the fit points
    contrib = np.max(np.abs(Amat * c[None, :]), axis=0) if len(rhs) else np.zeros(m)
    return c, resid, scale, contrib


def _homogeneous_values(rep: SolveReport, pa: PieceResult, z: np.ndarray, c: np.ndarray, keep: np.ndarray):
    with np.errstate(over="ignore", invalid="ignore"):
        Phi = rep.ff.fundamental(z, pa.branch_center)
    return np.einsum("ijn,j->in", Phi[:, keep], c[keep])


def mayer_vietoris_check(report: SolveReport, pair: tuple[str, str], n_samples: int | None = None) -> dict:
    """Fit ``u_a - u_b`` on the overlap by homogeneous solutions ``F e^Λ c``.

    PASS needs a small fit residual, coefficients that move by at most the
    stability tolerance (relative to ``max(1, |c|)``) when the sample is
    doubled, and a tempered fitted difference.  Columns whose contribution
    stays below the gluing tolerance are treated as zero.
    """
    tol = report.tolerances
    n = n_samples or tol.overlap_samples
    by_id = {p.id: p for p in report.pieces}
    pa, pb = by_id[pair[0]], by_id[pair[1]]
    rec = {"pair": list(pair), "status": "skipped"}
    z1 = _overlap_points(pa, pb, n, report.seed)
    if len(z1) < 32:
        rec["notice"] = f"overlap too small to sample ({len(z1)} points)"
        return rec
    z2 = _overlap_points(pa, pb, 2 * n, report.seed + 1)
    c1, r1, s1, contrib = _fit_homogeneous(report, pa, pb, z1)
    c2, *_ = _fit_homogeneous(report, pa, pb, z2)
    keep = contrib > tol.gluing * s1
    shift = np.abs(c1 - c2) / np.maximum(1.0, np.abs(c1))
    stability = float(np.max(np.where(keep, shift, 0.0))) if len(z2) >= 32 else math.nan
    reg = Intersection((pa.region, pb.region))
    cert = None
    try:
        sample = stratified_sample(reg, per_stratum=4 * tol.cert_per_stratum, seed=report.seed)
        if not np.any(keep):
            # identical to tolerance: nothing left to grow
            cert = TemperedCertificate(0.0, 0.0, "tempered", {"count": int(len(sample.z)), "seed": report.seed}, [], 0.0, 0.0)
        else:
            vals = _homogeneous_values(report, pa, sample.z, c1, keep)
            cert = fit_growth_exponent(None, reg, sample=sample, values=vals)
    except ValueError as exc:
        rec["notice"] = f"difference certificate unavailable: {exc}"
    ok = r1 <= tol.gluing * s1 and cert is not None and cert.tempered and stability <= tol.coefficient_stability
    rec.update(
        {
            "status": "PASS" if ok else "FAIL",
            "n_points": int(len(z1)),
            "coefficients": [[complex(x).real, complex(x).imag] for x in c1],
            "coefficients_doubled": [[complex(x).real, complex(x).imag] for x in c2],
            "active": [bool(k) for k in keep],
            "coefficient_shift": _jf(stability),
            "fit_residual": r1,
            "scale": s1,
            "certificate": cert.to_json() if cert else None,
        }
    )
    return rec


# ---------------------------------------------------------------------------
# experiment


def polynomial_trials(m: int, n: int, seed: int = 0, degree: int = 3) -> list[list[HoloFn]]:
    """``n`` random polynomial right-hand sides, each a vector of ``m`` polynomials."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        vec = []
        for _ in range(m):
            c = rng.normal(size=degree + 1) + 1j * rng.normal(size=degree + 1)
            c = np.round(c, 6)
            vec.append(Poly(c))
        out.append(vec)
    return out


def _classify_rhs(g: list[HoloFn], pieces, tol: Tolerances, seed: int) -> str:
    for p in pieces:
        sample = stratified_sample(p.region, per_stratum=tol.cert_per_stratum, seed=seed)
        vals = np.stack([np.broadcast_to(np.asarray(gi(sample.z), complex), sample.z.shape) for gi in g])
        cert = fit_growth_exponent(None, p.region, sample=sample, values=vals)
        if not cert.tempered:
            return cert.verdict
    return "tempered"


def h1_comparison_experiment(
    op: OperatorSpec,
    bands,
    trials,
    tol: Tolerances | None = None,
    seed: int = 0,
    negative_control: bool = True,
) -> dict:
    """Fraction of tempered right-hand sides for which every piece is solved.

    Non-tempered data (and the built-in control ``exp(1/z) (1 + z)``) are
    reported as out of scope rather than as failures.
    """
    tol = tol or Tolerances()
    report = {"schema": SCHEMA, "operator": op.to_json(), "seed": seed, "trials": [], "success_fraction": None}
    if not trials and not negative_control:
        return report
    try:
        ep = exponential_parts(op)
        cover = cover_for(op, ep, bands, tol, seed)
    except (UnsupportedCase, CoverError, ArithmeticError, ValueError) as exc:
        report["error"] = str(exc)
        return report
    report["exponential_part"] = ep.to_json()
    n_in, n_ok = 0, 0
    for i, g in enumerate(trials):
        g = _lift_rhs(g, op.m)
        cls = _classify_rhs(g, cover[1], tol, seed)
        entry = {"trial": i, "rhs": [gi.label for gi in g], "rhs_class": cls}
        if cls != "tempered":
            entry["status"] = "out-of-scope"
        else:
            rep = cover_and_solve(op, bands, g, tol, seed, overlaps=False, _cover=cover)
            n_in += 1
            n_ok += rep.verdict == "solved"
            entry["status"] = rep.verdict
            entry["max_residual"] = _jf(max((p.residual for p in rep.pieces), default=math.nan))
        report["trials"].append(entry)
    if negative_control:
        ctrl = [FnNode(lambda z: np.exp(1 / z) * (1 + z), "exp(1/z)*(1+z)")] + [Poly([1.0])] * (op.m - 1)
        right = [Band.from_json({"lower": {"terms": [{"num": 0, "den": 1, "coef": -math.pi / 4}]},
                                 "upper": {"terms": [{"num": 0, "den": 1, "coef": math.pi / 4}]}, "R": 0.5})]
        ctrl_cover = cover_for(op, ep, right, tol, seed)
        cls = _classify_rhs(ctrl, ctrl_cover[1], tol, seed)
        report["negative_control"] = {
            "rhs": [gi.label for gi in ctrl],
            "rhs_class": cls,
            "status": "out-of-scope" if cls != "tempered" else "in-scope",
        }
    report["n_in_scope"] = n_in
    report["success_fraction"] = (n_ok / n_in) if n_in else None
    return report
