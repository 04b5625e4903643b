"""Adaptive Gauss–Kronrod (7/15) quadrature for complex integrands.

All active subintervals are refined together, so the integrand is called
on whole arrays of nodes at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["BatchResult", "IntegrationError", "QuadResult", "gk15", "gk15_batch"]

_XK = np.array([
    -0.991455371120812639206854697526329,
    -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926,
    -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013,
    -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245,
    0.0,
    0.207784955007898467600689403773245,
    0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,
    0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,
    0.949107912342758524526189684047851,
    0.991455371120812639206854697526329,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
    0.204432940075298892414161999234649,
    0.190350578064785409913256402421014,
    0.169004726639267902826583426598550,
    0.140653259715525918745189590510238,
    0.104790010322250183839876322541518,
    0.063092092629978553290700663189204,
    0.022935322010529224963732008058970,
])
_WG = np.zeros(15)
_WG[1::2] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
    0.381830050505118944950369775488975,
    0.279705391489276667901467771423780,
    0.129484966168869693270611432679082,
]


class IntegrationError(ArithmeticError):
    """Adaptive quadrature hit its subdivision cap before reaching tolerance."""

    def __init__(self, message: str, worst: tuple[float, float], error: float):
        super().__init__(message)
        self.worst = worst
        self.error = error


@dataclass(frozen=True)
class QuadResult:
    value: complex
    error: float
    n_intervals: int
    nodes: np.ndarray  # every abscissa the integrand was evaluated at


def gk15(f, breakpoints, rtol: float = 1e-10, atol: float = 0.0, max_intervals: int = 2**14) -> QuadResult:
    """Integrate ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    ``f`` maps a real array of abscissae to complex values of the same shape.
    Subintervals are bisected until the summed Kronrod–Gauss difference is
    below ``max(atol, rtol * |integral|)``.
    """
    bp = np.asarray(breakpoints, dtype=float)
    lo, hi = bp[:-1], bp[1:]
    done_val = 0j
    done_err = 0.0
    seen = []
    n_total = len(lo)
    while True:
        c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = c[:, None] + hw[:, None] * _XK
        fx = np.asarray(f(x), dtype=complex)
        seen.append(x.ravel())
        bad = ~np.isfinite(fx)
        if np.any(bad):
            fx = np.where(bad, 0, fx)
        k = hw * (fx @ _WK)
        g = hw * (fx @ _WG)
        err = np.abs(k - g)
        err = np.where(np.any(bad, axis=1), np.inf, err)
        total = done_val + np.sum(k)
        tol = max(atol, rtol * abs(total))
        budget = tol / max(n_total, 1)
        # freeze intervals already well inside their share of the budget
        fine = err <= budget
        done_val += np.sum(k[fine])
        done_err += float(np.sum(err[fine]))
        if np.all(fine) or done_err + np.sum(err[~fine]) <= tol:
            val = done_val + np.sum(k[~fine])
            e = done_err + float(np.sum(err[~fine]))
            return QuadResult(complex(val), e, n_total, np.concatenate(seen))
        lo, hi = lo[~fine], hi[~fine]
        n_total += len(lo)
        if n_total > max_intervals:
            worst = int(np.argmax(err[~fine]))
            raise IntegrationError(
                f"quadrature did not converge within {max_intervals} subintervals",
                (float(lo[worst]), float(hi[worst])),
                float(done_err + np.sum(err[~fine])),
            )
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])


@dataclass(frozen=True)
class BatchResult:
    values: np.ndarray  # one integral per problem
    errors: np.ndarray
    n_intervals: int


def gk15_batch(
    f,
    lo,
    hi,
    pid,
    n_problems: int,
    rtol: float = 1e-10,
    atol=0.0,
    max_intervals: int = 2**14,
) -> BatchResult:
    """Integrate many problems at once.

    Problem ``p`` is the sum of the integrals over the initial intervals
    ``[lo[i], hi[i]]`` with ``pid[i] == p``.  ``f(x, pid)`` gets node arrays
    of shape ``(k, 15)`` and the owning problem of each row.  ``atol`` may be
    a scalar or one value per problem.  The subdivision cap applies per
    problem on average (``max_intervals * n_problems`` in total).
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    pid = np.asarray(pid, int)
    atol = np.broadcast_to(np.asarray(atol, float), (n_problems,))
    done_val = np.zeros(n_problems, complex)
    done_err = np.zeros(n_problems)
    cap = max_intervals * max(n_problems, 1)
    n_total = len(lo)
    while len(lo):
        c, hw = 0.5 * (lo + hi), 0.5 * (hi - lo)
        x = c[:, None] + hw[:, None] * _XK
        fx = np.asarray(f(x, pid), dtype=complex)
        bad = ~np.isfinite(fx)
        if np.any(bad):
            fx = np.where(bad, 0, fx)
        k = hw * (fx @ _WK)
        err = np.abs(k - hw * (fx @ _WG))
        err = np.where(np.any(bad, axis=1), np.inf, err)
        tot = done_val + np.bincount(pid, weights=k.real, minlength=n_problems) + 1j * np.bincount(
            pid, weights=k.imag, minlength=n_problems
        )
        tol = np.maximum(atol, rtol * np.abs(tot))
        cnt = np.bincount(pid, minlength=n_problems)
        open_err = done_err + np.bincount(pid, weights=np.where(np.isfinite(err), err, 1e300), minlength=n_problems)
        converged = open_err <= tol
        share = tol[pid] / np.maximum(cnt[pid], 1)
        freeze = converged[pid] | (err <= share)
        np.add.at(done_val, pid[freeze], k[freeze])
        np.add.at(done_err, pid[freeze], err[freeze])
        lo, hi, pid = lo[~freeze], hi[~freeze], pid[~freeze]
        n_total += len(lo)
        if n_total > cap:
            worst = int(np.argmax(err[~freeze]))
            raise IntegrationError(
                f"quadrature did not converge within {cap} subintervals",
                (float(lo[worst]), float(hi[worst])),
                float(np.max(done_err)),
            )
        mid = 0.5 * (lo + hi)
        lo, hi, pid = np.concatenate([lo, mid]), np.concatenate([mid, hi]), np.concatenate([pid, pid])
    return BatchResult(done_val, done_err, n_total)
