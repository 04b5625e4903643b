import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectoria.geometry import Sector
from sectoria.puiseux import PuiseuxPoly, format_puiseux, parse_puiseux
from sectoria.turrittin import (
    OperatorSpec,
    ScalarOperator,
    UnsupportedCase,
    exponential_parts,
    formal_fundamental,
    newton_polygon,
    verify_growth_bounds,
)

CERT_SECTOR = Sector(0.0, 0.3, 0.4)


def op(m, N, A):
    return OperatorSpec.from_strings(m, N, A)


# closed-form fixtures: operator, exponential part, growth exponent of F
CLOSED_FORM = {
    "z2u'+u": (op(1, 2, [["1"]]), {Fraction(-1): 1.0}, None, 0.0),
    "z3u'-2u": (op(1, 3, [["-2"]]), {Fraction(-2): -1.0}, None, 0.0),
    "zu'-u/2": (op(1, 1, [["-0.5"]]), {}, None, 0.5),
    "zu'-u": (op(1, 1, [["-1"]]), {}, None, 1.0),
    "zu'-2u": (op(1, 1, [["-2"]]), {}, None, 2.0),
    "diag(1,-1)/z2": (op(2, 2, [["1", "0"], ["0", "-1"]]), {Fraction(-1): 1.0}, {Fraction(-1): -1.0}, 0.0),
}


def coefs(p):
    return dict(p.items())


def near(z0=0.3, n=9):
    return z0 * np.exp(1j * np.linspace(-0.25, 0.25, n))


# ---------------------------------------------------------------------------
# exponential parts


@pytest.mark.parametrize("name", list(CLOSED_FORM))
def test_exponential_part_matches_hand_derivation(name):
    P, first, second, _ = CLOSED_FORM[name]
    ep = exponential_parts(P)
    expected = [first] if second is None else [first, second]
    expected += [{}] * (P.m - len(expected))
    assert ep.l == 1
    for got, want in zip(ep.lambdas, expected):
        assert set(coefs(got)) == set(want)
        for e, c in want.items():
            assert abs(coefs(got)[e] - c) <= 1e-12


def test_canonical_print_of_exponential_parts():
    ep = exponential_parts(CLOSED_FORM["diag(1,-1)/z2"][0])
    assert ep.to_json() == {"l": 1, "Lambda": ["1*z^(-1)", "-1*z^(-1)"]}


def test_ramified_scalar_operator():
    # z^3 u'' = u has solutions exp(+-2 z^(-1/2)) to leading order
    P = ScalarOperator((parse_puiseux("-1"), PuiseuxPoly(), parse_puiseux("z^(3)")))
    assert newton_polygon(P) == [(Fraction(1, 2), 2)]
    ep = exponential_parts(P)
    assert ep.l == 2
    lead = [coefs(p)[Fraction(-1, 2)] for p in ep.lambdas]
    assert lead == pytest.approx([2.0, -2.0], abs=1e-12)


def test_second_order_scalar_roots_of_characteristic_polynomial():
    # u = exp(c/z) in z^4 u'' + z^2 u' - u: c^2 - c - 1 = 0
    P = ScalarOperator((parse_puiseux("-1"), parse_puiseux("z^(2)"), parse_puiseux("z^(4)")))
    ep = exponential_parts(P)
    golden = (1 + math.sqrt(5)) / 2
    assert [coefs(p)[Fraction(-1)] for p in ep.lambdas] == pytest.approx([golden, 1 - golden], abs=1e-12)


def test_nilpotent_leading_matrix_is_unsupported():
    with pytest.raises(UnsupportedCase):
        exponential_parts(op(2, 2, [["0", "1"], ["z", "0"]]))


def test_operator_json_round_trip():
    P = op(2, 2, [["1", "z"], ["z^3", "-1 + z"]])
    again = OperatorSpec.from_json(P.to_json())
    assert np.array_equal(again.A, P.A) and again.N == P.N


# ---------------------------------------------------------------------------
# truncated fundamental factor


@pytest.mark.parametrize("name", list(CLOSED_FORM))
def test_closed_form_residual_is_at_rounding_level(name):
    P = CLOSED_FORM[name][0]
    ff = formal_fundamental(P, order=20)
    assert np.max(ff.residual(near())) <= 1e-12


@pytest.mark.parametrize(
    "m, N, A, r, orders",
    [
        (2, 2, [["1", "z"], ["z", "-1"]], 0.3, (5, 10, 15)),
        (2, 2, [["1", "z+z^2"], ["z^3", "-1+z"]], 0.03, (2, 4, 6, 8, 10)),
        (2, 3, [["2", "1+z"], ["z", "1"]], 0.02, (2, 4, 6, 8, 10)),
        (2, 1, [["0.5", "z"], ["1", "-0.25"]], 0.3, (2, 5)),
    ],
)
def test_residual_decays_with_truncation_order(m, N, A, r, orders):
    P = op(m, N, A)
    res = [np.max(formal_fundamental(P, order=o).residual(near(r))) for o in orders]
    assert all(b <= a / 10 for a, b in zip(res, res[1:]))


def test_divergent_series_has_an_optimal_truncation():
    # irregular formal solutions diverge: far from 0 a longer series is worse
    P = op(2, 2, [["1", "z+z^2"], ["z^3", "-1+z"]])
    lo, hi = (np.max(formal_fundamental(P, order=o).residual(near(0.3))) for o in (5, 20))
    assert hi > lo


@pytest.mark.parametrize("name", list(CLOSED_FORM))
def test_growth_bound_exponent(name):
    P, _, _, M = CLOSED_FORM[name]
    ff = formal_fundamental(P, order=20, sector=CERT_SECTOR)
    assert abs(ff.cert["M"] - M) <= 0.25
    assert ff.cert["K"] >= 1.0


def test_coupled_system_growth_bound():
    K, M = verify_growth_bounds(formal_fundamental(op(2, 2, [["1", "z"], ["z", "-1"]])), CERT_SECTOR)
    assert M == 0.0 and K == pytest.approx(1.196, abs=1e-3)


# ---------------------------------------------------------------------------
# regular singular systems


@pytest.mark.parametrize(
    "A, logs",
    [
        ([["0", "1"], ["0", "0"]], True),  # nilpotent residue: u = (1, -log z)
        ([["-1", "z"], ["0", "0"]], True),  # eigenvalues 1, 0 differ by an integer
        ([["0.5", "0"], ["0", "-0.25"]], False),
        ([["0.5", "z"], ["1", "-0.25"]], False),
    ],
)
def test_regular_singular_systems(A, logs):
    ff = formal_fundamental(op(2, 1, A), order=20)
    assert (ff.nil is not None) == logs
    assert all(p.is_zero() for p in ff.ep.lambdas)
    assert np.max(ff.residual(near(0.2))) <= 1e-12
    assert ff.to_json()["log_terms"] == logs


def test_log_solution_is_single_valued_only_after_monodromy():
    ff = formal_fundamental(op(2, 1, [["0", "1"], ["0", "0"]]), order=5)
    z = np.array([0.2 + 0j])
    # continuing around the origin adds 2 pi i times the nilpotent part
    a = ff.F(z, 0.0)[..., 0]
    b = ff.F(z, 2 * math.pi)[..., 0]
    assert not np.allclose(a, b)
    assert np.allclose(np.linalg.det(a), np.linalg.det(b))


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(-3.0, 3.0), st.integers(2, 4))
def test_scalar_first_order_exponential_part(a, b, N):
    # z^N u' + (a + i b) u = 0 has u = exp((a + i b) z^(1-N) / (N - 1))
    c = complex(a, b)
    P = OperatorSpec(1, N, np.array([[[c]]]))
    (lam,) = exponential_parts(P).lambdas
    assert set(coefs(lam)) == {Fraction(1 - N)}
    assert abs(coefs(lam)[Fraction(1 - N)] - c / (N - 1)) <= 1e-12 * abs(c)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_distinct_eigenvalue_systems_have_small_residual(l1, l2, c12, c21):
    A = np.zeros((2, 2, 2), complex)
    A[0] = np.diag([l1, -l2])
    A[1] = [[0, c12], [c21, 0]]
    ff = formal_fundamental(OperatorSpec(2, 2, A), order=20)
    assert np.max(ff.residual(near(0.02))) <= 1e-9
    assert [format_puiseux(p) for p in ff.ep.lambdas] == [format_puiseux(PuiseuxPoly.monomial(l1, -1)), format_puiseux(PuiseuxPoly.monomial(-l2, -1))]
