import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectoria.geometry import Chart, Sector
from sectoria.puiseux import (
    ParseError,
    PuiseuxPoly,
    branch_arg,
    compose_chart,
    format_puiseux,
    lcm_ramification,
    parse_puiseux,
    series_exp,
    series_pow1p,
)

# ---------------------------------------------------------------------------
# frozen oracles


def test_canonical_print_of_mixed_exponents():
    p = parse_puiseux("(1-2i)*z^(-3/2) + 3 + -2*z^(1)")
    assert format_puiseux(p) == "(1-2i)*z^(-3/2) + 3 + -2*z^(1)"
    assert p.d == 2
    assert p.leading() == (Fraction(-3, 2), 1 - 2j)


def test_exponential_part_of_e_to_one_over_z_prints_canonically():
    assert format_puiseux(PuiseuxPoly.monomial(1, -1)) == "1*z^(-1)"


def test_ramification_is_lcm_of_denominators():
    p = parse_puiseux("z^(-1/2)") * parse_puiseux("z^(1/3) + 1")
    assert p.d == 6
    assert format_puiseux(p) == "1*z^(-1/2) + 1*z^(-1/6)"
    assert lcm_ramification([parse_puiseux("z^(1/4)"), parse_puiseux("z^(-1/6)")]) == 12


def test_branch_of_square_root_at_minus_one():
    # arg(-1) = pi inside (pi/2 - pi, pi/2 + pi], so (-1)^(-1/2) = e^{-i pi/2}
    v = PuiseuxPoly.monomial(1, Fraction(-1, 2))(-1 + 0j, math.pi / 2)
    assert abs(v - (-1j)) < 1e-15


def test_branch_arg_window():
    assert branch_arg(-1 + 0j, 0.0) == pytest.approx(math.pi)
    assert branch_arg(-1 - 1e-300j, 0.0) == pytest.approx(-math.pi)
    assert branch_arg(1j, 2 * math.pi) == pytest.approx(math.pi / 2 + 2 * math.pi)


def test_derivative_of_pole():
    assert format_puiseux(parse_puiseux("z^(-1)").derivative()) == "-1*z^(-2)"


def test_principal_part_drops_nonnegative_exponents():
    p = parse_puiseux("2*z^(-2) + z^(-1/2) + 5 + z^(3)")
    assert format_puiseux(p.principal_part()) == "2*z^(-2) + 1*z^(-1/2)"
    assert p.constant_term() == 5


@pytest.mark.parametrize(
    "text, line, column",
    [
        ("1 + z^(1/", 1, 10),
        ("z^(1/0)", 1, 6),
        ("2*w", 1, 3),
        ("1 +\n  @", 2, 3),
    ],
)
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(ParseError) as info:
        parse_puiseux(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_series_exp_matches_exponential():
    # exp(w) truncated
    out = series_exp(np.array([0, 1.0]), 5)
    assert np.allclose(out, [1 / math.factorial(k) for k in range(6)])


def test_series_pow1p_is_binomial():
    out = series_pow1p(np.array([0, 1.0]), 0.5, 3)
    assert np.allclose(out, [1, 0.5, -0.125, 0.0625])


def test_compose_with_square_chart_is_exact():
    chart = Chart(np.array([0, 0, 1.0]), Sector(0, 0.7, 1.0))
    principal, tail = compose_chart(parse_puiseux("z^(-1) + z^(-1/2)"), chart, order=8)
    assert format_puiseux(principal) == "1*z^(-2) + 1*z^(-1)"
    assert not tail.terms


def test_compose_with_curved_chart_tail_bound_holds():
    chart = Chart(np.array([0, 1.0, 0.3]), Sector(0, 0.5, 0.5))
    p = parse_puiseux("z^(-2)")
    principal, tail = compose_chart(p, chart, order=20)
    w = 0.4 * np.exp(1j * np.linspace(-0.5, 0.5, 11))
    err = np.abs(p(chart(w)) - principal(w) - tail(w))
    assert np.all(err <= tail.tail_bound + 1e-12)
    # leading term of (w + 0.3 w^2)^-2 = w^-2 (1 - 0.6 w + ...)
    assert principal.terms[-2] == pytest.approx(1.0)
    assert principal.terms[-1] == pytest.approx(-0.6)


# ---------------------------------------------------------------------------
# properties

exponents = st.fractions(min_value=-4, max_value=4, max_denominator=6)
coefs = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False).map(
    lambda c: complex(round(c.real, 6), round(c.imag, 6))
)
polys = st.lists(st.tuples(exponents, coefs), max_size=5).map(PuiseuxPoly.from_exponents)


@given(polys)
def test_format_parse_round_trip(p):
    assert parse_puiseux(format_puiseux(p)) == p


@given(polys, polys, polys)
def test_ring_laws(p, q, r):
    assert ((p + q) + r).isclose(p + (q + r), rtol=1e-12, atol=1e-12)
    assert ((p * q) * r).isclose(p * (q * r), rtol=1e-9, atol=1e-9)
    assert (p * (q + r)).isclose(p * q + p * r, rtol=1e-9, atol=1e-9)
    assert (p - p).is_zero()


@settings(deadline=None)
@given(polys, polys, st.floats(0.05, 2.0), st.floats(-3.0, 3.0))
def test_evaluation_is_a_ring_homomorphism(p, q, rho, theta):
    z = rho * np.exp(1j * theta)
    lhs = (p * q)(z, 0.0)
    rhs = p(z, 0.0) * q(z, 0.0)
    assert abs(lhs - rhs) <= 1e-8 * (1 + abs(rhs))


@settings(deadline=None)
@given(polys, st.floats(0.2, 1.0), st.floats(-1.0, 1.0))
def test_derivative_matches_finite_difference(p, rho, theta):
    z = rho * np.exp(1j * theta)
    h = 1e-6 * rho
    fd = (p(z + h, 0.0) - p(z - h, 0.0)) / (2 * h)
    exact = p.derivative()(z, 0.0)
    assert abs(fd - exact) <= 1e-4 * (1 + abs(exact))
