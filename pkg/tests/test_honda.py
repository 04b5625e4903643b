import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectoria.geometry import Chart, RawSector, Sector
from sectoria.holofn import Expr, complex_derivative
from sectoria.honda import (
    PathError,
    amplitude_bound,
    build_path,
    fd_steps,
    integral_op,
    integral_op_fn,
    p_difference,
    plan_path,
    solve_on_chart_image,
    solve_system_sector,
)
from sectoria.puiseux import parse_puiseux
from sectoria.solver import interior_samples
from sectoria.tempered import fit_growth_exponent, stratified_sample
from sectoria.turrittin import OperatorSpec, exponential_parts, formal_fundamental

# (p, g, S) with the sector amplitude inside the bound pi / (2 s)
FIXTURES = [
    ("z^(-1)", "1", Sector(0, 0.7, 0.5)),
    ("z^(-1)", "z", Sector(math.pi, 0.7, 0.5)),
    ("-1*z^(-1)", "1/z", Sector(0, 0.7, 0.5)),
    ("(0+1i)*z^(-1)", "exp(z)", Sector(math.pi / 2, 0.7, 0.5)),
    ("(1+1i)*z^(-1)", "1+z^2", Sector(-0.5, 0.75, 0.5)),
    ("z^(-2)", "1", Sector(0, 0.35, 0.5)),
    ("z^(-2)", "1/z^2", Sector(math.pi / 2, 0.35, 0.5)),
    ("-1*z^(-2)", "z", Sector(0.3, 0.3, 0.5)),
    ("z^(-1/2)", "1", Sector(0, 1.4, 0.5)),
    ("z^(-1) + 0.5*z^(-1/2)", "1", Sector(0.2, 0.7, 0.5)),
    ("2*z^(-3)", "1/z", Sector(0, 0.25, 0.5)),
    ("0", "1/z^2", Sector(1.0, 1.2, 0.5)),
]
IDS = [f"{p}|{g}|{S.tau:.2f}" for p, g, S in FIXTURES]


def relative_residual(p, g, u, S, n=24):
    z, d = interior_samples(RawSector(S), n, 0, center=S.tau)
    dp = p.derivative()
    du = complex_derivative(u, z, fd_steps(z, d, [p], S.tau))
    uz, gz, pz = u(z), g(z), dp(z, S.tau)
    return np.max(np.abs(du - pz * uz - gz) / (1 + np.abs(gz) + np.abs(pz * uz)))


# ---------------------------------------------------------------------------
# amplitude bounds and paths


def test_amplitude_bound_of_monomials():
    assert amplitude_bound(parse_puiseux("z^(-1)")).alpha == pytest.approx(math.pi / 2)
    assert amplitude_bound(parse_puiseux("3*z^(-2)")).alpha == pytest.approx(math.pi / 4)
    assert amplitude_bound(parse_puiseux("z^(-1/2)")).alpha == pytest.approx(math.pi)
    assert amplitude_bound(parse_puiseux("0")).alpha == pytest.approx(math.pi)


def test_amplitude_bound_dominance_radius():
    # |z^-2| >= 2 |z^-1| exactly when |z| <= 1/2
    ab = amplitude_bound(parse_puiseux("z^(-2) + z^(-1)"))
    assert ab.leading_order == Fraction(2)
    assert ab.rho_star == pytest.approx(0.5, rel=1e-9)


def test_amplitude_bound_rejects_nonnegative_exponents():
    with pytest.raises(ValueError):
        amplitude_bound(parse_puiseux("z^(-1) + z"))


def test_plans_pick_the_decaying_base():
    p = parse_puiseux("z^(-1)")
    assert plan_path(p, Sector(0, 0.7, 0.5)).kind == "vertex"  # e^{-1/zeta} -> 0 at the vertex
    assert plan_path(p, Sector(math.pi, 0.7, 0.5)).kind == "outer"


def test_path_reaches_its_endpoint():
    S = Sector(0, 0.7, 0.5)
    z = 0.2 * np.exp(0.5j)
    path = build_path(parse_puiseux("z^(-1)"), S, z)
    assert path.start == 0
    assert path.points(9)[-1] == pytest.approx(z)


def test_too_wide_sector_is_refused():
    with pytest.raises(PathError):
        integral_op(parse_puiseux("z^(-2)"), Expr("1"), Sector(0, 0.5, 0.5), 0.1 + 0j)


# ---------------------------------------------------------------------------
# the operator contract


@pytest.mark.parametrize("ps, gs, S", FIXTURES, ids=IDS)
def test_integral_operator_contract(ps, gs, S):
    p, g = parse_puiseux(ps), Expr(gs)
    assert S.amplitude <= amplitude_bound(p).alpha + 1e-12
    sol = integral_op_fn(p, g, S)
    (u,) = sol.components()
    assert relative_residual(p, g, u, S) <= 1e-6
    assert sol.max_phase <= 1e-9
    sample = stratified_sample(RawSector(S), per_stratum=16, seed=0)
    if fit_growth_exponent(g, RawSector(S), sample=sample).tempered:
        assert fit_growth_exponent(u, RawSector(S), sample=sample).tempered


def test_closed_form_value():
    # z^2 u' + u = 1 has the tempered solution u = 1 - e^{1/z} on the left;
    # the vertex-based integral of e^{1/z - 1/zeta} / zeta^2 gives exactly 1 there
    S = Sector(0, 0.7, 0.5)
    z = np.array([0.1, 0.2 * np.exp(0.4j)])
    got = integral_op(parse_puiseux("z^(-1)"), Expr("1/z^2"), S, z)
    assert np.allclose(got, 1.0, atol=1e-12)


def test_endpoint_next_to_a_neutral_direction():
    # along arg z = pi/2 - 1e-3 the kernel e^{1/z - 1/zeta} barely decays
    # towards the vertex, so the path has to leave through a better ray
    op = OperatorSpec.from_strings(1, 2, [["1"]])
    ep = exponential_parts(op)
    ff = formal_fundamental(op, ep)
    chart = Chart(np.array([0, np.exp(1.8j)]), Sector(0, 0.6, 1.0))
    sol = solve_on_chart_image(op, ep, ff, chart, Sector(-0.3, 0.3, 0.75), [Expr("1+z")], branch_center=1.5)
    z = 0.179 * np.exp(1j * (math.pi / 2 - np.array([1e-3, 1e-4])))
    assert np.all(np.isfinite(sol.evaluate(z)))


def test_exponent_difference_is_free_of_cancellation():
    p = parse_puiseux("z^(-2)")
    z = 1e-5 * np.exp(0.2j)
    L = np.array([1e-12, -3e-13j])
    got = p_difference(p, np.log(z), L)
    exact = -(z**-2) * np.expm1(-2 * L)
    assert np.allclose(got, exact, rtol=1e-13, atol=0)


# ---------------------------------------------------------------------------
# systems and charts


def test_system_solution_on_a_sector():
    op = OperatorSpec.from_strings(2, 2, [["1", "z"], ["z", "-1"]])
    ep = exponential_parts(op)
    ff = formal_fundamental(op, ep)
    S = Sector(math.pi / 2, 0.7, 0.3)
    g = [Expr("1"), Expr("z")]
    sol = solve_system_sector(op, ff, ep, g, S)
    z, d = interior_samples(RawSector(S), 16, 0, center=S.tau)
    u = sol.evaluate(z)
    du = complex_derivative(sol.evaluate, z, fd_steps(z, d, ep.lambdas, S.tau))
    R = z**2 * du + np.einsum("ij...,j...->i...", op.A_at(z), u) - np.stack([gi(z) for gi in g])
    assert np.max(np.abs(R)) <= 1e-8


def test_chart_solution_matches_direct_solution():
    # the same equation solved on a sector directly and through w -> w + 0.2 w^2
    op = OperatorSpec.from_strings(1, 2, [["1"]])
    ep = exponential_parts(op)
    ff = formal_fundamental(op, ep)
    g = [Expr("1 + z")]
    chart = Chart(np.array([0, 1.0, 0.2]), Sector(0, 0.6, 0.5))
    on_chart = solve_on_chart_image(op, ep, ff, chart, Sector(0, 0.4, 0.3), g)
    direct = solve_system_sector(op, ff, ep, g, Sector(0, 0.7, 0.5))
    z = chart(0.1 * np.exp(1j * np.linspace(-0.3, 0.3, 5)))
    # both are based at the vertex, where every other solution blows up
    assert np.allclose(on_chart.evaluate(z), direct.evaluate(z), rtol=1e-8, atol=1e-12)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=12, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.2, 0.78), st.sampled_from(["1", "z", "exp(z)", "1/(1-z)"]))
def test_first_order_pole_on_random_sectors(tau, eta, gs):
    p, g = parse_puiseux("z^(-1)"), Expr(gs)
    S = Sector(tau, eta, 0.4)
    (u,) = integral_op_fn(p, g, S).components()
    assert relative_residual(p, g, u, S, n=12) <= 1e-6


@settings(max_examples=12, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.1, 0.39), st.floats(0.5, 2.0))
def test_phase_invariant_on_random_sectors(tau, eta, a):
    p = parse_puiseux(f"{a}*z^(-2)")
    S = Sector(tau, eta, 0.4)
    sol = integral_op_fn(p, Expr("1"), S)
    z, _ = interior_samples(RawSector(S), 12, 1, center=S.tau)
    sol.evaluate(z)
    assert sol.max_phase <= 1e-9


@settings(max_examples=10, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.8, 3.0))
def test_sectors_beyond_the_amplitude_bound_are_refused(tau, eta):
    with pytest.raises(PathError):
        integral_op_fn(parse_puiseux("z^(-1)"), Expr("1"), Sector(tau, eta, 0.4))
