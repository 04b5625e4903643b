import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectoria.geometry import Chart, Disc, RawSector, Sector
from sectoria.holofn import Expr
from sectoria.tempered import (
    HypothesisError,
    TemperedCertificate,
    fit_growth_exponent,
    lojasiewicz_exponents,
    pullback_temperedness_check,
    stratified_sample,
    tempered_norm,
)

QUARTER = RawSector(Sector(0.0, math.pi / 4, 1.0))


@pytest.fixture(scope="module")
def quarter_sample():
    return stratified_sample(QUARTER, per_stratum=256, seed=0)


# ---------------------------------------------------------------------------
# sampling


def test_strata_hold_the_requested_counts(quarter_sample):
    s = quarter_sample
    assert np.all(QUARTER.contains(s.z))
    ks, counts = np.unique(s.stratum, return_counts=True)
    # the shallowest reachable stratum is thin; every deeper one is full
    assert ks[-1] == 20
    assert np.all(counts[1:] == 256)
    lo, hi = 2.0 ** -(s.stratum + 1.0), 2.0 ** -s.stratum.astype(float)
    assert np.all((s.delta >= lo) & (s.delta < hi))


def test_sampling_is_deterministic_in_the_seed():
    a = stratified_sample(Disc(0, 0.5), per_stratum=16, seed=3)
    b = stratified_sample(Disc(0, 0.5), per_stratum=16, seed=3)
    assert np.array_equal(a.z, b.z)


# ---------------------------------------------------------------------------
# growth exponents: frozen oracles


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_pole_of_order_k_has_exponent_k(k, quarter_sample):
    cert = fit_growth_exponent(Expr(f"z^(-{k})"), QUARTER, sample=quarter_sample)
    assert cert.verdict == "tempered"
    assert cert.M == k


def test_essential_singularity_is_not_tempered(quarter_sample):
    cert = fit_growth_exponent(Expr("exp(1/z)"), QUARTER, sample=quarter_sample)
    assert cert.verdict == "not-tempered"
    assert cert.M == math.inf


def test_flat_function_is_tempered_of_order_zero(quarter_sample):
    cert = fit_growth_exponent(Expr("exp(-1/z)"), QUARTER, sample=quarter_sample)
    assert (cert.verdict, cert.M) == ("tempered", 0.0)


def test_logarithm_rounds_up_to_a_quarter(quarter_sample):
    cert = fit_growth_exponent(Expr("log(z)"), QUARTER, sample=quarter_sample)
    assert (cert.verdict, cert.M) == ("tempered", 0.25)


def test_norm_of_pole_is_bounded_by_its_certificate(quarter_sample):
    f = Expr("z^(-2)")
    cert = fit_growth_exponent(f, QUARTER, sample=quarter_sample)
    n = tempered_norm(f, QUARTER, cert.M, sample=quarter_sample)
    assert n == pytest.approx(cert.sup)
    # on the bisector delta = |z| sin(pi/4), so delta^2 |z|^-2 <= 1/2
    assert n <= 0.5 + 1e-9
    with pytest.raises(ValueError):
        tempered_norm(f, QUARTER, -1.0, sample=quarter_sample)


def test_certificate_json_round_trip(quarter_sample):
    cert = fit_growth_exponent(Expr("exp(1/z)"), QUARTER, sample=quarter_sample)
    again = TemperedCertificate.from_json(cert.to_json())
    assert again.verdict == cert.verdict and again.M == cert.M


# ---------------------------------------------------------------------------
# Lojasiewicz witnesses


def test_lojasiewicz_square_against_identity():
    x = np.linspace(1e-3, 1, 500)
    assert lojasiewicz_exponents(lambda p: p**2, lambda p: p, x) == (1.0, 2.0)


def test_lojasiewicz_rejects_mismatched_zero_sets():
    x = np.linspace(0.0, 1.0, 50)
    with pytest.raises(HypothesisError):
        lojasiewicz_exponents(np.zeros_like(x), x + 1.0, None)


# ---------------------------------------------------------------------------
# pullback consistency


PULLBACKS = [
    ("1/z", [0, 0, 1], "tempered"),
    ("1/z", [0, 1], "tempered"),
    ("z^(-2)", [0, 1, 0.2], "tempered"),
    ("exp(1/z)", [0, 1], "not-tempered"),
    ("exp(-1/z)", [0, 1], "tempered"),
    ("log(z)", [0, 0, 1], "tempered"),
    ("1/(z*(1-z))", [0, 1, 0.1], "tempered"),
    ("z^(-3/2)", [0, 0, 1], "tempered"),
    ("exp(1/z)", [0, 0, 1], "not-tempered"),
    ("sin(z)/z^2", [0, 1, 0.3j], "tempered"),
]


@pytest.mark.parametrize("h, coefs, kind", PULLBACKS)
def test_pullback_verdicts_agree(h, coefs, kind):
    chart = Chart(np.array(coefs, dtype=complex), Sector(0, 0.5, 1.0))
    rep = pullback_temperedness_check(Expr(h), chart, Sector(0, 0.3, 0.5), per_stratum=256)
    assert rep.verdict == "consistent"
    assert rep.image.verdict == kind
    if kind == "tempered":
        assert rep.lojasiewicz["alpha"] >= 1.0
        assert np.isfinite(rep.exponent_ratio)


def test_square_chart_doubles_the_exponent():
    chart = Chart(np.array([0, 0, 1.0], dtype=complex), Sector(0, 0.5, 1.0))
    rep = pullback_temperedness_check(Expr("1/z"), chart, Sector(0, 0.3, 0.5), per_stratum=256)
    assert rep.image.M == 1.0
    assert rep.pullback.M == 2.0


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 3), st.floats(0.2, 0.7), st.integers(0, 50))
def test_pole_exponent_is_stable_across_sectors(k, eta, seed):
    reg = RawSector(Sector(0.0, eta, 1.0))
    cert = fit_growth_exponent(Expr(f"z^(-{k})"), reg, per_stratum=128, seed=seed)
    assert cert.verdict == "tempered"
    assert cert.M == k


@settings(max_examples=20, deadline=None)
@given(st.floats(0.5, 4.0), st.floats(0.1, 5.0))
def test_lojasiewicz_recovers_power_laws(r, c):
    x = np.geomspace(1e-2, 1.0, 400)
    _, got = lojasiewicz_exponents(c * x**r, x, None)
    assert got == pytest.approx(r, abs=2e-3)
