import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectoria.geometry import (
    Band,
    Chart,
    CurveSpec,
    Disc,
    Intersection,
    RawSector,
    Sector,
    SectorImage,
    Union,
    band_to_plane,
    boundary_distance,
    chart_from_arc,
    cover_agreement,
    cover_band,
    region_from_json,
)


def band(lo, hi, R=0.5):
    def curve(terms):
        return {"terms": [{"num": n, "den": d, "coef": c} for n, d, c in terms]}

    return Band.from_json({"lower": curve(lo), "upper": curve(hi), "R": R})


BANDS = {
    "constant": band([(0, 1, -0.3)], [(0, 1, 0.3)]),
    "cusp": band([(0, 1, 0.0)], [(1, 1, 1.0)]),
    "curved": band([(1, 2, 1.0)], [(0, 1, 1.0), (1, 2, 1.0)]),
    "wide": band([(0, 1, 0.0)], [(0, 1, 1.8)]),
}


# ---------------------------------------------------------------------------
# sectors and distances


def test_sector_membership_uses_half_amplitude():
    S = Sector(0.0, math.pi / 4, 1.0)
    z = np.array([0.5, 0.5 * np.exp(0.7j), 0.5 * np.exp(0.9j), 1.2, 0.0])
    assert list(S.contains(z)) == [True, True, False, False, False]


def test_sector_from_edges():
    S = Sector.from_edges(1.0, 2.0, 0.5)
    assert (S.tau, S.eta, S.r) == (1.5, 0.5, 0.5)
    assert S.amplitude == pytest.approx(1.0)


def test_distance_in_disc_centre():
    assert boundary_distance(Disc(0, 1.0), 0j, n_boundary=256) == pytest.approx(1.0, abs=1 / 256)


def test_distance_in_quarter_sector():
    d = boundary_distance(RawSector(Sector(0, math.pi / 4, 1.0)), 0.5 + 0j)
    assert d == pytest.approx(0.5 * math.sin(math.pi / 4), abs=1e-3)


def test_distance_rejects_outside_points():
    with pytest.raises(ValueError):
        boundary_distance(Disc(0, 1.0), 2.0 + 0j)


def test_distance_refines_monotonically():
    reg = RawSector(Sector(0.3, 0.6, 1.0))
    z = 0.4 * np.exp(0.5j)
    coarse = boundary_distance(reg, z, n_boundary=32)
    fine = boundary_distance(reg, z, n_boundary=64)
    assert fine <= coarse + 2 / 32


def test_boundary_point_has_zero_distance():
    S = Sector(0, 0.5, 1.0)
    edge = 0.3 * np.exp(0.5j)
    assert boundary_distance(RawSector(S), edge, check=False) == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------------------
# curves, bands and charts


def test_curve_evaluates_puiseux_polynomial():
    c = CurveSpec.from_json({"terms": [{"num": 0, "den": 1, "coef": 1.0}, {"num": 1, "den": 2, "coef": 1.0}], "R": 0.5})
    assert c(0.25) == pytest.approx(1.5)
    assert c.value_at_0 == 1.0
    assert not c.is_constant


def test_band_membership_and_plane_map():
    b = BANDS["cusp"]
    assert b.contains_polar(0.1, 0.05)
    assert not b.contains_polar(0.1, 0.2)
    z = band_to_plane(b, (0.1, 0.05))
    assert z == pytest.approx(0.1 * np.exp(0.05j))
    with pytest.raises(ValueError):
        band_to_plane(b, (0.1, 0.2))


def test_arc_chart_follows_the_curve():
    c = CurveSpec.from_json({"terms": [{"num": 1, "den": 2, "coef": 1.0}], "R": 0.5})
    chart = chart_from_arc(c, radius=0.5, half_amplitude=0.3)
    t = np.array([0.01, 0.1, 0.3])
    rho = t**c.d
    expected = rho * np.exp(1j * c(rho))
    assert np.allclose(chart(t), expected, atol=1e-9)


def test_chart_inversion():
    chart = Chart(np.array([0, 1.0, 0.2j]), Sector(0, 0.5, 0.5))
    w = 0.3 * np.exp(0.2j)
    back, ok = chart.invert(chart(w), Sector(0, 0.5, 0.5))
    assert ok and back == pytest.approx(w, abs=1e-10)


def test_sector_image_of_square_chart():
    img = SectorImage(Chart(np.array([0, 0, 1.0]), Sector(0, 0.5, 1.0)), Sector(0, 0.4, 0.5))
    assert img.contains(np.array([0.1 * np.exp(0.7j)]))[0]
    assert not img.contains(np.array([0.1 * np.exp(0.9j)]))[0]


def test_region_json_round_trip():
    reg = Union(
        (
            Intersection((SectorImage(Chart(np.array([0, 1.0, 0.1]), Sector(0, 0.5, 1.0)), Sector(0.1, 0.2, 0.4)), Disc(0, 0.3))),
            RawSector(Sector(1.0, 0.4, 0.3)),
        )
    )
    again = region_from_json(reg.to_json())
    assert again.to_json() == reg.to_json()
    z = 0.2 * np.exp(1j * np.linspace(-0.5, 1.5, 41))
    assert np.array_equal(reg.contains(z), again.contains(z))


# ---------------------------------------------------------------------------
# coverings: frozen piece structure


@pytest.mark.parametrize(
    "name, n_pieces, W",
    [("constant", 1, 0.5), ("cusp", 1, 0.5), ("curved", 3, 0.03125), ("wide", 3, 0.5)],
)
def test_cover_structure(name, n_pieces, W):
    radius, pieces = cover_band(BANDS[name], 1.4, 0.5)
    assert len(pieces) == n_pieces
    assert radius == W
    stats = cover_agreement(BANDS[name], radius, pieces, n=10_000, seed=0)
    assert stats["agreement"] >= 0.999


def test_cusp_cover_is_one_chart_piece():
    _, (piece,) = cover_band(BANDS["cusp"], 1.4, 0.5)
    kinds = sorted(type(leaf).__name__ for leaf in piece.leaves())
    assert kinds == ["Disc", "SectorImage", "SectorImage"]


def test_constant_band_is_one_raw_sector():
    _, (piece,) = cover_band(BANDS["constant"], 1.4, 0.5)
    assert isinstance(piece, RawSector)
    assert piece.sector.amplitude == pytest.approx(0.6)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-math.pi, math.pi),
    st.floats(0.05, 1.3),
    st.floats(0.05, 1.0),
    st.floats(0.0, 1.0),
    st.floats(-1.0, 1.0),
)
def test_distance_matches_exact_sector_distance(tau, eta, r, u, v):
    S = Sector(tau, eta, r)
    z = r * (0.05 + 0.9 * u) * np.exp(1j * (tau + 0.95 * eta * v))
    rho, phi = abs(z), abs(float(S.relative_angle(z)))
    to_edge = rho * math.sin(eta - phi) if eta - phi < math.pi / 2 else rho
    exact = min(to_edge, r - rho)
    got = boundary_distance(RawSector(S), z, n_boundary=512)
    # chords of the arc sit slightly inside it, so the error is two-sided
    assert abs(got - exact) <= 8 * r / 512


@settings(max_examples=8, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(0.3, 2.5), st.integers(0, 3))
def test_constant_band_covers_are_sound(lo, width, seed):
    b = band([(0, 1, lo)], [(0, 1, lo + width)])
    radius, pieces = cover_band(b, 1.2, 0.5, seed=seed)
    stats = cover_agreement(b, radius, pieces, n=2000, seed=seed)
    assert stats["agreement"] >= 0.999
