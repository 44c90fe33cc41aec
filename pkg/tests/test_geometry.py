import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_max
from panelopt.errors import InvalidGeometry, MalformedFile
from panelopt.geometry import (
    Airfoil,
    BsplineGenome,
    fit_bspline,
    from_bspline,
    naca4,
    naca4_camber,
    naca4_thickness,
    panel_arrays,
    panels,
    read_dat,
    signed_area,
    symmetric_genome,
    write_dat,
)

SQUARE = np.array([(1, 0), (1, 1), (0, 1), (0, 0), (1, 0)], dtype=float)

naca_codes = st.builds(
    lambda m, p, t: f"{m}{p if m else 0}{t:02d}",
    st.integers(0, 9),
    st.integers(1, 9),
    st.integers(1, 40),
)


def test_thickness_vanishes_at_leading_edge():
    assert naca4_thickness(0.0, 0.12) == 0.0


def test_closed_trailing_edge_thickness():
    assert abs(naca4_thickness(1.0, 0.12)) < 1e-15


def test_naca0012_mirror_symmetric():
    af = naca4("0012", 200)
    pts = af.points
    # point i on the upper surface mirrors point n - i on the lower surface
    mirrored = pts[::-1]
    assert np.max(np.abs(pts[:, 0] - mirrored[:, 0])) <= 1e-12
    assert np.max(np.abs(pts[:, 1] + mirrored[:, 1])) <= 1e-12


def test_naca2412_max_camber():
    x, yc = dense_max(lambda x: naca4_camber(x, 0.02, 0.4)[0], 0.0, 1.0)
    assert yc == pytest.approx(0.02, abs=1e-9)
    assert x == pytest.approx(0.4, abs=1e-4)
    af = naca4("2412", 200)
    pts = af.points
    midline = 0.5 * (pts[: 101][::-1, 1] + pts[100:, 1])
    assert midline.max() == pytest.approx(0.02, abs=5e-4)


@pytest.mark.parametrize("code", ["12", "abcd", "24120", "2012", "0212", "0000"])
def test_naca4_rejects_malformed(code):
    with pytest.raises(InvalidGeometry):
        naca4(code, 100)


@pytest.mark.parametrize("n", [6, 101, 0])
def test_naca4_rejects_bad_panel_count(n):
    with pytest.raises(InvalidGeometry):
        naca4("0012", n)


@settings(max_examples=40, deadline=None)
@given(naca_codes, st.sampled_from([8, 10, 40, 200]), st.sampled_from(["cosine", "uniform"]))
def test_generated_airfoils_satisfy_invariants(code, n, spacing):
    af = naca4(code, n, spacing)
    pts = af.points
    assert af.n == n
    assert np.array_equal(pts[0], pts[-1])
    assert pts[0, 0] == pts[:, 0].max()
    assert signed_area(pts) > 0
    pa = panel_arrays(af)
    assert np.all(pa.length > 0)
    assert np.max(np.abs(pa.h.sum(axis=0))) <= 1e-13 * n


def test_unit_square_panels():
    sq = Airfoil(SQUARE, "square")
    ps = panels(sq)
    assert len(ps) == 4
    assert all(p.len == 1.0 for p in ps)
    mids = np.array([p.mid for p in ps])
    np.testing.assert_array_equal(mids, [(1, 0.5), (0.5, 1), (0, 0.5), (0.5, 0)])
    centroid = np.array([0.5, 0.5])
    for p in ps:
        assert np.dot(p.h, p.h_perp) == 0.0
        assert np.dot(p.h_perp, p.mid - centroid) > 0


def test_panel_fields_exact():
    af = naca4("2412", 60)
    ps = panels(af)
    pts = af.points
    for i, p in enumerate(ps):
        assert np.array_equal(p.mid, (pts[i] + pts[i + 1]) / 2)
        assert np.array_equal(p.h_perp, [p.h[1], -p.h[0]])
        assert np.hypot(*p.h_perp) == pytest.approx(p.len, rel=1e-12)


def test_upper_surface_normals_point_up():
    af = naca4("2412", 200)
    pa = panel_arrays(af)
    nose = int(np.argmin(af.points[:, 0]))
    # panels from the trailing edge up to the leading-edge extreme
    assert np.all(pa.h_perp[:nose, 1] > 0)


@pytest.mark.parametrize(
    "pts, msg",
    [
        (np.vstack([SQUARE[:-1], [(1, 0.5)]]), "closed"),
        (SQUARE[:-1], "at least 4 panels"),
        (SQUARE[::-1], "positive signed area"),
        (np.array([(0, 0), (1, 1), (1, 0), (0, 1), (0, 0)], float), "trailing edge"),
        (np.array([(1, 0), (1, 1), (1, 1), (0, 1), (0, 0), (1, 0)], float), "zero-length"),
    ],
)
def test_airfoil_validation(pts, msg):
    with pytest.raises(InvalidGeometry, match=msg):
        Airfoil(pts)


def test_airfoil_points_are_read_only():
    af = naca4("0012", 20)
    with pytest.raises(ValueError):
        af.points[0, 0] = 2.0


# -- B-splines ---------------------------------------------------------------


def test_flat_genome_is_invalid():
    g = BsplineGenome((0.0,) * 8, (0.0,) * 8)
    with pytest.raises(InvalidGeometry):
        from_bspline(g, 100)


def test_crossing_genome_is_invalid():
    g = symmetric_genome(0.05, 8)
    crossed = BsplineGenome(g.lower_coeffs, g.upper_coeffs)
    with pytest.raises(InvalidGeometry, match="crosses"):
        from_bspline(crossed, 100)


def test_genome_validation():
    with pytest.raises(ValueError, match="pinned"):
        BsplineGenome((0.1, 0.2, 0.3, 0.0), (0.0, -0.1, -0.1, 0.0))
    with pytest.raises(ValueError, match="at least"):
        BsplineGenome((0.0, 0.1, 0.0), (0.0, -0.1, 0.0))


def test_fit_reproduces_naca0012():
    ref = naca4("0012", 200)
    af = from_bspline(fit_bspline(ref, 10), 200)
    dev = np.max(np.abs(af.points - ref.points))
    assert dev < 5e-3
    # measured fit quality of this parametrization
    assert dev < 2e-4


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.005, 0.1), min_size=2, max_size=10))
def test_symmetric_genome_gives_symmetric_airfoil(half):
    g = symmetric_genome(half, len(half) + 2)
    af = from_bspline(g, 80)
    pts = af.points
    mirrored = pts[::-1]
    assert np.max(np.abs(pts[:, 0] - mirrored[:, 0])) <= 1e-12
    assert np.max(np.abs(pts[:, 1] + mirrored[:, 1])) <= 1e-12


def test_from_flat_reimposes_pinning():
    g = BsplineGenome.from_flat([1.0] * 12, (6, 6))
    assert g.upper_coeffs[0] == g.upper_coeffs[-1] == 0.0
    assert g.lower_coeffs[0] == g.lower_coeffs[-1] == 0.0


# -- .dat files --------------------------------------------------------------


def test_dat_round_trip():
    af = naca4("0012", 100)
    text = write_dat(af)
    back = read_dat(text)
    assert back.name == af.name
    np.testing.assert_allclose(back.points, af.points, rtol=1e-8, atol=1e-9)
    assert write_dat(back) == text
    assert read_dat(write_dat(back)) == back


def test_dat_nine_significant_digits():
    line = write_dat(naca4("2412", 20)).splitlines()[3]
    mantissas = [tok.lstrip("-").replace(".", "").split("e")[0].lstrip("0") for tok in line.split()]
    assert all(len(m) <= 9 for m in mantissas)


def test_dat_missing_closure_is_reappended():
    af = naca4("0012", 40)
    lines = write_dat(af).splitlines()[:-1]
    back = read_dat("\n".join(lines))
    assert back.n == af.n
    assert np.array_equal(back.points[0], back.points[-1])


def test_dat_near_closure_is_snapped():
    text = "near\n1 0\n0.5 0.1\n0 0\n0.5 -0.1\n1.0000000001 0\n"
    af = read_dat(text)
    assert np.array_equal(af.points[0], af.points[-1])


def test_dat_too_few_points():
    with pytest.raises(MalformedFile):
        read_dat("tiny\n1 0\n0 0.1\n0 -0.1\n")


def test_dat_non_numeric():
    with pytest.raises(MalformedFile, match="line 3"):
        read_dat("bad\n1 0\n0.5 abc\n0 0\n0.5 -0.1\n1 0\n")


def test_dat_open_trailing_edge():
    text = "blunt\n1 0.002\n0.5 0.1\n0 0\n0.5 -0.1\n1 -0.002\n"
    with pytest.raises(MalformedFile, match="open contour"):
        read_dat(text)
