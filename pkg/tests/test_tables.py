"""Table construction, geometry conventions, metric, persistence."""
from __future__ import annotations

import json
import math

import numpy as np
import pytest

from pesin_coder.tables import (
    Arc,
    BilliardTable,
    LinearFixtureMap,
    PhasePoint,
    Segment,
    load_table,
    make_circle,
    make_flower,
    make_linear_fixture,
    make_sinai,
    make_stadium,
    make_table,
    save_table,
)

ALL_BUILDERS = [make_circle, make_stadium, make_sinai, make_flower]


# ------------------------------------------------------------- construction
def test_loops_close_all_tables():
    for mk in ALL_BUILDERS:
        tb = mk()
        for loop in tb.loops:
            for i, ci in enumerate(loop):
                cj = loop[(i + 1) % len(loop)]
                gap = np.linalg.norm(tb.components[ci].end_point()
                                     - tb.components[cj].start_point())
                assert gap < 1e-12


def test_open_loop_rejected():
    seg1 = Segment((0.0, 0.0), (1.0, 0.0))
    seg2 = Segment((1.0, 0.0), (2.0, 1.0))  # does not return to the start
    with pytest.raises(ValueError, match="not closed"):
        BilliardTable([seg1, seg2], [[0, 1]])


def test_corner_collection():
    st = make_stadium()
    # stadium: four smooth segment/arc junctions
    assert len(st.corner_points) == 4
    got = sorted(map(tuple, np.round(st.corner_points, 12)))
    assert got == [(-1.0, -1.0), (-1.0, 1.0), (1.0, -1.0), (1.0, 1.0)]
    # circle: no corners at all
    assert len(make_circle().corner_points) == 0
    # sinai: 4 square corners; scatterer seam is unflagged
    assert len(make_sinai().corner_points) == 4
    assert len(make_flower().corner_points) == 4


def test_tangent_normal_curvature_conventions():
    # circle of radius 2: tangent ccw, inward normal toward center, kappa=+1/2
    tb = make_circle(radius=2.0)
    s = 1.3
    P = tb.point_xy(0, s)
    T = tb.tangent_xy(0, s)
    N = tb.normal_xy(0, s)
    assert abs(np.dot(T, T) - 1.0) < 1e-12
    assert np.dot(N, -P) > 0  # inward = toward the center
    assert abs(T[0] * N[1] - T[1] * N[0] - 1.0) < 1e-12  # N = rot90(T)
    assert tb.curvature(0) == 0.5

    # sinai scatterer: traversal cw, inward normal AWAY from scatterer center
    sn = make_sinai()
    s = 0.7
    P = sn.point_xy(4, s)
    N = sn.normal_xy(4, s)
    assert np.dot(N, P) > 0  # away from origin = into the table
    assert sn.curvature(4) == -1.0 / 0.5

    # segments are flat
    assert sn.curvature(0) == 0.0


def test_arc_axis_rotation_consistency():
    # expressing the same arc with its start angle split between a0 and axis
    # must not move any point: global angle = axis + a0 + orient*s/R
    base = Arc(center=(0.0, 0.0), radius=1.0, a0=0.2, length=1.0, orient=+1)
    for axis in (math.pi / 2, math.pi, -math.pi / 2, 3 * math.pi / 2, 0.7):
        rot = Arc(center=(0.0, 0.0), radius=1.0, a0=0.2 - axis, length=1.0,
                  orient=+1, axis=axis)
        for t in (0.0, 0.31, 0.99):
            assert np.allclose(rot._pt(t), base._pt(t), atol=1e-12)


def test_arc_axis_snaps_quarter_turns():
    # rotation entries for k*pi/2 axes are exactly 0/±1
    arc = Arc(center=(0.0, 0.0), radius=1.0, a0=0.0, length=1.0, orient=+1,
              axis=math.pi)
    _, row = arc.packed()
    assert (row[6], row[7]) == (-1.0, 0.0)
    arc = Arc(center=(0.0, 0.0), radius=1.0, a0=0.0, length=1.0, orient=+1,
              axis=-math.pi / 2)
    _, row = arc.packed()
    assert (row[6], row[7]) == (0.0, -1.0)


def test_contains_point():
    st = make_stadium()
    assert st.contains_point((0.0, 0.0))
    assert st.contains_point((1.9, 0.0))
    assert not st.contains_point((2.1, 0.0))
    assert not st.contains_point((0.0, 1.1))
    sn = make_sinai()
    assert sn.contains_point((0.9, 0.9))
    assert not sn.contains_point((0.1, 0.0))  # inside the scatterer


def test_wrap_r_walks_loop():
    st = make_stadium()
    # stepping past the end of the bottom segment lands on the right cap
    c, r = st.wrap_r(0, 2.0 + 0.25)
    assert c == 1 and abs(r - 0.25) < 1e-12
    # negative arclength walks backwards onto the left cap
    c, r = st.wrap_r(0, -0.25)
    assert c == 3 and abs(r - (math.pi - 0.25)) < 1e-12
    # single-component loops just wrap mod length
    cir = make_circle()
    c, r = cir.wrap_r(0, 2 * math.pi + 0.5)
    assert c == 0 and abs(r - 0.5) < 1e-12


# -------------------------------------------------------------------- metric
def test_metric_is_chordal_product():
    st = make_stadium()
    p = PhasePoint(0, 0.5, 0.1)
    q = PhasePoint(0, 1.5, -0.2)
    expect = st.metric_scale * math.hypot(1.0, 0.3)
    assert abs(st.distance(p, q) - expect) < 1e-12
    assert st.distance(p, p) == 0.0
    assert st.distance(p, q) == st.distance(q, p)


def test_metric_triangle_inequality_random():
    st = make_stadium()
    rng = np.random.default_rng(1)
    pts = st.liouville_sample(rng, 30)
    for i in range(0, 28, 3):
        a, b, c = pts[i], pts[i + 1], pts[i + 2]
        assert st.distance(a, c) <= st.distance(a, b) + st.distance(b, c) + 1e-12


def test_diameter_below_one():
    for mk in ALL_BUILDERS:
        tb = mk()
        assert tb.diameter() < 1.0
    fx = make_linear_fixture()
    assert fx.diameter() < 1.0


def test_metric_scale_override():
    tb = make_stadium(metric_scale=0.125)
    assert tb.metric_scale == 0.125
    p = PhasePoint(0, 0.0, 0.0)
    q = PhasePoint(0, 1.0, 0.0)
    assert abs(tb.distance(p, q) - 0.125) < 1e-15


def test_validate_point():
    st = make_stadium()
    st.validate_point(PhasePoint(0, 0.5, 0.3))
    with pytest.raises(ValueError):
        st.validate_point(PhasePoint(0, 5.0, 0.3))
    with pytest.raises(ValueError):
        st.validate_point(PhasePoint(0, 0.5, 2.0))


def test_liouville_sample_respects_cap_and_measure():
    st = make_stadium()
    rng = np.random.default_rng(7)
    pts = st.liouville_sample(rng, 4000, theta_cap=1.2)
    ths = np.array([p.theta for p in pts])
    assert np.max(np.abs(ths)) < 1.2
    # sin(theta) should be uniform: check mean and spread loosely
    s = np.sin(ths)
    assert abs(s.mean()) < 0.05
    assert abs(np.std(s) - math.sqrt(1.0 / 3.0) * math.sin(1.2)) < 0.25


# ------------------------------------------------------------------- fixture
def test_fixture_basics():
    fx = make_linear_fixture()
    assert fx.lambda_u == math.e and fx.lambda_s == 1.0 / math.e
    fx.validate_point(PhasePoint(0, 0.29, -0.29))
    with pytest.raises(ValueError):
        fx.validate_point(PhasePoint(0, 0.31, 0.0))
    p, q = PhasePoint(0, 0.1, 0.2), PhasePoint(0, 0.0, 0.0)
    assert abs(fx.distance(p, q) - math.hypot(0.1, 0.2)) < 1e-15
    with pytest.raises(ValueError):
        make_linear_fixture(lambda_u=0.5)


def test_fixture_sampling_in_domain():
    fx = make_linear_fixture()
    rng = np.random.default_rng(3)
    for p in fx.liouville_sample(rng, 200):
        assert max(abs(p.r), abs(p.theta)) <= fx.half_width


# --------------------------------------------------------------- persistence
def test_save_load_round_trip(tmp_path):
    for mk, kind in [(make_stadium, "stadium"), (make_sinai, "sinai"),
                     (make_flower, "flower"), (make_circle, "circle")]:
        tb = mk()
        f = tmp_path / f"{kind}.json"
        save_table(tb, f)
        blob = json.loads(f.read_text())
        assert blob["kind"] == kind
        tb2 = load_table(f)
        assert np.array_equal(tb.cpar, tb2.cpar)
        assert np.array_equal(tb.ctype, tb2.ctype)
        assert tb.metric_scale == tb2.metric_scale


def test_save_load_fixture(tmp_path):
    fx = make_linear_fixture(half_width=0.25)
    f = tmp_path / "fx.json"
    save_table(fx, f)
    fx2 = load_table(f)
    assert isinstance(fx2, LinearFixtureMap)
    assert fx2.half_width == 0.25 and fx2.lambda_u == fx.lambda_u


def test_make_table_dispatch():
    tb = make_table("stadium", {"radius": 1.0, "straight_half_length": 2.0})
    assert tb.kind == "stadium"
    assert tb.components[0].length == 4.0
    with pytest.raises(ValueError, match="unknown table kind"):
        make_table("pentagon")
