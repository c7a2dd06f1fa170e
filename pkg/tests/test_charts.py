"""Tests for local charts: size lattice work, realization, chart-coordinate
maps, overlap/interchange, and the windowed greedy size recursion.

Scale reality baked into these tests: real chart sizes sit at e^-300, so the
public domain checks pass vacuously at float scale (collapse-to-base is the
honest behaviour), geometric accuracy is exercised through the probe-scale
sampling path, and synthetic charts with large eta (built directly, bypassing
the size validator) drive the non-vacuous bound paths.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from pesin_coder.charts import (
    GRID_N,
    PROBE_FLOOR,
    PesinChart,
    _embed,
    _log_ratio_within,
    _pullback,
    build_pesin_chart,
    change_of_coordinates,
    chart_apply,
    chart_from_segment,
    chart_invert,
    chart_map_fx,
    chart_map_fxy,
    compute_Q,
    dump_chart_sizes,
    epsilon_sweep,
    greedy_q,
    overlap_test,
    q_tilde_log,
    temperedness_slopes,
)
from pesin_coder.cocycle import (
    build_frame,
    frame_at,
    frames_along,
    orbit_segment,
    oseledets_splitting,
)
from pesin_coder.dynamics import RegularityConstants, billiard_map
from pesin_coder.errors import (
    BoundViolated,
    DomainEscape,
    OrbitHitsDiscontinuity,
    OutOfDomain,
    OverlapMissing,
    SeriesDiverging,
    SplittingNotConverged,
)
from pesin_coder.lattice import EpsilonConfig, LatticeSize
from pesin_coder.tables import (
    PhasePoint,
    make_linear_fixture,
    make_sinai,
    make_stadium,
)

CONSTS = RegularityConstants(a=1.5, beta=0.5, K=100.0)
CFG = EpsilonConfig(0.01)
CHI = 0.5


def fixture_charts(n: int = 60):
    """Charts at steps 0 and 1 of the fixture fixed-point orbit."""
    fx = make_linear_fixture()
    seg = orbit_segment(fx, PhasePoint(0, 0.0, 0.0), n, n)
    sp = oseledets_splitting(seg)
    ch0 = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=0)
    ch1 = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=1)
    return fx, seg, sp, ch0, ch1


def off_center_charts():
    """Fixture charts on a genuinely moving orbit (escapes at step 17)."""
    fx = make_linear_fixture()
    seg = orbit_segment(fx, PhasePoint(0, 1e-8, 1e-8), 16, 16)
    sp = oseledets_splitting(seg)
    ch0 = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=0)
    ch1 = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=1)
    return fx, seg, sp, ch0, ch1


def minimal_frame(chi: float = 0.5):
    """Orthogonal axes with the smallest admissible stretch parameters."""
    return build_frame(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                       math.sqrt(2.0), math.sqrt(2.0), chi)


def synthetic_chart(table, x: PhasePoint, eta_expo: int = 1, eps: float = 0.5,
                    rho: float = 0.3, chi: float = 0.5) -> PesinChart:
    """Large-eta chart built directly (the size validator would reject it)."""
    eta = LatticeSize(eta_expo, eps)
    return PesinChart(table, x, minimal_frame(chi), eta, eta, rho)


def tame_stadium_pair(seed: int = 11, c_inv_cap: float = 3.5,
                      rho_floor: float = 1e-3):
    """First sampled stadium point with moderate frame norms at steps 0, 1."""
    st = make_stadium()
    chi = 0.472
    rng = np.random.default_rng(seed)
    for p in st.liouville_sample(rng, 60):
        try:
            seg = orbit_segment(st, p, 60, 60)
            sp = oseledets_splitting(seg)
            f0 = frame_at(seg, sp, chi, at=0)
            f1 = frame_at(seg, sp, chi, at=1)
        except (OrbitHitsDiscontinuity, SplittingNotConverged, SeriesDiverging):
            continue
        r0 = float(seg.rhos[seg.index(0)])
        r1 = float(seg.rhos[seg.index(1)])
        if max(f0.c_inv_frob, f1.c_inv_frob) < c_inv_cap and \
                min(r0, r1) > rho_floor:
            cha = chart_from_segment(seg, sp, chi, CFG, CONSTS, at=0)
            chb = chart_from_segment(seg, sp, chi, CFG, CONSTS, at=1)
            return st, seg, sp, cha, chb
    raise AssertionError("no moderate stadium point found under this seed")


# --------------------------------------------------------------- size lattice
class TestSizeFunction:
    def test_fixture_q_matches_closed_form(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        s = math.sqrt(2.0 / (1.0 - math.exp(2.0 * (CHI - 1.0))))
        c_inv = math.hypot(s, s)
        hand = 6.0 * math.log(0.01) + min(
            -48.0 * math.log(c_inv),
            -24.0 * math.log(c_inv) + 216.0 * math.log(0.3))
        lq = q_tilde_log(ch0.frame, ch1.frame, 0.3, CFG, CONSTS)
        assert abs(lq - hand) < 1e-10 * abs(hand)
        assert ch0.Q.expo == 92949
        assert abs(ch0.Q.log_value - (-309.83)) < 1e-12
        assert abs(ch0.Q.value - 2.770388475409606e-135) < 1e-147
        assert ch0.eta == ch0.Q

    def test_q_respects_eps_power_bound(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        assert ch0.Q.log_value <= 6.0 * math.log(CFG.eps)

    def test_compute_q_is_exact_floor(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        lq = q_tilde_log(ch0.frame, ch1.frame, 0.3, CFG, CONSTS)
        Q = compute_Q(ch0.frame, ch1.frame, 0.3, CFG, CONSTS)
        assert Q.log_value <= lq
        assert -CFG.eps * (Q.expo - 1) / 3.0 > lq

    def test_doubling_c_inv_scales_q(self):
        # at rho near 1 the own-frame branch is active; doubling both frame
        # stretches multiplies the size by exactly 2^(-24/beta)
        fr = minimal_frame()
        fr2 = build_frame(np.array([1.0, 0.0]), np.array([0.0, 1.0]),
                          2.0 * math.sqrt(2.0), 2.0 * math.sqrt(2.0), 0.5)
        l1 = q_tilde_log(fr, fr, 0.95, CFG, CONSTS)
        l2 = q_tilde_log(fr2, fr2, 0.95, CFG, CONSTS)
        assert abs((l1 - l2) - 48.0 * math.log(2.0)) < 1e-10

    def test_q_monotone_in_rho(self):
        fr = minimal_frame()
        qs = [compute_Q(fr, fr, rho, CFG, CONSTS)
              for rho in (0.3, 0.1, 0.01, 0.001)]
        for a, b in zip(qs, qs[1:]):
            assert b <= a  # lattice order: smaller rho, smaller size

    def test_rho_must_be_positive(self):
        fr = minimal_frame()
        with pytest.raises(ValueError):
            q_tilde_log(fr, fr, 0.0, CFG, CONSTS)

    def test_builder_rejects_eta_above_q(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(ValueError):
            build_pesin_chart(fx, ch0.x, ch0.frame, ch0.Q, 0.3, CFG, CONSTS,
                              eta=ch0.Q.step(-3))

    def test_builder_rejects_oversize_q(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(ValueError, match="Q bound"):
            build_pesin_chart(fx, ch0.x, ch0.frame, LatticeSize(100, 0.01),
                              0.3, CFG, CONSTS)

    def test_builder_rejects_pinching_violation(self):
        # log Q = -50 passes the plain eps-power bound but breaks the
        # ||C^-1|| Q^(beta/24) <= eps^(1/8) pinching for this frame
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(ValueError, match="pinching"):
            build_pesin_chart(fx, ch0.x, ch0.frame, LatticeSize(15000, 0.01),
                              0.3, CFG, CONSTS)

    def test_builder_rejects_singularity_violation(self):
        # log Q = -80 passes pinching but rho^-a Q^(beta/72) is not small
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(ValueError, match="singularity"):
            build_pesin_chart(fx, ch0.x, ch0.frame, LatticeSize(24000, 0.01),
                              0.3, CFG, CONSTS)

    def test_chart_from_segment_requires_rho_data(self):
        from pesin_coder.cocycle import OrbitSegment

        fx, seg, sp, ch0, ch1 = fixture_charts()
        bare = OrbitSegment(seg.table, seg.n_minus, seg.n_plus, seg.points,
                            seg.derivs, np.full(len(seg), np.nan), seg.dists,
                            seg.flights)
        with pytest.raises(ValueError, match="rho"):
            chart_from_segment(bare, sp, CHI, CFG, CONSTS)

    def test_chart_from_segment_matches_manual_build(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        f0 = frame_at(seg, sp, CHI, at=0)
        f1 = frame_at(seg, sp, CHI, at=1)
        assert compute_Q(f0, f1, float(seg.rhos[seg.index(0)]), CFG,
                         CONSTS) == ch0.Q
        assert np.array_equal(f0.C, ch0.frame.C)


# ---------------------------------------------------------------- realization
class TestRealization:
    def test_apply_zero_is_base_point(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        assert chart_apply(ch0, [0.0, 0.0]) == ch0.x

    def test_roundtrip_at_origin_is_exact(self):
        # the fixed point sits at (0, 0), so adding the e^-135 displacement
        # is lossless and the chart realizes its true domain faithfully
        fx, seg, sp, ch0, ch1 = fixture_charts()
        v = np.array([0.5 * ch0.eta.value, -0.25 * ch0.eta.value])
        p = chart_apply(ch0, v)
        assert p != ch0.x
        vv = chart_invert(ch0, p)
        assert np.max(np.abs(vv - v)) < 1e-12 * np.max(np.abs(v))

    def test_apply_collapses_at_order_one_base(self):
        # away from the origin the e^-135 displacement is below the float
        # resolution of the base coordinates: the image is the base point
        st, seg, sp, cha, chb = tame_stadium_pair()
        v = np.array([0.5 * cha.eta.value, 0.5 * cha.eta.value])
        assert chart_apply(cha, v) == cha.x
        assert np.array_equal(chart_invert(cha, cha.x), np.zeros(2))

    def test_apply_domain_check(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(OutOfDomain):
            chart_apply(ch0, [2.0 * ch0.eta.value, 0.0])

    def test_invert_rejects_far_point(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(OutOfDomain):
            chart_invert(ch0, PhasePoint(0, 0.1, 0.0))

    def test_embed_pullback_across_component_end(self):
        st = make_stadium()
        # bottom straight segment has length 2; embed past its right end
        x = PhasePoint(0, 1.999, 0.3)
        ch = synthetic_chart(st, x, rho=0.05)
        v = np.array([0.01, 0.0])
        p = _embed(ch, v)
        assert p.component == 1
        assert np.max(np.abs(_pullback(ch, p) - v)) < 1e-12

    def test_embed_pullback_wraps_backward(self):
        st = make_stadium()
        x = PhasePoint(0, 0.001, -0.2)
        ch = synthetic_chart(st, x, rho=0.05)
        v = np.array([-0.01, 0.0])
        p = _embed(ch, v)
        assert p.component == 3  # left cap precedes the bottom segment
        assert np.max(np.abs(_pullback(ch, p) - v)) < 1e-12

    def test_embed_angle_escape(self):
        st = make_stadium()
        ch = synthetic_chart(st, PhasePoint(0, 1.0, math.pi / 2 - 1e-9),
                             rho=1e-3)
        with pytest.raises(DomainEscape):
            _embed(ch, np.array([0.0, 0.01]))

    def test_pullback_across_loops_rejected(self):
        si = make_sinai()
        ch = synthetic_chart(si, PhasePoint(0, 1.0, 0.0), rho=0.05)
        with pytest.raises(OutOfDomain):
            _pullback(ch, PhasePoint(4, 0.1, 0.0))


# ------------------------------------------------------------- one-step maps
class TestChartMapFx:
    def test_fixture_linear_part_exact(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fx(ch0, ch1, CONSTS)
        assert abs(dec.A - 1.0 / math.e) < 1e-12
        assert abs(dec.B - math.e) < 1e-12

    def test_fixture_h_fields_vanish(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fx(ch0, ch1, CONSTS)
        assert dec.h0 == (0.0, 0.0)
        assert dec.sup_h < 1e-18
        assert dec.grad_sup < 1e-12
        assert dec.holder_const < 1e-9
        assert dec.grad_h0 < 1e-14
        assert dec.h1.shape == (GRID_N, GRID_N)

    def test_fixture_probe_and_fd(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fx(ch0, ch1, CONSTS)
        assert dec.probe == PROBE_FLOOR
        assert dec.probe_floored
        assert dec.fd_checked
        assert abs(dec.a_fd - dec.A) < 1e-8
        assert abs(dec.b_fd - dec.B) < 1e-8

    def test_fixture_df_sup_is_expansion_rate(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fx(ch0, ch1, CONSTS)
        assert abs(dec.df_sup - math.e) < 1e-10 * math.e

    def test_fixture_off_center_pair(self):
        fx, seg, sp, ch0, ch1 = off_center_charts()
        dec = chart_map_fx(ch0, ch1, CONSTS)
        assert abs(dec.A - 1.0 / math.e) < 5e-7
        assert abs(dec.B - math.e) < 5e-7
        assert dec.sup_h < 1e-18

    def test_requires_consecutive_charts(self):
        fx, seg, sp, ch0, ch1 = off_center_charts()
        ch2 = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=2)
        with pytest.raises(ValueError, match="image"):
            chart_map_fx(ch0, ch2, CONSTS)

    def test_tiny_rho_refuses_probe(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        cramped = PesinChart(fx, ch0.x, ch0.frame, ch0.Q, ch0.eta, 5e-5)
        with pytest.raises(DomainEscape, match="floor"):
            chart_map_fx(cramped, ch1, CONSTS)

    def test_stadium_pair_certifies_bounds(self):
        st, seg, sp, cha, chb = tame_stadium_pair()
        assert billiard_map(st, cha.x) == chb.x  # bitwise consecutive
        dec = chart_map_fx(cha, chb, CONSTS)
        chi = cha.frame.chi
        assert abs(dec.A) < math.exp(-chi)
        assert abs(dec.B) > math.exp(chi)
        assert dec.h0 == (0.0, 0.0)
        assert dec.sup_h < 1e-10
        assert dec.grad_sup < 1e-4
        assert dec.holder_const < 5e-3
        assert dec.probe == PROBE_FLOOR
        assert dec.fd_checked
        bound = 2.0 * (1.0 + math.exp(2.0 * chi)) / cha.rho_x ** CONSTS.a
        assert dec.df_sup < bound


class TestChartMapFxy:
    def test_fixture_forward_edge(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fxy(ch0, ch1, CONSTS, "forward")
        assert abs(dec.A - 1.0 / math.e) < 1e-12
        assert abs(dec.B - math.e) < 1e-12
        assert dec.h0 == (0.0, 0.0)
        assert dec.sup_h < 1e-18
        assert dec.grad_h0 < 1e-12
        assert dec.holder_const < 1e-9

    def test_fixture_backward_edge_swaps_rates(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        dec = chart_map_fxy(ch1, ch0, CONSTS, "backward")
        assert abs(dec.A - math.e) < 1e-12
        assert abs(dec.B - 1.0 / math.e) < 1e-12

    def test_direction_validated(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        with pytest.raises(ValueError, match="direction"):
            chart_map_fxy(ch0, ch1, CONSTS, "sideways")

    def test_offset_target_lands_in_h0(self):
        # y = f(x) + (0.05, 0): the offset appears as h(0) = C^-1 (f(x) - y)
        fx = make_linear_fixture()
        x0 = PhasePoint(0, 0.001, 0.0)
        y0 = PhasePoint(0, 0.001 / math.e + 0.05, 0.0)
        cx = synthetic_chart(fx, x0, rho=0.299)
        cy = synthetic_chart(fx, y0, rho=0.23)
        dec = chart_map_fxy(cx, cy, CONSTS, "forward")
        assert abs(dec.h0[0] - (-0.05 * math.sqrt(2.0))) < 1e-12
        assert abs(dec.h0[1]) < 1e-15
        assert dec.grad_h0 < 1e-12
        assert dec.probe == 0.01 * 0.299  # rho cap, below 10 Q
        assert dec.probe_floored

    def test_offset_beyond_overlap_rejected(self):
        fx = make_linear_fixture()
        x0 = PhasePoint(0, 0.001, 0.0)
        y0 = PhasePoint(0, 0.001 / math.e + 0.3, 0.0)
        cx = synthetic_chart(fx, x0, rho=0.299)
        cy = synthetic_chart(fx, y0, rho=0.01)
        with pytest.raises(OverlapMissing):
            chart_map_fxy(cx, cy, CONSTS, "forward")

    def test_hyperbolicity_gate(self):
        # chi = 1.2 exceeds the fixture rates (log lambda = 1): |A| = 1/e
        # is not below e^-1.2, so the edge map must be refused
        fx = make_linear_fixture()
        x0 = PhasePoint(0, 0.0, 0.0)
        cx = synthetic_chart(fx, x0, chi=1.2)
        cy = synthetic_chart(fx, x0, chi=1.2)
        with pytest.raises(BoundViolated, match="hyperbolicity"):
            chart_map_fxy(cx, cy, CONSTS, "forward")

    def test_stadium_edge_matches_one_step_map(self):
        st, seg, sp, cha, chb = tame_stadium_pair()
        dec_fx = chart_map_fx(cha, chb, CONSTS)
        dec_edge = chart_map_fxy(cha, chb, CONSTS, "forward")
        assert abs(dec_edge.A - dec_fx.A) < 1e-12
        assert abs(dec_edge.B - dec_fx.B) < 1e-12


# ------------------------------------------------------------------- overlap
class TestOverlap:
    def test_chart_overlaps_itself(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        assert overlap_test(ch0, ch0)
        rep = change_of_coordinates(ch0, ch0)
        assert rep["identity"]
        assert rep["measured"] == 0.0
        assert np.array_equal(rep["linear"], np.eye(2))

    def test_rebuilt_chart_is_bitwise_reproducible(self):
        # determinism: the same segment yields the same chart data, so the
        # rebuilt chart overlaps the original exactly
        fx, seg, sp, ch0, ch1 = fixture_charts()
        again = chart_from_segment(seg, sp, CHI, CFG, CONSTS, at=0)
        assert overlap_test(ch0, again)
        assert change_of_coordinates(ch0, again)["identity"]

    def test_distinct_real_charts_never_overlap(self):
        # at real sizes the overlap bound (eta1 eta2)^4 ~ e^-2480 admits only
        # bitwise-equal chart data; consecutive charts differ
        fx, seg, sp, ch0, ch1 = fixture_charts()
        assert not overlap_test(ch0, ch1)
        with pytest.raises(OverlapMissing):
            change_of_coordinates(ch0, ch1)

    def test_eta_ratio_gate(self):
        fx = make_linear_fixture()
        a = synthetic_chart(fx, PhasePoint(0, 0.0, 0.0), eta_expo=1)
        b = synthetic_chart(fx, PhasePoint(0, 0.0, 0.0), eta_expo=7)
        assert not overlap_test(a, b)

    def test_eta_must_not_exceed_q(self):
        fx = make_linear_fixture()
        eta = LatticeSize(1, 0.5)
        bad = PesinChart(fx, PhasePoint(0, 0.0, 0.0), minimal_frame(),
                         LatticeSize(7, 0.5), eta, 0.3)
        with pytest.raises(ValueError, match="eta"):
            overlap_test(bad, bad)

    def test_synthetic_interchange_is_translation(self):
        fx = make_linear_fixture()
        a = synthetic_chart(fx, PhasePoint(0, 0.0, 0.0))
        b = synthetic_chart(fx, PhasePoint(0, 0.05, 0.0), rho=0.25)
        assert overlap_test(a, b)
        rep = change_of_coordinates(a, b)
        assert not rep["identity"]
        assert np.array_equal(rep["linear"], np.eye(2))
        assert abs(rep["offset"][0] - (-0.05 * math.sqrt(2.0))) < 1e-15
        assert abs(rep["measured"] - 0.05 * math.sqrt(2.0)) < 1e-15

    def test_interchange_bound_violated_on_wide_offset(self):
        # d = 0.2 still passes the overlap gate (< e^(-4/3)) but the affine
        # deviation 0.2 sqrt(2) exceeds eps (eta1 eta2)^2
        fx = make_linear_fixture()
        a = synthetic_chart(fx, PhasePoint(0, 0.0, 0.0))
        b = synthetic_chart(fx, PhasePoint(0, 0.2, 0.0), rho=0.1)
        assert overlap_test(a, b)
        with pytest.raises(BoundViolated, match="interchange"):
            change_of_coordinates(a, b)

    def test_overlap_missing_beyond_gate(self):
        fx = make_linear_fixture()
        a = synthetic_chart(fx, PhasePoint(0, 0.0, 0.0))
        b = synthetic_chart(fx, PhasePoint(0, 0.27, 0.0), rho=0.03)
        assert not overlap_test(a, b)
        with pytest.raises(OverlapMissing):
            change_of_coordinates(a, b)

    def test_log_ratio_helper_boundary(self):
        assert _log_ratio_within(2.0, 2.0, -100.0)
        assert _log_ratio_within(2.0 * math.e, 2.0, 0.0)
        assert not _log_ratio_within(2.0 * math.exp(1.1), 2.0, 0.0)


# ------------------------------------------------------------------ greedy q
class TestGreedyQ:
    def test_delta_exponent_frozen(self):
        assert CFG.delta_exponent == 1383
        assert EpsilonConfig(0.05).delta_exponent == 180

    def test_matches_brute_force_window_minimum(self):
        rng = np.random.default_rng(0)
        d = CFG.delta_exponent
        for _ in range(3):
            expos = rng.integers(0, 5000, size=50)
            Qs = [LatticeSize(int(e), 0.01) for e in expos]
            gq = greedy_q(Qs, CFG)
            n = len(Qs)
            for i in range(n):
                bs = max(Qs[j].expo + d - 3 * (j - i) for j in range(i, n))
                bu = max(Qs[j].expo + d - 3 * (i - j) for j in range(i + 1))
                assert gq.qs[i].expo == bs
                assert gq.qu[i].expo == bu
                assert gq.q[i].expo == max(bs, bu)

    def test_constant_q_gives_delta_q(self):
        Qs = [LatticeSize(1000, 0.01)] * 9
        gq = greedy_q(Qs, CFG)
        assert all(q.expo == 1000 + 1383 for q in gq.q)
        assert all(gq.converged)

    def test_one_step_ratio_and_domination(self):
        rng = np.random.default_rng(5)
        Qs = [LatticeSize(int(e), 0.01)
              for e in rng.integers(0, 3000, size=40)]
        gq = greedy_q(Qs, CFG)
        d = CFG.delta_exponent
        for i in range(len(Qs)):
            assert gq.q[i] <= Qs[i].step(d)  # q below delta Q everywhere
            if 1 <= i < len(Qs) - 2:
                assert abs(gq.q[i + 1].expo - gq.q[i].expo) <= 3

    def test_single_dip_propagates_both_ways(self):
        expos = [100] * 11
        expos[5] = 4000
        Qs = [LatticeSize(e, 0.01) for e in expos]
        gq = greedy_q(Qs, CFG)
        want = [5368, 5371, 5374, 5377, 5380, 5383,
                5380, 5377, 5374, 5371, 5368]
        assert [q.expo for q in gq.q] == want
        assert list(gq.converged) == [False, False, True, True, True, True,
                                      True, True, True, False, False]

    def test_window_too_short(self):
        with pytest.raises(ValueError):
            greedy_q([LatticeSize(10, 0.01)], CFG)


# ------------------------------------------------- temperedness, sweep, dump
class TestTemperedness:
    def test_fixture_slopes_vanish(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        frames = frames_along(seg, sp, CHI, -5, 6)
        Qs = [compute_Q(a, b, 0.3, CFG, CONSTS)
              for a, b in zip(frames, frames[1:])]
        t = temperedness_slopes(Qs, -5)
        assert t["fitted_slope"] < 1e-12
        assert t["far_ratio"] == 0.0
        assert abs(t["log_q_min"] - (-309.83)) < 1e-12

    def test_window_must_contain_base(self):
        Qs = [LatticeSize(100, 0.01)] * 5
        with pytest.raises(ValueError):
            temperedness_slopes(Qs, 1)

    def test_linear_drift_is_measured(self):
        # log Q falling by exactly eps per step: slope and far ratio 1.0
        Qs = [LatticeSize(1000 + 300 * i, 0.01) for i in range(11)]
        t = temperedness_slopes(Qs, -5)
        assert abs(t["fitted_slope"] - 1.0) < 1e-9
        assert abs(t["far_ratio"] - 1.0) < 1e-9


class TestSweepAndDump:
    def test_epsilon_sweep_fixture(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        rows = epsilon_sweep(seg, sp, CHI, CONSTS, [0.01, 0.05], -10, 10)
        assert [r["eps"] for r in rows] == [0.01, 0.05]
        assert rows[0]["delta_exponent"] == 1383
        assert rows[1]["delta_exponent"] == 180
        assert rows[0]["q_expo_min"] == rows[0]["q_expo_max"] == 92949
        assert rows[1]["q_expo_median"] == 18011
        for r in rows:
            assert r["probe_floored_fraction"] == 1.0
            assert r["greedy_converged_fraction"] == 1.0
            assert r["tempered_fitted_slope"] < 1e-12

    def test_dump_format(self):
        fx, seg, sp, ch0, ch1 = fixture_charts()
        frames = frames_along(seg, sp, CHI, -5, 6)
        Qs = [compute_Q(a, b, 0.3, CFG, CONSTS)
              for a, b in zip(frames, frames[1:])]
        gq = greedy_q(Qs, CFG)
        text = dump_chart_sizes(range(-5, 6), Qs, gq)
        lines = text.splitlines()
        assert lines[0].startswith("# n Q_expo")
        assert len(lines) == 12
        first = lines[1].split()
        assert first[0] == "-5"
        assert int(first[1]) == 92949
        assert int(first[2]) == 92949 + 1383
        assert first[7] in ("0", "1")
        assert float(lines[1].split()[5]) == -309.83
