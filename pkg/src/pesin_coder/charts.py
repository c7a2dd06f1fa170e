"""Local linearizing charts, their size functions, and chart-coordinate maps.

A chart at x sends v in the square R[eta] = [-eta, eta]^2 to x + C(x) v in
component coordinates (arclength, angle).  The size Q(x) comes from a pinching
formula in ||C^-1||, ||C(fx)^-1|| and the singularity distance rho(x), floored
to the exact lattice of module `lattice`.

Scale note, central to the whole module: the size formula carries exponents
like 24/beta and 72a/beta, so even the smallest possible frame norm
(||C^-1|| = 2) gives Q <= eps^(3/beta) 2^(-24/beta) ~ 3.5e-27 at eps = 0.01,
beta = 1/2, and realistic billiard values sit at e^-300 and below.  Sizes are
therefore never trusted as floats: all size arithmetic is exact integer lattice
work, all comparisons against analog quantities run in log space, and the
geometric sampling of chart-coordinate maps happens on a probe square of
half-width max(10 Q, PROBE_FLOOR) — the smallest scale at which float
finite differences still resolve the map.  Norm bounds are asserted at the
sampled scale; the grid estimators are lower bounds on the analytic norms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cocycle import HyperbolicFrame, OrbitSegment, Splitting, frame_at, reduced_cocycle
from .dynamics import (
    RegularityConstants,
    billiard_derivative,
    billiard_inverse,
    billiard_map,
    inverse_derivative,
)
from .errors import (
    BoundViolated,
    CornerHit,
    DomainEscape,
    GrazingCollision,
    NoIntersection,
    OutOfDomain,
    OverlapMissing,
)
from .lattice import EpsilonConfig, LatticeSize
from .tables import LinearFixtureMap, PhasePoint

__all__ = [
    "PesinChart",
    "ChartMapDecomposition",
    "GreedyQ",
    "PROBE_FLOOR",
    "GRID_N",
    "q_tilde_log",
    "q_tilde",
    "compute_Q",
    "build_pesin_chart",
    "chart_from_segment",
    "chart_apply",
    "chart_invert",
    "chart_map_fx",
    "chart_map_fxy",
    "overlap_test",
    "change_of_coordinates",
    "greedy_q",
    "temperedness_slopes",
    "epsilon_sweep",
    "dump_chart_sizes",
]

# smallest half-width at which chart-coordinate maps are grid-sampled; below
# it, float cancellation in x + Cv wipes out the displacement entirely
PROBE_FLOOR = 1e-6
# probe squares larger than this fraction of rho(x) risk crossing the
# singularity set during sampling
PROBE_RHO_FRACTION = 1e-2
# grid resolution for h-field sampling (odd, so v = 0 is a grid node)
GRID_N = 33
# dyadic grid-cell separations for Holder difference quotients
DYADIC_SEPARATIONS = (1, 2, 4, 8, 16)
# resolution of the overlap precondition between a mapped center and the
# next chart center: one map/inverse-map float round trip leaves ~1e-16 of
# displacement, so distances below this floor are measured zeros, while any
# genuinely distinct collision pair sits far above it
OVERLAP_DISTANCE_FLOOR = 1e-9


# ------------------------------------------------------------------- types
@dataclass(frozen=True)
class PesinChart:
    """Chart data at one orbit point: frame, exact size, domain half-width."""

    table: object
    x: PhasePoint
    frame: HyperbolicFrame
    Q: LatticeSize
    eta: LatticeSize
    rho_x: float

    @property
    def eps(self) -> float:
        return self.Q.eps


@dataclass(frozen=True)
class ChartMapDecomposition:
    """Sampled chart-coordinate map w = (A v1 + h1(v), B v2 + h2(v)).

    All norms are measured on the probe square R[probe]; `probe_floored`
    records that the probe exceeds 10 Q (always, at realistic chart sizes)
    and `fd_checked` that the finite-difference derivative at 0 was clean
    enough (noise below a tenth of the hyperbolicity gap) to cross-check the
    analytic A, B.
    """

    A: float
    B: float
    h1: np.ndarray
    h2: np.ndarray
    probe: float
    probe_floored: bool
    h0: tuple[float, float]
    grad0: np.ndarray
    grad_h0: float
    sup_h: float
    grad_sup: float
    holder_const: float
    holder_exponent: float
    df_sup: float
    a_fd: float
    b_fd: float
    fd_checked: bool


@dataclass(frozen=True)
class GreedyQ:
    """Windowed size sequences: one-sided mins, their meet, and certificates."""

    qs: tuple[LatticeSize, ...]
    qu: tuple[LatticeSize, ...]
    q: tuple[LatticeSize, ...]
    converged: tuple[bool, ...]


# ------------------------------------------------------------ size function
def q_tilde_log(frame_x: HyperbolicFrame, frame_fx: HyperbolicFrame,
                rho_x: float, cfg: EpsilonConfig,
                consts: RegularityConstants) -> float:
    """log of the un-floored chart size; the value itself underflows."""
    if not rho_x > 0.0:
        raise ValueError(f"rho must be positive, got {rho_x}")
    b = consts.beta
    t1 = -(24.0 / b) * math.log(frame_x.c_inv_frob)
    t2 = (-(12.0 / b) * math.log(frame_fx.c_inv_frob)
          + (72.0 * consts.a / b) * math.log(rho_x))
    return (3.0 / b) * math.log(cfg.eps) + min(t1, t2)


def q_tilde(frame_x: HyperbolicFrame, frame_fx: HyperbolicFrame, rho_x: float,
            cfg: EpsilonConfig, consts: RegularityConstants) -> float:
    """Float value of the un-floored size (0.0 when it underflows)."""
    return math.exp(q_tilde_log(frame_x, frame_fx, rho_x, cfg, consts))


def compute_Q(frame_x: HyperbolicFrame, frame_fx: HyperbolicFrame,
              rho_x: float, cfg: EpsilonConfig,
              consts: RegularityConstants) -> LatticeSize:
    """Largest lattice element below the un-floored size (log-space floor)."""
    return cfg.floor_log(q_tilde_log(frame_x, frame_fx, rho_x, cfg, consts))


def build_pesin_chart(table, x: PhasePoint, frame: HyperbolicFrame,
                      Q: LatticeSize, rho_x: float, cfg: EpsilonConfig,
                      consts: RegularityConstants,
                      eta: LatticeSize | None = None) -> PesinChart:
    """Assemble a chart and verify the size bounds (log-space, exact)."""
    if eta is None:
        eta = Q
    if not eta <= Q:
        raise ValueError("chart half-width eta must not exceed Q")
    b = consts.beta
    log_eps = math.log(cfg.eps)
    slack = 1e-9
    if Q.log_value > (3.0 / b) * log_eps + slack:
        raise ValueError(
            f"Q bound broken: log Q = {Q.log_value:.6g} exceeds "
            f"(3/beta) log eps = {(3.0 / b) * log_eps:.6g}")
    lhs = math.log(frame.c_inv_frob) + (b / 24.0) * Q.log_value
    if lhs > log_eps / 8.0 + slack:
        raise ValueError(
            f"pinching bound broken: log(||C^-1|| Q^(beta/24)) = {lhs:.6g} "
            f"exceeds (1/8) log eps = {log_eps / 8.0:.6g}")
    lhs = -consts.a * math.log(rho_x) + (b / 72.0) * Q.log_value
    if lhs >= log_eps / 24.0 + slack:
        raise ValueError(
            f"singularity bound broken: log(rho^-a Q^(beta/72)) = {lhs:.6g} "
            f"not below (1/24) log eps = {log_eps / 24.0:.6g}")
    return PesinChart(table, x, frame, Q, eta, float(rho_x))


def chart_from_segment(seg: OrbitSegment, splitting: Splitting, chi: float,
                       cfg: EpsilonConfig, consts: RegularityConstants,
                       at: int = 0) -> PesinChart:
    """Chart at relative step `at`, sized from this and the next frame."""
    i = seg.index(at)
    rho_x = float(seg.rhos[i])
    if math.isnan(rho_x):
        raise ValueError("segment built with with_rho=False has no rho data")
    fr_x = frame_at(seg, splitting, chi, at=at)
    fr_fx = frame_at(seg, splitting, chi, at=at + 1)
    Q = compute_Q(fr_x, fr_fx, rho_x, cfg, consts)
    return build_pesin_chart(seg.table, seg.point(at), fr_x, Q, rho_x,
                             cfg, consts)


# --------------------------------------------------------------- realization
def _embed(chart: PesinChart, v: np.ndarray) -> PhasePoint:
    """x + C v in component coordinates, without the domain check."""
    w = chart.frame.C @ v
    r = chart.x.r + w[0]
    theta = chart.x.theta + w[1]
    table = chart.table
    comp = chart.x.component
    if isinstance(table, LinearFixtureMap):
        return PhasePoint(comp, r, theta)
    if abs(theta) >= math.pi / 2:
        raise DomainEscape(f"embedded angle {theta} leaves (-pi/2, pi/2)")
    comp, r = table.wrap_r(comp, r)
    return PhasePoint(comp, r, theta)


def _pullback(chart: PesinChart, p: PhasePoint) -> np.ndarray:
    """C^-1 (p - x) in component coordinates, without the domain check."""
    if p.component != chart.x.component:
        # walk the arclength difference through the component chain
        table = chart.table
        if isinstance(table, LinearFixtureMap):
            raise OutOfDomain("fixture points live on one component")
        d = _component_offset(table, chart.x, p)
    else:
        d = np.array([p.r - chart.x.r, p.theta - chart.x.theta])
    return np.linalg.solve(chart.frame.C, d)


def _component_offset(table, x: PhasePoint, p: PhasePoint) -> np.ndarray:
    """Signed (arclength, angle) offset from x to p, walking the loop."""
    loop = next(lp for lp in table.loops if x.component in lp)
    if p.component not in loop:
        raise OutOfDomain("points on different boundary loops")
    lengths = [table.components[c].length for c in loop]
    total = sum(lengths)
    ix, ip = loop.index(x.component), loop.index(p.component)
    sx = sum(lengths[:ix]) + x.r
    sp = sum(lengths[:ip]) + p.r
    # shortest signed wrap around the loop
    dr = (sp - sx + total / 2.0) % total - total / 2.0
    return np.array([dr, p.theta - x.theta])


def chart_apply(chart: PesinChart, v) -> PhasePoint:
    """Realize the chart at v; domain-checked against eta."""
    v = np.asarray(v, dtype=float)
    eta_val = chart.eta.value
    if np.max(np.abs(v)) > eta_val * (1.0 + 1e-12):
        raise OutOfDomain(
            f"|v|_inf = {np.max(np.abs(v)):.3e} exceeds eta = {eta_val:.3e}")
    return _embed(chart, v)


def chart_invert(chart: PesinChart, p: PhasePoint) -> np.ndarray:
    """Chart coordinates of a nearby point; domain-checked against eta."""
    v = _pullback(chart, p)
    eta_val = chart.eta.value
    if np.max(np.abs(v)) > eta_val * (1.0 + 1e-12):
        raise OutOfDomain(
            f"pulled-back |v|_inf = {np.max(np.abs(v)):.3e} exceeds eta")
    return v


# ----------------------------------------------------------- map sampling
def _probe_halfwidth(chart: PesinChart) -> tuple[float, bool]:
    want = 10.0 * chart.Q.value
    cap = PROBE_RHO_FRACTION * chart.rho_x
    if cap < PROBE_FLOOR:
        raise DomainEscape(
            f"cannot probe: {PROBE_RHO_FRACTION:g} of the singularity "
            f"distance {chart.rho_x:.3e} is below the float floor "
            f"{PROBE_FLOOR:g}")
    probe = min(max(want, PROBE_FLOOR), cap)
    return probe, probe != want


def _map_step(table, p: PhasePoint, forward: bool) -> PhasePoint:
    try:
        return billiard_map(table, p) if forward else billiard_inverse(table, p)
    except (GrazingCollision, CornerHit, NoIntersection) as e:
        raise DomainEscape(f"map undefined inside probe square: {e}") from e
    except ValueError as e:  # fixture domain escape
        raise DomainEscape(str(e)) from e


def _sample_grid(chart_x: PesinChart, chart_to: PesinChart, probe: float,
                 allow: float, forward: bool):
    """Sample w(v) = pullback(f(embed(v))) on the probe grid."""
    table = chart_x.table
    xs = np.linspace(-probe, probe, GRID_N)
    U = np.empty((GRID_N, GRID_N))
    V = np.empty((GRID_N, GRID_N))
    for i, v1 in enumerate(xs):
        for j, v2 in enumerate(xs):
            img = _map_step(table, _embed(chart_x, np.array([v1, v2])), forward)
            w = _pullback(chart_to, img)
            if np.max(np.abs(w)) > allow:
                raise DomainEscape(
                    f"image |w|_inf = {np.max(np.abs(w)):.3e} leaves the "
                    f"target square of half-width {allow:.3e} at v = "
                    f"({v1:.3e}, {v2:.3e})")
            U[i, j] = w[0]
            V[i, j] = w[1]
    return xs, U, V


def _fd_jacobian(chart_x: PesinChart, chart_to: PesinChart, step: float,
                 forward: bool) -> np.ndarray:
    table = chart_x.table
    J = np.empty((2, 2))
    for k, dv in enumerate((np.array([step, 0.0]), np.array([0.0, step]))):
        wp = _pullback(chart_to, _map_step(table, _embed(chart_x, dv), forward))
        wm = _pullback(chart_to, _map_step(table, _embed(chart_x, -dv), forward))
        J[:, k] = (wp - wm) / (2.0 * step)
    return J


def _grad_fields(F: np.ndarray, spacing: float):
    g1, g2 = np.gradient(F, spacing, edge_order=2)
    return g1, g2


def _holder_of_gradient(g1: np.ndarray, g2: np.ndarray, spacing: float,
                        exponent: float) -> float:
    """Max difference quotient of (g1, g2) over dyadic grid separations."""
    worst = 0.0
    for k in DYADIC_SEPARATIONS:
        if k >= g1.shape[0]:
            break
        dist = (k * spacing) ** exponent
        for g in (g1, g2):
            worst = max(worst,
                        float(np.max(np.abs(g[k:, :] - g[:-k, :]))) / dist,
                        float(np.max(np.abs(g[:, k:] - g[:, :-k]))) / dist)
    return worst


def _field_norms(h: np.ndarray, spacing: float, exponent: float):
    g1, g2 = _grad_fields(h, spacing)
    sup_h = float(np.max(np.abs(h)))
    grad_sup = float(np.max(np.hypot(g1, g2)))
    holder = _holder_of_gradient(g1, g2, spacing, exponent)
    return sup_h, grad_sup, holder, (g1, g2)


def _df_sup(gU, gV) -> float:
    """Max operator norm of the sampled Jacobian fields."""
    a, b = gU
    c, d = gV
    fro2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    inner = np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0)
    return float(np.sqrt(np.max((fro2 + np.sqrt(inner)) / 2.0)))


def _decompose(chart_x: PesinChart, chart_to: PesinChart, A: float, B: float,
               consts: RegularityConstants, holder_exponent: float,
               forward: bool) -> ChartMapDecomposition:
    probe, floored = _probe_halfwidth(chart_x)
    chi = chart_x.frame.chi
    headroom = 4.0 * (1.0 + math.exp(2.0 * chi)) / chart_x.rho_x ** consts.a
    allow = max(10.0 * chart_to.Q.value, headroom * probe)
    xs, U, V = _sample_grid(chart_x, chart_to, probe, allow, forward)
    spacing = xs[1] - xs[0]
    c = GRID_N // 2  # v = 0 node

    V1, V2 = np.meshgrid(xs, xs, indexing="ij")
    h1 = U - A * V1
    h2 = V - B * V2
    h0 = (float(h1[c, c]), float(h2[c, c]))

    fd_step = probe / 16.0
    J0 = _fd_jacobian(chart_x, chart_to, fd_step, forward)
    noise = 2e-15 * chart_to.frame.c_inv_frob / fd_step
    gap = min(abs(A), abs(B), math.exp(-chi))
    fd_checked = noise <= 0.1 * gap
    if fd_checked:
        tol = max(1e-6, 10.0 * noise)
        if abs(J0[0, 0] - A) > tol or abs(J0[1, 1] - B) > tol:
            raise BoundViolated(
                "finite-difference check of the linear part",
                float(max(abs(J0[0, 0] - A), abs(J0[1, 1] - B))), tol)
    grad0 = J0 - np.diag([A, B])
    grad_h0 = float(np.max(np.abs(grad0)))

    s1, g1_sup, hol1, gH1 = _field_norms(h1, spacing, holder_exponent)
    s2, g2_sup, hol2, gH2 = _field_norms(h2, spacing, holder_exponent)
    gU = _grad_fields(U, spacing)
    gV = _grad_fields(V, spacing)
    return ChartMapDecomposition(
        A=A, B=B, h1=h1, h2=h2, probe=probe, probe_floored=floored, h0=h0,
        grad0=grad0, grad_h0=grad_h0, sup_h=max(s1, s2),
        grad_sup=max(g1_sup, g2_sup),
        holder_const=max(hol1, hol2), holder_exponent=holder_exponent,
        df_sup=_df_sup(gU, gV), a_fd=float(J0[0, 0]), b_fd=float(J0[1, 1]),
        fd_checked=fd_checked)


def chart_map_fx(chart_x: PesinChart, chart_fx: PesinChart,
                 consts: RegularityConstants,
                 df_x: np.ndarray | None = None) -> ChartMapDecomposition:
    """The map in chart coordinates along one orbit step.

    A, B come from the exact frame reduction of df; the grid supplies the
    nonlinear remainders h_i and their norms, asserted below eps at the probe
    scale.  Requires chart_fx to sit at the image point of chart_x.
    """
    table = chart_x.table
    fx = billiard_map(table, chart_x.x)
    if table.distance(fx, chart_fx.x) > 1e-9:
        raise ValueError(
            "chart_fx is not at the image of chart_x (same-orbit charts "
            f"required; distance {table.distance(fx, chart_fx.x):.3e})")
    if df_x is None:
        df_x = billiard_derivative(table, chart_x.x)
    D = reduced_cocycle(chart_x.frame, chart_fx.frame, df_x)
    dec = _decompose(chart_x, chart_fx, float(D[0, 0]), float(D[1, 1]),
                     consts, consts.beta / 2.0, forward=True)

    eps = chart_x.eps
    if max(abs(dec.h0[0]), abs(dec.h0[1])) > 1e-12:
        raise BoundViolated("h(0) = 0 for the one-step chart map",
                            max(abs(dec.h0[0]), abs(dec.h0[1])), 1e-12)
    for name, measured in (("sup|h|", dec.sup_h),
                           ("sup|grad h|", dec.grad_sup),
                           ("Holder(grad h)", dec.holder_const)):
        if measured >= eps:
            raise BoundViolated(name + " below eps", measured, eps)
    df_bound = 2.0 * (1.0 + math.exp(2.0 * chart_x.frame.chi)) \
        / chart_x.rho_x ** consts.a
    if dec.df_sup >= df_bound:
        raise BoundViolated("sup||d(f_x)|| within the blowup bound",
                            dec.df_sup, df_bound)
    return dec


def chart_map_fxy(chart_x: PesinChart, chart_y: PesinChart,
                  consts: RegularityConstants, direction: str = "forward",
                  df_x: np.ndarray | None = None) -> ChartMapDecomposition:
    """Chart-to-chart map for an edge: y near f(x) (or f^-1(x) backward).

    The linear part is read from the frame reduction across the two charts;
    frame mismatch lands in grad h(0), bounded by eps eta^(beta/3); the
    offset of y from the true image lands in h(0), bounded by eps eta.  At
    underflowed eta the bounds are asserted at the realized probe scale.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, "
                         f"got {direction!r}")
    forward = direction == "forward"
    table = chart_x.table
    img = _map_step(table, chart_x.x, forward)
    d = table.distance(img, chart_y.x)
    # overlap precondition in log space: d < (eta_x eta_y)^4, readable at
    # desk scale only down to the round-trip measurement floor
    if d > OVERLAP_DISTANCE_FLOOR:
        log_bound = 4.0 * (chart_x.eta.log_value + chart_y.eta.log_value)
        if math.log(d) >= log_bound:
            raise OverlapMissing(
                f"target chart too far from the image: d = {d:.3e}, "
                f"log bound {log_bound:.6g}")
    if df_x is None:
        df_x = (billiard_derivative(table, chart_x.x) if forward
                else inverse_derivative(table, chart_x.x))
    M = np.linalg.solve(chart_y.frame.C, df_x @ chart_x.frame.C)
    A, B = float(M[0, 0]), float(M[1, 1])
    chi = chart_x.frame.chi
    if forward:
        if not (abs(A) < math.exp(-chi) < math.exp(chi) < abs(B)):
            raise BoundViolated("edge-map hyperbolicity |A| < e^-chi < e^chi "
                                "< |B|", max(abs(A), 1.0 / max(abs(B), 1e-300)),
                                math.exp(-chi))
    else:
        if not (abs(B) < math.exp(-chi) < math.exp(chi) < abs(A)):
            raise BoundViolated("inverse edge-map hyperbolicity |B| < e^-chi "
                                "< e^chi < |A|",
                                max(abs(B), 1.0 / max(abs(A), 1e-300)),
                                math.exp(-chi))
    dec = _decompose(chart_x, chart_y, A, B, consts, consts.beta / 3.0,
                     forward)

    eps = chart_x.eps
    # assert at the realized scale: eta when representable, else the probe
    eta_eff = max(min(chart_x.eta.value, chart_y.eta.value), dec.probe)
    h0_norm = math.hypot(*dec.h0)
    if h0_norm > eps * eta_eff:
        raise BoundViolated("|h(0)| < eps eta", h0_norm, eps * eta_eff)
    if dec.grad_h0 > eps * eta_eff ** (consts.beta / 3.0):
        raise BoundViolated("|grad h(0)| < eps eta^(beta/3)", dec.grad_h0,
                            eps * eta_eff ** (consts.beta / 3.0))
    if dec.holder_const >= eps:
        raise BoundViolated("Holder(grad h) below eps", dec.holder_const, eps)
    return dec


# ------------------------------------------------------------------ overlap
def overlap_test(chart1: PesinChart, chart2: PesinChart) -> bool:
    """Charts interchange coordinates: eta ratio e^(+-eps) on the lattice and
    base distance plus frame distance below (eta1 eta2)^4 (log space)."""
    for c in (chart1, chart2):
        if not c.eta <= c.Q:
            raise ValueError("chart eta exceeds its Q")
    if not chart1.eta.ratio_within_e_eps(chart2.eta, steps=1):
        return False
    d = chart1.table.distance(chart1.x, chart2.x)
    dC = float(np.sqrt(np.sum((chart1.frame.C - chart2.frame.C) ** 2)))
    total = d + dC
    if total == 0.0:
        return True
    log_bound = 4.0 * (chart1.eta.log_value + chart2.eta.log_value)
    return math.log(total) < log_bound


def _log_ratio_within(v1: float, v2: float, log_bound: float) -> bool:
    """|log(v1/v2)| <= e^log_bound, safe when the bound underflows."""
    r = math.log(v1 / v2)
    if r == 0.0:
        return True
    return math.log(abs(r)) <= log_bound


def change_of_coordinates(chart1: PesinChart, chart2: PesinChart) -> dict:
    """Affine interchange map of overlapping charts with its norm report.

    The flat chart realization makes g = Psi2^-1 Psi1 exactly affine:
    g(v) = C2^-1 (x1 - x2) + C2^-1 C1 v, so deviation norms are closed-form.
    Asserts the interchange bound eps (eta1 eta2)^2, the inclusion of the
    e^(-2 eps)-shrunk domain, and the s/u/angle ratio controls (eta1 eta2)^3.
    """
    if not overlap_test(chart1, chart2):
        raise OverlapMissing("charts fail the overlap test")
    if chart1.x.component != chart2.x.component:
        raise OverlapMissing("overlapping charts on different components")
    if chart1.x == chart2.x and np.array_equal(chart1.frame.C, chart2.frame.C):
        # equal chart data: the interchange map is the identity by
        # definition; solving C against itself would only inject noise
        return {"offset": np.zeros(2), "linear": np.eye(2),
                "offset_norm": 0.0, "linear_deviation": 0.0,
                "measured": 0.0, "identity": True}
    dx = np.array([chart1.x.r - chart2.x.r, chart1.x.theta - chart2.x.theta])
    t = np.linalg.solve(chart2.frame.C, dx)
    L = np.linalg.solve(chart2.frame.C, chart1.frame.C)
    offset = float(np.linalg.norm(t))
    lin_dev = float(np.sqrt(np.sum((L - np.eye(2)) ** 2)))
    measured = offset + lin_dev  # Holder part of an affine map is zero

    eps = chart1.eps
    log_e1, log_e2 = chart1.eta.log_value, chart2.eta.log_value
    if measured > 0.0 and \
            math.log(measured) >= math.log(eps) + 2.0 * (log_e1 + log_e2):
        raise BoundViolated("interchange map within eps (eta1 eta2)^2",
                            measured, eps * math.exp(2.0 * (log_e1 + log_e2)))

    # inclusion: image of R[e^(-2 eps) eta1] under g inside R[eta2]; the
    # infinity operator norm maps sup-squares to sup-squares tightly
    lin_gain = float(np.max(np.sum(np.abs(L), axis=1)))
    t_inf = float(np.max(np.abs(t)))
    lhs = math.log(lin_gain) - 2.0 * eps + log_e1
    if t_inf > 0.0:
        lhs = float(np.logaddexp(lhs, math.log(t_inf)))
    if lhs > log_e2:
        raise BoundViolated("shrunk domain inclusion", math.exp(lhs),
                            math.exp(log_e2))

    log_cube = 3.0 * (log_e1 + log_e2)
    f1, f2 = chart1.frame, chart2.frame
    for name, v1, v2 in (("s", f1.s_param, f2.s_param),
                         ("u", f1.u_param, f2.u_param),
                         ("angle", f1.alpha, f2.alpha)):
        if not _log_ratio_within(v1, v2, log_cube):
            raise BoundViolated(f"{name}-ratio within e^(+-(eta1 eta2)^3)",
                                abs(math.log(v1 / v2)), math.exp(log_cube))
    return {
        "offset": t,
        "linear": L,
        "offset_norm": offset,
        "linear_deviation": lin_dev,
        "measured": measured,
        "identity": measured == 0.0,
    }


# ------------------------------------------------------------------ greedy q
def greedy_q(Qs, cfg: EpsilonConfig) -> GreedyQ:
    """One-sided greedy size recursions over a finite window, exact.

    Backward pass: qs[i] = min(e^eps qs[i+1], delta Q[i]); forward pass
    symmetric for qu; q = qs min qu.  Also asserts the one-step ratio
    q[i+1]/q[i] = e^(+-eps) on interior indices and q <= delta Q < eps Q.
    Convergence certificates assume unseen sizes are no smaller than the
    window minimum.
    """
    Qs = list(Qs)
    n = len(Qs)
    if n < 2:
        raise ValueError("greedy recursion needs at least two points")
    d = cfg.delta_exponent
    qs = [None] * n
    qu = [None] * n
    qs[n - 1] = Qs[n - 1].step(d)
    for i in range(n - 2, -1, -1):
        qs[i] = qs[i + 1].times_e_eps().min_with(Qs[i].step(d))
    qu[0] = Qs[0].step(d)
    for i in range(1, n):
        qu[i] = qu[i - 1].times_e_eps().min_with(Qs[i].step(d))
    q = [a.min_with(b) for a, b in zip(qs, qu)]

    for i in range(1, n - 2):
        if not q[i + 1].ratio_within_e_eps(q[i], steps=1):
            raise AssertionError(
                f"greedy ratio certificate broke at index {i}: exponents "
                f"{q[i].expo} -> {q[i + 1].expo}")
    for i in range(n):
        if not q[i] <= Qs[i].step(d):
            raise AssertionError(f"q exceeds delta Q at index {i}")

    max_expo = max(Q.expo for Q in Qs)  # exponent of the smallest window size
    converged = []
    for i in range(n):
        # a beyond-edge candidate at distance m >= 1 has exponent at most
        # max_expo + d - 3 (edge_dist + m), assuming unseen sizes are no
        # smaller than the window minimum; q[i] is final once even the
        # nearest such candidate cannot raise its exponent
        edge = min(i, n - 1 - i)
        converged.append(max_expo + d - 3 * (edge + 1) <= q[i].expo)
    return GreedyQ(tuple(qs), tuple(qu), tuple(q), tuple(converged))


# ------------------------------------------------------- temperedness proxy
def temperedness_slopes(Qs, lo: int) -> dict:
    """Fitted and worst-ratio slopes of log Q along the window.

    Temperedness predicts (1/n) log Q(f^n x) -> 0; finite-window proxies are
    the least-squares slope of log Q against n (drift rate) and the largest
    |log Q(n) - log Q(0)| / |n| over the far half of the window.
    """
    logs = np.array([Q.log_value for Q in Qs])
    ns = np.arange(lo, lo + len(logs), dtype=float)
    if 0 not in ns:
        raise ValueError("window must contain the base index 0")
    base = logs[int(-lo)]
    slope = float(np.polyfit(ns, logs, 1)[0])
    far = np.abs(ns) >= len(logs) / 4.0
    far &= ns != 0
    ratio = float(np.max(np.abs(logs[far] - base) / np.abs(ns[far]))) \
        if far.any() else 0.0
    return {"fitted_slope": abs(slope), "far_ratio": ratio,
            "log_q_min": float(np.min(logs)), "log_q_max": float(np.max(logs))}


# ----------------------------------------------------------------- sweeps
def epsilon_sweep(seg: OrbitSegment, splitting: Splitting, chi: float,
                  consts: RegularityConstants, eps_values, lo: int, hi: int
                  ) -> list[dict]:
    """Chart-size statistics over a window for several coarseness values."""
    from .cocycle import frames_along

    frames = frames_along(seg, splitting, chi, lo, hi + 1)
    rhos = [float(seg.rhos[seg.index(m)]) for m in range(lo, hi + 1)]
    out = []
    for eps in eps_values:
        cfg = EpsilonConfig(eps)
        Qs = [compute_Q(frames[k], frames[k + 1], rhos[k], cfg, consts)
              for k in range(hi - lo + 1)]
        gq = greedy_q(Qs, cfg)
        expos = np.array([Q.expo for Q in Qs])
        temper = temperedness_slopes(Qs, lo)
        out.append({
            "eps": eps,
            "delta_exponent": cfg.delta_exponent,
            "q_expo_min": int(np.min(expos)),
            "q_expo_median": int(np.median(expos)),
            "q_expo_max": int(np.max(expos)),
            "probe_floored_fraction": float(np.mean(
                [10.0 * Q.value < PROBE_FLOOR for Q in Qs])),
            "greedy_converged_fraction": float(np.mean(gq.converged)),
            "tempered_fitted_slope": temper["fitted_slope"],
            "tempered_far_ratio": temper["far_ratio"],
        })
    return out


# ------------------------------------------------------------------- dump
def dump_chart_sizes(ns, Qs, gq: GreedyQ) -> str:
    """Tabular text of exact size exponents along a window."""
    lines = ["# n Q_expo q_expo qs_expo qu_expo log_Q log_q converged"]
    for k, n in enumerate(ns):
        lines.append(
            f"{n} {Qs[k].expo} {gq.q[k].expo} {gq.qs[k].expo} "
            f"{gq.qu[k].expo} {Qs[k].log_value:.17g} "
            f"{gq.q[k].log_value:.17g} {int(gq.converged[k])}")
    return "\n".join(lines) + "\n"
