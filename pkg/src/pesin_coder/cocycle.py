"""Hyperbolic splittings, Lyapunov data, and adapted frame reductions.

Along a finite orbit segment the stable/unstable directions are produced by
push-forward from the segment ends (forward pushes converge to the unstable
direction, inverse pushes to the stable one).  From the directions, weighted
series define the parameters s(x), u(x) >= sqrt(2); the frame matrix C sends
the standard basis to e_s/s and e_u/u, and conjugating df by consecutive
frames reduces the dynamics to a diagonal hyperbolic cocycle.  All limits are
replaced by finite-window proxies: fitted slopes, running extrema, and best
return distances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .accel import run_orbit
from .dynamics import (
    CORNER_TOL,
    GRAZING_COS_TOL,
    MIN_FLIGHT,
    billiard_inverse,
    billiard_map,
    derivative_along_orbit,
    dist_to_discontinuity,
    step_with_flight,
)
from .errors import (
    CornerHit,
    DegenerateAngle,
    GrazingCollision,
    InequalityViolated,
    NoIntersection,
    NotDiagonal,
    NotHyperbolic,
    OrbitHitsDiscontinuity,
    SeriesDiverging,
    SplittingNotConverged,
)
from .tables import LinearFixtureMap, PhasePoint

__all__ = [
    "OrbitSegment",
    "Splitting",
    "SUParams",
    "HyperbolicFrame",
    "LyapunovEstimate",
    "orbit_segment",
    "oseledets_splitting",
    "lyapunov_exponents",
    "s_u_parameters",
    "build_frame",
    "frame_at",
    "frames_along",
    "reduced_cocycle",
    "c_inverse_growth_check",
    "nuh_diagnostics",
    "adaptedness_estimate",
    "dump_segment",
]

# series term below this fraction of the partial sum ends the truncation
SERIES_TERM_CUTOFF = 1e-14
# number of terms cap for the s/u series
SERIES_MAX_TERMS = 10_000
# partial sums past this cap mean the weighted series is not summable; the
# cap is deliberately huge — whispering-gallery passages yield genuine s, u
# of 1e10 and beyond, and only sustained geometric growth (chi above the
# local contraction rate) should trip it
SERIES_SUM_CAP = 1e100
# |sin(angle)| below this makes a frame unusable
DEGENERATE_SIN = 1e-12
# relative off-diagonal mass allowed in the reduced cocycle
OFFDIAG_REL_TOL = 1e-8


# --------------------------------------------------------------- containers
@dataclass(frozen=True)
class OrbitSegment:
    """Orbit points f^n(x) for n in [-n_minus, n_plus] with step data.

    Index-0 of the arrays is n = -n_minus; the base point sits at array index
    `n_minus`.  `derivs[i]` is df at point i (for the last point, computed
    from a probe step that is not part of the segment); `rhos[i]` is the
    min distance to the discontinuity set over the point and both neighbours.
    """

    table: object
    n_minus: int
    n_plus: int
    points: tuple[PhasePoint, ...]
    derivs: np.ndarray  # (len, 2, 2)
    rhos: np.ndarray  # (len,)
    dists: np.ndarray  # (len,) distance of each point itself to D
    flights: np.ndarray  # (len-1,)

    def __len__(self) -> int:
        return len(self.points)

    def index(self, n: int) -> int:
        """Array index of relative step n in [-n_minus, n_plus]."""
        if not (-self.n_minus <= n <= self.n_plus):
            raise IndexError(f"step {n} outside [-{self.n_minus}, {self.n_plus}]")
        return n + self.n_minus

    def point(self, n: int) -> PhasePoint:
        return self.points[self.index(n)]

    @property
    def base(self) -> PhasePoint:
        return self.points[self.n_minus]


@dataclass(frozen=True)
class Splitting:
    """Unit stable/unstable directions at every segment point.

    Rows i of e_s/e_u correspond to points[i]; the sign convention makes the
    first nonzero coordinate positive.  The convergence fields record the
    angle change when the push-forward window is halved (measured at the base
    point).

    factor_s[j] = ||df_j e_s(j)|| and factor_u[j] = ||df_j e_u(j)|| are the
    one-step norms along the fields.  n-step norms are products of these:
    because each field row is independently accurate, the products track the
    true decay/growth with only linearly accumulating error, whereas pushing
    a single vector n steps lets the complementary component (present at
    machine epsilon) take over after ~|log eps|/(2 lambda) steps.
    """

    e_s: np.ndarray  # (len, 2)
    e_u: np.ndarray  # (len, 2)
    factor_s: np.ndarray  # (len-1,)
    factor_u: np.ndarray  # (len-1,)
    convergence_angle_s: float
    convergence_angle_u: float


@dataclass(frozen=True)
class SUParams:
    """Truncated series parameters at one orbit point."""

    s: float
    u: float
    s_tail: float
    u_tail: float
    s_terms: int
    u_terms: int


@dataclass(frozen=True)
class HyperbolicFrame:
    """Adapted frame at one point: directions, angle, series weights, C."""

    e_s: np.ndarray
    e_u: np.ndarray
    alpha: float
    s_param: float
    u_param: float
    C: np.ndarray
    chi: float

    @property
    def c_inv_frob(self) -> float:
        """Frobenius norm of C^-1: sqrt(s^2+u^2)/|sin alpha| (closed form)."""
        return math.hypot(self.s_param, self.u_param) / abs(math.sin(self.alpha))

    @property
    def c_frob(self) -> float:
        return float(np.sqrt(np.sum(self.C * self.C)))


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda1: float
    lambda2: float
    qr_lambda1: float
    qr_lambda2: float
    radius: float
    birkhoff_available: bool


# ------------------------------------------------------------ orbit segment
def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Deterministic orientation: first nonzero coordinate positive."""
    if v[0] != 0.0:
        return v if v[0] > 0 else -v
    return v if v[1] > 0 else -v


_STATUS_TEXT = {
    accel.GRAZING: "tangential collision",
    accel.CORNER: "junction hit",
    accel.NO_INTERSECTION: "ray misses the boundary",
}


def _run_or_raise(table, p: PhasePoint, n: int, sign: int):
    """Kernel orbit of n steps; sign=-1 runs the time-reversed map."""
    comps, rs, ths, taus, status, k = run_orbit(
        table.ctype, table.cpar, p.component, p.r, sign * p.theta, n,
        GRAZING_COS_TOL, MIN_FLIGHT, CORNER_TOL)
    if status != accel.OK:
        step = k if sign > 0 else -k - 1
        raise OrbitHitsDiscontinuity(step, _STATUS_TEXT[status])
    return comps, rs, sign * ths, taus


def orbit_segment(table, x: PhasePoint, n_minus: int, n_plus: int,
                  with_rho: bool = True) -> OrbitSegment:
    """Collect f^n(x) for n in [-n_minus, n_plus] with derivatives and rho.

    `with_rho=False` skips the (expensive) per-point discontinuity distances
    and fills them with nan — intended for long exponent runs where only the
    derivative cocycle matters.
    """
    if n_minus < 0 or n_plus < 0:
        raise ValueError("window lengths must be nonnegative")

    if isinstance(table, LinearFixtureMap):
        table.validate_point(x)
        pts = [x]
        for k in range(n_plus):
            pts.append(billiard_map(table, pts[-1]))
            try:
                table.validate_point(pts[-1])
            except ValueError as e:
                raise OrbitHitsDiscontinuity(k + 1, str(e)) from e
        head = [x]
        for k in range(n_minus):
            head.append(billiard_inverse(table, head[-1]))
            try:
                table.validate_point(head[-1])
            except ValueError as e:
                raise OrbitHitsDiscontinuity(-k - 1, str(e)) from e
        pts = list(reversed(head[1:])) + pts
        derivs = np.broadcast_to(
            np.array([[table.lambda_s, 0.0], [0.0, table.lambda_u]]),
            (len(pts), 2, 2)).copy()
        dists = np.array([dist_to_discontinuity(table, p) for p in pts])
        d_before = dist_to_discontinuity(table, billiard_inverse(table, pts[0]))
        d_after = dist_to_discontinuity(table, billiard_map(table, pts[-1]))
        padded = np.concatenate([[d_before], dists, [d_after]])
        rhos = np.minimum(np.minimum(padded[:-2], padded[1:-1]), padded[2:])
        return OrbitSegment(table, n_minus, n_plus, tuple(pts), derivs, rhos,
                            dists, np.zeros(len(pts) - 1))

    comps_f, rs_f, ths_f, taus_f = _run_or_raise(table, x, n_plus, +1)
    comps_b, rs_b, ths_b, taus_b = _run_or_raise(table, x, n_minus, -1)
    comps = np.concatenate([comps_b[::-1][:-1], comps_f])
    rs = np.concatenate([rs_b[::-1][:-1], rs_f])
    ths = np.concatenate([ths_b[::-1][:-1], ths_f])
    flights = np.concatenate([taus_b[::-1], taus_f])
    pts = tuple(PhasePoint(int(c), float(r), float(t))
                for c, r, t in zip(comps, rs, ths))

    # df at the last point needs the collision after it: one probe step
    try:
        probe, probe_tau = step_with_flight(table, pts[-1])
    except (GrazingCollision, CornerHit, NoIntersection) as e:
        raise OrbitHitsDiscontinuity(n_plus, f"derivative probe: {e}") from e
    comps_x = np.concatenate([comps, [probe.component]])
    ths_x = np.concatenate([ths, [probe.theta]])
    taus_x = np.concatenate([flights, [probe_tau]])
    derivs = derivative_along_orbit(table, comps_x, rs, ths_x, taus_x)

    if with_rho:
        dists = np.array([dist_to_discontinuity(table, p) for p in pts])
        try:
            d_before = dist_to_discontinuity(table, billiard_inverse(table, pts[0]))
        except (GrazingCollision, CornerHit, NoIntersection) as e:
            raise OrbitHitsDiscontinuity(-n_minus - 1, str(e)) from e
        d_after = dist_to_discontinuity(table, probe)
        padded = np.concatenate([[d_before], dists, [d_after]])
        rhos = np.minimum(np.minimum(padded[:-2], padded[1:-1]), padded[2:])
    else:
        dists = np.full(len(pts), np.nan)
        rhos = np.full(len(pts), np.nan)
    return OrbitSegment(table, n_minus, n_plus, pts, derivs, rhos,
                        dists, flights)


# ------------------------------------------------------------- splitting
def _push_forward(derivs: np.ndarray, start: int, stop: int, v: np.ndarray,
                  out: np.ndarray | None = None):
    """Multiply v by derivs[start..stop-1], renormalizing; store at [i+1]."""
    w = v / np.linalg.norm(v)
    if out is not None:
        out[start] = w
    for i in range(start, stop):
        w = derivs[i] @ w
        w /= np.linalg.norm(w)
        if out is not None:
            out[i + 1] = w
    return w


def _push_backward(derivs: np.ndarray, start: int, stop: int, v: np.ndarray,
                   out: np.ndarray | None = None):
    """Multiply v by inverse derivatives from index start down to stop."""
    w = v / np.linalg.norm(v)
    if out is not None:
        out[start] = w
    for i in range(start - 1, stop - 1, -1):
        w = np.linalg.solve(derivs[i], w)
        w /= np.linalg.norm(w)
        if out is not None:
            out[i] = w
    return w


def _angle_between(a: np.ndarray, b: np.ndarray) -> float:
    return math.asin(min(1.0, abs(a[0] * b[1] - a[1] * b[0])))


# generic seed: avoid axis directions so diagonal fixtures don't get stuck on
# the wrong eigendirection
_SEED = np.array([0.6, 0.8])


def oseledets_splitting(seg: OrbitSegment, convergence_tol: float = 1e-6,
                        min_window: int = 4) -> Splitting:
    """Stable/unstable directions by push-forward from the segment ends.

    The unstable direction at index i is the forward push of a generic seed
    from the past end; the stable direction is the backward (inverse-cocycle)
    push from the future end.  Convergence is measured by the angle change at
    the base point when each push window is halved; above `convergence_tol`
    the splitting is rejected.
    """
    n = len(seg)
    if seg.n_minus < min_window or seg.n_plus < min_window:
        raise ValueError(
            f"segment sides ({seg.n_minus}, {seg.n_plus}) below burn-in {min_window}")
    base = seg.n_minus
    e_u = np.empty((n, 2))
    e_s = np.empty((n, 2))
    _push_forward(seg.derivs, 0, n - 1, _SEED, out=e_u)
    _push_backward(seg.derivs, n - 1, 0, _SEED, out=e_s)

    # halved-window candidates at the base point
    u_half = _push_forward(seg.derivs, base - seg.n_minus // 2, base, _SEED)
    s_half = _push_backward(seg.derivs, base + seg.n_plus - seg.n_plus // 2, base, _SEED)
    ang_u = _angle_between(e_u[base], u_half)
    ang_s = _angle_between(e_s[base], s_half)
    if ang_u > convergence_tol or ang_s > convergence_tol:
        raise SplittingNotConverged(
            f"angle change under window halving: unstable {ang_u:.3e}, "
            f"stable {ang_s:.3e} (tol {convergence_tol:.1e})")
    sep = _angle_between(e_s[base], e_u[base])
    if sep < DEGENERATE_SIN:
        raise SplittingNotConverged(
            f"stable and unstable directions collapse (angle {sep:.3e})")
    e_u = np.array([_fix_sign(v) for v in e_u])
    e_s = np.array([_fix_sign(v) for v in e_s])
    factor_s = np.linalg.norm(
        np.einsum("nij,nj->ni", seg.derivs[:-1], e_s[:-1]), axis=1)
    factor_u = np.linalg.norm(
        np.einsum("nij,nj->ni", seg.derivs[:-1], e_u[:-1]), axis=1)
    return Splitting(e_s, e_u, factor_s, factor_u, ang_s, ang_u)


# ------------------------------------------------------------------ exponents
def lyapunov_exponents(seg: OrbitSegment, splitting: Splitting | None = None,
                       blocks: int = 10) -> LyapunovEstimate:
    """Finite-window exponents: QR cocycle, plus Birkhoff means when a
    splitting is supplied.  The confidence radius is the larger of the
    QR/Birkhoff discrepancy and the spread of block means."""
    n = len(seg) - 1
    logs = np.zeros((n, 2))
    Q = np.eye(2)
    for i in range(n):
        A = seg.derivs[i] @ Q
        Q, R = np.linalg.qr(A)
        logs[i] = np.log(np.abs(np.diag(R)))
    qr_means = np.sort(logs.mean(axis=0))
    qr_l1, qr_l2 = float(qr_means[0]), float(qr_means[1])

    block_means = np.array([
        b.mean(axis=0) for b in np.array_split(logs, min(blocks, n)) if len(b)])
    spread = float(np.max(block_means.std(axis=0))) if len(block_means) > 1 else 0.0

    if splitting is None:
        return LyapunovEstimate(qr_l1, qr_l2, qr_l1, qr_l2, spread, False)

    # trim the seed-contaminated indices near each end: e_u is unreliable
    # close to the past end, e_s close to the future end
    trim = min(max(4, n // 10), max((n - 2) // 2, 0))
    sl = slice(trim, n - trim)
    gs = np.einsum("nij,nj->ni", seg.derivs[sl], splitting.e_s[sl])
    gu = np.einsum("nij,nj->ni", seg.derivs[sl], splitting.e_u[sl])
    l1 = float(np.mean(np.log(np.linalg.norm(gs, axis=1))))
    l2 = float(np.mean(np.log(np.linalg.norm(gu, axis=1))))
    radius = max(spread, abs(l1 - qr_l1), abs(l2 - qr_l2))
    return LyapunovEstimate(l1, l2, qr_l1, qr_l2, radius, True)


# --------------------------------------------------------------- s, u series
def _weighted_series(expansions, chi: float, cap_terms: int,
                     sum_cap: float = SERIES_SUM_CAP):
    """sum of e^(2 n chi) * (prod of expansion factors up to n)^2, n >= 0.

    `expansions` yields per-step norms; the n=0 term is 1.  Returns
    (partial, tail_bound, terms_used).
    """
    partial = 1.0
    c = 1.0  # running ||df^n e||
    term = 1.0
    prev_term = 1.0
    n = 0
    for g in expansions:
        n += 1
        c *= g
        prev_term = term
        term = math.exp(2.0 * n * chi) * c * c
        partial += term
        if partial > sum_cap:
            raise SeriesDiverging(
                f"partial sum {partial:.3e} exceeds cap {sum_cap:.1e} "
                f"after {n} terms (chi={chi} too large here)")
        if term < SERIES_TERM_CUTOFF * partial:
            break
        if n >= cap_terms:
            break
    ratio = term / prev_term if prev_term > 0 else 1.0
    tail = term * ratio / (1.0 - ratio) if 0.0 < ratio < 1.0 else math.inf
    return partial, tail, n


def s_u_parameters(seg: OrbitSegment, splitting: Splitting, chi: float,
                   at: int = 0, n_trunc: int = SERIES_MAX_TERMS,
                   sum_cap: float = SERIES_SUM_CAP) -> SUParams:
    """Truncated series parameters at relative step `at`:
    s^2 = 2 sum e^(2n chi) ||df^n e_s||^2 (forward),
    u^2 = 2 sum e^(2n chi) ||df^-n e_u||^2 (backward).

    The n-step norms are products of the splitting's one-step factors; the
    backward unstable norm uses ||df^-1 e_u(x_j)|| = 1/factor_u[j-1] (df maps
    the unstable field to itself up to sign).
    """
    if chi <= 0:
        raise ValueError("chi must be positive")
    i = seg.index(at)
    ssum, stail, sterms = _weighted_series(
        splitting.factor_s[i:], chi, n_trunc, sum_cap)
    usum, utail, uterms = _weighted_series(
        1.0 / splitting.factor_u[i - 1::-1] if i > 0 else (),
        chi, n_trunc, sum_cap)
    return SUParams(math.sqrt(2.0 * ssum), math.sqrt(2.0 * usum),
                    stail, utail, sterms, uterms)


# -------------------------------------------------------------------- frames
def build_frame(e_s: np.ndarray, e_u: np.ndarray, s_param: float,
                u_param: float, chi: float) -> HyperbolicFrame:
    """Assemble C with columns e_s/s and e_u/u; assert the frame identities."""
    e_s = np.asarray(e_s, dtype=float)
    e_u = np.asarray(e_u, dtype=float)
    for v in (e_s, e_u):
        if abs(np.linalg.norm(v) - 1.0) > 1e-9:
            raise ValueError("frame directions must be unit vectors")
    if not (s_param >= math.sqrt(2.0) - 1e-12 and u_param >= math.sqrt(2.0) - 1e-12):
        raise ValueError("s and u parameters must be >= sqrt(2)")
    cross = e_s[0] * e_u[1] - e_s[1] * e_u[0]
    if abs(cross) < DEGENERATE_SIN:
        raise DegenerateAngle(f"|sin alpha| = {abs(cross):.3e}")
    alpha = math.acos(max(-1.0, min(1.0, float(np.dot(e_s, e_u)))))
    C = np.column_stack([e_s / s_param, e_u / u_param])
    frame = HyperbolicFrame(e_s, e_u, alpha, float(s_param), float(u_param),
                            C, float(chi))
    # closed-form ||C^-1||_F must match direct inversion (consistency check)
    Ci = np.linalg.inv(C)
    direct = float(np.sqrt(np.sum(Ci * Ci)))
    if abs(direct - frame.c_inv_frob) > 1e-10 * max(1.0, direct):
        raise AssertionError(
            f"frame inverse-norm identity broke: {direct} vs {frame.c_inv_frob}")
    if frame.c_frob > 1.0 + 1e-12:
        raise AssertionError(f"||C||_F = {frame.c_frob} exceeds 1")
    return frame


def frame_at(seg: OrbitSegment, splitting: Splitting, chi: float,
             at: int = 0, n_trunc: int = SERIES_MAX_TERMS) -> HyperbolicFrame:
    i = seg.index(at)
    su = s_u_parameters(seg, splitting, chi, at=at, n_trunc=n_trunc)
    return build_frame(splitting.e_s[i], splitting.e_u[i], su.s, su.u, chi)


def frames_along(seg: OrbitSegment, splitting: Splitting, chi: float,
                 lo: int, hi: int, n_trunc: int = SERIES_MAX_TERMS
                 ) -> list[HyperbolicFrame]:
    """Frames at relative steps lo..hi inclusive."""
    return [frame_at(seg, splitting, chi, at=m, n_trunc=n_trunc)
            for m in range(lo, hi + 1)]


def reduced_cocycle(frame_x: HyperbolicFrame, frame_fx: HyperbolicFrame,
                    df_x: np.ndarray) -> np.ndarray:
    """D = C(fx)^-1 df C(x); must be diagonal with |A| < e^-chi < e^chi < |B|."""
    D = np.linalg.solve(frame_fx.C, df_x @ frame_x.C)
    scale = float(np.max(np.abs(D)))
    off = max(abs(D[0, 1]), abs(D[1, 0]))
    if off > OFFDIAG_REL_TOL * scale:
        raise NotDiagonal(
            f"off-diagonal mass {off:.3e} vs scale {scale:.3e} "
            f"(frames not from one splitting?)")
    A, B = float(D[0, 0]), float(D[1, 1])
    chi = frame_x.chi
    if not (abs(A) < math.exp(-chi) and abs(B) > math.exp(chi)):
        raise NotHyperbolic(
            f"diagonal ({A:.6f}, {B:.6f}) fails |A| < e^-chi < e^chi < |B| "
            f"for chi={chi}")
    return D


# ------------------------------------------------------------------- checks
def c_inverse_growth_check(seg: OrbitSegment, frames: list[HyperbolicFrame],
                           lo: int, a: float) -> dict:
    """Backward growth control of ||C^-1|| by powers of rho.

    frames[k] must be the frame at relative step lo+k.  At every consecutive
    pair, with x the later point: ||C(f^-1 x)^-1|| <= 2 rho(x)^(-2a) *
    (1 + e^chi rho(x)^(-a)) * ||C(x)^-1||.  Log-space margins; raises on a
    negative one.
    """
    worst = (math.inf, None)
    for k in range(1, len(frames)):
        x_idx = seg.index(lo + k)
        rho_x = float(seg.rhos[x_idx])
        if rho_x <= 0:
            raise InequalityViolated("rho = 0 at an interior point", lo + k)
        chi = frames[k].chi
        lhs = math.log(frames[k - 1].c_inv_frob)
        rhs = (math.log(2.0) - 2.0 * a * math.log(rho_x)
               + math.log1p(math.exp(chi) * rho_x ** (-a))
               + math.log(frames[k].c_inv_frob))
        margin = rhs - lhs
        if margin < worst[0]:
            worst = (margin, lo + k)
        if margin < 0:
            raise InequalityViolated(
                f"||C^-1|| backward growth bound fails at step {lo + k}: "
                f"log-margin {margin:.3e}", lo + k)
    return {"min_margin": worst[0], "at": worst[1], "checked": len(frames) - 1}


def nuh_diagnostics(seg: OrbitSegment, frames: list[HyperbolicFrame],
                    lo: int, q_s: np.ndarray | None = None,
                    q_u: np.ndarray | None = None) -> dict:
    """Finite-window membership proxies for the hyperbolic regular set.

    Reports (no raising): the large-|n| slope of |log rho|, the best return
    distance of C to its base value (forward and backward), the slope of
    |log ||C^-1|| |, and — when the caller supplies chart-size sequences —
    the running max of q_s forward / q_u backward.
    """
    base_k = -lo
    if not (0 <= base_k < len(frames)):
        raise ValueError("frames must cover the base point (lo <= 0 <= hi)")
    ns = np.arange(lo, lo + len(frames))
    far = np.abs(ns) >= max(2, len(frames) // 4)

    rho_at = np.array([seg.rhos[seg.index(int(n))] for n in ns])
    with np.errstate(divide="ignore"):
        log_rho = np.log(rho_at)
    reg_slope = float(np.max(np.abs(log_rho[far]) / np.abs(ns[far])))

    c_inv = np.array([f.c_inv_frob for f in frames])
    c_slope = float(np.max(np.abs(np.log(c_inv[far])) / np.abs(ns[far])))

    C0 = frames[base_k].C
    dC = np.array([np.sqrt(np.sum((f.C - C0) ** 2)) for f in frames])
    fwd = dC[base_k + 1:]
    bwd = dC[:base_k]
    report = {
        "reg_slope": reg_slope,
        "c_inv_slope": c_slope,
        "best_return_forward": float(fwd.min()) if fwd.size else math.inf,
        "best_return_backward": float(bwd.min()) if bwd.size else math.inf,
        "window": (int(ns[0]), int(ns[-1])),
    }
    if q_s is not None:
        report["q_s_running_max"] = float(np.max(q_s))
        report["q_s_final_running_max"] = float(np.max(q_s[len(q_s) // 2:]))
    if q_u is not None:
        report["q_u_running_max"] = float(np.max(q_u))
        report["q_u_final_running_max"] = float(np.max(q_u[len(q_u) // 2:]))
    return report


def adaptedness_estimate(table, n: int, seed: int = 0,
                         checkpoints: int = 20) -> dict:
    """Monte-Carlo estimate of the invariant-measure integral of log rho.

    Samples the invariant density directly (cos(theta) dr dtheta for
    billiards, area for the fixture); points that land exactly on the
    discontinuity set (rho = 0) or cannot complete the one-step triple are
    skipped and counted.
    """
    from .dynamics import rho as rho_fn

    rng = np.random.default_rng(seed)
    pts = table.liouville_sample(rng, n)
    vals = []
    skipped = 0
    for p in pts:
        try:
            r = rho_fn(table, p)
        except (GrazingCollision, CornerHit, NoIntersection):
            skipped += 1
            continue
        if r <= 0:
            skipped += 1
            continue
        vals.append(math.log(r))
    vals = np.array(vals)
    marks = np.unique(np.linspace(1, len(vals), checkpoints).astype(int))
    running = [(int(m), float(vals[:m].mean())) for m in marks]
    return {
        "value": float(vals.mean()),
        "stderr": float(vals.std(ddof=1) / math.sqrt(len(vals))),
        "n_used": int(len(vals)),
        "n_skipped": int(skipped),
        "running": running,
    }


# --------------------------------------------------------------------- dump
def dump_segment(seg: OrbitSegment, frames: list[HyperbolicFrame] | None = None,
                 lo: int = 0, q_eps: list | None = None) -> str:
    """Tabular text: n, component, r, theta, rho, s, u, alpha, |C^-1|, Q_eps.

    When frames (and optionally chart sizes) are missing their columns print
    as 'nan'; `lo` is the relative step of frames[0]/q_eps[0].
    """
    header = ("# n component r theta rho s u alpha c_inv_frob q_eps")
    lines = [header]
    for i, p in enumerate(seg.points):
        n = i - seg.n_minus
        s_v = u_v = al = ci = q_v = float("nan")
        if frames is not None and 0 <= n - lo < len(frames):
            f = frames[n - lo]
            s_v, u_v, al, ci = f.s_param, f.u_param, f.alpha, f.c_inv_frob
        if q_eps is not None and 0 <= n - lo < len(q_eps):
            q_v = float(q_eps[n - lo])
        lines.append(
            f"{n} {p.component} {p.r!r} {p.theta!r} {seg.rhos[i]:.17g} "
            f"{s_v:.17g} {u_v:.17g} {al:.17g} {ci:.17g} {q_v:.17g}")
    return "\n".join(lines) + "\n"
