"""Billiard table geometry, phase points, metric, and the linear fixture.

Conventions (fixed once, validated by the construction-time derivative
self-test in dynamics.py):
  * every boundary loop is traversed with the table's interior on the LEFT;
  * the unit tangent is t = dP/dr, the inward normal n = rot90(t) = (-ty, tx);
  * signed curvature kappa is defined by dt/dr = kappa * n, so focusing pieces
    (circle table, stadium caps) have kappa = +1/R and dispersing pieces
    (scatterers, inward-bulging arcs) have kappa = -1/R;
  * a phase point (component, r, theta) flies along cos(theta)*n + sin(theta)*t.

The metric on phase space is the flat product metric: d(x,y) =
metric_scale * hypot(|P(x)-P(y)|_2, theta_x - theta_y).  The default
metric_scale makes diam(M) < 1, so chart exponentials are plain translations
and parallel transport is the identity.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .accel import comp_curvature, comp_point, comp_tangent

__all__ = [
    "PhasePoint",
    "Segment",
    "Arc",
    "BilliardTable",
    "LinearFixtureMap",
    "make_circle",
    "make_stadium",
    "make_sinai",
    "make_flower",
    "make_linear_fixture",
    "load_table",
    "save_table",
    "make_table",
]

CLOSURE_TOL = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    """A collision state: boundary component, arclength r, reflection angle theta.

    For the linear fixture the same container holds (component=0, r=x, theta=y)
    of the planar point; downstream code only sees a 2-coordinate state plus a
    component id either way.
    """

    component: int
    r: float
    theta: float

    def coords(self) -> np.ndarray:
        return np.array([self.r, self.theta])


@dataclass(frozen=True)
class Segment:
    p0: tuple[float, float]
    p1: tuple[float, float]
    start_corner: bool = True
    end_corner: bool = True

    @property
    def length(self) -> float:
        return math.hypot(self.p1[0] - self.p0[0], self.p1[1] - self.p0[1])

    def packed(self) -> tuple[int, list[float]]:
        L = self.length
        ux = (self.p1[0] - self.p0[0]) / L
        uy = (self.p1[1] - self.p0[1]) / L
        return 0, [self.p0[0], self.p0[1], ux, uy, L, 0.0, 0.0, 0.0,
                   1.0 if self.start_corner else 0.0, 1.0 if self.end_corner else 0.0]

    def start_point(self):
        return np.array(self.p0, dtype=float)

    def end_point(self):
        return np.array(self.p1, dtype=float)


def _axis_cos_sin(axis: float) -> tuple[float, float]:
    """cos/sin of the axis angle, exact for multiples of pi/2.

    Quarter-turn rotations have exact float matrices; snapping them lets orbits
    that strike an arc on its axis (angle 0 in arc coordinates) reproduce
    bitwise, e.g. the straight cap-to-cap bounce of the stadium.
    """
    k = round(axis / (0.5 * math.pi))
    if abs(axis - k * 0.5 * math.pi) < 1e-12:
        return (
            float([1.0, 0.0, -1.0, 0.0][k % 4]),
            float([0.0, 1.0, 0.0, -1.0][k % 4]),
        )
    return math.cos(axis), math.sin(axis)


@dataclass(frozen=True)
class Arc:
    center: tuple[float, float]
    radius: float
    a0: float  # start angle, measured relative to `axis`
    length: float
    orient: int  # +1 ccw (focusing side), -1 cw (dispersing side)
    start_corner: bool = True
    end_corner: bool = True
    disc_inside: bool = False  # flag: the arc's full disc lies inside the table
    axis: float = 0.0  # arc coordinates are rotated by this angle

    def packed(self) -> tuple[int, list[float]]:
        axc, axs = _axis_cos_sin(self.axis)
        return 1, [self.center[0], self.center[1], self.radius, self.a0,
                   float(self.orient), self.length, axc, axs,
                   1.0 if self.start_corner else 0.0, 1.0 if self.end_corner else 0.0]

    def _pt(self, s: float) -> np.ndarray:
        phi = self.a0 + self.orient * s / self.radius
        axc, axs = _axis_cos_sin(self.axis)
        lx, ly = math.cos(phi), math.sin(phi)
        return np.array([self.center[0] + self.radius * (axc * lx - axs * ly),
                         self.center[1] + self.radius * (axs * lx + axc * ly)])

    def start_point(self):
        return self._pt(0.0)

    def end_point(self):
        return self._pt(self.length)


class BilliardTable:
    """A billiard table: packed components, loops, corners, metric."""

    kind = "custom"

    def __init__(self, components, loops, metric_scale: float | None = None,
                 kind: str = "custom", params: dict | None = None):
        self.components = list(components)
        self.loops = [list(lp) for lp in loops]
        self.kind = kind
        self.params = dict(params or {})
        ctype = []
        cpar = []
        for comp in self.components:
            t, row = comp.packed()
            ctype.append(t)
            cpar.append(row)
        self.ctype = np.array(ctype, dtype=np.int64)
        self.cpar = np.array(cpar, dtype=np.float64)
        self.lengths = np.array([c.length for c in self.components])
        self._validate_closure()
        self.corner_points = self._collect_corners()
        self.boundary_diameter = self._boundary_diameter()
        raw_diam = math.hypot(self.boundary_diameter, math.pi)
        self.metric_scale = 0.95 / raw_diam if metric_scale is None else float(metric_scale)
        self._singular_cloud = None  # lazy, filled by dynamics.singularity_cloud

    # ------------------------------------------------------------ validation
    def _validate_closure(self):
        for loop in self.loops:
            for i, ci in enumerate(loop):
                cj = loop[(i + 1) % len(loop)]
                gap = np.linalg.norm(self.components[ci].end_point()
                                     - self.components[cj].start_point())
                if gap > CLOSURE_TOL:
                    raise ValueError(
                        f"loop not closed: component {ci} end to {cj} start gap {gap:.3e}")

    def _collect_corners(self):
        pts = []
        for loop in self.loops:
            for i, ci in enumerate(loop):
                cj = loop[(i + 1) % len(loop)]
                if self.components[ci].end_corner or self.components[cj].start_corner:
                    pts.append(self.components[ci].end_point())
        if not pts:
            return np.zeros((0, 2))
        return np.array(pts)

    def _boundary_diameter(self) -> float:
        pts = self.sample_boundary(64)
        d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        return math.sqrt(d2.max())

    def sample_boundary(self, per_component: int = 64) -> np.ndarray:
        out = []
        for i, comp in enumerate(self.components):
            ss = np.linspace(0.0, comp.length, per_component, endpoint=False)
            for s in ss:
                out.append(self.point_xy(i, s))
        return np.array(out)

    # ------------------------------------------------------------ geometry
    def point_xy(self, component: int, s: float) -> np.ndarray:
        x, y = comp_point(self.ctype[component], self.cpar[component], s)
        return np.array([x, y])

    def tangent_xy(self, component: int, s: float) -> np.ndarray:
        tx, ty = comp_tangent(self.ctype[component], self.cpar[component], s)
        return np.array([tx, ty])

    def normal_xy(self, component: int, s: float) -> np.ndarray:
        tx, ty = comp_tangent(self.ctype[component], self.cpar[component], s)
        return np.array([-ty, tx])

    def curvature(self, component: int) -> float:
        return comp_curvature(self.ctype[component], self.cpar[component])

    def contains_point(self, xy, samples_per_component: int = 200) -> bool:
        """Winding-number test against the sampled boundary polyline."""
        total = 0.0
        for loop in self.loops:
            pts = []
            for ci in loop:
                ss = np.linspace(0.0, self.components[ci].length,
                                 samples_per_component, endpoint=False)
                for s in ss:
                    pts.append(self.point_xy(ci, s))
            poly = np.array(pts) - np.asarray(xy, dtype=float)
            ang = np.arctan2(poly[:, 1], poly[:, 0])
            dang = np.diff(np.concatenate([ang, ang[:1]]))
            dang = (dang + math.pi) % (2 * math.pi) - math.pi
            total += dang.sum() / (2 * math.pi)
        return abs(total - 1.0) < 0.5

    # ------------------------------------------------------------ phase metric
    def validate_point(self, p: PhasePoint):
        L = self.components[p.component].length
        if not (0.0 <= p.r < L + 1e-12):
            raise ValueError(f"r={p.r} outside [0,{L}) on component {p.component}")
        if abs(p.theta) > math.pi / 2 + 1e-12:
            raise ValueError(f"|theta|={abs(p.theta)} exceeds pi/2")

    def wrap_r(self, component: int, r: float) -> tuple[int, float]:
        """Arclength modulo component length (wraparound on closed loops)."""
        L = self.components[component].length
        loop = next(lp for lp in self.loops if component in lp)
        if len(loop) == 1:
            return component, r % L
        # walk to the neighbouring component when r leaves [0, L)
        idx = loop.index(component)
        while r < 0.0:
            idx = (idx - 1) % len(loop)
            component = loop[idx]
            r += self.components[component].length
        while r >= self.components[component].length:
            r -= self.components[component].length
            idx = (idx + 1) % len(loop)
            component = loop[idx]
        return component, r

    def distance(self, p: PhasePoint, q: PhasePoint) -> float:
        dp = self.point_xy(p.component, p.r) - self.point_xy(q.component, q.r)
        return self.metric_scale * math.hypot(math.hypot(dp[0], dp[1]),
                                              p.theta - q.theta)

    def diameter(self) -> float:
        return self.metric_scale * math.hypot(self.boundary_diameter, math.pi)

    # ------------------------------------------------------------ sampling
    def liouville_sample(self, rng: np.random.Generator, n: int,
                         theta_cap: float = math.pi / 2) -> list[PhasePoint]:
        """Sample cos(theta) dr dtheta, rejecting |theta| >= theta_cap."""
        weights = self.lengths / self.lengths.sum()
        out = []
        while len(out) < n:
            c = int(rng.choice(len(self.components), p=weights))
            r = float(rng.uniform(0.0, self.components[c].length))
            th = float(math.asin(rng.uniform(-1.0, 1.0)))
            if abs(th) < theta_cap:
                out.append(PhasePoint(c, r, th))
        return out


class LinearFixtureMap:
    """Exactly solvable hyperbolic fixture: (x, y) -> (lambda_s x, lambda_u y).

    The artificial discontinuity set D is the DOMAIN BOUNDARY (the square of
    given half-width) — nothing dynamical is added to it.  Default half-width
    0.3 keeps diam(M) < 1 at metric_scale 1, so distances are unscaled and
    rho(center) equals the half-width exactly.
    """

    kind = "linear-fixture"

    def __init__(self, lambda_u: float = math.e, lambda_s: float = 1.0 / math.e,
                 half_width: float = 0.3, metric_scale: float = 1.0):
        if not (lambda_u > 1.0 > lambda_s > 0.0):
            raise ValueError("need lambda_u > 1 > lambda_s > 0")
        self.lambda_u = float(lambda_u)
        self.lambda_s = float(lambda_s)
        self.half_width = float(half_width)
        self.metric_scale = float(metric_scale)
        self.params = {"lambda_u": self.lambda_u, "lambda_s": self.lambda_s,
                       "half_width": self.half_width}

    def point_xy(self, component: int, s: float) -> np.ndarray:
        raise TypeError("linear fixture states are planar, not boundary-parametrized")

    def distance(self, p: PhasePoint, q: PhasePoint) -> float:
        return self.metric_scale * math.hypot(p.r - q.r, p.theta - q.theta)

    def diameter(self) -> float:
        return self.metric_scale * 2.0 * math.sqrt(2.0) * self.half_width

    def validate_point(self, p: PhasePoint):
        if max(abs(p.r), abs(p.theta)) > self.half_width:
            raise ValueError("point outside fixture domain")

    def liouville_sample(self, rng: np.random.Generator, n: int,
                         theta_cap: float = None) -> list[PhasePoint]:
        # the fixture's invariant reference measure is plain area
        xs = rng.uniform(-self.half_width, self.half_width, size=(n, 2))
        return [PhasePoint(0, float(a), float(b)) for a, b in xs]


# ---------------------------------------------------------------- builders
def make_circle(radius: float = 1.0, metric_scale: float | None = None) -> BilliardTable:
    arc = Arc(center=(0.0, 0.0), radius=radius, a0=-math.pi,
              length=2 * math.pi * radius, orient=+1,
              start_corner=False, end_corner=False)
    return BilliardTable([arc], [[0]], metric_scale, kind="circle",
                         params={"radius": radius})


def make_stadium(radius: float = 1.0, straight_half_length: float = 1.0,
                 metric_scale: float | None = None) -> BilliardTable:
    R, l = radius, straight_half_length
    comps = [
        Segment((-l, -R), (l, -R)),
        Arc(center=(l, 0.0), radius=R, a0=-math.pi / 2, length=math.pi * R,
            orient=+1, disc_inside=True),
        Segment((l, R), (-l, R)),
        # axis pi puts the leftmost point at arc angle 0, so the horizontal
        # cap-to-cap orbit evaluates trig exactly and is bitwise 2-periodic
        Arc(center=(-l, 0.0), radius=R, a0=-math.pi / 2, length=math.pi * R,
            orient=+1, disc_inside=True, axis=math.pi),
    ]
    table = BilliardTable(comps, [[0, 1, 2, 3]], metric_scale, kind="stadium",
                          params={"radius": R, "straight_half_length": l})
    _validate_disc_inside(table)
    return table


def make_sinai(half_side: float = 1.0, scatterer_radius: float = 0.5,
               metric_scale: float | None = None) -> BilliardTable:
    a, rd = half_side, scatterer_radius
    comps = [
        Segment((-a, -a), (a, -a)),
        Segment((a, -a), (a, a)),
        Segment((a, a), (-a, a)),
        Segment((-a, a), (-a, -a)),
        Arc(center=(0.0, 0.0), radius=rd, a0=math.pi, length=2 * math.pi * rd,
            orient=-1, start_corner=False, end_corner=False),
    ]
    return BilliardTable(comps, [[0, 1, 2, 3], [4]], metric_scale, kind="sinai",
                         params={"half_side": a, "scatterer_radius": rd})


def make_flower(arc_radius: float = 2.0, half_side: float = 1.0,
                metric_scale: float | None = None) -> BilliardTable:
    """Dispersing table: four inward-bulging arcs through the square corners.

    The default radius is a power of two so the arc-angle/arclength conversion
    round-trips exactly at the inward tips, keeping the two straight
    tip-to-tip bouncing orbits bitwise periodic.
    """
    R, a = arc_radius, half_side
    if R <= a:
        raise ValueError("arc_radius must exceed half_side")
    d = math.sqrt(R * R - a * a)
    gamma = math.atan2(a, d)
    comps = []
    for k in range(4):
        rot = (k - 1) * math.pi / 2
        rc, rs = _axis_cos_sin(rot)
        # axis faces the table center: the arc's inward tip sits at arc
        # angle 0 where trig is exact, so the two diagonal bouncing orbits
        # (horizontal and vertical) reproduce bitwise
        comps.append(Arc(center=((a + d) * rc, (a + d) * rs), radius=R,
                         a0=gamma, length=2 * gamma * R, orient=-1,
                         axis=rot + math.pi))
    return BilliardTable(comps, [[0, 1, 2, 3]], metric_scale, kind="flower",
                         params={"arc_radius": R, "half_side": a})


def make_linear_fixture(lambda_u: float = math.e, lambda_s: float = 1.0 / math.e,
                        half_width: float = 0.3,
                        metric_scale: float = 1.0) -> LinearFixtureMap:
    return LinearFixtureMap(lambda_u, lambda_s, half_width, metric_scale)


def _validate_disc_inside(table: BilliardTable, n_samples: int = 48):
    """Check the flagged arcs' full discs lie inside the table (by sampling)."""
    for comp in table.components:
        if isinstance(comp, Arc) and comp.disc_inside:
            angs = np.linspace(0.0, 2 * math.pi, n_samples, endpoint=False)
            # stay above the sag of the sampled winding polyline
            shrink = comp.radius * (1.0 - 1e-3)
            for ang in angs:
                xy = (comp.center[0] + shrink * math.cos(ang),
                      comp.center[1] + shrink * math.sin(ang))
                if not table.contains_point(xy):
                    raise ValueError(f"disc of arc at {comp.center} leaves the table")


# ---------------------------------------------------------------- file IO
_BUILDERS = {
    "circle": make_circle,
    "stadium": make_stadium,
    "sinai": make_sinai,
    "flower": make_flower,
    "linear-fixture": make_linear_fixture,
}


def make_table(kind: str, params: dict | None = None,
               metric_scale: float | None = None):
    if kind not in _BUILDERS:
        raise ValueError(f"unknown table kind {kind!r}; choose from {sorted(_BUILDERS)}")
    params = dict(params or {})
    if kind == "linear-fixture":
        if metric_scale is not None:
            params["metric_scale"] = metric_scale
        return _BUILDERS[kind](**params)
    return _BUILDERS[kind](metric_scale=metric_scale, **params)


def load_table(path) -> BilliardTable | LinearFixtureMap:
    spec = json.loads(Path(path).read_text())
    return make_table(spec["kind"], spec.get("params"), spec.get("metric_scale"))


def save_table(table, path):
    spec = {"kind": table.kind, "params": table.params,
            "metric_scale": table.metric_scale}
    Path(path).write_text(json.dumps(spec, indent=2, sort_keys=True) + "\n")
