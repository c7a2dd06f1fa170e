"""Coarse-grained double-chart alphabet and shadowing-based coding.

The alphabet construction bins sampled orbit data by integer coarse
signatures, picks net centers inside each bin, attaches one-sided window
sizes from the greedy recursions, and connects charts whose overlap and
size-recursion conditions hold.  Itineraries through the alphabet are
verified by the manifold shadowing machinery and projected back to phase
points.

Scale reality: the net radius e^(-8(j+2)) is far below the float64 range
for every chart the size formula admits (the size bounds force
|log Q| >~ 150 on any table of diameter < 1, and j grows like |log Q|).
Every closeness test here therefore runs in log space with an exact-zero
short circuit: distinct sampled points never merge, and two data points
are "close" precisely when they are bitwise identical.  The code is honest
about this — the inequality branches are real and take over whenever the
radius is representable — but at realistic sizes the net is a bitwise
dedup, itineraries exist exactly for sampled windows, and graph recurrence
requires genuinely (bitwise) periodic orbits.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .charts import (PesinChart, build_pesin_chart, compute_Q, greedy_q,
                     overlap_test)
from .cocycle import (HyperbolicFrame, OrbitSegment, Splitting, build_frame,
                      frame_at)
from .dynamics import RegularityConstants, billiard_map, operator_norm
from .errors import (DiagnosticFailed, EmptyAlphabet, InequalityViolated,
                     NoBinCenter)
from .lattice import EpsilonConfig, LatticeSize
from .manifolds import GpoPath, PathVertex, path_from_vertices, shadow
from .tables import PhasePoint, make_table

__all__ = [
    "GridCover", "GammaPoint", "BinSignature", "DoubleChart", "ShiftGraph",
    "Alphabet", "Itinerary", "gammas_from_segment", "bin_signature",
    "gamma_close", "double_chart", "make_graph", "prune_graph", "edge_test",
    "edge_report", "coarse_grain", "assign_centers", "sufficiency_itinerary",
    "make_itinerary", "sigma_sharp_filter", "project_pi",
    "detect_double_codings", "inverse_diagnostics",
    "discreteness_certificate", "degree_report", "save_alphabet",
    "load_alphabet", "NET_EXPONENT",
]

# radius exponent of the bin nets: members merge below e^(-NET_EXPONENT*(j+2))
NET_EXPONENT = 8.0


def _lt_log(value: float, log_bound: float) -> bool:
    """value < e^log_bound with an exact-zero short circuit.

    The bound routinely underflows float64, so the comparison must happen
    in log space; a measured zero passes every bound.
    """
    if value == 0.0:
        return True
    return math.log(value) < log_bound


def _frame_distance(f1: HyperbolicFrame, f2: HyperbolicFrame) -> float:
    return float(np.sqrt(np.sum((f1.C - f2.C) ** 2)))


# ------------------------------------------------------------------- cover
class GridCover:
    """Countable cover of phase space by half-open coordinate boxes.

    Box ids are assigned on first sight, so signatures are deterministic
    for a fixed insertion history; persistence freezes the id map.
    """

    def __init__(self, side: float = 0.25):
        if not side > 0.0:
            raise ValueError(f"cover box side must be positive, got {side}")
        self.side = float(side)
        self._ids: dict[tuple[int, int, int], int] = {}

    def box_key(self, p: PhasePoint) -> tuple[int, int, int]:
        s = self.side
        return (p.component, math.floor(p.r / s), math.floor(p.theta / s))

    def box_id(self, p: PhasePoint) -> int:
        k = self.box_key(p)
        if k not in self._ids:
            self._ids[k] = len(self._ids)
        return self._ids[k]

    @property
    def n_boxes(self) -> int:
        return len(self._ids)

    def to_json(self) -> dict:
        boxes = [[c, ir, it, i] for (c, ir, it), i in self._ids.items()]
        boxes.sort(key=lambda row: row[3])
        return {"side": self.side, "boxes": boxes}

    @classmethod
    def from_json(cls, obj: dict) -> "GridCover":
        cover = cls(obj["side"])
        for c, ir, it, i in obj["boxes"]:
            if i != len(cover._ids):
                raise ValueError("cover box ids must be dense and ordered")
            cover._ids[(int(c), int(ir), int(it))] = int(i)
        return cover


# ------------------------------------------------------------- gamma points
@dataclass(frozen=True, eq=False)
class GammaPoint:
    """One sampled point with chart data at it and both neighbours.

    ``points``/``frames``/``Qs``/``dists``/``rhos`` are indexed by relative
    step (-1, 0, +1); ``q`` is the two-sided windowed size at the point and
    ``p_s``/``p_u`` the one-sided greedy window sizes, all exact lattice
    elements carried over from the window the point was sampled in.
    """

    table: object
    points: tuple[PhasePoint, PhasePoint, PhasePoint]
    frames: tuple[HyperbolicFrame, HyperbolicFrame, HyperbolicFrame]
    Qs: tuple[LatticeSize, LatticeSize, LatticeSize]
    dists: tuple[float, float, float]
    rhos: tuple[float, float, float]
    q: LatticeSize
    p_s: LatticeSize
    p_u: LatticeSize

    @property
    def x(self) -> PhasePoint:
        return self.points[1]

    @property
    def frame(self) -> HyperbolicFrame:
        return self.frames[1]

    @property
    def Q(self) -> LatticeSize:
        return self.Qs[1]

    @property
    def rho(self) -> float:
        return self.rhos[1]

    @property
    def j(self) -> int:
        """Window level: q sits in [e^(-j-1), e^(-j))."""
        return math.floor(-self.q.log_value)


def gammas_from_segment(seg: OrbitSegment, splitting: Splitting, chi: float,
                        cfg: EpsilonConfig, consts: RegularityConstants,
                        lo: int, hi: int) -> list[GammaPoint]:
    """Gamma points with greedy window sizes at steps lo..hi inclusive.

    Needs segment data one step beyond each end (frames two beyond the
    top) because every gamma carries its neighbours' charts.
    """
    if hi - lo + 1 < 2:
        raise ValueError("a gamma window needs at least two steps")
    if lo - 1 < -seg.n_minus or hi + 2 > seg.n_plus:
        raise ValueError(
            f"segment [{-seg.n_minus}, {seg.n_plus}] too short for gammas on "
            f"[{lo}, {hi}] (needs [{lo - 1}, {hi + 2}])")
    frames = {k: frame_at(seg, splitting, chi, at=k)
              for k in range(lo - 1, hi + 3)}
    Qs = {k: compute_Q(frames[k], frames[k + 1],
                       float(seg.rhos[seg.index(k)]), cfg, consts)
          for k in range(lo - 1, hi + 2)}
    gq = greedy_q([Qs[k] for k in range(lo, hi + 1)], cfg)
    out = []
    for n in range(lo, hi + 1):
        i = n - lo
        out.append(GammaPoint(
            table=seg.table,
            points=tuple(seg.point(k) for k in (n - 1, n, n + 1)),
            frames=(frames[n - 1], frames[n], frames[n + 1]),
            Qs=(Qs[n - 1], Qs[n], Qs[n + 1]),
            dists=tuple(float(seg.dists[seg.index(k)])
                        for k in (n - 1, n, n + 1)),
            rhos=tuple(float(seg.rhos[seg.index(k)])
                       for k in (n - 1, n, n + 1)),
            q=gq.q[i], p_s=gq.qs[i], p_u=gq.qu[i]))
    return out


# ------------------------------------------------------------------ binning
@dataclass(frozen=True)
class BinSignature:
    """Integer coarse data: distance, frame-norm, box, size and level bins."""

    k: tuple[int, int, int]
    l: tuple[int, int, int]
    a: tuple[int, int, int]
    m: int
    j: int

    def base(self) -> tuple:
        """Grouping key without the net level j."""
        return (self.k, self.l, self.a, self.m)


def bin_signature(gamma: GammaPoint, cover: GridCover) -> BinSignature:
    """Bin data of one gamma point; distances must be in (0, 1)."""
    ks, ls, as_ = [], [], []
    for d, fr, p in zip(gamma.dists, gamma.frames, gamma.points):
        if not 0.0 < d < 1.0:
            raise ValueError(
                f"distance to the singular set must be in (0,1), got {d}")
        ks.append(math.floor(-math.log(d)))
        ls.append(math.floor(math.log(fr.c_inv_frob)))
        as_.append(cover.box_id(p))
    m = math.floor(-gamma.Q.log_value)
    return BinSignature(tuple(ks), tuple(ls), tuple(as_), m, gamma.j)


def gamma_close(g1: GammaPoint, g2: GammaPoint, j: int,
                net_exponent: float = NET_EXPONENT) -> bool:
    """Net-level closeness: triple distances below e^(-net_exponent*(j+2))
    and exact size ratio within one lattice third."""
    if not g1.Q.ratio_within_e_eps_third(g2.Q, thirds=1):
        return False
    log_r = -net_exponent * (j + 2.0)
    for p1, f1, p2, f2 in zip(g1.points, g1.frames, g2.points, g2.frames):
        d = g1.table.distance(p1, p2) + _frame_distance(f1, f2)
        if not _lt_log(d, log_r):
            return False
    return True


# ------------------------------------------------------------ double charts
@dataclass(frozen=True, eq=False)
class DoubleChart:
    """A chart with two one-sided window sizes and its coarse bin data."""

    gamma: GammaPoint
    p_s: LatticeSize
    p_u: LatticeSize
    signature: BinSignature
    chart: PesinChart

    @property
    def p_min(self) -> LatticeSize:
        return self.p_s.min_with(self.p_u)

    @property
    def x(self) -> PhasePoint:
        return self.gamma.x

    @property
    def symbol(self) -> tuple:
        """Hashable identity: center object plus exact size exponents."""
        return (id(self.gamma), self.p_s.expo, self.p_u.expo)


def double_chart(gamma: GammaPoint, cover: GridCover, cfg: EpsilonConfig,
                 consts: RegularityConstants,
                 p_s: LatticeSize | None = None,
                 p_u: LatticeSize | None = None,
                 j: int | None = None) -> DoubleChart:
    """Build one alphabet element, checking the size conditions.

    Validates that both sizes stay below delta Q on the lattice and that
    their meet sits within e^(+-2) of the level scale e^(-j).
    """
    p_s = gamma.p_s if p_s is None else p_s
    p_u = gamma.p_u if p_u is None else p_u
    j = gamma.j if j is None else j
    cap = gamma.Q.step(cfg.delta_exponent)
    for name, p in (("p_s", p_s), ("p_u", p_u)):
        if not p <= cap:
            raise ValueError(
                f"{name} = e^{p.log_value:.6g} exceeds delta Q = "
                f"e^{cap.log_value:.6g}")
    p_min = p_s.min_with(p_u)
    t = -p_min.log_value
    if not (j - 2.0 - 1e-9 <= t <= j + 2.0 + 1e-9):
        raise ValueError(
            f"p_s^p_u = e^-{t:.6g} outside the level window "
            f"[e^-{j + 2}, e^-{j - 2}]")
    sig = bin_signature(gamma, cover)
    if sig.j != j:
        sig = BinSignature(sig.k, sig.l, sig.a, sig.m, j)
    chart = build_pesin_chart(gamma.table, gamma.x, gamma.frame, gamma.Q,
                              gamma.rho, cfg, consts, eta=p_min)
    return DoubleChart(gamma, p_s, p_u, sig, chart)


# -------------------------------------------------------------- shift graph
@dataclass(frozen=True, eq=False)
class ShiftGraph:
    """Directed graph over alphabet elements with degree bookkeeping."""

    vertices: tuple
    out_edges: tuple[tuple[int, ...], ...]
    in_edges: tuple[tuple[int, ...], ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.vertices)
        if len(self.out_edges) != n or len(self.in_edges) != n:
            raise ValueError("adjacency lists must match the vertex count")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return sum(len(row) for row in self.out_edges)

    def has_edge(self, i: int, j: int) -> bool:
        return j in self.out_edges[i]

    def edge_list(self) -> list[tuple[int, int]]:
        return [(i, j) for i, row in enumerate(self.out_edges) for j in row]

    def walk_ok(self, ids) -> bool:
        ids = list(ids)
        return all(self.has_edge(a, b) for a, b in zip(ids, ids[1:]))


def make_graph(vertices, edges, meta: dict | None = None) -> ShiftGraph:
    """Graph from an edge list; adjacency rows are sorted and deduplicated."""
    vertices = tuple(vertices)
    n = len(vertices)
    outs: list[set] = [set() for _ in range(n)]
    ins: list[set] = [set() for _ in range(n)]
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) outside vertex range 0..{n - 1}")
        outs[i].add(j)
        ins[j].add(i)
    return ShiftGraph(vertices,
                      tuple(tuple(sorted(s)) for s in outs),
                      tuple(tuple(sorted(s)) for s in ins),
                      dict(meta or {}))


def prune_graph(g: ShiftGraph) -> tuple[ShiftGraph, tuple[int, ...]]:
    """Iteratively drop vertices with zero in- or out-degree.

    Returns the maximal subgraph in which every vertex has both an
    incoming and an outgoing edge, plus the kept original indices.
    """
    n = g.n_vertices
    alive = [True] * n
    out_deg = [len(row) for row in g.out_edges]
    in_deg = [len(row) for row in g.in_edges]
    stack = [i for i in range(n) if out_deg[i] == 0 or in_deg[i] == 0]
    while stack:
        i = stack.pop()
        if not alive[i]:
            continue
        alive[i] = False
        for j in g.out_edges[i]:
            if alive[j]:
                in_deg[j] -= 1
                if in_deg[j] == 0:
                    stack.append(j)
        for j in g.in_edges[i]:
            if alive[j]:
                out_deg[j] -= 1
                if out_deg[j] == 0:
                    stack.append(j)
    kept = tuple(i for i in range(n) if alive[i])
    remap = {old: new for new, old in enumerate(kept)}
    edges = [(remap[i], remap[j]) for i, j in g.edge_list()
             if alive[i] and alive[j]]
    sub = make_graph(tuple(g.vertices[i] for i in kept), edges, g.meta)
    return sub, kept


def degree_report(g: ShiftGraph) -> dict:
    """Degree statistics; every vertex must have finite explicit lists."""
    outs = [len(row) for row in g.out_edges]
    ins = [len(row) for row in g.in_edges]
    return {
        "n_vertices": g.n_vertices,
        "n_edges": g.n_edges,
        "max_out": max(outs, default=0),
        "max_in": max(ins, default=0),
        "isolated": sum(1 for o, i in zip(outs, ins) if o == 0 and i == 0),
    }


# -------------------------------------------------------------- edge relation
def _size_recursion_ok(v: DoubleChart, w: DoubleChart,
                       cfg: EpsilonConfig) -> tuple[bool, bool]:
    """Exact integer forms of the two greedy size equations for an edge."""
    d = cfg.delta_exponent
    want_s = max(w.p_s.expo - 3, v.gamma.Q.expo + d)
    want_u = max(v.p_u.expo - 3, w.gamma.Q.expo + d)
    return v.p_s.expo == want_s, w.p_u.expo == want_u


def edge_report(v: DoubleChart, w: DoubleChart, cfg: EpsilonConfig,
                consts: RegularityConstants) -> list[str]:
    """Reasons the pair fails the edge relation (empty list = edge)."""
    out = []
    ok_s, ok_u = _size_recursion_ok(v, w, cfg)
    if not ok_s:
        out.append("stable size recursion broken")
    if not ok_u:
        out.append("unstable size recursion broken")

    gv, gw = v.gamma, w.gamma
    qm = w.p_min
    if not qm <= gv.Qs[2]:
        out.append("forward window exceeds the image chart size")
    else:
        fwd = build_pesin_chart(gv.table, gv.points[2], gv.frames[2],
                                gv.Qs[2], gv.rhos[2], cfg, consts, eta=qm)
        if not overlap_test(fwd, w.chart):
            out.append("forward overlap fails")
    pm = v.p_min
    if not pm <= gw.Qs[0]:
        out.append("backward window exceeds the preimage chart size")
    else:
        bwd = build_pesin_chart(gw.table, gw.points[0], gw.frames[0],
                                gw.Qs[0], gw.rhos[0], cfg, consts, eta=pm)
        if not overlap_test(bwd, v.chart):
            out.append("backward overlap fails")
    return out


def edge_test(v: DoubleChart, w: DoubleChart, cfg: EpsilonConfig,
              consts: RegularityConstants) -> bool:
    """True iff both size recursions hold exactly and both overlaps pass."""
    if not all(_size_recursion_ok(v, w, cfg)):
        return False
    return not edge_report(v, w, cfg, consts)


# ----------------------------------------------------------------- alphabet
@dataclass(eq=False)
class Alphabet:
    """Coarse-grained chart alphabet with its transition graph.

    ``graph`` holds every emitted chart and every passing edge; ``core``
    is the recurrent part (both degrees positive after trimming), which a
    finite aperiodic corpus legitimately leaves empty.
    """

    cfg: EpsilonConfig
    consts: RegularityConstants
    cover: GridCover
    centers: tuple[GammaPoint, ...]
    nets: dict
    graph: ShiftGraph
    core: ShiftGraph
    core_kept: tuple[int, ...]
    vertex_index: dict
    center_of_vertex: tuple[int, ...]
    stats: dict

    @property
    def vertices(self) -> tuple:
        return self.graph.vertices

    def find_center(self, gamma: GammaPoint) -> int | None:
        """Net center covering this gamma at its own level, if any."""
        sig = bin_signature(gamma, self.cover)
        for cid in self.nets.get((sig.base(), sig.j), ()):
            if gamma_close(gamma, self.centers[cid], sig.j,
                           self.stats.get("net_exponent", NET_EXPONENT)):
                return cid
        return None

    def vertex_id(self, center_id: int, p_s: LatticeSize,
                  p_u: LatticeSize) -> int | None:
        return self.vertex_index.get((center_id, p_s.expo, p_u.expo))


def coarse_grain(windows, cfg: EpsilonConfig, consts: RegularityConstants,
                 cover: GridCover | None = None,
                 net_exponent: float = NET_EXPONENT) -> Alphabet:
    """Bin sampled gammas, select net centers, emit charts, build edges.

    ``windows`` is a list of gamma-point lists, each one orbit window in
    consecutive order.  Charts are emitted for the size pairs realized by
    re-running the window recursions over the selected centers, so every
    emitted pair is one a sampled orbit actually uses; the full admissible
    pair set per center is astronomically large and its unused part would
    be trimmed as non-relevant anyway.
    """
    windows = [list(w) for w in windows]
    flat: list[GammaPoint] = [g for w in windows for g in w]
    if not flat:
        raise EmptyAlphabet("no sampled windows given")
    cover = cover or GridCover()

    sigs = [bin_signature(g, cover) for g in flat]
    bins: dict[tuple, list[int]] = {}
    for fi, sig in enumerate(sigs):
        bins.setdefault(sig.base(), []).append(fi)

    # net selection: every bin member is net material at every level j the
    # bin is queried at; a member is assigned a center at its own level
    centers: list[GammaPoint] = []
    center_ids: dict[int, int] = {}
    nets: dict[tuple, tuple[int, ...]] = {}
    assign: list[int | None] = [None] * len(flat)
    for base, members in bins.items():
        levels = sorted({sigs[fi].j for fi in members})
        for j in levels:
            net: list[int] = []
            for fi in members:
                g = flat[fi]
                hit = None
                for cid in net:
                    if gamma_close(g, centers[cid], j, net_exponent):
                        hit = cid
                        break
                if hit is None:
                    cid = center_ids.get(fi)
                    if cid is None:
                        cid = len(centers)
                        centers.append(g)
                        center_ids[fi] = cid
                    net.append(cid)
                    hit = cid
                if sigs[fi].j == j:
                    assign[fi] = hit
            nets[(base, j)] = tuple(net)

    # vertex emission: window recursions over the selected centers' sizes
    vlist: list[DoubleChart] = []
    vindex: dict[tuple[int, int, int], int] = {}
    center_of: list[int] = []
    pos = 0
    for w in windows:
        cids = [assign[pos + k] for k in range(len(w))]
        gq = greedy_q([centers[c].Q for c in cids], cfg)
        for k, (c, g) in enumerate(zip(cids, w)):
            key = (c, gq.qs[k].expo, gq.qu[k].expo)
            if key not in vindex:
                dc = double_chart(centers[c], cover, cfg, consts,
                                  gq.qs[k], gq.qu[k], j=sigs[pos + k].j)
                vindex[key] = len(vlist)
                vlist.append(dc)
                center_of.append(c)
        pos += len(w)

    # edges: integer prefilter over the exact size equations, then the
    # overlap geometry on the few surviving pairs
    n = len(vlist)
    d = cfg.delta_exponent
    ps = np.array([v.p_s.expo for v in vlist], dtype=np.int64)
    pu = np.array([v.p_u.expo for v in vlist], dtype=np.int64)
    Qx = np.array([v.gamma.Q.expo for v in vlist], dtype=np.int64)
    edges = []
    for w_id in range(n):
        want_s = np.maximum(vlist[w_id].p_s.expo - 3, Qx + d)
        cand = np.nonzero(ps == want_s)[0]
        if cand.size == 0:
            continue
        want_u = np.maximum(pu[cand] - 3, vlist[w_id].gamma.Q.expo + d)
        cand = cand[vlist[w_id].p_u.expo == want_u]
        for v_id in cand:
            if edge_test(vlist[int(v_id)], vlist[w_id], cfg, consts):
                edges.append((int(v_id), w_id))

    graph = make_graph(vlist, edges, {"eps": cfg.eps,
                                      "net_exponent": net_exponent})
    core, kept = prune_graph(graph)
    stats = {
        "samples": len(flat),
        "windows": len(windows),
        "bins": len(bins),
        "nets": len(nets),
        "centers": len(centers),
        "vertices": graph.n_vertices,
        "edges": graph.n_edges,
        "core_vertices": core.n_vertices,
        "core_edges": core.n_edges,
        "cover_boxes": cover.n_boxes,
        "net_exponent": net_exponent,
    }
    return Alphabet(cfg, consts, cover, tuple(centers), nets, graph, core,
                    kept, vindex, tuple(center_of), stats)


# -------------------------------------------------------------- itineraries
@dataclass(frozen=True, eq=False)
class Itinerary:
    """Finite alphabet word with its edge certificate and chart path."""

    vertices: tuple[DoubleChart, ...]
    anchor: int
    edges_ok: tuple[bool, ...]
    in_alphabet: tuple[bool, ...]
    path: GpoPath
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.anchor < len(self.vertices):
            raise ValueError("anchor outside the word")
        if len(self.edges_ok) != len(self.vertices) - 1:
            raise ValueError("edge certificate length mismatch")
        if not all(self.edges_ok):
            bad = self.edges_ok.index(False)
            raise ValueError(f"consecutive pair {bad} is not an edge")

    def __len__(self) -> int:
        return len(self.vertices)

    def symbols(self) -> tuple:
        return tuple(v.symbol for v in self.vertices)


def make_itinerary(vertices, anchor: int, cfg: EpsilonConfig,
                   consts: RegularityConstants,
                   in_alphabet=None, meta: dict | None = None) -> Itinerary:
    """Assemble a word, verifying every consecutive pair and building the
    chart path used for projection."""
    vertices = tuple(vertices)
    if len(vertices) < 2:
        raise ValueError("a word needs at least two charts")
    edges_ok = tuple(edge_test(a, b, cfg, consts)
                     for a, b in zip(vertices, vertices[1:]))
    path = path_from_vertices(
        [PathVertex(v.chart, v.p_s, v.p_u) for v in vertices],
        consts, direction="two-sided", base_index=anchor)
    if in_alphabet is None:
        in_alphabet = (True,) * len(vertices)
    return Itinerary(vertices, anchor, edges_ok, tuple(in_alphabet), path,
                     dict(meta or {}))


def assign_centers(alphabet: Alphabet, gammas, offset: int = 0) -> list[int]:
    """Net center ids covering each window step, or NoBinCenter.

    ``offset`` shifts the step index reported on failure (pass the
    negated anchor to report window-relative steps).
    """
    out = []
    for k, g in enumerate(gammas):
        cid = alphabet.find_center(g)
        if cid is None:
            raise NoBinCenter(offset + k, bin_signature(g, alphabet.cover))
        out.append(cid)
    return out


def sufficiency_itinerary(alphabet: Alphabet, gammas, anchor: int,
                          tol: float = 1e-6,
                          check_shadow: bool = True) -> Itinerary:
    """Code one orbit window through the alphabet.

    Per step, finds a net center covering the sampled gamma, then re-runs
    the one-sided size recursions over the selected centers and assembles
    the word; verifies the edges and (optionally) that the word's shadow
    comes back to the window's base point within ``tol``.
    """
    gammas = list(gammas)
    cfg, consts = alphabet.cfg, alphabet.consts
    cids = assign_centers(alphabet, gammas, offset=-anchor)
    gq = greedy_q([alphabet.centers[c].Q for c in cids], cfg)
    vertices = []
    in_alpha = []
    for k, (c, g) in enumerate(zip(cids, gammas)):
        vid = alphabet.vertex_id(c, gq.qs[k], gq.qu[k])
        if vid is not None:
            vertices.append(alphabet.graph.vertices[vid])
            in_alpha.append(True)
        else:
            vertices.append(double_chart(alphabet.centers[c], alphabet.cover,
                                         cfg, consts, gq.qs[k], gq.qu[k],
                                         j=g.j))
            in_alpha.append(False)
    for k, (a, b) in enumerate(zip(vertices, vertices[1:])):
        if not edge_test(a, b, cfg, consts):
            raise InequalityViolated(
                f"coded charts fail the edge relation at step {k}: "
                + "; ".join(edge_report(a, b, cfg, consts)))
    meta = {"center_ids": tuple(cids),
            "in_alphabet_fraction": float(np.mean(in_alpha))}
    it = make_itinerary(vertices, anchor, cfg, consts, in_alpha, meta)
    if check_shadow:
        if not 0 < anchor < len(vertices) - 1:
            raise ValueError("shadow verification needs an interior anchor")
        x_hat, info = shadow(it.path, consts)
        gap = gammas[anchor].table.distance(x_hat, gammas[anchor].x)
        if gap > tol:
            raise InequalityViolated(
                f"shadow misses the coded point by {gap:.3e} > {tol:.1e}")
        it.meta["shadow_gap"] = gap
        it.meta["shadow_point"] = x_hat
        it.meta["shadow_w"] = info["w"]
    return it


def sigma_sharp_filter(itinerary) -> bool:
    """Finite-horizon recurrence proxy: some symbol repeats in the forward
    third and some symbol repeats in the backward third of the window."""
    syms = itinerary.symbols() if hasattr(itinerary, "symbols") \
        else tuple(itinerary)
    n = len(syms)
    if n < 2:
        return False
    third = max(2, n // 3)

    def has_repeat(part) -> bool:
        return len(set(part)) < len(part)

    return has_repeat(syms[:third]) and has_repeat(syms[n - third:])


def project_pi(itinerary: Itinerary, consts: RegularityConstants,
               tol: float = 1e-6,
               equivariance: bool = True) -> tuple[PhasePoint, dict]:
    """Phase point shadowed by the word, with an anchor-shift consistency
    check: projecting the shifted word must land on the mapped point."""
    path = itinerary.path
    x, info = shadow(path, consts)
    report = {"w": info["w"], "equivariance_gap": None}
    if equivariance:
        k = itinerary.anchor + 1
        if not 0 < k < len(path) - 1:
            raise ValueError(
                "equivariance check needs an interior shifted anchor")
        shifted = GpoPath(path.vertices, path.fwd, path.bwd,
                          path.direction, k)
        x1, _ = shadow(shifted, consts)
        table = itinerary.vertices[0].gamma.table
        gap = table.distance(billiard_map(table, x), x1)
        if gap > tol:
            raise InequalityViolated(
                f"shift/projection mismatch {gap:.3e} > {tol:.1e}")
        report["equivariance_gap"] = gap
    return x, report


def detect_double_codings(points, tol: float = 1e-6, table=None
                          ) -> list[tuple[int, int, float]]:
    """Index pairs of projected points closer than ``tol`` (i < j)."""
    pts = list(points)
    out = []
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = table.distance(pts[i], pts[j]) if table is not None else \
                math.hypot(pts[i].r - pts[j].r, pts[i].theta - pts[j].theta)
            if d < tol:
                out.append((i, j, d))
    return out


# ----------------------------------------------------- inverse diagnostics
def _check_ratio(name: str, item, n: int, v1: float, v2: float,
                 bound: float, slack: dict):
    r = abs(math.log(v1 / v2))
    if r > bound + 1e-12:
        raise DiagnosticFailed(
            item, n, f"{name} ratio e^{r:.6g} exceeds e^{bound:.6g} "
                     f"at step {n}")
    slack[name] = min(slack.get(name, math.inf), bound - r)


def inverse_diagnostics(it1: Itinerary, it2: Itinerary, cfg: EpsilonConfig,
                        consts: RegularityConstants) -> dict:
    """Per-step consistency bounds for two words coding the same point.

    Asserts, at every common index: the center distance bound, the frame
    angle and stretch ratios, the size ratios, and the affine-plus-small
    form of the chart interchange; also the finite-window maximality
    proxy (each word's forward sizes and backward sizes touch delta Q at
    least once).  Reports the orientation bit sequence and the minimum
    slack consumed per item.
    """
    if len(it1) != len(it2) or it1.anchor != it2.anchor:
        raise ValueError("words must share window shape and anchor")
    eps = cfg.eps
    sqrt_e = math.sqrt(eps)
    cbrt_e = eps ** (1.0 / 3.0)
    slack: dict[str, float] = {}
    sigmas = []
    for i, (v, w) in enumerate(zip(it1.vertices, it2.vertices)):
        n = i - it1.anchor
        x, y = v.x, w.x
        table = v.gamma.table

        # (1) centers within a fraction of the larger window
        dxy = table.distance(x, y)
        bound1 = math.log(1.0 / 25.0) + max(v.p_min.log_value,
                                            w.p_min.log_value)
        if not _lt_log(dxy, bound1):
            raise DiagnosticFailed(
                1, n, f"center distance {dxy:.3e} not below "
                      f"e^{bound1:.6g} at step {n}")
        gap1 = bound1 - math.log(dxy) if dxy > 0.0 else math.inf
        slack["distance"] = min(slack.get("distance", math.inf), gap1)

        # (2) frame angles
        fv, fw = v.gamma.frame, w.gamma.frame
        _check_ratio("sin_alpha", 2, n, math.sin(fv.alpha),
                     math.sin(fw.alpha), sqrt_e, slack)
        dcos = abs(math.cos(fv.alpha) - math.cos(fw.alpha))
        if dcos >= sqrt_e:
            raise DiagnosticFailed(
                2, n, f"|cos alpha difference| = {dcos:.6g} >= "
                      f"{sqrt_e:.6g} at step {n}")
        slack["cos_alpha"] = min(slack.get("cos_alpha", math.inf),
                                 sqrt_e - dcos)

        # (3) stretch parameters
        _check_ratio("s_param", 3, n, fv.s_param, fw.s_param,
                     4.0 * sqrt_e, slack)
        _check_ratio("u_param", 3, n, fv.u_param, fw.u_param,
                     4.0 * sqrt_e, slack)

        # (4) chart sizes (exact lattice logs)
        rq = abs(v.gamma.Q.log_value - w.gamma.Q.log_value)
        if rq > cbrt_e + 1e-12:
            raise DiagnosticFailed(
                4, n, f"size ratio e^{rq:.6g} exceeds e^{cbrt_e:.6g} "
                      f"at step {n}")
        slack["Q"] = min(slack.get("Q", math.inf), cbrt_e - rq)

        # (5) window sizes (exact lattice logs)
        for name, a, b in (("p_s", v.p_s, w.p_s), ("p_u", v.p_u, w.p_u)):
            r = abs(a.log_value - b.log_value)
            if r > cbrt_e + 1e-12:
                raise DiagnosticFailed(
                    5, n, f"{name} ratio e^{r:.6g} exceeds "
                          f"e^{cbrt_e:.6g} at step {n}")
            slack[name] = min(slack.get(name, math.inf), cbrt_e - r)

        # (6) interchange map: affine offset below a tenth of the window,
        # linear part a near-identity up to orientation
        if x.component != y.component:
            raise DiagnosticFailed(
                6, n, f"centers on different components at step {n}")
        dx = np.array([x.r - y.r, x.theta - y.theta])
        t = np.linalg.solve(fw.C, dx)
        L = np.linalg.solve(fw.C, fv.C)
        sigma = 0 if float(np.trace(L)) > 0.0 else 1
        sigmas.append(sigma)
        t_norm = float(np.linalg.norm(t))
        bound6 = math.log(0.1) + w.p_min.log_value
        if not _lt_log(t_norm, bound6):
            raise DiagnosticFailed(
                6, n, f"interchange offset {t_norm:.3e} not below "
                      f"e^{bound6:.6g} at step {n}")
        d_delta = operator_norm(L - ((-1.0) ** sigma) * np.eye(2))
        if d_delta >= cbrt_e:
            raise DiagnosticFailed(
                6, n, f"interchange derivative deviation {d_delta:.6g} "
                      f">= {cbrt_e:.6g} at step {n}")
        slack["d_delta"] = min(slack.get("d_delta", math.inf),
                               cbrt_e - d_delta)

    # finite-window maximality proxy: the forward sizes and the backward
    # sizes each touch their cap delta Q somewhere in the window
    d = cfg.delta_exponent
    for label, it in (("first", it1), ("second", it2)):
        fwd = any(v.p_s.expo == v.gamma.Q.expo + d
                  for v in it.vertices[it.anchor:])
        bwd = any(v.p_u.expo == v.gamma.Q.expo + d
                  for v in it.vertices[:it.anchor + 1])
        if not (fwd and bwd):
            raise DiagnosticFailed(
                "maximality", 0,
                f"{label} word never touches delta Q "
                f"(forward {fwd}, backward {bwd})")
    return {"checked": len(it1), "sigma": tuple(sigmas),
            "slack": slack}


# ---------------------------------------------------------- certificates
def discreteness_certificate(alphabet: Alphabet,
                             t_log: float | None = None) -> dict:
    """Count charts with both sizes above a threshold, two ways.

    The direct scan must agree with the count accumulated through the bin
    grouping, and every passing chart's integer bin data must respect the
    a-priori bounds implied by sizes above t (all finite).
    """
    verts = alphabet.graph.vertices
    if t_log is None:
        logs = sorted(v.p_s.log_value for v in verts)
        t_log = logs[len(logs) // 2]
    direct = [v for v in verts
              if v.p_s.log_value > t_log and v.p_u.log_value > t_log]

    by_group: dict[tuple, int] = {}
    for v in direct:
        key = (v.signature.base(), v.signature.j)
        by_group[key] = by_group.get(key, 0) + 1
    grouped = sum(by_group.values())
    if grouped != len(direct):
        raise AssertionError(
            f"grouped count {grouped} != direct count {len(direct)}")

    abs_log_t = -t_log
    max_k = max_l = max_m = max_j = 0
    for v in direct:
        sig = v.signature
        chi = v.gamma.frame.chi
        t_cap = math.log(4.0) + chi + 3.0 * abs_log_t
        for ki in sig.k:
            if not ki < abs_log_t + 1e-9:
                raise AssertionError(f"distance bin {ki} >= |log t| "
                                     f"= {abs_log_t:.6g}")
        # the past frame norm only admits the looser growth cap
        caps = (t_cap, abs_log_t, abs_log_t)
        for li, cap in zip(sig.l, caps):
            if not li < cap + 1e-9:
                raise AssertionError(f"frame bin {li} >= {cap:.6g}")
        if not sig.m < abs_log_t + 1e-9:
            raise AssertionError(f"size bin {sig.m} >= |log t|")
        if not sig.j <= abs_log_t + 2.0 + 1e-9:
            raise AssertionError(f"level {sig.j} > |log t| + 2")
        max_k = max(max_k, *sig.k)
        max_l = max(max_l, *sig.l)
        max_m = max(max_m, sig.m)
        max_j = max(max_j, sig.j)
    return {"t_log": t_log, "count": len(direct), "groups": len(by_group),
            "max_k": max_k, "max_l": max_l, "max_m": max_m, "max_j": max_j}


# ------------------------------------------------------------- persistence
def _frame_to_json(fr: HyperbolicFrame) -> list:
    return [float(fr.e_s[0]), float(fr.e_s[1]), float(fr.e_u[0]),
            float(fr.e_u[1]), fr.s_param, fr.u_param, fr.chi]


def _frame_from_json(row) -> HyperbolicFrame:
    return build_frame(np.array(row[0:2]), np.array(row[2:4]), row[4],
                       row[5], row[6])


def _point_to_json(p: PhasePoint) -> list:
    return [p.component, p.r, p.theta]


def _gamma_to_json(g: GammaPoint) -> dict:
    return {
        "points": [_point_to_json(p) for p in g.points],
        "frames": [_frame_to_json(fr) for fr in g.frames],
        "Q_expos": [q.expo for q in g.Qs],
        "dists": list(g.dists),
        "rhos": list(g.rhos),
        "q": g.q.expo, "p_s": g.p_s.expo, "p_u": g.p_u.expo,
    }


def _gamma_from_json(obj: dict, table, cfg: EpsilonConfig) -> GammaPoint:
    return GammaPoint(
        table=table,
        points=tuple(PhasePoint(int(c), r, th)
                     for c, r, th in obj["points"]),
        frames=tuple(_frame_from_json(row) for row in obj["frames"]),
        Qs=tuple(cfg.size(e) for e in obj["Q_expos"]),
        dists=tuple(obj["dists"]),
        rhos=tuple(obj["rhos"]),
        q=cfg.size(obj["q"]), p_s=cfg.size(obj["p_s"]),
        p_u=cfg.size(obj["p_u"]))


def save_alphabet(alphabet: Alphabet, path) -> None:
    """Write the full alphabet to a JSON file (floats round-trip exactly)."""
    g = alphabet.graph
    doc = {
        "eps": alphabet.cfg.eps,
        "consts": {"a": alphabet.consts.a, "beta": alphabet.consts.beta,
                   "K": alphabet.consts.K},
        "table": {"kind": alphabet.centers[0].table.kind,
                  "params": alphabet.centers[0].table.params,
                  "metric_scale": alphabet.centers[0].table.metric_scale},
        "cover": alphabet.cover.to_json(),
        "centers": [_gamma_to_json(c) for c in alphabet.centers],
        "nets": [[list(base[0]), list(base[1]), list(base[2]), base[3], j,
                  list(cids)]
                 for (base, j), cids in alphabet.nets.items()],
        "vertices": [{
            "center": alphabet.center_of_vertex[i],
            "p_s": v.p_s.expo, "p_u": v.p_u.expo, "j": v.signature.j,
        } for i, v in enumerate(g.vertices)],
        "edges": g.edge_list(),
        "stats": alphabet.stats,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_alphabet(path) -> Alphabet:
    """Rebuild an alphabet from its JSON file; charts are revalidated."""
    doc = json.loads(Path(path).read_text())
    cfg = EpsilonConfig(doc["eps"])
    c = doc["consts"]
    consts = RegularityConstants(a=c["a"], beta=c["beta"], K=c["K"])
    t = doc["table"]
    table = make_table(t["kind"], t["params"], t["metric_scale"])
    cover = GridCover.from_json(doc["cover"])
    centers = tuple(_gamma_from_json(obj, table, cfg)
                    for obj in doc["centers"])
    nets = {}
    for k3, l3, a3, m, j, cids in doc["nets"]:
        base = (tuple(int(x) for x in k3), tuple(int(x) for x in l3),
                tuple(int(x) for x in a3), int(m))
        nets[(base, int(j))] = tuple(int(x) for x in cids)
    vlist = []
    vindex = {}
    center_of = []
    for row in doc["vertices"]:
        cid = int(row["center"])
        dc = double_chart(centers[cid], cover, cfg, consts,
                          cfg.size(row["p_s"]), cfg.size(row["p_u"]),
                          j=int(row["j"]))
        vindex[(cid, dc.p_s.expo, dc.p_u.expo)] = len(vlist)
        vlist.append(dc)
        center_of.append(cid)
    graph = make_graph(vlist, [tuple(e) for e in doc["edges"]],
                       {"eps": cfg.eps,
                        "net_exponent": doc["stats"]["net_exponent"]})
    core, kept = prune_graph(graph)
    return Alphabet(cfg, consts, cover, centers, nets, graph, core, kept,
                    vindex, tuple(center_of), dict(doc["stats"]))
