"""Exact demand sets, their hulls, and the price-specific nonconvexity measure.

At prices lam an agent's demand set is the argmax of u(x) - lam.x over its
true feasible set.  Value is additive across bids and the only coupling
between bids is through indicator constraints (groups, links, loops), so the
argmax factorizes: curves contribute exact intervals, blocks contribute
per-indicator-pattern points or ratio segments, and the agent set is a union
of Minkowski combinations over the surplus-maximal patterns.

The nonconvexity measure of a demand set D is the one-sided Hausdorff
distance of D from its convex hull: the largest distance from a hull point to
D.  It is zero exactly when demand is convex and it is what the approximate
equilibrium bounds consume.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry, lp
from .config import resolve_tol, vector_norm
from .curves import best_surplus, curve_margin, demand_interval
from .geometry import ComplexityError, Piece, make_piece
from .model import Agent, BlockBid, HourlyCurveBid, Market, block_components, iter_patterns


# ---------------------------------------------------------------------------
# Money classification

def block_margin(bid: BlockBid, lam: np.ndarray) -> float:
    return float(bid.price - lam @ bid.q)


def _money_class(margin: float, scale: float, tol: float) -> str:
    slack = tol * (1.0 + scale)
    if margin > slack:
        return "in"
    if margin < -slack:
        return "out"
    return "at"


@dataclass(frozen=True)
class MoneyClasses:
    """Per-bid money classification at given prices."""

    classes: dict
    margins: dict

    def __getitem__(self, bid_id: str) -> str:
        return self.classes[bid_id]


def classify_money(market: Market, lam, tol: float | None = None) -> MoneyClasses:
    """in / at / out of the money for every bid at prices lam.

    Blocks use the profile margin p_b - lam.q_b; curves use their best
    per-unit margin.  The at-the-money band is relative to the money scale,
    so rescaling all prices leaves the classes unchanged.
    """
    t = resolve_tol(tol)
    lam = np.asarray(lam, dtype=float)
    classes: dict[str, str] = {}
    margins: dict[str, float] = {}
    for agent in market.agents:
        for bid in agent.bids:
            if isinstance(bid, BlockBid):
                m = block_margin(bid, lam)
                scale = abs(bid.price) + abs(float(lam @ bid.q))
            else:
                m = curve_margin(bid.steps, float(lam[bid.hour]))
                scale = max((abs(s.price) for s in bid.steps), default=0.0) + abs(float(lam[bid.hour]))
            classes[bid.bid_id] = _money_class(m, scale, t)
            margins[bid.bid_id] = m
    return MoneyClasses(classes, margins)


# ---------------------------------------------------------------------------
# Demand sets

@dataclass
class DemandSet:
    """Union of structured pieces in bundle space."""

    dim: int
    pieces: tuple[Piece, ...]
    tol: float

    @cached_property
    def _collinear(self):
        return geometry.collinear_model(self.pieces)

    @cached_property
    def vertices(self) -> np.ndarray:
        vs = np.vstack([geometry.piece_vertices(p) for p in self.pieces])
        return np.unique(np.round(vs, 10), axis=0)

    def nearest(self, x) -> tuple[float, np.ndarray]:
        return geometry.union_nearest(self.pieces, x)

    def contains(self, x, tol: float | None = None) -> bool:
        t = resolve_tol(self.tol if tol is None else tol)
        d, _ = self.nearest(x)
        return d <= t * (1.0 + float(np.linalg.norm(np.asarray(x, dtype=float))))

    def is_singleton(self, tol: float | None = None) -> bool:
        t = resolve_tol(self.tol if tol is None else tol)
        vs = self.vertices
        span = np.max(vs, axis=0) - np.min(vs, axis=0)
        return bool(np.all(span <= t * (1.0 + np.max(np.abs(vs)))))


@dataclass(frozen=True)
class HullSet:
    """Convex hull of a demand set, held as a candidate vertex cloud."""

    points: np.ndarray
    tol: float

    def contains(self, x, tol: float | None = None) -> bool:
        t = self.tol if tol is None else tol
        return geometry.in_hull(x, self.points, t)


def _pattern_factors(blocks: tuple[BlockBid, ...], lam: np.ndarray, tol: float):
    """Surplus-maximal indicator patterns of one linked component.

    Returns (best_surplus, factors) where each factor is (offset, gens) for
    one maximal pattern; ties within the relative tolerance are all kept.
    """
    margins = [block_margin(b, lam) for b in blocks]
    scales = [abs(b.price) + abs(float(lam @ b.q)) for b in blocks]
    out = []
    for z in iter_patterns(blocks):
        surplus = 0.0
        offset = np.zeros(lam.size)
        gens = []
        for i, b in enumerate(blocks):
            if not z[i]:
                continue
            cls = _money_class(margins[i], scales[i], tol)
            if cls == "in":
                surplus += margins[i]
                offset += b.q
            elif cls == "at":
                gens.append((b.q, b.mar, 1.0))
            else:
                surplus += b.mar * margins[i]
                offset += b.mar * b.q
        out.append((surplus, offset, gens))
    best = max(s for s, _, _ in out)
    slack = tol * (1.0 + abs(best))
    factors = [(off, gens) for s, off, gens in out if s >= best - slack]
    return best, factors


def demand_set(agent: Agent, lam, K: int | None = None,
               tol: float | None = None) -> DemandSet:
    """Exact demand set of one agent at prices lam."""
    t = resolve_tol(tol)
    lam = np.asarray(lam, dtype=float)
    K = lam.size if K is None else K

    curve_gens = []
    for bid in agent.curve_bids:
        a, b = demand_interval(bid.steps, float(lam[bid.hour]), t)
        e = np.zeros(K)
        e[bid.hour] = 1.0
        curve_gens.append((e, a, b))

    blocks = agent.block_bids
    combos: list[tuple[np.ndarray, list]] = [(np.zeros(K), list(curve_gens))]
    for comp in block_components(blocks):
        comp_blocks = tuple(blocks[i] for i in comp)
        _, factors = _pattern_factors(comp_blocks, lam, t)
        new = []
        for off0, gens0 in combos:
            for off1, gens1 in factors:
                new.append((off0 + off1, gens0 + gens1))
        combos = new
        if len(combos) > geometry.MAX_PIECES:
            raise ComplexityError(f"{len(combos)} demand pieces "
                                  f"(cap {geometry.MAX_PIECES})")

    pieces = [make_piece(off, gens) for off, gens in combos]
    pieces = _dedup_pieces(pieces, t)
    return DemandSet(K, tuple(pieces), t)


def _dedup_pieces(pieces: list[Piece], tol: float) -> list[Piece]:
    kept: list[Piece] = []
    for p in pieces:
        scale = 1.0 + max((abs(v) for v in p.offset), default=0.0)
        if any(geometry.piece_subset(p, q, tol * scale) for q in kept):
            continue
        kept = [q for q in kept if not geometry.piece_subset(q, p, tol * scale)]
        kept.append(p)
    return kept


def convexified_demand(agent: Agent, lam, K: int | None = None,
                       tol: float | None = None) -> HullSet:
    """Convex hull of the demand set (the relaxed agent's argmax)."""
    d = demand_set(agent, lam, K, tol)
    return HullSet(d.vertices, resolve_tol(tol))


def agent_best_surplus(agent: Agent, lam, tol: float | None = None) -> float:
    """max over the agent's feasible set of u(x) - lam.x (closed form)."""
    t = resolve_tol(tol)
    lam = np.asarray(lam, dtype=float)
    total = 0.0
    for bid in agent.curve_bids:
        total += best_surplus(bid.steps, float(lam[bid.hour]))
    blocks = agent.block_bids
    for comp in block_components(blocks):
        comp_blocks = tuple(blocks[i] for i in comp)
        margins = [block_margin(b, lam) for b in comp_blocks]
        best = 0.0
        for z in iter_patterns(comp_blocks):
            s = sum((m if m > 0 else b.mar * m)
                    for b, m, zi in zip(comp_blocks, margins, z) if zi)
            best = max(best, s)
        total += best
    return total


# ---------------------------------------------------------------------------
# Nonconvexity measure

def _piece_distance_norm(piece: Piece, x, norm: str) -> float:
    if norm == "l2":
        return geometry.piece_nearest(piece, x)[0]
    x = np.asarray(x, dtype=float)
    base = piece.point()
    g = len(piece.units)
    if g == 0:
        return vector_norm(x - base, norm)
    G = piece.unit_matrix()
    los = np.array([lo for lo, _ in piece.ranges])
    his = np.array([hi for _, hi in piece.ranges])
    K = x.size
    r = x - base
    if norm == "l1":
        # vars: t, e+, e-;   G t + e+ - e- = r;   min sum(e+ + e-)
        n = g + 2 * K
        c = np.zeros(n)
        c[g:] = -1.0
        a_eq = np.hstack([G, np.eye(K), -np.eye(K)])
        span = 1.0 + float(np.max(np.abs(r))) + float(np.sum(np.abs(his - los)))
        res = lp.solve_lp(c, a_eq=a_eq, b_eq=r,
                          lo=np.concatenate([los, np.zeros(2 * K)]),
                          hi=np.concatenate([his, np.full(2 * K, 2 * span)]))
        return -res.value
    if norm == "linf":
        # vars: t, s;   -s <= (r - G t)_k <= s;   min s
        n = g + 1
        c = np.zeros(n)
        c[g] = -1.0
        a_ub = np.vstack([np.hstack([G, -np.ones((K, 1))]),
                          np.hstack([-G, -np.ones((K, 1))])])
        b_ub = np.concatenate([r, -r])
        span = 1.0 + float(np.max(np.abs(r))) + float(np.sum(np.abs(his - los)))
        res = lp.solve_lp(c, a_ub=a_ub, b_ub=b_ub,
                          lo=np.concatenate([los, [0.0]]),
                          hi=np.concatenate([his, [2 * span]]))
        return -res.value
    raise ValueError(f"unknown norm {norm!r}")


def _union_distance_norm(pieces, x, norm: str) -> float:
    return min(_piece_distance_norm(p, x, norm) for p in pieces)


def nonconvexity(demand: DemandSet, norm: str = "l2", probes=()) -> float:
    """Largest distance from a hull point of the demand set back to the set.

    Exact for collinear unions (interval arithmetic on the carrier line);
    otherwise the maximum is taken over an exact candidate family: piece
    corners, pairwise closest-approach midpoints, and caller-supplied probe
    points (which must lie in the hull).
    """
    pieces = demand.pieces
    if len(pieces) == 1 and not probes:
        return 0.0
    model = demand._collinear
    if model is not None:
        _, unit, intervals = model
        radius = geometry.interval_union_gap_radius(intervals, 1e-12)
        base = radius * vector_norm(unit, norm)
        best = base
        for x in probes:
            best = max(best, _union_distance_norm(pieces, x, norm))
        return best
    candidates = [v for p in pieces for v in geometry.piece_vertices(p)]
    for a, b in itertools.combinations(pieces, 2):
        _, pa, pb = geometry.closest_pair(a, b)
        candidates.append(0.5 * (pa + pb))
    candidates.extend(np.asarray(x, dtype=float) for x in probes)
    return max(_union_distance_norm(pieces, x, norm) for x in candidates)


def agent_nonconvexity(agent: Agent, lam, K: int | None = None,
                       tol: float | None = None, norm: str = "l2",
                       probes=()) -> float:
    return nonconvexity(demand_set(agent, lam, K, tol), norm, probes)


@dataclass(frozen=True)
class NonconvexStats:
    """Count and ranking of demand nonconvexity across agents."""

    count: int                  # agents with a nonconvex demand set
    top: tuple[float, ...]      # largest measures, descending, zero-padded
    per_agent: tuple[float, ...]

    @property
    def top_sum(self) -> float:
        return float(sum(self.top))


def count_nonconvex_demand(market: Market, lam, k: int | None = None,
                           tol: float | None = None, norm: str = "l2") -> NonconvexStats:
    """Number of agents demanding nonconvexly at lam and the k largest measures."""
    t = resolve_tol(tol)
    k = market.num_commodities if k is None else k
    rhos = []
    for agent in market.agents:
        rhos.append(agent_nonconvexity(agent, lam, market.num_commodities, t, norm))
    count = sum(1 for r in rhos if r > t)
    ranked = sorted(rhos, reverse=True)[:k]
    ranked += [0.0] * (k - len(ranked))
    return NonconvexStats(count, tuple(ranked), tuple(rhos))
