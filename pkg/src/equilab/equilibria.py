"""Equilibrium detection, approximate-equilibrium constructions, pricing.

Three allocations matter at the convexified optimum prices lambda*:

* the vertex LP allocation: balanced, and at most min(number of agents with
  nonconvex demand, number of commodities) agents sit outside their demand
  set;
* its demand-snapped companion: every agent moved to the nearest point of its
  demand set (ties toward zero trade), balanced only up to the sum of the
  largest K nonconvexity measures;
* the exact welfare allocation priced at lambda* (convex-hull pricing): the
  total lost opportunity cost equals the duality gap and is minimal among all
  balanced allocation/price pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import resolve_tol, vector_norm
from .convexify import DualSolution, dual_value, solve_lp
from .demand import (agent_best_surplus, demand_set, nonconvexity,
                     NonconvexStats)
from .model import Agent, Allocation, Market, agent_value, zero_allocation
from .welfare import ExactSolution, solve_welfare


@dataclass(frozen=True)
class EquilibriumCertificate:
    """Outcome of checking (prices, allocation) against the two conditions."""

    status: str                      # "exact" | "none"
    lambda_star: tuple[float, ...]
    in_demand: tuple[bool, ...]      # per agent, bundle in demand set
    imbalance: float                 # norm of the aggregate bundle

    @property
    def is_equilibrium(self) -> bool:
        return self.status == "exact"


def detect_equilibrium(market: Market, lam, allocation: Allocation,
                       tol: float | None = None, norm: str = "l2") -> EquilibriumCertificate:
    """Exact equilibrium iff every bundle is demanded at lam and trade balances."""
    t = resolve_tol(tol)
    lam = np.asarray(lam, dtype=float)
    flags = []
    for agent in market.agents:
        ds = demand_set(agent, lam, market.num_commodities, t)
        flags.append(ds.contains(allocation.bundle(market, agent)))
    imbalance = vector_norm(allocation.imbalance(market), norm)
    scale = 1.0 + float(np.max(np.abs(allocation.bundles(market)), initial=0.0))
    ok = all(flags) and imbalance <= t * scale
    return EquilibriumCertificate("exact" if ok else "none",
                                  tuple(float(v) for v in lam),
                                  tuple(flags), imbalance)


@dataclass
class LpAllocationResult:
    """Vertex allocation of the convexified LP, checked against demand sets."""

    dual: DualSolution
    allocation: Allocation
    violations: int
    violating_agents: tuple[str, ...]
    stats: NonconvexStats


def balanced_lp_allocation(market: Market, dual: DualSolution | None = None,
                           tol: float | None = None, norm: str = "l2",
                           stats: bool = True) -> LpAllocationResult:
    """Vertex optimum of the convexified LP at its own prices.

    The allocation is balanced by construction.  The number of agents whose
    bundle falls outside their demand set is bounded by min(L, K) where L
    counts agents with nonconvex demand and K the commodities; violating the
    bound would mean the LP solution is not a vertex, so it is asserted.
    """
    t = resolve_tol(tol)
    if dual is None:
        dual = solve_lp(market, t)
    lam = dual.lambda_star
    K = market.num_commodities
    bad: list[str] = []
    sets = []
    for agent in market.agents:
        ds = demand_set(agent, lam, K, t)
        x = dual.allocation.bundle(market, agent)
        sets.append((ds, x))
        if not ds.contains(x):
            bad.append(agent.agent_id)
    if stats or bad:
        # The LP bundle is a probe so every violator registers as nonconvex.
        rhos = [nonconvexity(ds, norm, probes=(x,)) for ds, x in sets]
        count = sum(1 for r in rhos if r > t)
        ranked = sorted(rhos, reverse=True)[:K]
        ncs = NonconvexStats(count, tuple(ranked + [0.0] * (K - len(ranked))),
                             tuple(rhos))
    else:
        ncs = NonconvexStats(0, (), ())
    if bad:
        limit = min(ncs.count, K)
        if len(bad) > limit:
            raise AssertionError(
                f"{len(bad)} agents outside demand, bound is {limit}")
    return LpAllocationResult(dual, dual.allocation, len(bad), tuple(bad), ncs)


@dataclass
class SnappedAllocationResult:
    """Demand-consistent allocation built by projecting the LP vertex."""

    dual: DualSolution
    allocation: Allocation
    imbalance: float
    bound: float            # sum of the K largest nonconvexity measures

    @property
    def acceptances(self):
        return self.allocation.acceptances


def demand_snapped_allocation(market: Market, dual: DualSolution | None = None,
                              tol: float | None = None,
                              norm: str = "l2") -> SnappedAllocationResult:
    """Move every agent to the nearest demand point; ties snap toward zero.

    Every agent ends inside its demand set; the aggregate imbalance is
    bounded by the sum of the K largest nonconvexity measures (asserted,
    with the projected points fed back as candidate probes so the bound is
    evaluated safely even off the closed-form path).
    """
    t = resolve_tol(tol)
    if dual is None:
        dual = solve_lp(market, t)
    lam = dual.lambda_star
    K = market.num_commodities
    acc: dict[str, float] = dict(dual.allocation.acceptances)
    total = np.zeros(K)
    rhos = []
    for agent in market.agents:
        ds = demand_set(agent, lam, K, t)
        x = dual.allocation.bundle(market, agent)
        dist, y = ds.nearest(x)
        rhos.append(nonconvexity(ds, norm, probes=(x,)))
        if dist > t * (1.0 + float(np.linalg.norm(x))):
            _reassign_agent(agent, acc, ds, x, y, lam, t)
            x = y
        total += x
    imbalance = vector_norm(total, norm)
    ranked = sorted(rhos, reverse=True)[:K]
    bound = float(sum(ranked))
    if imbalance > bound + t * (1.0 + bound):
        raise AssertionError(
            f"imbalance {imbalance} exceeds nonconvexity bound {bound}")
    return SnappedAllocationResult(dual, Allocation(acc), imbalance, bound)


def _reassign_agent(agent: Agent, acc: dict, ds, x_old: np.ndarray,
                    y: np.ndarray, lam: np.ndarray, tol: float) -> None:
    """Rewrite the agent's acceptances so its bundle becomes y.

    For each feasible indicator pattern the bundle is an affine map of the
    remaining degrees of freedom: stretches of at-the-money active blocks
    over [mar, 1] and per-curve quantities over their demand intervals.  A
    box-constrained least squares per pattern finds the combination hitting
    y; at least one pattern must, since y lies in the demand set.
    """
    from .curves import demand_interval
    from .demand import block_margin, _money_class
    best = None
    for z in _agent_patterns(agent):
        fixed = np.zeros(lam.size)
        setting = {}
        cols: list[np.ndarray] = []
        bounds: list[tuple[float, float]] = []
        owners: list[str] = []
        for bid, zi in zip(agent.block_bids, z):
            if not zi:
                setting[bid.bid_id] = 0.0
                continue
            m = block_margin(bid, lam)
            scale = abs(bid.price) + abs(float(lam @ bid.q))
            cls = _money_class(m, scale, tol)
            if cls == "in":
                setting[bid.bid_id] = 1.0
                fixed += bid.q
            elif cls == "out":
                setting[bid.bid_id] = bid.mar
                fixed += bid.mar * bid.q
            elif 1.0 - bid.mar <= 1e-12:
                setting[bid.bid_id] = 1.0
                fixed += bid.q
            else:
                setting[bid.bid_id] = bid.mar
                cols.append(bid.q.astype(float))
                bounds.append((bid.mar, 1.0))
                owners.append(bid.bid_id)
        for bid in agent.curve_bids:
            a, b = demand_interval(bid.steps, float(lam[bid.hour]), tol)
            e = np.zeros(lam.size)
            e[bid.hour] = 1.0
            if b - a <= 1e-12:
                setting[bid.bid_id] = a
                fixed += a * e
            else:
                setting[bid.bid_id] = a
                cols.append(e)
                bounds.append((a, b))
                owners.append(bid.bid_id)
        target = y - fixed
        if cols:
            from scipy.optimize import lsq_linear
            A = np.column_stack(cols)
            lo = np.array([b[0] for b in bounds])
            hi = np.array([b[1] for b in bounds])
            sol = lsq_linear(A, target, bounds=(lo, hi), method="bvls")
            err = float(np.linalg.norm(A @ sol.x - target))
            for name, v in zip(owners, sol.x):
                setting[name] = float(v)
        else:
            err = float(np.linalg.norm(target))
        if best is None or err < best[0] - 1e-12:
            best = (err, setting)
        if best[0] <= 1e-12:
            break
    if best is None or best[0] > tol * (1.0 + float(np.linalg.norm(y))):
        raise AssertionError("could not realize nearest demand point by acceptances")
    acc.update(best[1])


def _agent_patterns(agent: Agent):
    from .model import iter_patterns
    return iter_patterns(agent.block_bids)


# ---------------------------------------------------------------------------
# Lost opportunity cost and convex hull pricing

def lost_opportunity_cost(market: Market, allocation: Allocation, lam,
                          tol: float | None = None) -> tuple[float, dict]:
    """Total and per-agent surplus shortfall against the best response at lam.

    Infinite for agents whose acceptances are outside their true feasible set.
    """
    t = resolve_tol(tol)
    lam = np.asarray(lam, dtype=float)
    per_agent: dict[str, float] = {}
    for agent in market.agents:
        best = agent_best_surplus(agent, lam, t)
        val = agent_value(agent, allocation.acceptances, t)
        if val == float("-inf"):
            per_agent[agent.agent_id] = float("inf")
            continue
        got = val - float(lam @ allocation.bundle(market, agent))
        per_agent[agent.agent_id] = max(0.0, best - got)
    return float(sum(per_agent.values())), per_agent


@dataclass
class PricingResult:
    """Exact welfare allocation priced at the convexified optimum prices."""

    lambda_star: tuple[float, ...]
    allocation: Allocation
    exact: ExactSolution
    dual: DualSolution
    total_loc: float
    per_agent_loc: dict
    certificate: EquilibriumCertificate

    @property
    def duality_gap(self) -> float:
        return self.dual.dual_objective - self.exact.welfare


def convex_hull_pricing(market: Market, tol: float | None = None,
                        norm: str = "l2",
                        node_budget: int | None = None) -> PricingResult:
    """Price the exact welfare allocation at lambda*.

    The total lost opportunity cost equals the gap between the convexified
    dual value and the exact welfare (asserted), and it is zero exactly when
    an equilibrium exists.
    """
    t = resolve_tol(tol)
    dual = solve_lp(market, t)
    kwargs = {} if node_budget is None else {"node_budget": node_budget}
    exact = solve_welfare(market, tol=t, **kwargs)
    lam = dual.lambda_star
    total, per_agent = lost_opportunity_cost(market, exact.allocation, lam, t)
    gap = dual.dual_objective - exact.welfare
    scale = 1.0 + abs(dual.dual_objective) + abs(exact.welfare)
    if abs(total - gap) > 1e-6 * scale:
        raise AssertionError(f"pricing loc {total} != duality gap {gap}")
    cert = detect_equilibrium(market, lam, exact.allocation, t, norm)
    return PricingResult(tuple(float(v) for v in lam), exact.allocation, exact,
                         dual, total, per_agent, cert)


def check_loc_dominance(market: Market, allocation: Allocation, lam,
                        pricing: PricingResult | None = None,
                        tol: float | None = None) -> bool:
    """Is the priced exact allocation's total LOC <= the candidate pair's?

    True for every balanced feasible allocation at any prices; the candidate
    need not be balanced for the comparison to run, but the guarantee is
    stated for balanced ones.
    """
    t = resolve_tol(tol)
    if pricing is None:
        pricing = convex_hull_pricing(market, t)
    cand, _ = lost_opportunity_cost(market, allocation, lam, t)
    return pricing.total_loc <= cand + t * (1.0 + abs(cand))


# ---------------------------------------------------------------------------
# Existence checks

@dataclass(frozen=True)
class ExistenceCheck:
    applies: bool              # sufficient condition holds at lambda*
    equilibrium_found: bool
    certificate: EquilibriumCertificate | None


def singleton_demand_equilibrium_check(market: Market, tol: float | None = None,
                                       norm: str = "l2") -> ExistenceCheck:
    """If every block-owning agent demands a single bundle at lambda*, an
    equilibrium exists and is returned via the snapped allocation."""
    t = resolve_tol(tol)
    dual = solve_lp(market, t)
    lam = dual.lambda_star
    applies = True
    for agent in market.agents:
        if agent.has_blocks:
            ds = demand_set(agent, lam, market.num_commodities, t)
            if not ds.is_singleton():
                applies = False
                break
    if not applies:
        return ExistenceCheck(False, False, None)
    snapped = demand_snapped_allocation(market, dual, t, norm)
    cert = detect_equilibrium(market, lam, snapped.allocation, t, norm)
    return ExistenceCheck(True, cert.is_equilibrium, cert)


@dataclass(frozen=True)
class AggregateConvexityCheck:
    convex: bool
    intervals: tuple[tuple[float, float], ...]   # aggregate demand, merged
    equilibrium: Allocation | None
    certificate: EquilibriumCertificate | None


def aggregate_demand_convexity_check(market: Market, tol: float | None = None,
                                     norm: str = "l2") -> AggregateConvexityCheck:
    """Single-commodity check: if the Minkowski sum of all demand sets at
    lambda* is convex (one interval), select per-agent demand points that
    balance exactly and certify the equilibrium.

    Raises ValueError for markets with more than one commodity; the exact
    interval arithmetic used here is one-dimensional.
    """
    if market.num_commodities != 1:
        raise ValueError("aggregate convexity check supports single-commodity "
                         "markets only")
    t = resolve_tol(tol)
    dual = solve_lp(market, t)
    lam = dual.lambda_star
    per_agent: list[list[tuple[float, float]]] = []
    from . import geometry
    for agent in market.agents:
        ds = demand_set(agent, lam, 1, t)
        model = geometry.collinear_model(ds.pieces)
        assert model is not None  # one dimension is always collinear
        origin, unit, intervals = model
        s = float(unit[0]) if np.linalg.norm(unit) else 0.0
        o = float(origin[0])
        ivs = [(o + min(s * a, s * b), o + max(s * a, s * b)) for a, b in intervals]
        per_agent.append(geometry.merge_intervals(ivs, 1e-12))

    total = [(0.0, 0.0)]
    for ivs in per_agent:
        total = geometry.merge_intervals(
            [(a + c, b + d) for a, b in total for c, d in ivs], t)
        if len(total) > 4096:
            raise ValueError("aggregate demand too fragmented for exact check")
    convex = len(total) == 1

    allocation = None
    cert = None
    if convex and total[0][0] <= t and total[0][1] >= -t:
        allocation = _select_balancing_points(market, per_agent, lam, t)
        if allocation is not None:
            cert = detect_equilibrium(market, lam, allocation, t, norm)
    return AggregateConvexityCheck(convex, tuple(tuple(iv) for iv in total),
                                   allocation, cert)


def _select_balancing_points(market: Market, per_agent, lam, tol: float):
    """Pick x_i in D_i summing to zero by a reachability sweep (1-D exact)."""
    from . import geometry
    n = len(per_agent)
    reach = [None] * (n + 1)
    reach[n] = [(0.0, 0.0)]
    for i in range(n - 1, -1, -1):
        reach[i] = geometry.merge_intervals(
            [(a + c, b + d) for a, b in reach[i + 1] for c, d in per_agent[i]], tol)
    def covered(ivs, x):
        return any(a - tol <= x <= b + tol for a, b in ivs)
    if not covered(reach[0], 0.0):
        return None
    acc: dict[str, float] = {}
    target = 0.0
    for i, agent in enumerate(market.agents):
        chosen = None
        for a, b in per_agent[i]:
            # need x in [a,b] with target - x reachable by the rest
            for rest_a, rest_b in reach[i + 1]:
                lo = max(a, target - rest_b)
                hi = min(b, target - rest_a)
                if lo <= hi + tol:
                    chosen = min(max(lo, a), b)
                    break
            if chosen is not None:
                break
        if chosen is None:
            return None
        _assign_1d_point(agent, chosen, lam, tol, acc)
        target -= chosen
    return Allocation(acc)


def _assign_1d_point(agent: Agent, x: float, lam, tol: float, acc: dict) -> None:
    """Write acceptances realizing demand point x for a 1-D agent."""
    ds = demand_set(agent, lam, 1, tol)
    _, y = ds.nearest(np.array([x]))
    _reassign_agent(agent, acc, ds, np.array([x]), y,
                    np.asarray(lam, dtype=float), tol)


# ---------------------------------------------------------------------------
# Bundled view

@dataclass
class ApproxEquilibria:
    """The three allocations at lambda* with their quality measures."""

    dual: DualSolution
    lp_result: LpAllocationResult
    snapped: SnappedAllocationResult
    pricing: PricingResult

    @property
    def lambda_star(self):
        return self.dual.lambda_star


def approximate_equilibria(market: Market, tol: float | None = None,
                           norm: str = "l2") -> ApproxEquilibria:
    t = resolve_tol(tol)
    dual = solve_lp(market, t)
    lp_res = balanced_lp_allocation(market, dual, t, norm)
    snapped = demand_snapped_allocation(market, dual, t, norm)
    pricing = convex_hull_pricing(market, t, norm)
    return ApproxEquilibria(dual, lp_res, snapped, pricing)
