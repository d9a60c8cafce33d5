"""Exact welfare maximization over the true (nonconvex) feasible sets.

Branch and bound on the block indicators over the convexified LP relaxation.
A node is a set of per-block bound overrides; branching fixes an indicator to
0 (ratio pinned to zero) or 1 (ratio within [mar, 1]).  Candidate incumbents
are LP solutions whose implied indicators are feasible, so the reported
optimum is always truly feasible.  `brute_force_welfare` enumerates every
feasible indicator pattern and solves the residual LP for each; it is the
independent oracle the search is tested against.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from . import lp
from .config import resolve_tol
from .convexify import ConvexifiedProgram, build_convexified
from .model import Allocation, Market, pattern_feasible

GAP_TOL = 1e-6
DEFAULT_NODE_BUDGET = 10 ** 6
BRUTE_FORCE_MAX_BLOCKS = 20


class NodeBudgetExceeded(RuntimeError):
    def __init__(self, best):
        super().__init__("node budget exceeded")
        self.best = best


@dataclass
class ExactSolution:
    welfare: float
    allocation: Allocation
    nodes: int
    gap: float          # proven optimality gap (absolute)


def _implied_violations(market: Market, program: ConvexifiedProgram,
                        x: np.ndarray, tol: float):
    """Blocks whose relaxed acceptance is not indicator-feasible.

    Returns (mar_violations, group_violation) where mar_violations is a list
    of (fractionality, bid_id, acceptance ratio) and group_violation names a
    group with more than one supported member.
    """
    mar_viol = []
    active: dict[str, bool] = {}
    for agent in market.agents:
        for bid in agent.block_bids:
            a = float(x[program.block_col[bid.bid_id]])
            active[bid.bid_id] = a > tol
            if tol < a < bid.mar - tol:
                z = a / bid.mar
                mar_viol.append((min(z, 1.0 - z), bid.bid_id, a))
    group_members: dict[str, list[tuple[float, str]]] = {}
    for agent in market.agents:
        for bid in agent.block_bids:
            if bid.group is not None and active[bid.bid_id]:
                a = float(x[program.block_col[bid.bid_id]])
                group_members.setdefault(bid.group, []).append((a, bid.bid_id))
    group_viol = None
    for gid in sorted(group_members):
        if len(group_members[gid]) > 1:
            # Branch on the largest ratio, ties by lowest bid id.
            group_viol = sorted(group_members[gid], key=lambda v: (-v[0], v[1]))[0]
            break
    return mar_viol, group_viol


def solve_welfare(market: Market, node_budget: int = DEFAULT_NODE_BUDGET,
                  tol: float | None = None) -> ExactSolution:
    """Best-bound branch and bound; deterministic, gap-certified.

    Raises NodeBudgetExceeded (carrying the incumbent) if the node budget
    runs out before the gap closes.
    """
    t = resolve_tol(tol)
    program = build_convexified(market)
    siblings: dict[str, list[str]] = {}
    for agent in market.agents:
        for bid in agent.block_bids:
            if bid.group is not None:
                siblings.setdefault(bid.group, []).append(bid.bid_id)

    best_val = -np.inf
    best_alloc: Allocation | None = None
    counter = itertools.count()
    heap: list[tuple] = []

    def push(overrides: dict) -> None:
        try:
            res, alloc = program.solve_raw(overrides)
        except lp.InfeasibleError:
            return
        heapq.heappush(heap, (-res.value, next(counter), overrides, res, alloc))

    push({})
    nodes = 0
    gap = 0.0
    while heap:
        neg_bound, _, overrides, res, alloc = heapq.heappop(heap)
        bound = -neg_bound
        if bound <= best_val + 1e-9 * (1.0 + abs(best_val)):
            # Best-first: every remaining node is bounded by this one.
            gap = max(0.0, bound - best_val)
            break
        nodes += 1
        if nodes > node_budget:
            open_gap = bound - best_val if np.isfinite(best_val) else float("inf")
            raise NodeBudgetExceeded(
                ExactSolution(best_val, best_alloc or Allocation({}), nodes, open_gap))
        mar_viol, group_viol = _implied_violations(market, program, res.x, t)
        if not mar_viol and group_viol is None:
            if res.value > best_val:
                best_val, best_alloc = res.value, alloc
            continue
        if mar_viol:
            # Most fractional implied indicator first, ties by lowest bid id.
            mar_viol.sort(key=lambda v: (-v[0], v[1]))
            _, bid_id, _ = mar_viol[0]
            bid = market.bid_index[bid_id][1]
            off = dict(overrides); off[bid_id] = (0.0, 0.0); push(off)
            on = dict(overrides); on[bid_id] = (bid.mar, 1.0); push(on)
        else:
            _, bid_id = group_viol
            bid = market.bid_index[bid_id][1]
            off = dict(overrides); off[bid_id] = (0.0, 0.0); push(off)
            on = dict(overrides)
            on[bid_id] = (bid.mar, 1.0)
            for sib in siblings[bid.group]:
                if sib != bid_id:
                    on[sib] = (0.0, 0.0)
            push(on)

    if best_alloc is None:
        raise lp.InfeasibleError("no feasible indicator pattern")
    return ExactSolution(best_val, best_alloc, nodes, gap)


def brute_force_welfare(market: Market, tol: float | None = None) -> ExactSolution:
    """Enumerate all feasible indicator patterns; residual LP for each."""
    blocks = tuple(b for a in market.agents for b in a.block_bids)
    if len(blocks) > BRUTE_FORCE_MAX_BLOCKS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_BLOCKS} blocks, "
                         f"market has {len(blocks)}")
    program = build_convexified(market)
    best_val = -np.inf
    best_alloc: Allocation | None = None
    n_patterns = 0
    for z in itertools.product((0, 1), repeat=len(blocks)):
        if not pattern_feasible(blocks, z):
            continue
        n_patterns += 1
        overrides = {b.bid_id: ((b.mar, 1.0) if zi else (0.0, 0.0))
                     for b, zi in zip(blocks, z)}
        try:
            res, alloc = program.solve_raw(overrides)
        except lp.InfeasibleError:
            continue
        if res.value > best_val + 1e-12 * (1.0 + abs(res.value)):
            best_val, best_alloc = res.value, alloc
    if best_alloc is None:
        raise lp.InfeasibleError("no feasible indicator pattern")
    return ExactSolution(best_val, best_alloc, n_patterns, 0.0)
