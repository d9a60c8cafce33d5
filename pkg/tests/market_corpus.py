"""Random market instances shared by property and acceptance tests.

Generated markets always validate, contain both buyers and sellers, and mix
divisible curves with structured blocks (minimum acceptance ratios, exclusive
groups, parent links, loops).  Quantities and prices stay on a small integer
ish grid so at-the-money ties actually occur.
"""

from __future__ import annotations

import numpy as np

from equilab.lp import InfeasibleError, solve_lp
from equilab.model import (Agent, Allocation, BlockBid, HourlyCurveBid,
                           Market, iter_patterns, validate_market)


def _grid(rng, lo, hi, step=0.5):
    return float(rng.integers(round(lo / step), round(hi / step) + 1) * step)


def random_curve(rng, bid_id: str, hour: int, sign: float) -> HourlyCurveBid:
    mode = "stepwise" if rng.random() < 0.7 else "interpolated"
    n_pts = int(rng.integers(1, 4))
    prices = sorted(_grid(rng, 1, 10) for _ in range(n_pts))
    qty = sorted((_grid(rng, 0.5, 4) for _ in range(n_pts)), reverse=sign > 0)
    points = tuple((p, sign * q) for p, q in zip(prices, qty))
    return HourlyCurveBid(bid_id, hour, points, mode)


def random_block(rng, bid_id: str, K: int, sign: float, **links) -> BlockBid:
    hours = rng.choice(K, size=min(K, int(rng.integers(1, 4))), replace=False)
    q = np.zeros(K)
    for h in hours:
        q[h] = sign * _grid(rng, 0.5, 3)
    per_unit = _grid(rng, 1, 10)
    price = sign * per_unit * float(np.sum(np.abs(q)))
    mar = 1.0 if rng.random() < 0.5 else float(rng.choice([0.01, 0.25, 0.5]))
    return BlockBid(bid_id, price, tuple(q), mar=mar, **links)


def random_market(rng, K: int = 1, max_blocks: int = 8,
                  one_block_per_agent: bool = False,
                  structured: bool = True) -> Market:
    """A valid market with 3-6 agents, at least one buyer and one seller."""
    while True:
        n_agents = int(rng.integers(3, 7))
        budget = int(rng.integers(1, max_blocks + 1)) if max_blocks else 0
        agents = []
        seq = 0
        for i in range(n_agents):
            sign = 1.0 if i % 2 == 0 else -1.0
            bids = []
            n_curves = int(rng.integers(0, 3))
            for _ in range(n_curves):
                bids.append(random_curve(rng, f"c{seq}", int(rng.integers(K)),
                                         sign))
                seq += 1
            cap = 1 if one_block_per_agent else min(3, budget)
            n_blocks = int(rng.integers(0, cap + 1)) if cap else 0
            names = [f"b{seq + j}" for j in range(n_blocks)]
            seq += n_blocks
            budget -= n_blocks
            links: list[dict] = [{} for _ in names]
            if structured and n_blocks >= 2:
                style = rng.random()
                if style < 0.25:
                    gid = f"g{i}"
                    links[0]["group"] = gid
                    links[1]["group"] = gid
                elif style < 0.5:
                    links[1]["parent"] = names[0]
                elif style < 0.7:
                    links[0]["loop"] = names[1]
                    links[1]["loop"] = names[0]
            for name, kw in zip(names, links):
                bids.append(random_block(rng, name, K, sign, **kw))
            if not bids:
                bids.append(random_curve(rng, f"c{seq}", int(rng.integers(K)),
                                         sign))
                seq += 1
            agents.append(Agent(f"agent{i}", tuple(bids)))
        market = Market(K, tuple(agents), label=f"random-K{K}")
        if validate_market(market).ok:
            return market


def single_agent_market(rng, K: int = 1, max_blocks: int = 4) -> Market:
    """One agent with curves and blocks, for demand-set level properties."""
    while True:
        sign = 1.0 if rng.random() < 0.5 else -1.0
        bids = []
        seq = 0
        for _ in range(int(rng.integers(0, 3))):
            bids.append(random_curve(rng, f"c{seq}", int(rng.integers(K)), sign))
            seq += 1
        for _ in range(int(rng.integers(0, max_blocks + 1))):
            bids.append(random_block(rng, f"b{seq}", K,
                                     1.0 if rng.random() < 0.5 else -1.0))
            seq += 1
        if not bids:
            continue
        market = Market(K, (Agent("solo", tuple(bids)),))
        if validate_market(market).ok:
            return market


def random_price_vector(rng, market: Market) -> np.ndarray:
    """Prices that frequently hit curve breakpoints exactly."""
    prices = [s.price for a in market.agents for b in a.curve_bids
              for s in b.steps]
    lam = np.empty(market.num_commodities)
    for h in range(market.num_commodities):
        if prices and rng.random() < 0.5:
            lam[h] = float(rng.choice(prices))
        else:
            lam[h] = _grid(rng, 0, 11)
    return lam


def random_balanced_allocation(market: Market, rng,
                               tries: int = 20) -> Allocation | None:
    """Feasible balanced allocation: random block pattern and ratios, curves
    absorb the residual when their ranges allow it."""
    K = market.num_commodities
    blocks = [b for a in market.agents for b in a.block_bids]
    curves = [b for a in market.agents for b in a.curve_bids]
    patterns = list(iter_patterns(blocks))
    for _ in range(tries):
        z = patterns[int(rng.integers(len(patterns)))]
        acc = {}
        fixed = np.zeros(K)
        for bid, zi in zip(blocks, z):
            a = float(rng.uniform(bid.mar, 1.0)) if zi else 0.0
            acc[bid.bid_id] = a
            fixed += a * bid.q
        if not curves:
            if float(np.max(np.abs(fixed), initial=0.0)) < 1e-9:
                return Allocation(acc)
            continue
        cols = []
        lows, highs = [], []
        for bid in curves:
            e = np.zeros(K)
            e[bid.hour] = 1.0
            cols.append(e)
            lo, hi = bid.range
            lows.append(lo)
            highs.append(hi)
        c = rng.normal(size=len(curves))      # random vertex of the slice
        try:
            res = solve_lp(c, np.column_stack(cols), -fixed, None, None,
                           np.array(lows), np.array(highs))
        except InfeasibleError:
            continue
        for bid, v in zip(curves, res.x):
            acc[bid.bid_id] = float(v)
        return Allocation(acc)
    return None
