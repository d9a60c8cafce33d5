"""Block-order clearing with uniform prices and no-loss block rules."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equilab.convexify import solve_lp
from equilab.curves import canonical_steps
from equilab.demand import block_margin
from equilab.equilibria import lost_opportunity_cost
from equilab.euphemia import (ClearingComplexityError, clear_euphemia_style)
from equilab.model import (Agent, BlockBid, HourlyCurveBid, Market,
                           acceptance_feasible)
from equilab.welfare import solve_welfare

from market_corpus import random_market


def test_reference_market_rejects_blocks(four_agent_market):
    res = clear_euphemia_style(four_agent_market)
    assert res.cleared
    assert res.welfare == pytest.approx(1.0)
    assert res.lam == pytest.approx((1.0,))
    assert res.active_blocks == ()
    # both blocks are paradoxically rejected: in the money at 1 yet inactive
    assert res.allocation["b1"] == pytest.approx(0.0)
    assert res.allocation["b4"] == pytest.approx(0.0)
    assert res.allocation["c2"] == pytest.approx(1.0)
    assert res.allocation["c3"] == pytest.approx(-1.0)


def test_reference_clearing_leaves_loc(four_agent_market):
    res = clear_euphemia_style(four_agent_market)
    total, per = lost_opportunity_cost(four_agent_market, res.allocation, res.lam)
    assert total == pytest.approx(9.0)
    assert per["a1"] == pytest.approx(9.0)


def test_block_only_market(four_agent_market):
    mk = Market(1, (
        Agent("b", (BlockBid("bb", 12.0, (3.0,)),)),
        Agent("s", (BlockBid("bs", -6.0, (-3.0,)),)),
    ))
    res = clear_euphemia_style(mk)
    assert res.cleared
    assert res.welfare == pytest.approx(6.0)
    assert set(res.active_blocks) == {"bb", "bs"}
    # any uniform price in [2, 4] is lossless; the reported one must be
    assert 2.0 - 1e-9 <= res.lam[0] <= 4.0 + 1e-9


def test_minimum_acceptance_ratio_partial_fill():
    mk = Market(1, (
        Agent("b", (HourlyCurveBid("c", 0, ((5.0, 1.0),)),)),
        Agent("s", (BlockBid("bs", -4.0, (-2.0,), mar=0.5),)),
    ))
    res = clear_euphemia_style(mk)
    assert res.cleared
    assert res.allocation["bs"] == pytest.approx(0.5)
    assert res.welfare == pytest.approx(3.0)


def test_two_hour_spanning_block():
    mk = Market(2, (
        Agent("b1", (HourlyCurveBid("c1", 0, ((6.0, 1.0),)),)),
        Agent("b2", (HourlyCurveBid("c2", 1, ((2.0, 1.0),)),)),
        Agent("s", (BlockBid("bs", -4.0, (-1.0, -1.0)),)),
    ))
    res = clear_euphemia_style(mk)
    assert res.cleared
    assert res.welfare == pytest.approx(4.0)
    assert res.allocation["bs"] == pytest.approx(1.0)
    # block loses in hour 1 but the two-hour revenue covers its cost
    assert res.lam[0] + res.lam[1] >= 4.0 - 1e-9


def test_no_clearing_possible():
    # lone block buyer with nobody to trade with still clears at zero trade
    mk = Market(1, (
        Agent("b", (BlockBid("bb", 12.0, (3.0,)),)),
        Agent("s", (HourlyCurveBid("c", 0, ((20.0, -1.0),)),)),
    ))
    res = clear_euphemia_style(mk)
    assert res.cleared
    assert res.welfare == pytest.approx(0.0)
    assert res.active_blocks == ()


def _assert_legal_outcome(market, res, tol=1e-7):
    """The published clearing rules, checked directly on the outcome."""
    lam = np.asarray(res.lam)
    alloc = res.allocation
    assert np.allclose(alloc.imbalance(market), 0.0, atol=tol)
    for agent in market.agents:
        acc = {b.bid_id: alloc[b.bid_id] for b in agent.bids}
        assert acceptance_feasible(agent, acc, tol=tol)
        for bid in agent.block_bids:
            a = alloc[bid.bid_id]
            m = block_margin(bid, lam)
            scale = 1.0 + abs(bid.price) + float(np.abs(lam) @ np.abs(bid.q))
            if a > tol:
                # no active block may lose money at the uniform prices
                assert m >= -tol * scale
        for bid in agent.curve_bids:
            q = alloc[bid.bid_id]
            p = float(lam[bid.hour])
            scale = 1.0 + abs(p)
            for step in canonical_steps(bid.points, bid.mode):
                if step.lo >= 0.0 and step.price > p + tol * scale:
                    # strictly in-money buy step must be fully served
                    assert q >= step.hi - tol * scale
                if step.hi <= 0.0 and step.price < p - tol * scale:
                    assert q <= step.lo + tol * scale


def test_reference_outcome_is_legal(four_agent_market):
    _assert_legal_outcome(four_agent_market, clear_euphemia_style(four_agent_market))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_random_outcomes_are_legal(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=int(rng.integers(1, 3)), max_blocks=4)
    try:
        res = clear_euphemia_style(market)
    except ClearingComplexityError:
        return
    if res.cleared:
        _assert_legal_outcome(market, res)
        # uniform-price clearing can never beat the unrestricted optimum
        assert res.welfare <= solve_welfare(market).welfare + 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_convex_market_equals_relaxation(seed):
    """With no blocks the clearing is the plain convexified optimum."""
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=1, max_blocks=0)
    res = clear_euphemia_style(market)
    assert res.cleared
    assert res.welfare == pytest.approx(solve_lp(market).primal_value, abs=1e-7)
