"""Equilibrium detection, approximate allocations, pricing, dominance."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equilab.convexify import solve_lp
from equilab.equilibria import (aggregate_demand_convexity_check,
                                approximate_equilibria,
                                balanced_lp_allocation, check_loc_dominance,
                                convex_hull_pricing, demand_snapped_allocation,
                                detect_equilibrium, lost_opportunity_cost,
                                singleton_demand_equilibrium_check)
from equilab.model import (Agent, Allocation, BlockBid, HourlyCurveBid,
                           Market, zero_allocation)

from market_corpus import (random_balanced_allocation, random_market,
                           random_price_vector)


# ---------------------------------------------------------------------------
# Reference market goldens

def test_reference_has_no_equilibrium(four_agent_market):
    pricing = convex_hull_pricing(four_agent_market)
    assert not pricing.certificate.is_equilibrium
    assert pricing.lambda_star == pytest.approx((3.0,))
    assert pricing.exact.welfare == pytest.approx(6.0)
    assert pricing.duality_gap == pytest.approx(1.0)
    assert pricing.total_loc == pytest.approx(1.0)
    assert pricing.per_agent_loc["a2"] == pytest.approx(1.0)
    for aid in ("a1", "a3", "a4"):
        assert pricing.per_agent_loc[aid] == pytest.approx(0.0)


def test_reference_lp_allocation(four_agent_market):
    res = balanced_lp_allocation(four_agent_market)
    assert res.violations == 1
    assert res.violating_agents == ("a4",)
    assert res.stats.per_agent == pytest.approx((0.0, 0.0, 0.0, 1.0))
    x = res.allocation
    assert x.bundle(four_agent_market, four_agent_market.agents[0])[0] == pytest.approx(3.0)
    assert x.bundle(four_agent_market, four_agent_market.agents[3])[0] == pytest.approx(-1.0)
    assert np.allclose(x.imbalance(four_agent_market), 0.0, atol=1e-9)


def test_reference_snapped_allocation(four_agent_market):
    res = demand_snapped_allocation(four_agent_market)
    bundles = [res.allocation.bundle(four_agent_market, a)[0]
               for a in four_agent_market.agents]
    assert bundles == pytest.approx([3.0, 0.0, -2.0, 0.0])
    assert res.imbalance == pytest.approx(1.0)
    assert res.bound == pytest.approx(1.0)
    assert res.imbalance <= res.bound + 1e-9


def test_reference_exact_allocation_in_demand_except_one(four_agent_market):
    pricing = convex_hull_pricing(four_agent_market)
    cert = pricing.certificate
    assert cert.in_demand == (True, False, True, True)
    assert cert.imbalance == pytest.approx(0.0)


def test_detect_equilibrium_positive():
    # convex two-sided market clears exactly
    mk = Market(1, (
        Agent("b", (HourlyCurveBid("cb", 0, ((5.0, 2.0),)),)),
        Agent("s", (HourlyCurveBid("cs", 0, ((1.0, -3.0),)),)),
    ))
    pricing = convex_hull_pricing(mk)
    assert pricing.certificate.is_equilibrium
    assert pricing.total_loc == pytest.approx(0.0)
    assert pricing.duality_gap == pytest.approx(0.0, abs=1e-9)


def test_detect_equilibrium_rejects_imbalance(four_agent_market):
    cert = detect_equilibrium(four_agent_market, [3.0],
                              Allocation({"b1": 1.0, "c2": 0.0, "c3": -2.0, "b4": 0.0}))
    assert not cert.is_equilibrium
    assert cert.imbalance == pytest.approx(1.0)
    assert all(cert.in_demand)


def test_loc_of_reference_candidates(four_agent_market):
    # the zero allocation leaves every profitable trade on the table
    total, per = lost_opportunity_cost(
        four_agent_market, zero_allocation(four_agent_market), [3.0])
    assert total == pytest.approx(7.0)
    assert per["a1"] == pytest.approx(3.0)
    assert per["a3"] == pytest.approx(4.0)
    # infeasible acceptance is infinitely costly
    bad = Allocation({"b1": 0.5, "c2": 0.0, "c3": 0.0, "b4": 0.0})
    total_bad, per_bad = lost_opportunity_cost(four_agent_market, bad, [3.0])
    assert total_bad == float("inf")
    assert per_bad["a1"] == float("inf")


def test_dominance_on_reference(four_agent_market):
    pricing = convex_hull_pricing(four_agent_market)
    assert check_loc_dominance(four_agent_market,
                               zero_allocation(four_agent_market), [3.0], pricing)
    assert check_loc_dominance(four_agent_market,
                               zero_allocation(four_agent_market), [0.0], pricing)
    full = Allocation({"b1": 1.0, "c2": 1.0, "c3": -2.0, "b4": 1.0})
    assert check_loc_dominance(four_agent_market, full, [2.0], pricing)


def test_singleton_check_inapplicable_on_reference(four_agent_market):
    chk = singleton_demand_equilibrium_check(four_agent_market)
    assert not chk.applies
    assert not chk.equilibrium_found


def test_singleton_check_finds_equilibrium():
    # slack seller pins lambda* at its marginal cost, where the block buyer
    # is strictly in the money: its demand is a single point
    mk = Market(1, (
        Agent("b", (BlockBid("b", 10.0, (2.0,)),)),
        Agent("b2", (HourlyCurveBid("c2", 0, ((4.0, 1.0),)),)),
        Agent("s", (HourlyCurveBid("c", 0, ((1.0, -4.0),)),)),
    ))
    chk = singleton_demand_equilibrium_check(mk)
    assert chk.applies
    assert chk.equilibrium_found
    assert chk.certificate.is_equilibrium


def test_aggregate_convexity_on_reference(four_agent_market):
    chk = aggregate_demand_convexity_check(four_agent_market)
    assert not chk.convex
    assert chk.equilibrium is None
    # aggregate demand at lambda*: {3} + {0} + {-2} + {-2, 0} = {-1, 1}
    assert sorted(chk.intervals) == [(-1.0, -1.0), (1.0, 1.0)]


def test_aggregate_convexity_positive():
    mk = Market(1, (
        Agent("b", (BlockBid("b", 10.0, (2.0,)),)),
        Agent("b2", (HourlyCurveBid("c2", 0, ((4.0, 1.0),)),)),
        Agent("s", (HourlyCurveBid("c", 0, ((1.0, -4.0),)),)),
    ))
    chk = aggregate_demand_convexity_check(mk)
    assert chk.convex
    assert chk.equilibrium is not None
    assert chk.certificate.is_equilibrium


def test_aggregate_convexity_rejects_multi_commodity():
    mk = Market(2, (Agent("a", (BlockBid("b", 1.0, (1.0, 0.0)),)),))
    with pytest.raises(ValueError):
        aggregate_demand_convexity_check(mk)


def test_approximate_equilibria_bundle(four_agent_market):
    res = approximate_equilibria(four_agent_market)
    assert res.lambda_star[0] == pytest.approx(3.0)
    assert res.lp_result.violations == 1
    assert res.snapped.imbalance == pytest.approx(1.0)
    assert res.pricing.total_loc == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Properties on random markets

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_lp_allocation_violation_bound(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=int(rng.integers(1, 3)), max_blocks=5)
    res = balanced_lp_allocation(market)
    K = market.num_commodities
    assert res.violations <= min(res.stats.count, K)
    assert np.allclose(res.allocation.imbalance(market), 0.0, atol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_snap_imbalance_bound(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=int(rng.integers(1, 3)), max_blocks=5)
    res = demand_snapped_allocation(market)
    assert res.imbalance <= res.bound + 1e-7 * (1.0 + res.bound)
    # snapped bundles sit in their demand sets
    lam = res.dual.lambda_star
    from equilab.demand import demand_set
    for agent in market.agents:
        ds = demand_set(agent, lam, market.num_commodities)
        assert ds.contains(res.allocation.bundle(market, agent), 1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_pricing_gap_identity(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=1, max_blocks=5)
    pricing = convex_hull_pricing(market)
    scale = 1.0 + abs(pricing.dual.dual_objective) + abs(pricing.exact.welfare)
    assert abs(pricing.total_loc - pricing.duality_gap) <= 1e-6 * scale
    assert pricing.duality_gap >= -1e-8
    # zero gap if and only if the certificate says equilibrium
    if pricing.total_loc <= 1e-9:
        assert pricing.certificate.is_equilibrium


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_dominance_over_sampled_pairs(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=1, max_blocks=4)
    pricing = convex_hull_pricing(market)
    for _ in range(6):
        pair = random_balanced_allocation(market, rng)
        if pair is None:
            continue
        lam = random_price_vector(rng, market)
        assert check_loc_dominance(market, pair, lam, pricing)
    # the all-zero allocation is always balanced and feasible
    assert check_loc_dominance(market, zero_allocation(market),
                               random_price_vector(rng, market), pricing)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_singleton_check_soundness(seed):
    rng = np.random.default_rng(seed)
    market = random_market(rng, K=1, max_blocks=4)
    chk = singleton_demand_equilibrium_check(market)
    if chk.applies:
        assert chk.equilibrium_found
        assert chk.certificate.is_equilibrium
