"""Market, agents, and the two bid formats.

Sign convention: quantities are signed, positive = buy, negative = sell.  A
market has K commodities ("hours"); an agent holds hourly curve bids (divisible,
concave value) and block bids (indivisible profiles with a minimum acceptance
ratio).  An agent's feasible set is the product of its per-bid acceptance sets
restricted by exclusive groups (at most one member accepted), parent/child
links (child active only if parent active) and loops (partners all-or-nothing
together).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping

import numpy as np

from .config import resolve_tol
from .curves import CurveError, canonical_steps, curve_value, quantity_range

MAR_FLOOR = 0.01


@dataclass(frozen=True)
class HourlyCurveBid:
    """Divisible per-hour bid given by (price, quantity) breakpoints."""

    bid_id: str
    hour: int
    points: tuple[tuple[float, float], ...]
    mode: str = "stepwise"

    @cached_property
    def steps(self):
        return canonical_steps(self.points, self.mode)

    @cached_property
    def range(self) -> tuple[float, float]:
        return quantity_range(self.steps)

    def value(self, x: float) -> float:
        return curve_value(self.steps, x)


@dataclass(frozen=True)
class BlockBid:
    """Indivisible profile bid.

    `price` is the money for the *full* profile (negative for sells: the
    least total revenue at which the seller accepts).  Acceptance ratio lives
    in {0} union [mar, 1].
    """

    bid_id: str
    price: float
    quantity: tuple[float, ...]
    mar: float = 1.0
    group: str | None = None
    parent: str | None = None
    loop: str | None = None

    @cached_property
    def q(self) -> np.ndarray:
        return np.asarray(self.quantity, dtype=float)


@dataclass(frozen=True)
class Agent:
    agent_id: str
    bids: tuple = ()

    @property
    def curve_bids(self) -> tuple[HourlyCurveBid, ...]:
        return tuple(b for b in self.bids if isinstance(b, HourlyCurveBid))

    @property
    def block_bids(self) -> tuple[BlockBid, ...]:
        return tuple(b for b in self.bids if isinstance(b, BlockBid))

    @property
    def has_blocks(self) -> bool:
        return any(isinstance(b, BlockBid) for b in self.bids)


@dataclass(frozen=True)
class Market:
    num_commodities: int
    agents: tuple[Agent, ...]
    currency: str = "EUR"
    quantity_unit: str = "MW"
    label: str = ""

    @cached_property
    def bid_index(self) -> dict[str, tuple[Agent, object]]:
        out: dict[str, tuple[Agent, object]] = {}
        for agent in self.agents:
            for bid in agent.bids:
                out[bid.bid_id] = (agent, bid)
        return out

    @cached_property
    def all_bids(self) -> tuple:
        return tuple(b for a in self.agents for b in a.bids)

    @cached_property
    def block_count(self) -> int:
        return sum(len(a.block_bids) for a in self.agents)

    def agent(self, agent_id: str) -> Agent:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise KeyError(agent_id)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    bid_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_market(market: Market) -> ValidationReport:
    """Structural checks; returns diagnostics instead of raising.

    Covers commodity count, bid id uniqueness, curve shape (monotone prices /
    quantities, hour range, finite numbers), block dimensions, MAR bounds, and
    group/link/loop reference integrity (loops are the only permitted cycles).
    """
    out: list[Violation] = []
    if market.num_commodities < 1:
        out.append(Violation("bad-dimension", "market needs at least one commodity"))
    if not market.agents:
        out.append(Violation("no-agents", "market has no agents"))

    seen: dict[str, str] = {}
    for agent in market.agents:
        for bid in agent.bids:
            if bid.bid_id in seen:
                out.append(Violation("duplicate-bid-id",
                                     f"bid id {bid.bid_id!r} used more than once",
                                     (bid.bid_id,)))
            seen[bid.bid_id] = agent.agent_id

    blocks: dict[str, BlockBid] = {}
    owner: dict[str, str] = {}
    for agent in market.agents:
        for bid in agent.bids:
            if isinstance(bid, HourlyCurveBid):
                _check_curve(market, bid, out)
            elif isinstance(bid, BlockBid):
                blocks[bid.bid_id] = bid
                owner[bid.bid_id] = agent.agent_id
                _check_block(market, bid, out)

    for bid in blocks.values():
        for ref, code in ((bid.parent, "bad-parent"), (bid.loop, "bad-loop")):
            if ref is not None and ref not in blocks:
                out.append(Violation(code, f"{bid.bid_id}: reference {ref!r} "
                                     "does not name a block bid", (bid.bid_id,)))
            elif ref is not None and owner[ref] != owner[bid.bid_id]:
                out.append(Violation(code, f"{bid.bid_id}: reference {ref!r} "
                                     "belongs to another agent", (bid.bid_id,)))
    for bid in blocks.values():
        if bid.loop is not None and bid.loop in blocks:
            partner = blocks[bid.loop]
            if partner.bid_id == bid.bid_id or partner.loop != bid.bid_id:
                out.append(Violation("bad-loop", f"loop {bid.bid_id}<->{bid.loop} "
                                     "is not a mutual pair", (bid.bid_id,)))
    # Parent chains must be acyclic (loops above are the only 2-cycles).
    for bid in blocks.values():
        hops, cur = 0, bid
        while cur.parent is not None and cur.parent in blocks:
            cur = blocks[cur.parent]
            hops += 1
            if cur.bid_id == bid.bid_id or hops > len(blocks):
                out.append(Violation("link-cycle",
                                     f"parent chain through {bid.bid_id} cycles",
                                     (bid.bid_id,)))
                break
    return ValidationReport(tuple(out))


def _check_curve(market: Market, bid: HourlyCurveBid, out: list[Violation]) -> None:
    if not 0 <= bid.hour < market.num_commodities:
        out.append(Violation("bad-hour", f"{bid.bid_id}: hour {bid.hour} outside "
                             f"0..{market.num_commodities - 1}", (bid.bid_id,)))
    if not all(np.isfinite(p) and np.isfinite(q) for p, q in bid.points):
        out.append(Violation("non-finite", f"{bid.bid_id}: non-finite breakpoint",
                             (bid.bid_id,)))
        return
    try:
        bid.steps
    except CurveError as exc:
        side = "buy" if any(q > 0 for _, q in bid.points) else "sell"
        kind = "non-concave buy curve" if side == "buy" else "non-convex sell curve"
        out.append(Violation("bad-curve", f"{bid.bid_id}: {kind} ({exc})",
                             (bid.bid_id,)))


def _check_block(market: Market, bid: BlockBid, out: list[Violation]) -> None:
    if len(bid.quantity) != market.num_commodities:
        out.append(Violation("bad-dimension", f"{bid.bid_id}: profile has "
                             f"{len(bid.quantity)} entries, expected "
                             f"{market.num_commodities}", (bid.bid_id,)))
    if not (np.isfinite(bid.price) and all(np.isfinite(v) for v in bid.quantity)):
        out.append(Violation("non-finite", f"{bid.bid_id}: non-finite entry",
                             (bid.bid_id,)))
    if not MAR_FLOOR <= bid.mar <= 1.0:
        out.append(Violation("bad-mar", f"{bid.bid_id}: minimum acceptance ratio "
                             f"{bid.mar} outside [{MAR_FLOOR}, 1]", (bid.bid_id,)))


# ---------------------------------------------------------------------------
# Acceptance semantics

def acceptance_feasible(agent: Agent, acceptances: Mapping[str, float],
                        tol: float | None = None) -> bool:
    """True iff the per-bid acceptances lie in the agent's true feasible set.

    Blocks: ratio in {0} union [mar, 1]; curves: quantity within the curve
    range; at most one accepted bid per exclusive group; child blocks need an
    active parent; looped partners are active together.
    """
    t = resolve_tol(tol)
    active: dict[str, bool] = {}
    for bid in agent.bids:
        a = float(acceptances[bid.bid_id])
        if isinstance(bid, HourlyCurveBid):
            lo, hi = bid.range
            s = t * (1.0 + max(abs(lo), abs(hi)))
            if not lo - s <= a <= hi + s:
                return False
        else:
            if a <= t:
                active[bid.bid_id] = False
            elif bid.mar - t <= a <= 1.0 + t:
                active[bid.bid_id] = True
            else:
                return False
    groups: dict[str, int] = {}
    for bid in agent.block_bids:
        if active[bid.bid_id] and bid.group is not None:
            groups[bid.group] = groups.get(bid.group, 0) + 1
    if any(n > 1 for n in groups.values()):
        return False
    for bid in agent.block_bids:
        if active[bid.bid_id] and bid.parent is not None and not active.get(bid.parent, False):
            return False
        if bid.loop is not None and bid.loop in active:
            if active[bid.bid_id] != active[bid.loop]:
                return False
    return True


def agent_value(agent: Agent, acceptances: Mapping[str, float],
                tol: float | None = None) -> float:
    """Total bid value at the given acceptances; -inf outside the feasible set."""
    if not acceptance_feasible(agent, acceptances, tol):
        return float("-inf")
    total = 0.0
    for bid in agent.bids:
        a = float(acceptances[bid.bid_id])
        if isinstance(bid, HourlyCurveBid):
            total += bid.value(a)
        else:
            total += a * bid.price
    return total


def agent_bundle(agent: Agent, acceptances: Mapping[str, float], K: int) -> np.ndarray:
    """Net signed bundle in R^K implied by the acceptances."""
    x = np.zeros(K)
    for bid in agent.bids:
        a = float(acceptances[bid.bid_id])
        if isinstance(bid, HourlyCurveBid):
            x[bid.hour] += a
        else:
            x += a * bid.q
    return x


@dataclass(frozen=True)
class Allocation:
    """Per-bid acceptances for a whole market.

    Blocks store the acceptance ratio, curves the signed quantity taken.
    """

    acceptances: Mapping[str, float] = field(default_factory=dict)

    def __getitem__(self, bid_id: str) -> float:
        return self.acceptances[bid_id]

    def bundle(self, market: Market, agent: Agent) -> np.ndarray:
        return agent_bundle(agent, self.acceptances, market.num_commodities)

    def bundles(self, market: Market) -> np.ndarray:
        return np.array([self.bundle(market, a) for a in market.agents])

    def imbalance(self, market: Market) -> np.ndarray:
        return self.bundles(market).sum(axis=0)

    def total_value(self, market: Market, tol: float | None = None) -> float:
        return sum(agent_value(a, self.acceptances, tol) for a in market.agents)


def zero_allocation(market: Market) -> Allocation:
    return Allocation({b.bid_id: 0.0 for b in market.all_bids})


# ---------------------------------------------------------------------------
# Indicator patterns

def block_components(blocks: tuple[BlockBid, ...]) -> list[tuple[int, ...]]:
    """Indices of blocks connected through groups, links, or loops."""
    n = len(blocks)
    parent = list(range(n))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i: int, j: int) -> None:
        parent[find(i)] = find(j)

    by_id = {b.bid_id: i for i, b in enumerate(blocks)}
    by_group: dict[str, int] = {}
    for i, b in enumerate(blocks):
        if b.group is not None:
            if b.group in by_group:
                union(i, by_group[b.group])
            by_group[b.group] = i
        if b.parent is not None and b.parent in by_id:
            union(i, by_id[b.parent])
        if b.loop is not None and b.loop in by_id:
            union(i, by_id[b.loop])
    comps: dict[int, list[int]] = {}
    for i in range(n):
        comps.setdefault(find(i), []).append(i)
    return [tuple(sorted(v)) for _, v in sorted(comps.items())]


def pattern_feasible(blocks: tuple[BlockBid, ...], z: tuple[int, ...]) -> bool:
    """Is the indicator assignment consistent with groups, links, loops?"""
    by_id = {b.bid_id: i for i, b in enumerate(blocks)}
    groups: dict[str, int] = {}
    for i, b in enumerate(blocks):
        if z[i]:
            if b.group is not None:
                groups[b.group] = groups.get(b.group, 0) + 1
                if groups[b.group] > 1:
                    return False
            if b.parent is not None and b.parent in by_id and not z[by_id[b.parent]]:
                return False
        if b.loop is not None and b.loop in by_id and z[i] != z[by_id[b.loop]]:
            return False
    return True


def iter_patterns(blocks: tuple[BlockBid, ...]) -> Iterator[tuple[int, ...]]:
    """All feasible indicator patterns, in ascending bitmask order."""
    for z in itertools.product((0, 1), repeat=len(blocks)):
        if pattern_feasible(blocks, z):
            yield z
