"""Convexified market: relaxation, welfare LP, and the price dual.

The convexified market replaces every agent's value by its concave envelope
over the convex hull of the feasible set.  In the bid language that is an LP:
block acceptances relax to [0, 1] with the minimum acceptance ratio dropped,
exclusive groups become sum <= 1, parent links become r_parent*a_child <=
a_parent, and looped pairs become the two ratio inequalities a_i >= r_i*a_j,
a_j >= r_j*a_i (the exact hull of the indicator-coupled pair; plain equality
at ratio 1).  Curves are already concave and enter step by step.

Strong duality needs no constraint qualification here because the program is
a finite LP; `solve_lp` asserts primal = dual on every call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .config import resolve_tol
from .demand import agent_best_surplus
from .model import Agent, Allocation, BlockBid, HourlyCurveBid, Market


@dataclass(frozen=True)
class VarInfo:
    kind: str            # "block" | "curve"
    agent_index: int
    bid_id: str
    step_index: int = -1
    contribution: float = 0.0   # signed bundle change at `hour` when fully taken
    hour: int = -1


@dataclass
class ConvexifiedProgram:
    """The welfare LP of the convexified market."""

    market: Market
    objective: np.ndarray
    balance: np.ndarray          # (K, n) equality rows, rhs 0
    a_ub: np.ndarray             # group/link/loop rows, rhs b_ub
    b_ub: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    var_info: tuple[VarInfo, ...]
    block_col: dict
    curve_cols: dict
    row_labels: tuple[str, ...]

    @property
    def num_vars(self) -> int:
        return self.objective.size

    def solve_raw(self, overrides: dict | None = None) -> tuple[lp.LpResult, Allocation]:
        """Solve with optional per-block bound overrides {bid_id: (lo, hi)}."""
        lo = self.lo.copy()
        hi = self.hi.copy()
        if overrides:
            for bid_id, (l, h) in overrides.items():
                col = self.block_col[bid_id]
                lo[col], hi[col] = l, h
        res = lp.solve_lp(self.objective, a_eq=self.balance,
                          b_eq=np.zeros(self.balance.shape[0]),
                          a_ub=self.a_ub, b_ub=self.b_ub, lo=lo, hi=hi)
        return res, self.allocation_from(res.x)

    def allocation_from(self, x: np.ndarray) -> Allocation:
        acc: dict[str, float] = {}
        for bid_id, col in self.block_col.items():
            acc[bid_id] = float(x[col])
        for bid_id, cols in self.curve_cols.items():
            acc[bid_id] = float(sum(x[c] * self.var_info[c].contribution for c in cols))
        return Allocation(acc)

    def interior_block_count(self, x: np.ndarray, tol: float = 1e-7) -> int:
        n = 0
        for col in self.block_col.values():
            if self.lo[col] + tol < x[col] < self.hi[col] - tol:
                n += 1
        return n

    def binding_ub_rows(self, x: np.ndarray, tol: float = 1e-7) -> int:
        if self.a_ub.shape[0] == 0:
            return 0
        resid = self.b_ub - self.a_ub @ x
        return int(np.sum(resid <= tol * (1.0 + np.abs(self.b_ub))))


def build_convexified(market: Market) -> ConvexifiedProgram:
    K = market.num_commodities
    c: list[float] = []
    info: list[VarInfo] = []
    block_col: dict[str, int] = {}
    curve_cols: dict[str, list[int]] = {}
    cols_balance: list[tuple[int, int, float]] = []   # (row, col, coeff)

    for ai, agent in enumerate(market.agents):
        for bid in agent.bids:
            if isinstance(bid, BlockBid):
                col = len(c)
                block_col[bid.bid_id] = col
                c.append(bid.price)
                info.append(VarInfo("block", ai, bid.bid_id))
                for k, qk in enumerate(bid.quantity):
                    if qk != 0.0:
                        cols_balance.append((k, col, float(qk)))
            else:
                cols = []
                for si, step in enumerate(bid.steps):
                    col = len(c)
                    contrib = step.width if step.is_buy else -step.width
                    c.append(step.price * contrib)
                    info.append(VarInfo("curve", ai, bid.bid_id, si, contrib, bid.hour))
                    cols_balance.append((bid.hour, col, contrib))
                    cols.append(col)
                curve_cols[bid.bid_id] = cols

    n = len(c)
    balance = np.zeros((K, n))
    for row, col, coeff in cols_balance:
        balance[row, col] = coeff

    ub_rows: list[np.ndarray] = []
    b_ub: list[float] = []
    labels: list[str] = []
    groups: dict[str, list[int]] = {}
    for agent in market.agents:
        for bid in agent.block_bids:
            if bid.group is not None:
                groups.setdefault(bid.group, []).append(block_col[bid.bid_id])
    for gid in sorted(groups):
        row = np.zeros(n)
        row[groups[gid]] = 1.0
        ub_rows.append(row)
        b_ub.append(1.0)
        labels.append(f"group:{gid}")
    seen_loops: set[frozenset] = set()
    for agent in market.agents:
        for bid in agent.block_bids:
            if bid.parent is not None and bid.parent in block_col:
                parent = market.bid_index[bid.parent][1]
                row = np.zeros(n)
                row[block_col[bid.bid_id]] = parent.mar
                row[block_col[bid.parent]] = -1.0
                ub_rows.append(row)
                b_ub.append(0.0)
                labels.append(f"link:{bid.bid_id}")
            if bid.loop is not None and bid.loop in block_col:
                key = frozenset((bid.bid_id, bid.loop))
                if key in seen_loops:
                    continue
                seen_loops.add(key)
                partner = market.bid_index[bid.loop][1]
                for this, other in ((bid, partner), (partner, bid)):
                    row = np.zeros(n)
                    row[block_col[other.bid_id]] = this.mar
                    row[block_col[this.bid_id]] = -1.0
                    ub_rows.append(row)
                    b_ub.append(0.0)
                    labels.append(f"loop:{this.bid_id}")

    a_ub = np.array(ub_rows).reshape(len(ub_rows), n) if ub_rows else np.zeros((0, n))
    return ConvexifiedProgram(
        market=market,
        objective=np.asarray(c, dtype=float),
        balance=balance,
        a_ub=a_ub,
        b_ub=np.asarray(b_ub, dtype=float),
        lo=np.zeros(n),
        hi=np.ones(n),
        var_info=tuple(info),
        block_col=block_col,
        curve_cols={k: tuple(v) for k, v in curve_cols.items()},
        row_labels=tuple(labels),
    )


@dataclass
class DualSolution:
    """Optimal prices and a vertex allocation of the convexified welfare LP."""

    lambda_star: np.ndarray
    primal_value: float
    dual_objective: float
    allocation: Allocation
    var_values: np.ndarray
    program: ConvexifiedProgram


def dual_value(market: Market, lam, tol: float | None = None) -> float:
    """Price dual: sum over agents of the best surplus at prices lam.

    The per-agent maximum over the true feasible set equals the maximum of
    the concave envelope over the hull (the value is linear on each piece),
    so this is exactly the dual function of the convexified market.
    """
    lam = np.asarray(lam, dtype=float)
    return float(sum(agent_best_surplus(a, lam, tol) for a in market.agents))


def solve_lp(market_or_program, tol: float | None = None) -> DualSolution:
    """Solve the convexified welfare LP; asserts strong duality.

    Accepts a Market or a prebuilt ConvexifiedProgram.  Returns the vertex
    primal allocation, the balance-row multipliers lambda*, and the dual
    objective evaluated at lambda* (equal to the primal value within
    tolerance, by LP duality).
    """
    t = resolve_tol(tol)
    program = (market_or_program if isinstance(market_or_program, ConvexifiedProgram)
               else build_convexified(market_or_program))
    res, allocation = program.solve_raw()
    lam = res.duals_eq
    vd = dual_value(program.market, lam, t)
    vp = res.value
    if abs(vp - vd) > t * (1.0 + abs(vp)):
        raise AssertionError(
            f"duality gap in convexified LP: primal {vp!r}, dual {vd!r}")
    if vd < vp - t * (1.0 + abs(vp)):
        raise AssertionError("weak duality violated")
    return DualSolution(lam, vp, vd, allocation, res.x, program)
