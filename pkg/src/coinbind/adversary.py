"""Adversarial agents: strategy theft, sandwiching, long-range and covert
sandwiching, and transaction invalidation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .coinalg import COVERT_LEAD_BLOCKS, CovertSignal, PublicView, ViewKind
from .market import (Direction, PoolState, Trade, WorldState, cost_to_reach,
                     execute_on_pool, spot_price, swap_exact_in, swap_exact_out)

ADVERSARY = "adversary"
COVERT_TIMEOUT_BLOCKS = 20
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AdversaryCapital:
    usd: float = 0.0
    tok: float = 0.0

    def __post_init__(self):
        if self.usd < 0 or self.tok < 0:
            raise ValueError("adversary capital must be >= 0")

    def for_direction(self, d: Direction) -> float:
        """Capital in the input asset of a trade in direction ``d``."""
        return self.usd if d is Direction.BUY else self.tok


# ---------------------------------------------------------------------------
# Theft
# ---------------------------------------------------------------------------

def theft_trade(view: PublicView, capital: AdversaryCapital,
                player: str = ADVERSARY) -> Optional[Trade]:
    """Copy of the CoinAlg's next trade, capped by the adversary's capital.

    Only a transparent view exposes the trade; any other view yields ``None``.
    The caller submits the copy one block ahead of the original.
    """
    if view.kind is not ViewKind.TRANSP:
        return None
    target = view.payload.mode
    if target is None or target.is_empty:
        return None
    amount = min(target.amount, capital.for_direction(target.direction))
    if amount <= 0:
        return None
    return Trade(player, target.direction, amount, target.price_limit,
                 all_or_none=target.all_or_none)


# ---------------------------------------------------------------------------
# Sandwiching
# ---------------------------------------------------------------------------

def _pool_of(world) -> tuple[PoolState, float]:
    if isinstance(world, WorldState):
        return world.pool, world.tx_fee
    return world, 0.0


def sandwich_legs(pool: PoolState, target: Trade, x: float) -> tuple[float, float, PoolState, float]:
    """Run frontrun, target and backrun on ``pool``.

    ``x`` is in the target's input asset.  Returns (usd_delta, victim_fill,
    final_pool, backrun_amount); ``usd_delta`` excludes fixed fees.
    """
    d = target.direction
    if d is Direction.BUY:
        got, pool = swap_exact_in(pool, Direction.BUY, x)
        victim_in, _, pool = execute_on_pool(pool, target)
        usd_back, pool = swap_exact_in(pool, Direction.SELL, got)
        return usd_back - x, victim_in, pool, got
    usd_got, pool = swap_exact_in(pool, Direction.SELL, x)
    victim_in, _, pool = execute_on_pool(pool, target)
    usd_paid, pool = swap_exact_out(pool, Direction.BUY, x)
    return usd_got - usd_paid, victim_in, pool, x


def sandwich_profit(world, target: Trade, x: float) -> float:
    """Net USD of a buy(x)/target/sell(x) sandwich on a scratch copy of ``world``.

    For a buy target ``x`` is USD and the backrun sells every TOK bought; for
    a sell target ``x`` is TOK and the backrun buys exactly ``x`` TOK back.
    The fixed per-transaction fee is charged twice.
    """
    if x < 0:
        raise ValueError("frontrun size must be >= 0")
    if x == 0:
        return 0.0
    pool, c = _pool_of(world)
    usd, _, _, _ = sandwich_legs(pool, target, x)
    return usd - 2.0 * c


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       rtol: float = 1e-6, max_iter: int = 200) -> tuple[float, float]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns (x, f(x)).

    Stops once the bracket is narrower than ``rtol * max(|hi|, tiny)``.  The
    endpoints are compared with the interior optimum.
    """
    if hi < lo:
        raise ValueError("empty interval")
    a, b = lo, hi
    scale = max(abs(hi), abs(lo), np.finfo(float).tiny)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= rtol * scale:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    best = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    fx, x = max(best, key=lambda t: t[0])
    return x, fx


def _limit_breakpoints(world, target: Trade, capital: float) -> tuple[float, list[float]]:
    """Upper useful size and kinks of the profit curve for a limit target.

    Past the size that pushes spot to the target's limit the victim fills
    nothing, so profit there is just two losing legs.  Below it the curve
    changes shape where the victim switches from a full to a partial fill.
    """
    pool, _ = _pool_of(world)
    lim = target.price_limit
    if lim is None or target.exact_out:
        return capital, []
    s = spot_price(pool)
    adverse = lim > s if target.direction is Direction.BUY else lim < s
    if not adverse:
        return 0.0, []
    edge = min(cost_to_reach(pool, lim), capital)
    if target.all_or_none:
        return edge, [edge]

    def fills(x: float) -> bool:
        after = swap_exact_in(pool, target.direction, x)[1] if x > 0 else pool
        room = lim > spot_price(after) if target.direction is Direction.BUY else lim < spot_price(after)
        return room and cost_to_reach(after, lim) >= target.amount

    if fills(edge) or not fills(0.0):
        return edge, [edge]
    lo, hi = 0.0, edge
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if fills(mid):
            lo = mid
        else:
            hi = mid
    return edge, [lo, edge]


def optimal_frontrun_size(world, target: Trade, capital: float,
                          profit_fn: Optional[Callable[[float], float]] = None,
                          rtol: float = 1e-6, max_iter: int = 200,
                          scan_points: int = 32) -> float:
    """Frontrun size maximising sandwich profit on ``[0, capital]``.

    A coarse scan over logarithmic and linear points, plus the kinks where
    the victim's limit starts to bind, brackets the peak first.  That keeps
    the golden-section search off the zero-fill plateau at large sizes and
    stops it from missing a narrow profitable window.
    """
    if capital <= 0:
        return 0.0
    f = profit_fn or (lambda x: sandwich_profit(world, target, x))
    if scan_points < 3:
        x, fx = golden_section_max(f, 0.0, capital, rtol, max_iter)
        return x if fx > f(0.0) else 0.0
    hi, kinks = (capital, []) if profit_fn else _limit_breakpoints(world, target, capital)
    if hi <= 0:
        return 0.0
    pts = np.unique(np.concatenate([[0.0], np.geomspace(hi * 1e-9, hi, scan_points),
                                    np.linspace(0.0, hi, scan_points + 1), kinks]))
    vals = np.array([f(x) for x in pts])
    i = int(np.argmax(vals))
    lo, up = pts[max(i - 1, 0)], pts[min(i + 1, len(pts) - 1)]
    x, fx = golden_section_max(f, lo, up, rtol, max_iter)
    if vals[i] >= fx:
        x, fx = pts[i], vals[i]
    return float(x) if fx > f(0.0) else 0.0


@dataclass(frozen=True)
class SandwichPlan:
    """Frontrun and backrun around ``target``.

    ``expected_profit`` is the extractable value before pool fees and fixed
    fees (net profit plus ``2 * fee_rate * input_usd`` plus ``2 * tx_fee``);
    NaN when the adversary acts without simulating the target.
    """

    frontrun: Trade
    backrun: Trade
    target: Optional[Trade]
    expected_profit: float
    input_usd: float
    tx_fee: float = 0.0

    @property
    def size(self) -> float:
        return self.frontrun.amount

    def net_profit(self, fee_rate: float) -> float:
        return self.expected_profit - 2.0 * fee_rate * self.input_usd - 2.0 * self.tx_fee


def plan_sandwich(world: WorldState, target: Trade, capital: AdversaryCapital,
                  player: str = ADVERSARY, **search) -> SandwichPlan:
    """Size a sandwich around ``target`` with the golden-section search."""
    d = target.direction
    budget = capital.for_direction(d)
    if d is Direction.BUY:
        budget = max(budget - 2.0 * world.tx_fee, 0.0)
    x = optimal_frontrun_size(world, target, budget, **search)
    return sandwich_plan_at(world, target, x, player)


def sandwich_plan_at(world: WorldState, target: Trade, x: float,
                     player: str = ADVERSARY) -> SandwichPlan:
    d = target.direction
    mu, c = world.pool.fee_rate, world.tx_fee
    if x <= 0:
        empty = Trade(player, d, 0.0)
        return SandwichPlan(empty, Trade(player, d.opposite, 0.0), target, 0.0, 0.0, c)
    usd, _, _, back = sandwich_legs(world.pool, target, x)
    net = usd - 2.0 * c
    input_usd = x if d is Direction.BUY else x * world.spot
    front = Trade(player, d, x)
    if d is Direction.BUY:
        backrun = Trade(player, Direction.SELL, back)
    else:
        backrun = Trade(player, Direction.BUY, back, exact_out=True)
    return SandwichPlan(front, backrun, target, net + 2.0 * mu * input_usd + 2.0 * c,
                        input_usd, c)


def abstain_check(plan: SandwichPlan, fee_rate: float, tx_fee: Optional[float] = None) -> bool:
    """True when the plan cannot cover two pool fees and two fixed fees."""
    if plan.size <= 0:
        return True
    if math.isnan(plan.expected_profit):
        return False
    c = plan.tx_fee if tx_fee is None else tx_fee
    return plan.expected_profit - 2.0 * fee_rate * plan.input_usd - 2.0 * c <= 0


# ---------------------------------------------------------------------------
# Long-range and covert sandwiching
# ---------------------------------------------------------------------------

def long_range_plan(last_trade_block: int, mean_gap: float) -> int:
    """Block at which the next CoinAlg trade is expected."""
    if not mean_gap > 0:
        raise ValueError("mean gap must be positive")
    return last_trade_block + max(1, int(round(mean_gap)))


@dataclass
class LongRangeTracker:
    """Keeps the block of the CoinAlg's last actual trade."""

    mean_gap: float
    last_trade_block: int = 0

    @property
    def target_block(self) -> int:
        return long_range_plan(self.last_trade_block, self.mean_gap)

    def observe_trade(self, block: int):
        self.last_trade_block = block


def covert_sandwich(signal: CovertSignal, world: WorldState, assumed_impact: float = 0.01,
                    capital: Optional[AdversaryCapital] = None,
                    player: str = ADVERSARY) -> SandwichPlan:
    """Frontrun sized to move the spot by ``assumed_impact`` in the signalled direction.

    The backrun amount is what the frontrun yields on the current pool; the
    harness backruns once the CoinAlg trade lands or after
    ``COVERT_TIMEOUT_BLOCKS`` blocks.
    """
    if assumed_impact < 0:
        raise ValueError("assumed impact must be >= 0")
    d = signal.direction
    s = world.spot
    c = world.tx_fee
    if assumed_impact == 0:
        return SandwichPlan(Trade(player, d, 0.0), Trade(player, d.opposite, 0.0),
                            None, math.nan, 0.0, c)
    target_price = s * (1.0 + assumed_impact) if d is Direction.BUY else s * (1.0 - assumed_impact)
    x = cost_to_reach(world.pool, target_price)
    if capital is not None:
        cap = capital.for_direction(d)
        if d is Direction.BUY:
            cap = max(cap - 2.0 * c, 0.0)
        x = min(x, cap)
    got, _ = swap_exact_in(world.pool, d, x)
    if d is Direction.BUY:
        backrun = Trade(player, Direction.SELL, got)
        input_usd = x
    else:
        backrun = Trade(player, Direction.BUY, x, exact_out=True)
        input_usd = x * s
    return SandwichPlan(Trade(player, d, x), backrun, None, math.nan, input_usd, c)


def covert_emit_block(next_trade_block: int) -> int:
    return next_trade_block - COVERT_LEAD_BLOCKS


# ---------------------------------------------------------------------------
# Invalidation
# ---------------------------------------------------------------------------

def grim_invalidate(world: WorldState, p_lim: float, capital_usd: float = math.inf,
                    player: str = ADVERSARY) -> Optional[Trade]:
    """Smallest buy pushing the spot one tick above ``p_lim``.

    Returns ``None`` (abstain) when the adversary cannot afford it, and an
    empty trade when the spot is already above the limit.
    """
    pool = world.pool
    if world.spot > p_lim:
        return Trade(player, Direction.BUY, 0.0)
    cost = cost_to_reach(pool, p_lim + pool.tick)
    if cost + world.tx_fee > capital_usd:
        return None
    return Trade(player, Direction.BUY, cost)
