"""Constant-product AMM and a minimal two-asset chain.

The market holds one TOK/USD pool (USD is the numeraire).  Swaps follow the
usual constant-product rule with the fee taken on input: the invariant is
evaluated on ``(1 - fee) * amount_in`` while the full input is added to the
reserves, so ``k`` grows with every fee-paying trade.

A block is an ordered tuple of trades.  If any trade in it is invalid (the
player cannot pay for it) the whole block is void, the world is left
untouched and :func:`apply_block` returns ``None``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

DEFAULT_TICK = 1e-6


class Asset(str, enum.Enum):
    TOK = "TOK"
    USD = "USD"


class Direction(str, enum.Enum):
    """Side of a trade from the point of view of TOK."""

    BUY = "buy"
    SELL = "sell"

    @property
    def opposite(self) -> "Direction":
        return Direction.SELL if self is Direction.BUY else Direction.BUY

    @property
    def assets(self) -> tuple[Asset, Asset]:
        """(bought, sold)"""
        if self is Direction.BUY:
            return Asset.TOK, Asset.USD
        return Asset.USD, Asset.TOK


class InvalidTrade(Exception):
    """A trade cannot be executed in the current state."""


@dataclass(frozen=True)
class PoolState:
    reserve_usd: float
    reserve_tok: float
    fee_rate: float = 0.0
    tick: float = DEFAULT_TICK

    def __post_init__(self):
        if not self.reserve_tok > 0:
            raise ValueError("reserve_tok must be positive")
        if not self.reserve_usd > 0:
            raise ValueError("reserve_usd must be positive")
        if not 0.0 <= self.fee_rate <= 0.1:
            raise ValueError("fee_rate must lie in [0, 0.1]")
        if not self.tick > 0:
            raise ValueError("tick must be positive")

    @property
    def k(self) -> float:
        return self.reserve_usd * self.reserve_tok

    @property
    def spot(self) -> float:
        return spot_price(self)

    @classmethod
    def at_price(cls, price: float, reserve_tok: float, **kw) -> "PoolState":
        return cls(price * reserve_tok, reserve_tok, **kw)


@dataclass(frozen=True)
class Trade:
    """A swap order.

    ``amount`` is in units of the input asset (USD for buys, TOK for sells),
    unless ``exact_out`` is set, in which case it is the amount of the output
    asset to receive.  A buy with ``price_limit`` only trades while the spot
    price is at or below the limit, a sell only while it is at or above it.
    With ``all_or_none`` the limit is checked once against the pre-trade spot
    and the order then fills completely or not at all.
    """

    player: str
    direction: Direction
    amount: float
    price_limit: Optional[float] = None
    all_or_none: bool = False
    exact_out: bool = False
    delay: int = 0

    def __post_init__(self):
        if self.amount < 0 or math.isnan(self.amount):
            raise ValueError(f"trade amount must be >= 0, got {self.amount}")
        if self.price_limit is not None and not self.price_limit > 0:
            raise ValueError("price_limit must be positive")

    @property
    def is_empty(self) -> bool:
        return self.amount == 0

    def scaled(self, amount: float, player: Optional[str] = None) -> "Trade":
        return replace(self, amount=amount, player=player or self.player)


Block = Sequence[Trade]


def buy(player: str, usd: float, limit: Optional[float] = None, **kw) -> Trade:
    return Trade(player, Direction.BUY, usd, limit, **kw)


def sell(player: str, tok: float, limit: Optional[float] = None, **kw) -> Trade:
    return Trade(player, Direction.SELL, tok, limit, **kw)


# ---------------------------------------------------------------------------
# Pool math
# ---------------------------------------------------------------------------

def spot_price(pool: PoolState) -> float:
    return pool.reserve_usd / pool.reserve_tok


def swap_exact_in(pool: PoolState, direction: Direction, amount_in: float,
                  fee_rate: Optional[float] = None) -> tuple[float, PoolState]:
    """Swap ``amount_in`` of the input asset; return (amount_out, new pool)."""
    if amount_in < 0:
        raise ValueError("amount_in must be >= 0")
    if amount_in == 0:
        return 0.0, pool
    mu = pool.fee_rate if fee_rate is None else fee_rate
    if direction is Direction.BUY:
        r_in, r_out = pool.reserve_usd, pool.reserve_tok
    else:
        r_in, r_out = pool.reserve_tok, pool.reserve_usd
    eff = (1.0 - mu) * amount_in
    # r_out - k / (r_in + eff), written without cancellation
    out = r_out * eff / (r_in + eff)
    new_in, new_out = r_in + amount_in, r_out - out
    if direction is Direction.BUY:
        return out, replace(pool, reserve_usd=new_in, reserve_tok=new_out)
    return out, replace(pool, reserve_usd=new_out, reserve_tok=new_in)


def swap_exact_out(pool: PoolState, direction: Direction, amount_out: float,
                   fee_rate: Optional[float] = None) -> tuple[float, PoolState]:
    """Receive exactly ``amount_out``; return (amount_in, new pool)."""
    if amount_out < 0:
        raise ValueError("amount_out must be >= 0")
    if amount_out == 0:
        return 0.0, pool
    mu = pool.fee_rate if fee_rate is None else fee_rate
    if direction is Direction.BUY:
        r_in, r_out = pool.reserve_usd, pool.reserve_tok
    else:
        r_in, r_out = pool.reserve_tok, pool.reserve_usd
    if amount_out >= r_out:
        raise InvalidTrade("requested output exceeds pool reserves")
    eff = r_in * amount_out / (r_out - amount_out)
    amount_in = eff / (1.0 - mu)
    new_in, new_out = r_in + amount_in, r_out - amount_out
    if direction is Direction.BUY:
        return amount_in, replace(pool, reserve_usd=new_in, reserve_tok=new_out)
    return amount_in, replace(pool, reserve_usd=new_out, reserve_tok=new_in)


def _positive_root(a: float, b: float, c: float) -> float:
    # larger root of a x^2 + b x + c with c <= 0 < a, b >= 0
    disc = b * b - 4.0 * a * c
    return (-2.0 * c) / (b + math.sqrt(disc))


def cost_to_reach(pool: PoolState, target: float,
                  fee_rate: Optional[float] = None) -> float:
    """Input needed to move the spot price to ``target``.

    USD for a target above spot, TOK for a target below it.  Zero if the
    target equals the spot.
    """
    if not target > 0:
        raise ValueError("target price must be positive")
    mu = pool.fee_rate if fee_rate is None else fee_rate
    x, y = pool.reserve_usd, pool.reserve_tok
    s = spot_price(pool)
    if target > s:
        # (x + a)(x + (1-mu) a) = target * k
        return _positive_root(1.0 - mu, x * (2.0 - mu), -x * x * (target / s - 1.0))
    if target < s:
        # k = target (y + a)(y + (1-mu) a)
        return _positive_root(1.0 - mu, y * (2.0 - mu), -y * y * (s / target - 1.0))
    return 0.0


def limit_buy(pool: PoolState, budget_usd: float, p_lim: float,
              fee_rate: Optional[float] = None) -> tuple[float, float, PoolState]:
    """Buy TOK with at most ``budget_usd`` while spot <= ``p_lim``.

    Returns (usd_spent, tok_out, new_pool).
    """
    if not p_lim > 0:
        raise ValueError("p_lim must be positive")
    if budget_usd < 0:
        raise ValueError("budget must be >= 0")
    if spot_price(pool) >= p_lim:
        return 0.0, 0.0, pool
    spend = min(budget_usd, cost_to_reach(pool, p_lim, fee_rate))
    out, new = swap_exact_in(pool, Direction.BUY, spend, fee_rate)
    return spend, out, new


def limit_sell(pool: PoolState, budget_tok: float, p_lim: float,
               fee_rate: Optional[float] = None) -> tuple[float, float, PoolState]:
    """Sell at most ``budget_tok`` TOK while spot >= ``p_lim``.

    Returns (tok_spent, usd_out, new_pool).
    """
    if not p_lim > 0:
        raise ValueError("p_lim must be positive")
    if budget_tok < 0:
        raise ValueError("budget must be >= 0")
    if spot_price(pool) <= p_lim:
        return 0.0, 0.0, pool
    spend = min(budget_tok, cost_to_reach(pool, p_lim, fee_rate))
    out, new = swap_exact_in(pool, Direction.SELL, spend, fee_rate)
    return spend, out, new


def invalidation_cost(p: float, r0: float, beta: float) -> float:
    """USD needed to lift a fee-free pool (p*r0, r0) from price p to p + beta."""
    if not (p > 0 and r0 > 0):
        raise ValueError("p and r0 must be positive")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    u = beta / p
    # p r0 (sqrt(1 + u) - 1), rationalised
    return p * r0 * u / (math.sqrt(1.0 + u) + 1.0)


def execute_on_pool(pool: PoolState, trade: Trade) -> tuple[float, float, PoolState]:
    """Run one order against the pool, ignoring balances.

    Returns (amount_in, amount_out, new_pool) with amounts in the trade's
    input and output assets.
    """
    if trade.is_empty:
        return 0.0, 0.0, pool
    s = spot_price(pool)
    d, lim = trade.direction, trade.price_limit
    if lim is not None:
        breached = s > lim if d is Direction.BUY else s < lim
        if breached:
            return 0.0, 0.0, pool
    if trade.exact_out:
        if lim is not None and not trade.all_or_none:
            raise ValueError("exact-out orders support only all-or-none limits")
        amount_in, new = swap_exact_out(pool, d, trade.amount)
        return amount_in, trade.amount, new
    if lim is None or trade.all_or_none:
        out, new = swap_exact_in(pool, d, trade.amount)
        return trade.amount, out, new
    if d is Direction.BUY:
        return limit_buy(pool, trade.amount, lim)
    return limit_sell(pool, trade.amount, lim)


# ---------------------------------------------------------------------------
# World state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Balance:
    usd: float = 0.0
    tok: float = 0.0

    def value(self, price: float) -> float:
        return self.usd + self.tok * price

    def get(self, asset: Asset) -> float:
        return self.usd if asset is Asset.USD else self.tok


@dataclass(frozen=True)
class Fill:
    trade: Trade
    amount_in: float
    amount_out: float

    @property
    def filled(self) -> bool:
        return self.amount_in > 0

    @property
    def tok_delta(self) -> float:
        """Signed TOK change for the trading player."""
        if self.trade.direction is Direction.BUY:
            return self.amount_out
        return -self.amount_in

    @property
    def usd_delta(self) -> float:
        """Signed USD change for the trading player, before the fixed fee."""
        if self.trade.direction is Direction.BUY:
            return -self.amount_in
        return self.amount_out


@dataclass(frozen=True)
class WorldState:
    """Pool, player balances, block height and the fixed per-tx fee ``tx_fee``.

    ``fees_collected`` accumulates the fixed fees paid so that every unit of
    each asset stays accounted for.
    """

    pool: PoolState
    balances: Mapping[str, Balance] = field(default_factory=dict)
    block_height: int = 0
    tx_fee: float = 0.0
    fees_collected: float = 0.0

    def __post_init__(self):
        if self.tx_fee < 0:
            raise ValueError("tx_fee must be >= 0")
        if self.block_height < 0:
            raise ValueError("block_height must be >= 0")
        for who, bal in self.balances.items():
            if bal.usd < 0 or bal.tok < 0:
                raise ValueError(f"negative balance for {who!r}")

    @property
    def spot(self) -> float:
        return spot_price(self.pool)

    def balance(self, player: str) -> Balance:
        return self.balances.get(player, Balance())

    def with_balance(self, player: str, bal: Balance) -> "WorldState":
        new = dict(self.balances)
        new[player] = bal
        return replace(self, balances=new)

    def with_pool(self, pool: PoolState) -> "WorldState":
        return replace(self, pool=pool)

    def total(self, asset: Asset) -> float:
        """Units of ``asset`` held by the pool, players and the fee sink."""
        held = sum(b.get(asset) for b in self.balances.values())
        if asset is Asset.USD:
            return held + self.pool.reserve_usd + self.fees_collected
        return held + self.pool.reserve_tok


@dataclass(frozen=True)
class BlockReceipt:
    world: WorldState
    fills: tuple[Fill, ...]

    def fills_for(self, player: str) -> tuple[Fill, ...]:
        return tuple(f for f in self.fills if f.trade.player == player)


# Slack for float round-off when a player spends its whole balance.
_BALANCE_SLACK = 1e-9


def execute_trade(world: WorldState, trade: Trade) -> tuple[WorldState, Fill]:
    """Execute a single trade; raises :class:`InvalidTrade` if unaffordable."""
    if trade.is_empty:
        return world, Fill(trade, 0.0, 0.0)
    bal = world.balance(trade.player)
    usd, tok = bal.usd - world.tx_fee, bal.tok
    if usd < -_BALANCE_SLACK * max(1.0, world.tx_fee):
        raise InvalidTrade(f"{trade.player} cannot pay the transaction fee")
    amount_in, amount_out, pool = execute_on_pool(world.pool, trade)
    if trade.direction is Direction.BUY:
        usd, tok = usd - amount_in, tok + amount_out
        have = bal.usd - world.tx_fee
    else:
        usd, tok = usd + amount_out, tok - amount_in
        have = bal.tok
    if min(usd, tok) < 0:
        if min(usd, tok) < -_BALANCE_SLACK * max(1.0, abs(have)):
            raise InvalidTrade(
                f"{trade.player} lacks funds for {trade.direction.value} of {trade.amount}")
        usd, tok = max(usd, 0.0), max(tok, 0.0)
    new = replace(world, pool=pool, fees_collected=world.fees_collected + world.tx_fee)
    return new.with_balance(trade.player, Balance(max(usd, 0.0), tok)), \
        Fill(trade, amount_in, amount_out)


def execute_block(world: WorldState, block: Iterable[Trade],
                  advance: bool = True) -> Optional[BlockReceipt]:
    """Execute trades in order.  ``None`` if the block is invalid."""
    fills = []
    w = world
    try:
        for trade in block:
            w, f = execute_trade(w, trade)
            fills.append(f)
    except InvalidTrade:
        return None
    if advance:
        w = replace(w, block_height=world.block_height + 1)
    return BlockReceipt(w, tuple(fills))


def apply_block(world: WorldState, block: Iterable[Trade]) -> Optional[WorldState]:
    """The chain transition: new world, or ``None`` for an invalid block."""
    receipt = execute_block(world, block)
    return None if receipt is None else receipt.world
