"""The CoinAlg agent: trade distributions, public views, schedules, the covert
channel and the randomizing wrapper."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from .market import (Asset, Balance, Direction, Trade, WorldState, apply_block,
                     cost_to_reach, swap_exact_in)
from .oracle import Prediction

COVERT_LEAD_BLOCKS = 10
PROB_TOL = 1e-9


# ---------------------------------------------------------------------------
# Trade grid and distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TradeGrid:
    """Finite grid of trades: directions x logarithmic size buckets.

    ``buy_edges`` are USD amounts and ``sell_edges`` TOK amounts; each has
    ``n_buckets + 1`` increasing entries.  Cell ``i`` of direction ``d`` has
    index ``d * n_buckets + i``; the extra index ``size`` stands for "no trade".
    """

    buy_edges: tuple[float, ...]
    sell_edges: tuple[float, ...]
    directions: tuple[Direction, ...] = (Direction.BUY, Direction.SELL)

    def __post_init__(self):
        for edges in (self.buy_edges, self.sell_edges):
            if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])) or edges[0] <= 0:
                raise ValueError("grid edges must be positive and strictly increasing")
        if len(self.buy_edges) != len(self.sell_edges):
            raise ValueError("buy and sell grids must have the same bucket count")

    @classmethod
    def logarithmic(cls, buy_range: tuple[float, float], sell_range: tuple[float, float],
                    n_buckets: int = 16) -> "TradeGrid":
        return cls(tuple(np.geomspace(*buy_range, n_buckets + 1)),
                   tuple(np.geomspace(*sell_range, n_buckets + 1)))

    @classmethod
    def for_capital(cls, usd: float, tok: float, spot: float, fee_rate: float = 0.0,
                    n_buckets: int = 16) -> "TradeGrid":
        """Buckets from the fee breakeven size up to the full capital."""
        lo = max(2.0 * fee_rate, 1e-4)
        tok = tok if tok > 0 else usd / spot
        usd = usd if usd > 0 else tok * spot
        return cls.logarithmic((lo * usd, usd), (lo * tok, tok), n_buckets)

    @property
    def n_buckets(self) -> int:
        return len(self.buy_edges) - 1

    @property
    def size(self) -> int:
        return len(self.directions) * self.n_buckets

    @property
    def null_index(self) -> int:
        return self.size

    def edges(self, direction: Direction) -> tuple[float, ...]:
        return self.buy_edges if direction is Direction.BUY else self.sell_edges

    def bucket_of(self, trade: Trade) -> int:
        edges = self.edges(trade.direction)
        i = int(np.searchsorted(edges, trade.amount, side="right")) - 1
        return min(max(i, 0), self.n_buckets - 1)

    def index_of(self, trade: Optional[Trade]) -> int:
        if trade is None or trade.is_empty:
            return self.null_index
        return self.directions.index(trade.direction) * self.n_buckets + self.bucket_of(trade)

    def trade_at(self, index: int, player: str = "") -> Optional[Trade]:
        """Representative trade of a cell (geometric bucket midpoint, no limit)."""
        if index == self.null_index:
            return None
        d = self.directions[index // self.n_buckets]
        e = self.edges(d)
        i = index % self.n_buckets
        return Trade(player, d, math.sqrt(e[i] * e[i + 1]))

    def trades(self, player: str = "") -> list[Trade]:
        return [self.trade_at(i, player) for i in range(self.size)]


@dataclass(frozen=True)
class TradeDistribution:
    """Finite distribution over trades; ``None`` in the support is "no trade"."""

    support: tuple[Optional[Trade], ...]
    probs: np.ndarray
    grid: Optional[TradeGrid] = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (len(self.support),):
            raise ValueError("one probability per support element required")
        if len(p) == 0:
            raise ValueError("empty distribution")
        if np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL:
            raise ValueError("probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", p)

    @classmethod
    def point(cls, trade: Optional[Trade], grid: Optional[TradeGrid] = None) -> "TradeDistribution":
        return cls((trade,), np.ones(1), grid)

    @classmethod
    def uniform(cls, trades: Sequence[Optional[Trade]], grid: Optional[TradeGrid] = None):
        if not trades:
            raise ValueError("cannot build a uniform distribution over nothing")
        return cls(tuple(trades), np.full(len(trades), 1.0 / len(trades)), grid)

    @property
    def is_degenerate(self) -> bool:
        return len(self.support) == 1 or np.count_nonzero(self.probs) == 1

    @property
    def mode(self) -> Optional[Trade]:
        return self.support[int(np.argmax(self.probs))]

    def items(self):
        return zip(self.support, self.probs)

    def vector(self, grid: Optional[TradeGrid] = None) -> np.ndarray:
        """Probability mass per grid cell, with "no trade" in the last slot."""
        g = grid or self.grid
        if g is None:
            raise ValueError("distribution has no grid")
        v = np.zeros(g.size + 1)
        for t, p in self.items():
            v[g.index_of(t)] += p
        return v

    def direction_marginal(self) -> dict[Optional[Direction], float]:
        out: dict[Optional[Direction], float] = {}
        for t, p in self.items():
            key = None if t is None or t.is_empty else t.direction
            out[key] = out.get(key, 0.0) + float(p)
        return out

    def with_jitter(self, jitter_blocks: int) -> "TradeDistribution":
        """Spread every trade uniformly over delays 0..jitter_blocks."""
        if jitter_blocks <= 0:
            return self
        n = jitter_blocks + 1
        support, probs = [], []
        for t, p in self.items():
            if t is None:
                support.append(None)
                probs.append(p)
                continue
            for j in range(n):
                support.append(replace(t, delay=t.delay + j))
                probs.append(p / n)
        return TradeDistribution(tuple(support), np.array(probs), self.grid)


Coins = Union[float, np.random.Generator]


def alg_sample(dist: TradeDistribution, coins: Coins) -> Optional[Trade]:
    """Inverse-CDF sampling over the support in listed order."""
    if len(dist.support) == 0:
        raise ValueError("empty support")
    u = coins.random() if isinstance(coins, np.random.Generator) else float(coins)
    if not 0.0 <= u < 1.0:
        raise ValueError("coin must lie in [0, 1)")
    cdf = np.cumsum(dist.probs)
    i = int(np.searchsorted(cdf, u, side="right"))
    return dist.support[min(i, len(dist.support) - 1)]


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

def ideal_trade(world: WorldState, prediction: Prediction, player: str) -> Optional[Trade]:
    """Limit order that trades the pool up (or down) to the predicted price.

    The limit is shaded by the pool fee so that every marginal unit costs at
    most the predicted price.  Returns ``None`` when no trade clears the fixed
    transaction fee.
    """
    pool, c = world.pool, world.tx_fee
    mu, s, p_hat = pool.fee_rate, world.spot, prediction.price
    bal = world.balance(player)
    buy_lim = p_hat * (1.0 - mu)
    if buy_lim > s:
        spend = min(max(bal.usd - c, 0.0), cost_to_reach(pool, buy_lim))
        if spend <= 0:
            return None
        out, _ = swap_exact_in(pool, Direction.BUY, spend)
        if out * p_hat - spend <= c:
            return None
        return Trade(player, Direction.BUY, spend, buy_lim)
    sell_lim = p_hat / (1.0 - mu)
    if sell_lim < s:
        if bal.usd < c:
            return None
        spend = min(bal.tok, cost_to_reach(pool, sell_lim))
        if spend <= 0:
            return None
        out, _ = swap_exact_in(pool, Direction.SELL, spend)
        if out - spend * p_hat <= c:
            return None
        return Trade(player, Direction.SELL, spend, sell_lim)
    return None


def buy_then_sell_trade(world: WorldState, prediction: Prediction, player: str,
                        base_tok: float = 0.0) -> Optional[Trade]:
    """Two-step variant: buy toward the prediction, unwind the position next time."""
    bal = world.balance(player)
    if bal.tok > base_tok + 1e-12:
        return Trade(player, Direction.SELL, bal.tok - base_tok)
    t = ideal_trade(world, prediction, player)
    return t if t is not None and t.direction is Direction.BUY else None


STRATEGIES = ("ideal", "buy_then_sell")


def alg_dist(world: WorldState, prediction: Prediction, strategy: "CoinAlg") -> TradeDistribution:
    """Distribution over the CoinAlg's next trade (a point mass for the built-ins)."""
    return strategy.dist(world, prediction)


# ---------------------------------------------------------------------------
# Public functions
# ---------------------------------------------------------------------------

class ViewKind(str, enum.Enum):
    PRIV = "priv"
    ASSET = "asset"
    DIR = "dir"
    TRANSP = "transp"


@dataclass(frozen=True)
class PublicView:
    """What a public function reveals.

    ``payload`` is ``None`` for priv, a frozenset of assets for asset, a tuple
    of ((bought, sold) or None, probability) pairs for dir and the
    distribution itself for transp.
    """

    kind: ViewKind
    payload: object = None

    @property
    def pair(self) -> Optional[tuple[Asset, Asset]]:
        """The (bought, sold) pair of a dir view with a single direction."""
        if self.kind is not ViewKind.DIR:
            raise ValueError("only directional views carry a pair")
        keys = [k for k, p in self.payload if p > 0]
        if len(keys) != 1:
            raise ValueError("direction is randomized")
        return keys[0]


def public_view(kind: Union[ViewKind, str], dist: TradeDistribution) -> PublicView:
    kind = ViewKind(kind)
    if kind is ViewKind.PRIV:
        return PublicView(kind)
    if kind is ViewKind.ASSET:
        assets = set()
        for t, p in dist.items():
            if t is not None and not t.is_empty and p > 0:
                assets.update(t.direction.assets)
        return PublicView(kind, frozenset(assets))
    if kind is ViewKind.DIR:
        marg = dist.direction_marginal()
        payload = tuple(sorted(((None if d is None else d.assets), p)
                               for d, p in marg.items() if p > 0))
        return PublicView(kind, payload)
    return PublicView(kind, dist)


def _valid(trade: Trade, balance: Optional[Balance]) -> bool:
    if balance is None:
        return True
    have = balance.usd if trade.direction is Direction.BUY else balance.tok
    return trade.amount <= have


def induced_distribution(view: PublicView, grid: TradeGrid,
                         balance: Optional[Balance] = None) -> TradeDistribution:
    """Uniform belief over the valid grid trades consistent with ``view``."""
    if view.kind is ViewKind.TRANSP:
        d = view.payload
        return TradeDistribution(d.support, d.probs.copy(), d.grid or grid)
    valid = [t for t in grid.trades() if _valid(t, balance)]
    if view.kind is ViewKind.PRIV:
        if not valid:
            raise ValueError("no valid trades on the grid")
        return TradeDistribution.uniform(valid, grid)
    if view.kind is ViewKind.ASSET:
        if not view.payload:
            return TradeDistribution.point(None, grid)
        cons = [t for t in valid if set(t.direction.assets) <= view.payload]
        if not cons:
            raise ValueError("no valid trades consistent with the asset view")
        return TradeDistribution.uniform(cons, grid)
    support, probs = [], []
    for pair, q in view.payload:
        if pair is None:
            support.append(None)
            probs.append(q)
            continue
        cons = [t for t in valid if t.direction.assets == pair]
        if not cons:
            raise ValueError(f"no valid trades with direction {pair}")
        support.extend(cons)
        probs.extend([q / len(cons)] * len(cons))
    return TradeDistribution(tuple(support), np.array(probs), grid)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedSchedule:
    interval: int

    def __post_init__(self):
        if self.interval < 1:
            raise ValueError("interval must be >= 1")

    @property
    def mean_gap(self) -> float:
        return float(self.interval)


@dataclass
class PoissonSchedule:
    """Trade times of a discretised Poisson process (geometric gaps, mean ``mean_gap``)."""

    mean_gap: float
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if not self.mean_gap > 0:
            raise ValueError("mean gap must be positive")
        self.reset()

    def reset(self):
        self._rng = np.random.default_rng(self.seed)

    def draw_gap(self) -> int:
        if self.mean_gap <= 1:
            return 1
        return int(self._rng.geometric(1.0 / self.mean_gap))


Schedule = Union[FixedSchedule, PoissonSchedule]


def next_trade_block(schedule: Schedule, last_block: int) -> int:
    if isinstance(schedule, FixedSchedule):
        return last_block + schedule.interval
    return last_block + schedule.draw_gap()


# ---------------------------------------------------------------------------
# Covert channel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CovertSignal:
    emit_block: int
    direction: Direction


def planned_direction(dist: TradeDistribution) -> Optional[Direction]:
    marg = {d: p for d, p in dist.direction_marginal().items() if d is not None}
    if not marg:
        return None
    return max(marg, key=marg.get)


def covert_emit(next_block: int, dist: TradeDistribution, now: int,
                fallback: Direction = Direction.BUY) -> Optional[CovertSignal]:
    """One direction bit, exactly ``COVERT_LEAD_BLOCKS`` before the next trade.

    When the plan is "no trade" the bit repeats ``fallback`` (the last planned
    direction), so the channel never reveals whether a trade will happen.
    """
    if now != next_block - COVERT_LEAD_BLOCKS:
        return None
    d = planned_direction(dist)
    return CovertSignal(now, d if d is not None else fallback)


@dataclass
class CovertChannel:
    """Stateful sender side: remembers the last direction and counts bits sent."""

    last_direction: Direction = Direction.BUY
    bits_by_epoch: dict = field(default_factory=dict)

    def emit(self, next_block: int, dist: TradeDistribution, now: int) -> Optional[CovertSignal]:
        sig = covert_emit(next_block, dist, now, self.last_direction)
        if sig is not None:
            self.last_direction = sig.direction
            self.bits_by_epoch[next_block] = self.bits_by_epoch.get(next_block, 0) + 1
        return sig


# ---------------------------------------------------------------------------
# Randomizing wrapper
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditEntry:
    epoch: int
    dist: TradeDistribution
    coins_used: int


class RandomizingWrapper:
    """Samples trades with private coins and executes them.

    The generator is never exposed; the audit log records the distribution
    each epoch was drawn from and how many coins were used, not their values.
    """

    def __init__(self, seed: int = 0, jitter_blocks: int = 0):
        if jitter_blocks < 0:
            raise ValueError("jitter_blocks must be >= 0")
        self.jitter_blocks = jitter_blocks
        self.__rng = np.random.default_rng(seed)
        self._audit: list[AuditEntry] = []
        self._epoch = 0

    @property
    def audit_log(self) -> tuple[AuditEntry, ...]:
        return tuple(self._audit)

    def per_epoch_dists(self) -> dict[int, TradeDistribution]:
        return {e.epoch: e.dist for e in self._audit}

    def sample(self, dist: TradeDistribution, epoch: Optional[int] = None) -> Optional[Trade]:
        d = dist.with_jitter(self.jitter_blocks)
        coins = 0 if d.is_degenerate else 1
        t = d.mode if coins == 0 else alg_sample(d, self.__rng)
        epoch = self._epoch if epoch is None else epoch
        self._audit.append(AuditEntry(epoch, d, coins))
        self._epoch = epoch + 1
        return t

    def execute(self, trade: Optional[Trade], world: WorldState) -> Optional[WorldState]:
        if trade is None:
            return world
        return apply_block(world, [trade])


def rw_sample(wrapper: RandomizingWrapper, dist: TradeDistribution,
              epoch: Optional[int] = None) -> Optional[Trade]:
    return wrapper.sample(dist, epoch)


def rw_execute(wrapper: RandomizingWrapper, trade: Optional[Trade],
               world: WorldState) -> Optional[WorldState]:
    return wrapper.execute(trade, world)


# ---------------------------------------------------------------------------
# The agent
# ---------------------------------------------------------------------------

@dataclass
class CoinAlg:
    """Configuration of one CoinAlg: strategy, public function and trade grid."""

    player: str = "coinalg"
    mode: str = "ideal"
    view: ViewKind = ViewKind.TRANSP
    grid: Optional[TradeGrid] = None
    jitter_blocks: int = 0
    base_tok: float = 0.0
    custom: Optional[Callable[[WorldState, Prediction], TradeDistribution]] = None

    def __post_init__(self):
        self.view = ViewKind(self.view)
        if self.custom is None and self.mode not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.mode!r}")

    def trade(self, world: WorldState, prediction: Prediction) -> Optional[Trade]:
        if self.mode == "buy_then_sell":
            return buy_then_sell_trade(world, prediction, self.player, self.base_tok)
        return ideal_trade(world, prediction, self.player)

    def dist(self, world: WorldState, prediction: Prediction) -> TradeDistribution:
        if self.custom is not None:
            d = self.custom(world, prediction)
            d = d if d.grid is not None else replace(d, grid=self.grid)
        else:
            d = TradeDistribution.point(self.trade(world, prediction), self.grid)
        return d.with_jitter(self.jitter_blocks)

    def public(self, dist: TradeDistribution) -> PublicView:
        return public_view(self.view, dist)

    def grid_for(self, world: WorldState) -> TradeGrid:
        if self.grid is None:
            bal = world.balance(self.player)
            self.grid = TradeGrid.for_capital(bal.usd, bal.tok, world.spot, world.pool.fee_rate)
        return self.grid

    def induced(self, world: WorldState, dist: TradeDistribution) -> TradeDistribution:
        return induced_distribution(self.public(dist), self.grid_for(world),
                                    world.balance(self.player))
