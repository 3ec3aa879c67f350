"""Sandwich and ultimatum games between a CoinAlg and an adversary.

Single-shot analysis simulates the sandwich game on the AMM; the ultimatum
and repeated games are closed forms plus a round-by-round grim-trigger
simulator.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .adversary import sandwich_profit, sandwich_legs
from .market import Direction, Trade, WorldState, cost_to_reach, swap_exact_in
from .oracle import Prediction


@dataclass(frozen=True)
class PayoffPair:
    pi_C: float
    pi_A: float

    def __post_init__(self):
        if not (math.isfinite(self.pi_C) and math.isfinite(self.pi_A)):
            raise ValueError("payoffs must be finite")

    def __iter__(self):
        return iter((self.pi_C, self.pi_A))


@dataclass(frozen=True)
class UltimatumParams:
    """Surplus ``s`` split between the CoinAlg (weight ``c1``) and the adversary (``c2``).

    ``z`` scales the adversary's cost of burning an offer ``e``: ``z * sqrt(e)``.
    """

    s: float
    c1: float = 2.0
    c2: float = 1.0
    z: float = 1.0
    fees: float = 0.0
    delta_C: float = 0.9
    delta_A: float = 0.9

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError("surplus must be positive")
        if not self.c1 > self.c2 > 0:
            raise ValueError("need c1 > c2 > 0")
        if not self.z > 0:
            raise ValueError("z must be positive")
        if self.fees < 0:
            raise ValueError("fees must be >= 0")
        for d in (self.delta_C, self.delta_A):
            if not 0.0 < d < 1.0:
                raise ValueError("discount factors must lie in (0, 1)")


# ---------------------------------------------------------------------------
# Single-shot sandwich game
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SingleShotResult:
    p_lim: float
    payoffs: PayoffPair
    private: PayoffPair
    frontrun: float
    abstained: bool

    @property
    def cost_of_transparency(self) -> float:
        return self.private.pi_C - self.payoffs.pi_C


def coinalg_order(world: WorldState, prediction: Prediction, player: str,
                  p_lim: float) -> Trade:
    """All-or-none buy pushing the pool to the predicted price, valid while spot <= ``p_lim``."""
    budget = max(world.balance(player).usd - world.tx_fee, 0.0)
    u = 0.0
    if prediction.price > world.spot:
        u = min(budget, cost_to_reach(world.pool, prediction.price))
    return Trade(player, Direction.BUY, u, p_lim, all_or_none=True)


def _coinalg_payoff(usd_in: float, tok_out: float, p_hat: float, c: float) -> float:
    return tok_out * p_hat - usd_in - c


def best_response_scan(world: WorldState, target: Trade, capital: float,
                       n_points: int = 2001) -> tuple[float, float]:
    """Exhaustive scan of frontrun sizes; returns (x, profit), x = 0 on abstention.

    The grid is dense near zero, where a frontrun still leaves the order valid.
    """
    if capital <= 0:
        return 0.0, 0.0
    xs = np.unique(np.concatenate([
        np.geomspace(capital * 1e-15, capital, n_points),
        np.linspace(0.0, capital, n_points)[1:]]))
    if target.price_limit is not None:
        edge = cost_to_reach(world.pool, target.price_limit) if target.price_limit > world.spot else 0.0
        if 0 < edge < capital:
            xs = np.unique(np.concatenate([xs, edge * np.linspace(0.0, 1.0, n_points)[1:]]))
    best_x, best = 0.0, 0.0
    for x in xs:
        v = sandwich_profit(world, target, float(x))
        if v > best:
            best_x, best = float(x), v
    return best_x, best


def sdwch_single_shot(world: WorldState, prediction: Prediction, player: str = "coinalg",
                      adversary_capital: Optional[float] = None,
                      n_points: int = 2001) -> SingleShotResult:
    """Play the sandwich game with the limit one tick above the current spot."""
    if prediction.price < world.spot:
        raise ValueError("the single-shot game needs a predicted rise")
    p0, c = world.spot, world.tx_fee
    p_lim = p0 + world.pool.tick
    order = coinalg_order(world, prediction, player, p_lim)
    cap = world.balance(player).usd if adversary_capital is None else adversary_capital
    cap = max(cap - 2.0 * c, 0.0)

    tok_priv, _ = swap_exact_in(world.pool, Direction.BUY, order.amount)
    private = PayoffPair(_coinalg_payoff(order.amount, tok_priv, prediction.price, c), 0.0)

    x, profit = best_response_scan(world, order, cap, n_points)
    if x == 0.0:
        return SingleShotResult(p_lim, private, private, 0.0, True)
    _, filled, _, _ = sandwich_legs(world.pool, order, x)
    if filled > 0:
        _, pool = swap_exact_in(world.pool, Direction.BUY, x)
        tok, _ = swap_exact_in(pool, Direction.BUY, order.amount)
        pi_C = _coinalg_payoff(order.amount, tok, prediction.price, c)
    else:
        pi_C = -c
    return SingleShotResult(p_lim, PayoffPair(pi_C, profit), private, x, False)


# ---------------------------------------------------------------------------
# Ultimatum game and invalidation bound
# ---------------------------------------------------------------------------

def usdwch_payoffs(params: UltimatumParams, e: float, b: int) -> PayoffPair:
    """Payoffs when the CoinAlg offers ``e`` and the adversary accepts (b=1) or burns (b=0)."""
    if not 0.0 <= e <= params.s:
        raise ValueError("offer must lie in [0, s]")
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    pi_C = b * params.c1 * (params.s - e) - params.fees
    pi_A = b * params.c2 * e - (1 - b) * params.z * math.sqrt(e) - params.fees
    return PayoffPair(pi_C, pi_A)


def invalidation_bound_z(p: float, r0: float) -> float:
    """Constant bounding the invalidation cost by ``z * sqrt(e)``."""
    if not (p > 0 and r0 > 0):
        raise ValueError("p and r0 must be positive")
    return p * r0 * 2.0 * math.sqrt(2.0)


def stylized_cost(p: float, r0: float, e: float) -> float:
    """Cost of lifting a price-``p`` pool past a limit that has already moved by ``p + e``."""
    if not (p > 0 and r0 > 0):
        raise ValueError("p and r0 must be positive")
    if e < 0:
        raise ValueError("e must be >= 0")
    return p * r0 * (math.sqrt((2.0 * p + e) / p) - 1.0)


# ---------------------------------------------------------------------------
# Repeated game
# ---------------------------------------------------------------------------

def repeated_payoffs(params: UltimatumParams, e_star: float) -> PayoffPair:
    """Discounted totals along the path where the offer is always ``e_star``."""
    if not 0.0 < e_star <= params.s:
        raise ValueError("e_star must lie in (0, s]")
    return PayoffPair(params.c1 * (params.s - e_star) / (1.0 - params.delta_C),
                      params.c2 * e_star / (1.0 - params.delta_A))


def deviation_gap(params: UltimatumParams, e_star: float) -> float:
    """Cooperative discounted payoff of C minus the one-shot grab ``c1 * s``.

    Positive exactly where the grim trigger sustains ``e_star``.
    """
    if not 0.0 <= e_star <= params.s:
        raise ValueError("e_star must lie in [0, s]")
    coop = params.c1 * (params.s - e_star) / (1.0 - params.delta_C)
    return coop - params.c1 * params.s


OfferPolicy = Callable[[int, Sequence[float]], float]
ResponsePolicy = Callable[[int, float, bool], int]


def cooperative_offer(e_star: float) -> OfferPolicy:
    return lambda t, history: e_star


def single_deviation(e_star: float, round_: int, e_dev: float = 0.0) -> OfferPolicy:
    """Offer ``e_star`` except ``e_dev`` in round ``round_``."""
    return lambda t, history: e_dev if t == round_ else e_star


def grim_response(e_star: float) -> ResponsePolicy:
    """Accept iff the offer is at least ``e_star`` and nobody has deviated yet."""
    return lambda t, e, triggered: int(not triggered and e >= e_star)


@dataclass
class GrimTranscript:
    offers: list = field(default_factory=list)
    responses: list = field(default_factory=list)
    payoffs: list = field(default_factory=list)
    total_C: float = 0.0
    total_A: float = 0.0
    committed: bool = True

    @property
    def totals(self) -> PayoffPair:
        return PayoffPair(self.total_C, self.total_A)


def grim_trigger_simulate(params: UltimatumParams, e_star: float, c_policy: OfferPolicy,
                          rounds: int, a_policy: Optional[ResponsePolicy] = None,
                          commit: bool = True) -> GrimTranscript:
    """Play ``rounds`` rounds of the ultimatum game and discount the payoffs.

    The adversary commits to the grim response before round 0; once an offer
    falls short of ``e_star`` it burns every later offer.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    respond = a_policy or grim_response(e_star)
    tr = GrimTranscript(committed=commit)
    triggered = False
    dC = dA = 1.0
    for t in range(rounds):
        e = float(c_policy(t, tuple(tr.offers)))
        if commit and e < e_star:
            triggered = True
        b = respond(t, e, triggered)
        pay = usdwch_payoffs(params, e, b)
        tr.offers.append(e)
        tr.responses.append(b)
        tr.payoffs.append(pay)
        tr.total_C += dC * pay.pi_C
        tr.total_A += dA * pay.pi_A
        dC *= params.delta_C
        dA *= params.delta_A
    return tr
