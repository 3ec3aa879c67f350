"""Privacy and fairness measurements.

* ``tv_distance`` / ``epsilon_privacy``: how far the belief induced by a
  public view is from the CoinAlg's true trade distribution.
* ``fair_game_run``: value extracted by an adversary that knows each trade
  exactly versus a player that sees only the public view, on forked runs.
* ``unfairness_distinguisher``: turns an unfair configuration into a test that
  tells the true distribution from the view-induced one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .adversary import (ADVERSARY, AdversaryCapital, abstain_check, golden_section_max,
                        plan_sandwich, sandwich_plan_at, sandwich_profit)
from .coinalg import (CoinAlg, TradeDistribution, TradeGrid, ViewKind, alg_sample,
                      induced_distribution, public_view)
from .market import (Balance, Direction, PoolState, Trade, WorldState, apply_block,
                     swap_exact_in)
from .oracle import Prediction, PricePath, gbm_generate, repeg_pool

COINALG = "coinalg"


# ---------------------------------------------------------------------------
# Total variation and privacy
# ---------------------------------------------------------------------------

def tv_distance(d1: TradeDistribution, d2: TradeDistribution,
                grid: Optional[TradeGrid] = None) -> float:
    """Half the L1 distance between two distributions on a common grid.

    Without a grid the supports are compared trade by trade.
    """
    g = grid or d1.grid or d2.grid
    if g is not None:
        for d in (d1, d2):
            if d.grid is not None and d.grid != g:
                raise ValueError("distributions live on different grids")
        return float(0.5 * np.abs(d1.vector(g) - d2.vector(g)).sum())
    mass: dict = {}
    for t, p in d1.items():
        mass[t] = mass.get(t, 0.0) + p
    for t, p in d2.items():
        mass[t] = mass.get(t, 0.0) - p
    return float(0.5 * sum(abs(v) for v in mass.values()))


@dataclass(frozen=True)
class PrivacyReport:
    """``epsilon`` is certified only for the sampled states (a lower bound on the true value)."""

    epsilon: float
    distances: np.ndarray
    view: ViewKind

    @property
    def n_states(self) -> int:
        return len(self.distances)


def epsilon_privacy(coinalg: CoinAlg, view_kind: Union[ViewKind, str],
                    states: Sequence[tuple[WorldState, Prediction]]) -> PrivacyReport:
    """Mean TV distance between true and view-induced trade distributions."""
    if not states:
        raise ValueError("need at least one state")
    view_kind = ViewKind(view_kind)
    dists = []
    for world, pred in states:
        grid = coinalg.grid_for(world)
        pi = coinalg.dist(world, pred)
        induced = induced_distribution(public_view(view_kind, pi), grid,
                                       world.balance(coinalg.player))
        dists.append(tv_distance(pi, induced, grid))
    d = np.array(dists)
    return PrivacyReport(float(d.mean()), d, view_kind)


# ---------------------------------------------------------------------------
# Fair game
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FairScenario:
    """Pool, balances and price process for fair-game trials.

    Prices follow a per-block GBM; the CoinAlg acts every ``epoch_blocks``
    blocks with a perfect prediction of the price at the next epoch.
    """

    p0: float = 2000.0
    reserve_tok: float = 5000.0
    fee_rate: float = 0.0005
    tx_fee: float = 1.0
    drift: float = 5e-5
    volatility: float = 2e-5
    epoch_blocks: int = 300
    coinalg_usd: float = 300_000.0
    coinalg_tok: float = 150.0
    adversary_usd: float = 400_000.0
    adversary_tok: float = 200.0

    def world(self, price: Optional[float] = None) -> WorldState:
        pool = PoolState.at_price(self.p0 if price is None else price, self.reserve_tok,
                                  fee_rate=self.fee_rate)
        return WorldState(pool, {COINALG: Balance(self.coinalg_usd, self.coinalg_tok),
                                 ADVERSARY: Balance(self.adversary_usd, self.adversary_tok)},
                          tx_fee=self.tx_fee)

    def grid(self) -> TradeGrid:
        return TradeGrid.for_capital(self.coinalg_usd, self.coinalg_tok, self.p0, self.fee_rate)

    def path(self, seed, epochs: int) -> PricePath:
        return gbm_generate(seed, epochs * self.epoch_blocks + 1, self.p0, self.drift,
                            self.volatility)


@dataclass(frozen=True)
class FairGameParams:
    scenario: FairScenario = field(default_factory=FairScenario)
    duration: int = 1
    alpha: float = 0.0
    trials: int = 200
    seed: int = 0
    numeraire: str = "USD"

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("duration must be >= 1")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.numeraire not in ("USD", "TOK"):
            raise ValueError("numeraire must be USD or TOK")


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class AdvantageReport:
    advantage: float
    v_A: np.ndarray
    v_P: np.ndarray
    alpha: float

    @property
    def trials(self) -> int:
        return len(self.v_A)

    @property
    def v_A_mean(self) -> float:
        return float(np.mean(self.v_A))

    @property
    def v_P_mean(self) -> float:
        return float(np.mean(self.v_P))

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(int(round(self.advantage * self.trials)), self.trials)


# Players ---------------------------------------------------------------------

def anchor(pool: PoolState, trade: Optional[Trade]) -> Optional[Trade]:
    """Give a grid trade the limit equal to its own post-trade spot on ``pool``."""
    if trade is None or trade.price_limit is not None:
        return trade
    _, new = swap_exact_in(pool, trade.direction, trade.amount)
    return replace(trade, price_limit=new.spot)


class NullPlayer:
    """Never trades."""

    def plan(self, world: WorldState, info, player: str):
        return None


class SandwichPlayer:
    """Sandwiches the trade it is told about, or its best guess under a belief.

    ``info`` is either a trade (exact knowledge) or a distribution over
    trades.  With a point-mass belief the plan equals the exact-knowledge one.
    """

    def __init__(self, rtol: float = 1e-6):
        self.rtol = rtol

    def plan(self, world: WorldState, info, player: str):
        if isinstance(info, TradeDistribution):
            if info.is_degenerate:
                info = info.mode
            else:
                return self._plan_belief(world, info, player)
        if info is None or info.is_empty:
            return None
        b = world.balance(player)
        plan = plan_sandwich(world, anchor(world.pool, info), AdversaryCapital(b.usd, b.tok),
                             player, rtol=self.rtol)
        return None if abstain_check(plan, world.pool.fee_rate) else plan

    def _plan_belief(self, world: WorldState, belief: TradeDistribution, player: str):
        b = world.balance(player)
        best = None
        for d in (Direction.BUY, Direction.SELL):
            items = [(anchor(world.pool, t), p) for t, p in belief.items()
                     if t is not None and t.direction is d and p > 0]
            if not items:
                continue
            cap = b.usd - 2 * world.tx_fee if d is Direction.BUY else b.tok
            if cap <= 0:
                continue

            def f(x, items=items):
                return sum(p * sandwich_profit(world, t, x) for t, p in items)

            x, fx = golden_section_max(f, 0.0, cap, self.rtol)
            if fx > 0 and (best is None or fx > best[1]):
                best = (items[0][0], fx, x)
        if best is None:
            return None
        return sandwich_plan_at(world, best[0], best[2], player)


def _execute_epoch(world: WorldState, plan, tau: Optional[Trade]) -> WorldState:
    if plan is not None:
        world = apply_block(world, [plan.frontrun]) or world
    if tau is not None:
        world = apply_block(world, [tau]) or world
    if plan is not None:
        world = apply_block(world, [plan.backrun]) or world
    return world


Answer = Callable[[WorldState, TradeDistribution, Optional[Trade], np.random.Generator], object]


def oracle_answer(world, dist, tau, rng):
    return tau


def view_answer(coinalg: CoinAlg):
    def answer(world, dist, tau, rng):
        return coinalg.induced(world, dist)
    return answer


def induced_sample_answer(coinalg: CoinAlg):
    """Answer with a fresh draw from the view-induced distribution."""
    def answer(world, dist, tau, rng):
        return anchor(world.pool, alg_sample(coinalg.induced(world, dist), rng))
    return answer


def play_fork(params: FairGameParams, coinalg: CoinAlg, path: PricePath, coins: np.ndarray,
              player, answer: Answer, rng: np.random.Generator, player_id: str = ADVERSARY) -> float:
    """One fork of the fair game; returns the player's value in the numeraire."""
    sc = params.scenario
    world = sc.world(path.price_at(0))
    start = world.balance(player_id)
    for i in range(params.duration):
        h = i * sc.epoch_blocks
        pool, _, _ = repeg_pool(world.pool, path.price_at(h))
        world = world.with_pool(pool)
        pred = Prediction(h, h + sc.epoch_blocks, path.price_at(h + sc.epoch_blocks))
        dist = coinalg.dist(world, pred)
        tau = alg_sample(dist, float(coins[i]))
        plan = player.plan(world, answer(world, dist, tau, rng), player_id)
        world = _execute_epoch(world, plan, tau)
    end = world.balance(player_id)
    p_end = path.price_at(params.duration * sc.epoch_blocks)
    v_usd = (end.usd - start.usd) + (end.tok - start.tok) * p_end
    return v_usd if params.numeraire == "USD" else v_usd / p_end


def _trial_inputs(params: FairGameParams, trial: int):
    ss = np.random.SeedSequence([params.seed, trial])
    path_seed, coin_seed, ans_seed = ss.generate_state(3)
    path = params.scenario.path(int(path_seed), params.duration)
    coins = np.random.default_rng(int(coin_seed)).random(params.duration)
    return path, coins, int(ans_seed)


def _with_grid(params: FairGameParams, coinalg: CoinAlg, view=None) -> CoinAlg:
    c = replace(coinalg, view=ViewKind(view) if view is not None else coinalg.view)
    if c.grid is None:
        c.grid = params.scenario.grid()
    return c


BASELINE_INFO = ("sample", "belief")


def _baseline_answer(coinalg: CoinAlg, info: str) -> Answer:
    if info == "sample":
        return induced_sample_answer(coinalg)
    if info == "belief":
        return view_answer(coinalg)
    raise ValueError(f"baseline info must be one of {BASELINE_INFO}")


def fair_game_run(params: FairGameParams, coinalg: CoinAlg, adversary=None,
                  baseline_player=None, baseline_info: str = "sample") -> AdvantageReport:
    """Empirical Pr[|v_A - v_P| > alpha] over ``params.trials`` trials.

    The baseline player sees only the public view: with ``"sample"`` it acts
    on a draw from the view-induced distribution, with ``"belief"`` on the
    whole distribution.
    """
    coinalg = _with_grid(params, coinalg)
    adversary = adversary or SandwichPlayer()
    baseline_player = baseline_player or SandwichPlayer()
    answer_P = _baseline_answer(coinalg, baseline_info)
    vA, vP = np.empty(params.trials), np.empty(params.trials)
    for k in range(params.trials):
        path, coins, ans = _trial_inputs(params, k)
        vA[k] = play_fork(params, coinalg, path, coins, adversary, oracle_answer,
                          np.random.default_rng(ans))
        vP[k] = play_fork(params, coinalg, path, coins, baseline_player, answer_P,
                          np.random.default_rng(ans))
    adv = float(np.mean(np.abs(vA - vP) > params.alpha))
    return AdvantageReport(adv, vA, vP, params.alpha)


def full_knowledge_extractable_value(params: FairGameParams, coinalg: CoinAlg) -> float:
    """Mean value of an exact-knowledge sandwicher (optimal size per epoch)."""
    coinalg = _with_grid(params, coinalg)
    player = SandwichPlayer()
    vals = []
    for k in range(params.trials):
        path, coins, ans = _trial_inputs(params, k)
        vals.append(play_fork(params, coinalg, path, coins, player, oracle_answer,
                              np.random.default_rng(ans)))
    return float(np.mean(vals))


def financial_utility(view_kind: Union[ViewKind, str], params: FairGameParams,
                      coinalg: CoinAlg) -> float:
    """Share of the full-knowledge value that a view-only sandwicher obtains."""
    T = full_knowledge_extractable_value(params, coinalg)
    if not T > 0:
        raise ValueError("full-knowledge extractable value is not positive; utility undefined")
    c = _with_grid(params, coinalg, view_kind)
    player = SandwichPlayer()
    vals = []
    for k in range(params.trials):
        path, coins, ans = _trial_inputs(params, k)
        vals.append(play_fork(params, c, path, coins, player, view_answer(c),
                              np.random.default_rng(ans)))
    return max(float(np.mean(vals)), 0.0) / T


def cost_of_transparency(scenario) -> float:
    """Adversary-free twin profit minus exposed CoinAlg profit for a harness scenario."""
    from .harness import run_scenario
    return run_scenario(scenario).cost_of_transparency


def calibrate_alpha(params: FairGameParams, coinalg: CoinAlg, fraction: float = 0.5,
                    pilot_trials: int = 50) -> float:
    """``fraction`` of the exact-knowledge adversary's mean value on a pilot run."""
    pilot = replace(params, trials=pilot_trials, seed=params.seed + 1_000_003)
    return fraction * max(full_knowledge_extractable_value(pilot, coinalg), 0.0)


@dataclass(frozen=True)
class DistinguisherReport:
    advantage: float
    p_real: float
    p_ideal: float
    trials: int

    @property
    def half_width(self) -> float:
        return 1.96 * math.sqrt(0.5 / self.trials)


def unfairness_distinguisher(coinalg: CoinAlg, view_kind: Union[ViewKind, str],
                           params: FairGameParams, adversary=None, baseline_player=None,
                           baseline_info: str = "sample") -> DistinguisherReport:
    """Tell the true trade distribution from the view-induced one.

    The embedded adversary's questions about each trade are answered by a
    draw from the distribution under test; the output is 1 when the
    adversary then beats the view-only player by more than ``alpha``.
    """
    c = _with_grid(params, coinalg, view_kind)
    adversary = adversary or SandwichPlayer()
    baseline_player = baseline_player or SandwichPlayer()
    answer_P = _baseline_answer(c, baseline_info)
    hits_real = hits_ideal = 0
    ideal = induced_sample_answer(c)
    for k in range(params.trials):
        path, coins, ans = _trial_inputs(params, k)
        vP = play_fork(params, c, path, coins, baseline_player, answer_P,
                       np.random.default_rng(ans))
        vR = play_fork(params, c, path, coins, adversary, oracle_answer, np.random.default_rng(ans))
        vI = play_fork(params, c, path, coins, adversary, ideal, np.random.default_rng(ans))
        hits_real += (vR - vP) > params.alpha
        hits_ideal += (vI - vP) > params.alpha
    p_r, p_i = hits_real / params.trials, hits_ideal / params.trials
    return DistinguisherReport(abs(p_r - p_i), p_r, p_i, params.trials)


def reference_unfair_params(trials: int = 1000, seed: int = 0,
                            coinalg: Optional[CoinAlg] = None) -> FairGameParams:
    """Steadily rising, low-volatility prices over three epochs.

    ``alpha`` is half the exact-knowledge adversary's mean value on a pilot run.
    """
    p = FairGameParams(FairScenario(), duration=3, trials=trials, seed=seed)
    alpha = calibrate_alpha(p, coinalg or CoinAlg(view=ViewKind.PRIV))
    return replace(p, alpha=alpha)
