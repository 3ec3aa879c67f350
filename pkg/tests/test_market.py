import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coinbind.market import (
    Asset, Balance, Direction, InvalidTrade, PoolState, Trade, WorldState, apply_block,
    buy, cost_to_reach, execute_block, execute_on_pool, invalidation_cost, limit_buy,
    limit_sell, sell, spot_price, swap_exact_in, swap_exact_out,
)

from oracles import mp_cost_to_reach_by_bisection, mp_swap_buy, mp_swap_sell

POOL = PoolState(1000.0, 10.0)


def test_direction_assets_are_distinct():
    for d in Direction:
        bought, sold = d.assets
        assert bought is not sold
        assert d.opposite.opposite is d


def test_spot_price_examples():
    assert spot_price(POOL) == 100.0
    assert spot_price(PoolState(100.0, 100.0)) == 1.0
    assert spot_price(PoolState(1100.0, 10_000 / 1100)) == pytest.approx(121.0, rel=1e-12)


def test_pool_rejects_bad_reserves():
    with pytest.raises(ValueError):
        PoolState(0.0, 10.0)
    with pytest.raises(ValueError):
        PoolState(10.0, -1.0)


def test_swap_fee_free_buy():
    out, pool = swap_exact_in(POOL, Direction.BUY, 100.0)
    assert out == pytest.approx(10 / 11, rel=1e-12)
    assert pool.reserve_usd == 1100.0
    assert pool.reserve_tok == pytest.approx(100 / 11, rel=1e-12)


def test_swap_zero_is_noop():
    out, pool = swap_exact_in(POOL, Direction.BUY, 0.0)
    assert out == 0.0 and pool == POOL


def test_swap_with_fee_matches_invariant_oracle():
    out, pool = swap_exact_in(PoolState(1000.0, 10.0, fee_rate=0.003), Direction.BUY, 100.0)
    expected, _, _ = mp_swap_buy(1000, 10, mp.mpf("0.003"), 100)
    assert out == pytest.approx(float(expected), rel=1e-12)
    assert out == pytest.approx(0.906610, abs=1e-6)
    # the whole input, fee included, is added to the reserve
    assert pool.reserve_usd == 1100.0


def test_exact_out_inverts_exact_in():
    pool = PoolState(5000.0, 40.0, fee_rate=0.003)
    for d in Direction:
        out, _ = swap_exact_in(pool, d, 7.0)
        amount_in, _ = swap_exact_out(pool, d, out)
        assert amount_in == pytest.approx(7.0, rel=1e-12)


def test_exact_out_cannot_drain_pool():
    with pytest.raises(InvalidTrade):
        swap_exact_out(POOL, Direction.BUY, 10.0)


def test_limit_buy_reaches_limit():
    spent, out, pool = limit_buy(POOL, 1e6, 121.0)
    assert spent == pytest.approx(100.0, rel=1e-12)
    assert out == pytest.approx(10 / 11, rel=1e-12)
    assert pool.spot == pytest.approx(121.0, rel=1e-12)


def test_limit_buy_budget_capped():
    spent, _, pool = limit_buy(POOL, 50.0, 121.0)
    assert spent == 50.0
    assert pool.spot < 121.0


def test_limit_buy_breached_limit_spends_nothing():
    spent, out, pool = limit_buy(POOL, 1e6, 99.0)
    assert (spent, out, pool) == (0.0, 0.0, POOL)


def test_limit_sell_mirror():
    spent, _, pool = limit_sell(POOL, 1e6, 81.0)
    assert pool.spot == pytest.approx(81.0, rel=1e-12)
    assert spent == pytest.approx(10 * (10 / 9 - 1), rel=1e-12)
    assert limit_sell(POOL, 1e6, 101.0)[0] == 0.0


def test_cost_to_reach_with_fee_matches_bisection():
    pool = PoolState(2e6, 1000.0, fee_rate=0.0005)
    a = cost_to_reach(pool, 2100.0)
    ref = mp_cost_to_reach_by_bisection(2e6, 1000, mp.mpf("0.0005"), 2100)
    assert a == pytest.approx(float(ref), rel=1e-12)


def test_invalidation_cost_examples():
    assert invalidation_cost(1.0, 100.0, 3.0) == pytest.approx(100.0, rel=1e-12)
    assert invalidation_cost(100.0, 10.0, 21.0) == pytest.approx(100.0, rel=1e-12)
    assert invalidation_cost(5.0, 7.0, 0.0) == 0.0
    # oracle: a swap simulation moving pool (100, 100) from 1 to 4
    ref = mp_cost_to_reach_by_bisection(100, 100, 0, 4)
    assert float(ref) == pytest.approx(100.0, rel=1e-12)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, -0.5)])
def test_invalidation_cost_domain(args):
    with pytest.raises(ValueError):
        invalidation_cost(*args)


def test_apply_block_single_buy():
    world = WorldState(POOL, {"P": Balance(100.0, 0.0)})
    new = apply_block(world, [buy("P", 100.0)])
    assert new.balance("P").usd == 0.0
    assert new.balance("P").tok == pytest.approx(10 / 11, rel=1e-12)
    assert new.pool.reserve_usd == 1100.0
    assert new.block_height == 1


def test_apply_empty_block_only_advances_height():
    world = WorldState(POOL, {"P": Balance(100.0, 0.0)}, block_height=5)
    new = apply_block(world, [])
    assert new.pool == world.pool and new.balances == world.balances
    assert new.block_height == 6


def test_overdrawn_block_is_invalid():
    world = WorldState(POOL, {"P": Balance(100.0, 0.0)})
    assert apply_block(world, [buy("P", 60.0), buy("P", 60.0)]) is None
    assert apply_block(world, [sell("P", 1.0)]) is None


def test_tx_fee_is_collected():
    world = WorldState(POOL, {"P": Balance(101.0, 0.0)}, tx_fee=1.0)
    new = apply_block(world, [buy("P", 100.0)])
    assert new.balance("P").usd == pytest.approx(0.0, abs=1e-9)
    assert new.fees_collected == 1.0
    assert new.total(Asset.USD) == pytest.approx(world.total(Asset.USD), rel=1e-15)
    assert apply_block(WorldState(POOL, {"P": Balance(100.0, 0.0)}, tx_fee=1.0),
                       [buy("P", 100.0)]) is None


def test_block_executes_in_sequence_order():
    world = WorldState(POOL, {"A": Balance(1e4, 0.0), "B": Balance(1e4, 0.0)})
    r1 = execute_block(world, [buy("A", 100.0), buy("B", 100.0)])
    r2 = execute_block(world, [buy("B", 100.0), buy("A", 100.0)])
    first = r1.fills_for("A")[0].amount_out
    second = r2.fills_for("A")[0].amount_out
    assert first > second
    assert r1.world.pool.reserve_usd == pytest.approx(r2.world.pool.reserve_usd)


def test_all_or_none_checks_pre_trade_spot():
    t = Trade("P", Direction.BUY, 500.0, price_limit=100.0, all_or_none=True)
    amount_in, _, pool = execute_on_pool(POOL, t)
    assert amount_in == 500.0 and pool.spot > 100.0
    t2 = Trade("P", Direction.BUY, 500.0, price_limit=99.0, all_or_none=True)
    assert execute_on_pool(POOL, t2)[0] == 0.0


# ---------------------------------------------------------------------------
# Properties
# ---------------------------------------------------------------------------

reserves = st.floats(1.0, 1e9)
amounts = st.floats(1e-6, 1e6)
fees = st.floats(1e-5, 0.05)


@settings(max_examples=300, deadline=None)
@given(usd=reserves, tok=reserves,
       legs=st.lists(st.tuples(st.sampled_from(list(Direction)), st.floats(1e-3, 0.5)),
                     min_size=1, max_size=20))
def test_fee_free_swaps_conserve_k(usd, tok, legs):
    pool = PoolState(usd, tok)
    k0 = pool.k
    for d, frac in legs:
        reserve = pool.reserve_usd if d is Direction.BUY else pool.reserve_tok
        _, pool = swap_exact_in(pool, d, frac * reserve)
    assert abs(pool.k - k0) / k0 <= 1e-12


@settings(max_examples=300, deadline=None)
@given(usd=reserves, tok=reserves, mu=fees, amount=amounts,
       d=st.sampled_from(list(Direction)))
def test_fees_never_decrease_k(usd, tok, mu, amount, d):
    pool = PoolState(usd, tok, fee_rate=mu)
    _, new = swap_exact_in(pool, d, amount)
    assert new.k >= pool.k * (1 - 1e-15)


@settings(max_examples=300, deadline=None)
@given(usd=reserves, tok=reserves, mu=st.floats(0, 0.05), budget=st.floats(0, 1e9),
       ratio=st.floats(0.2, 5.0))
def test_limit_orders_respect_limit(usd, tok, mu, budget, ratio):
    pool = PoolState(usd, tok, fee_rate=mu)
    lim = pool.spot * ratio
    _, _, after = limit_buy(pool, budget, lim)
    assert after.spot <= lim * (1 + 1e-9) or after == pool
    _, _, after = limit_sell(pool, budget / pool.spot, lim)
    assert after.spot >= lim * (1 - 1e-9) or after == pool


@settings(max_examples=200, deadline=None)
@given(usd=st.floats(1.0, 1e6), tok=st.floats(1.0, 1e6), mu=fees, amount=st.floats(1e-3, 1e5))
def test_swap_matches_high_precision_invariant(usd, tok, mu, amount):
    out, _ = swap_exact_in(PoolState(usd, tok, fee_rate=mu), Direction.BUY, amount)
    assert out == pytest.approx(float(mp_swap_buy(usd, tok, mu, amount)[0]), rel=1e-10)
    out, _ = swap_exact_in(PoolState(usd, tok, fee_rate=mu), Direction.SELL, amount)
    assert out == pytest.approx(float(mp_swap_sell(usd, tok, mu, amount)[0]), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(start=st.dictionaries(st.sampled_from("ABC"), st.tuples(st.floats(0, 1e5), st.floats(0, 100)),
                             min_size=1),
       trades=st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from(list(Direction)),
                                 st.floats(0, 2e4)), max_size=8),
       c=st.floats(0, 5))
def test_balances_never_negative_and_assets_conserved(start, trades, c):
    world = WorldState(PoolState(1e6, 1e3, fee_rate=0.003),
                       {p: Balance(u, t) for p, (u, t) in start.items()}, tx_fee=c)
    block = [Trade(p, d, a if d is Direction.BUY else a / 1000) for p, d, a in trades]
    new = apply_block(world, block)
    if new is None:
        return
    for b in new.balances.values():
        assert b.usd >= 0 and b.tok >= 0
    for asset in Asset:
        assert new.total(asset) == pytest.approx(world.total(asset), rel=1e-9)
    assert new.block_height == world.block_height + 1
