import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from coinbind.games import (
    PayoffPair, UltimatumParams, best_response_scan, coinalg_order, cooperative_offer,
    deviation_gap, grim_response, grim_trigger_simulate, invalidation_bound_z,
    repeated_payoffs, sdwch_single_shot, single_deviation, stylized_cost, usdwch_payoffs,
)
from coinbind.market import Balance, PoolState, WorldState
from coinbind.oracle import Prediction

P = UltimatumParams(s=10.0)


def single_shot_world(fee_rate=0.0005, c=1.0, tick=1e-6, p0=2000.0, tok=5000.0):
    pool = PoolState.at_price(p0, tok, fee_rate=fee_rate, tick=tick)
    return WorldState(pool, {"coinalg": Balance(1e6, 0.0)}, tx_fee=c)


def test_params_validation():
    with pytest.raises(ValueError):
        UltimatumParams(10.0, c1=1.0, c2=1.0)
    with pytest.raises(ValueError):
        UltimatumParams(10.0, delta_C=1.0)
    with pytest.raises(ValueError):
        PayoffPair(math.inf, 0.0)


def test_usdwch_examples():
    assert tuple(usdwch_payoffs(P, 3.0, 1)) == (14.0, 3.0)
    assert tuple(usdwch_payoffs(UltimatumParams(10.0, z=5.0), 4.0, 0)) == (0.0, -10.0)
    assert tuple(usdwch_payoffs(P, 0.0, 1)) == (20.0, 0.0)
    with pytest.raises(ValueError):
        usdwch_payoffs(P, 11.0, 1)


def test_invalidation_bound_examples():
    assert invalidation_bound_z(1.0, 100.0) == pytest.approx(200 * math.sqrt(2), rel=1e-12)
    assert stylized_cost(1.0, 100.0, 1.0) == pytest.approx(100 * (math.sqrt(3) - 1), rel=1e-12)
    assert stylized_cost(1.0, 100.0, 1.0) <= invalidation_bound_z(1.0, 100.0)


def test_bound_fails_at_zero_offer():
    # The stylized cost starts from a limit already displaced by p, so it is
    # positive at e = 0 while z * sqrt(0) = 0.
    c0 = stylized_cost(1.0, 100.0, 0.0)
    assert c0 == pytest.approx(100 * (math.sqrt(2) - 1), rel=1e-12)
    assert c0 > invalidation_bound_z(1.0, 100.0) * math.sqrt(0.0)
    # and for small enough e relative to p
    assert stylized_cost(0.01, 1.0, 1e-3) > invalidation_bound_z(0.01, 1.0) * math.sqrt(1e-3)


@settings(max_examples=500, deadline=None)
@given(p=st.floats(0.5, 1e6), r0=st.floats(1e-6, 1e6), e=st.floats(1.0, 1e6))
def test_invalidation_bound_holds_away_from_zero(p, r0, e):
    assert stylized_cost(p, r0, e) <= invalidation_bound_z(p, r0) * math.sqrt(e) * (1 + 1e-12)


def test_repeated_examples():
    pay = repeated_payoffs(P, 3.0)
    assert pay.pi_C == pytest.approx(140.0, rel=1e-12)
    assert pay.pi_A == pytest.approx(30.0, rel=1e-12)
    pay = repeated_payoffs(P, 10.0)
    assert pay.pi_C == 0.0 and pay.pi_A == pytest.approx(100.0)
    tiny = UltimatumParams(10.0, delta_C=1e-12, delta_A=1e-12)
    one = usdwch_payoffs(tiny, 3.0, 1)
    assert tuple(repeated_payoffs(tiny, 3.0)) == pytest.approx(tuple(one), rel=1e-9)


def test_deviation_gap_examples():
    assert deviation_gap(P, 3.0) == pytest.approx(120.0, rel=1e-12)
    myopic = UltimatumParams(10.0, delta_C=1e-9)
    assert deviation_gap(myopic, 3.0) == pytest.approx(-2.0 * 3.0, rel=1e-6)
    assert deviation_gap(P, 0.0) == pytest.approx(20 * 0.9 / 0.1, rel=1e-12)


def test_grim_cooperative_converges():
    tr = grim_trigger_simulate(P, 3.0, cooperative_offer(3.0), 500)
    assert tr.total_C == pytest.approx(140.0, abs=1e-6)
    assert tr.total_A == pytest.approx(30.0, abs=1e-6)
    assert all(p == PayoffPair(14.0, 3.0) for p in tr.payoffs)


def test_grim_truncation_error_shrinks_monotonically():
    errs = [140.0 - grim_trigger_simulate(P, 3.0, cooperative_offer(3.0), n).total_C
            for n in (10, 20, 40, 80, 160)]
    assert all(a > b >= 0 for a, b in zip(errs, errs[1:]))


def test_grim_deviation_at_round_zero():
    tr = grim_trigger_simulate(P, 3.0, single_deviation(3.0, 0, 0.0), 500)
    assert tr.total_C == 0.0
    assert tr.total_C < repeated_payoffs(P, 3.0).pi_C


def test_grim_is_not_forgiving():
    k = 5
    tr = grim_trigger_simulate(P, 3.0, single_deviation(3.0, k, 0.0), 200)
    assert all(b == 1 for b in tr.responses[:k]) and all(b == 0 for b in tr.responses[k:])
    assert all(p.pi_C == 0.0 for p in tr.payoffs[k:])
    expected = sum(14.0 * 0.9 ** t for t in range(k))
    assert tr.total_C == pytest.approx(expected, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(e_star=st.floats(0.1, 9.9), dc=st.floats(0.05, 0.99), da=st.floats(0.05, 0.99),
       k=st.integers(0, 30), e_dev=st.floats(0.0, 1.0))
def test_no_profitable_single_deviation(e_star, dc, da, k, e_dev):
    params = UltimatumParams(10.0, delta_C=dc, delta_A=da)
    assume(deviation_gap(params, e_star) > 0)
    rounds = 250
    coop = grim_trigger_simulate(params, e_star, cooperative_offer(e_star), rounds)
    dev = grim_trigger_simulate(params, e_star, single_deviation(e_star, k, e_dev * e_star), rounds)
    assert dev.total_C <= coop.total_C + 1e-9
    # the adversary flipping b in one round loses c2 e* and pays z sqrt(e*)
    flip = grim_trigger_simulate(params, e_star, cooperative_offer(e_star), rounds,
                                 a_policy=lambda t, e, trig: 0 if t == k else grim_response(e_star)(t, e, trig))
    loss = da ** k * (params.c2 * e_star + params.z * math.sqrt(e_star))
    assert coop.total_A - flip.total_A == pytest.approx(loss, rel=1e-6, abs=1e-12)


def test_single_shot_adversary_abstains():
    world = single_shot_world()
    res = sdwch_single_shot(world, Prediction(0, 1, 2200.0))
    assert res.p_lim == pytest.approx(2000.0 + 1e-6)
    assert res.abstained and res.frontrun == 0.0
    assert res.payoffs.pi_A == 0.0
    assert res.cost_of_transparency <= world.pool.tick * world.pool.reserve_tok


def test_single_shot_no_rise_is_degenerate():
    world = single_shot_world()
    res = sdwch_single_shot(world, Prediction(0, 1, 2000.0))
    assert res.payoffs.pi_C == pytest.approx(-world.tx_fee)
    assert res.payoffs.pi_A <= 0.0
    with pytest.raises(ValueError):
        sdwch_single_shot(world, Prediction(0, 1, 1900.0))


def test_single_shot_cost_vanishes_with_tick():
    costs = []
    for tick in (1e-2, 1e-4, 1e-6):
        res = sdwch_single_shot(single_shot_world(fee_rate=0.0, c=0.0, tick=tick),
                                Prediction(0, 1, 2200.0))
        costs.append(res.cost_of_transparency)
    assert costs[0] > costs[1] > costs[2] >= 0
    assert costs[2] < 1e-3
    assert costs[1] / costs[2] == pytest.approx(100.0, rel=1e-2)


def test_best_response_scan_abstains_on_all_or_none_order():
    world = single_shot_world()
    pred = Prediction(0, 1, 2200.0)
    order = coinalg_order(world, pred, "coinalg", world.spot + world.pool.tick)
    x, profit = best_response_scan(world, order, 1e6)
    assert (x, profit) == (0.0, 0.0)
