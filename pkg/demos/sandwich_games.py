"""Walk through the sandwich games: single-shot limit setting and the repeated offer game."""
from coinbind import games
from coinbind.market import Balance, PoolState, WorldState
from coinbind.oracle import Prediction

pool = PoolState.at_price(2000.0, 5000.0, fee_rate=0.0005)
world = WorldState(pool, {"coinalg": Balance(300_000.0, 0.0)}, tx_fee=1.0)
res = games.sdwch_single_shot(world, Prediction(0, 1, 2040.0))
print("single shot")
print(f"  limit price         {res.p_lim:.6f}")
print(f"  adversary abstains  {res.abstained}")
print(f"  CoinAlg payoff      {res.payoffs.pi_C:.2f} (private {res.private.pi_C:.2f})")
print(f"  transparency cost   {res.cost_of_transparency:.4f}")

params = games.UltimatumParams(10.0, c1=2.0, c2=1.0, delta_C=0.9, delta_A=0.9)
coop = games.grim_trigger_simulate(params, 3.0, games.cooperative_offer(3.0), 500)
dev = games.grim_trigger_simulate(params, 3.0, games.single_deviation(3.0, 5), 500)
print("repeated offers, grim trigger at e*=3")
print(f"  cooperate           C={coop.total_C:.3f} A={coop.total_A:.3f}")
print(f"  deviate in round 5  C={dev.total_C:.3f} A={dev.total_A:.3f}")
print(f"  deviation gap       {games.deviation_gap(params, 3.0):.6f}")
