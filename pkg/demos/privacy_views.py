"""How much each public view leaks, and what the fair game says about it."""
from dataclasses import replace

from coinbind.coinalg import CoinAlg
from coinbind.metrics import (FairGameParams, calibrate_alpha, epsilon_privacy, fair_game_run,
                              FairScenario, financial_utility)
from coinbind.oracle import Prediction

sc = FairScenario()
coinalg = CoinAlg(grid=sc.grid())
states = [(sc.world(), Prediction(0, sc.epoch_blocks, sc.p0 * (1 + r / 1000))) for r in range(5, 20)]
states = [(w, p) for w, p in states if coinalg.trade(w, p) is not None]

base = FairGameParams(duration=1, trials=200, seed=0)
print(f"{'view':<8}{'epsilon':>10}{'advantage':>11}{'utility':>9}")
for view in ("priv", "asset", "dir", "transp"):
    eps = epsilon_privacy(coinalg, view, states).epsilon
    algo = CoinAlg(view=view)
    params = replace(base, alpha=calibrate_alpha(base, algo)) if view != "transp" else replace(base, alpha=1.0)
    adv = fair_game_run(params, algo).advantage
    util = financial_utility(view, base, CoinAlg())
    print(f"{view:<8}{eps:>10.4f}{adv:>11.3f}{util:>9.3f}")
