"""An insider who sees each randomized trade early collects the bounty; a guesser does not."""
import numpy as np

from coinbind.bounty import BountyBoard, Predicate, PredicateKind
from coinbind.coinalg import RandomizingWrapper, TradeDistribution, rw_sample
from coinbind.market import buy, sell

direction = Predicate(PredicateKind.DIRECTION)
coin = TradeDistribution.uniform([buy("c", 10.0), sell("c", 1.0)])
rng = np.random.default_rng(1)

for who in ("insider", "guesser"):
    board, wrapper = BountyBoard(), RandomizingWrapper(seed=7)
    cid = board.register_claim(direction, 64)
    executed = {}
    for e in range(64):
        trade = rw_sample(wrapper, coin, epoch=e)
        guess = direction(trade) if who == "insider" else ("buy" if rng.random() < 0.5 else "sell")
        board.submit_prediction(cid, e, guess, 10 * e)
        board.mark_executed(e, 10 * e + 1)
        executed[e] = trade
    v = board.verify_claim(cid, executed, wrapper.per_epoch_dists())
    print(f"{who:<8} accepted={v.accepted} reason={v.reason} bits={v.entropy_total:.1f}")
