"""Deterministic simulator for the privacy/arbitrage tradeoff of collective
investment algorithms (CoinAlgs) trading on a constant-product AMM."""
from .market import (Asset, Balance, Direction, InvalidTrade, PoolState, Trade, WorldState,
                     apply_block, cost_to_reach, execute_block, invalidation_cost, limit_buy,
                     limit_sell, spot_price, swap_exact_in, swap_exact_out)
from .oracle import PricePath, Prediction, gbm_generate, load_csv_path, predict, repeg_pool
from .coinalg import (CoinAlg, TradeDistribution, TradeGrid, ViewKind, alg_dist, alg_sample,
                      induced_distribution, public_view)

__version__ = "0.1.0"
