"""Exogenous price paths, the perfect price predictor and the ghost repeg."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .market import Direction, PoolState, Trade, cost_to_reach, spot_price

GHOST = "ghost"


class PathFormatError(ValueError):
    """Malformed or invalid price-path input."""


@dataclass(frozen=True)
class PricePath:
    heights: np.ndarray
    prices: np.ndarray
    source: str = "synthetic-gbm"

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.int64)
        p = np.asarray(self.prices, dtype=float)
        if h.ndim != 1 or h.shape != p.shape:
            raise PathFormatError("heights and prices must be 1-d and equally long")
        if len(h) == 0:
            raise PathFormatError("empty price path")
        if np.any(np.diff(h) <= 0):
            raise PathFormatError("block heights must be strictly increasing")
        if not np.all(p > 0):
            raise PathFormatError("prices must be positive")
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "prices", p)

    def __len__(self) -> int:
        return len(self.heights)

    @property
    def first_block(self) -> int:
        return int(self.heights[0])

    @property
    def last_block(self) -> int:
        return int(self.heights[-1])

    def price_at(self, block: int) -> float:
        """Last observed price at or before ``block``."""
        if block < self.heights[0] or block > self.heights[-1]:
            raise IndexError(f"block {block} outside path "
                             f"[{self.first_block}, {self.last_block}]")
        i = int(np.searchsorted(self.heights, block, side="right")) - 1
        return float(self.prices[i])

    def prices_between(self, start: int, stop: int) -> np.ndarray:
        """Step-held prices for every block in ``[start, stop)``."""
        blocks = np.arange(start, stop)
        if len(blocks) and (blocks[0] < self.heights[0] or blocks[-1] > self.heights[-1]):
            raise IndexError("requested range outside path")
        idx = np.searchsorted(self.heights, blocks, side="right") - 1
        return self.prices[idx]


def gbm_generate(seed: int, n_blocks: int, p0: float, drift: float,
                 volatility: float) -> PricePath:
    """Per-block geometric Brownian motion; log-increments ~ N(drift, volatility^2)."""
    if not p0 > 0:
        raise ValueError("p0 must be positive")
    if volatility < 0:
        raise ValueError("volatility must be >= 0")
    if n_blocks < 1:
        raise ValueError("n_blocks must be >= 1")
    rng = np.random.default_rng(seed)
    steps = drift + volatility * rng.standard_normal(n_blocks - 1)
    logp = np.concatenate([[0.0], np.cumsum(steps)])
    return PricePath(np.arange(n_blocks), p0 * np.exp(logp), "synthetic-gbm")


def load_csv_path(file: Union[str, Path]) -> PricePath:
    """Read a ``block,price`` CSV."""
    heights, prices = [], []
    with open(file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["block", "price"]:
            raise PathFormatError("line 1: expected header 'block,price'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise PathFormatError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                h = int(row[0])
                p = float(row[1])
            except ValueError as exc:
                raise PathFormatError(f"line {lineno}: {exc}") from None
            if not (p > 0 and math.isfinite(p)):
                raise PathFormatError(f"line {lineno}: price must be positive, got {row[1]}")
            if heights and h <= heights[-1]:
                raise PathFormatError(f"line {lineno}: block heights must be strictly increasing")
            heights.append(h)
            prices.append(p)
    if not heights:
        raise PathFormatError("empty price path")
    return PricePath(np.array(heights), np.array(prices), "csv-ingest")


@dataclass(frozen=True)
class Prediction:
    issued_at: int
    target_block: int
    price: float

    def __post_init__(self):
        if self.target_block <= self.issued_at:
            raise ValueError("prediction target must lie after the issuing block")
        if not self.price > 0:
            raise ValueError("predicted price must be positive")


def predict(path: PricePath, now_block: int, horizon: int) -> Prediction:
    """Exact future price of the path ``horizon`` blocks ahead."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    target = now_block + horizon
    if target > path.last_block:
        raise IndexError(f"prediction target {target} beyond path end {path.last_block}")
    return Prediction(now_block, target, path.price_at(target))


def repeg_ghost_trade(pool: PoolState, target_price: float) -> Trade:
    """The fee-free trade that moves the pool spot to ``target_price``."""
    if not target_price > 0:
        raise ValueError("target price must be positive")
    s = spot_price(pool)
    if target_price == s:
        return Trade(GHOST, Direction.BUY, 0.0)
    amount = cost_to_reach(pool, target_price, fee_rate=0.0)
    d = Direction.BUY if target_price > s else Direction.SELL
    return Trade(GHOST, d, amount)


def repeg_pool(pool: PoolState, target_price: float) -> tuple[PoolState, float, float]:
    """Move the pool along its curve to ``target_price``.

    Returns (new_pool, ghost_usd_delta, ghost_tok_delta); the ghost pays
    whatever the pool gains.
    """
    k = pool.k
    usd = math.sqrt(k * target_price)
    tok = math.sqrt(k / target_price)
    new = PoolState(usd, tok, pool.fee_rate, pool.tick)
    return new, pool.reserve_usd - usd, pool.reserve_tok - tok
