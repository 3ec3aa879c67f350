"""Experiment harness: path-driven simulation of a CoinAlg and an adversary.

Per block the order is: adversary pre-trade, CoinAlg trade, adversary
post-trade, profit measurement, then the ghost repeg that moves the pool
back onto the exogenous price path.  While the adversary holds a position
that waits for the CoinAlg (a stolen trade one block early, a long-range
frontrun), the repeg keeps the adversary's price impact and only applies the
path's relative move.

Only blocks where something happens are simulated; between them balances
are constant, so profit series are filled in with numpy.
"""
from __future__ import annotations

import dataclasses
import hashlib
import heapq
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .adversary import (ADVERSARY, COVERT_TIMEOUT_BLOCKS, AdversaryCapital, LongRangeTracker,
                        abstain_check, covert_sandwich, plan_sandwich, theft_trade)
from .coinalg import (CoinAlg, CovertChannel, FixedSchedule, PoissonSchedule, RandomizingWrapper,
                      TradeDistribution, ViewKind, next_trade_block, public_view)
from .market import Asset, Balance, PoolState, Trade, WorldState, apply_block, execute_block
from .oracle import PricePath, Prediction, gbm_generate, load_csv_path, repeg_pool

COINALG = "coinalg"
CONFIG_VERSION = 1
POISSON_SEEDS = 16
BLOCK_SECONDS = 12

DEFAULTS: dict[str, Any] = {
    "version": CONFIG_VERSION,
    "seed": 0,
    "path.kind": "gbm",
    "path.csv": "",
    "path.p0": 2000.0,
    "path.drift": 2e-5,
    "path.volatility": 5e-4,
    "pool.reserve_tok": 5000.0,
    "pool.fee_rate": 0.0005,
    "pool.tick": 1e-6,
    "chain.tx_fee": 1.0,
    "strategy.kind": "ideal",
    "strategy.schedule": "fixed",
    "strategy.interval_blocks": 300,
    "strategy.lambda_blocks": 3600.0,
    "strategy.view": "transp",
    "strategy.covert_channel": "off",
    "strategy.wrapper.jitter_blocks": 0,
    "coinalg.capital_usd": 300_000.0,
    "coinalg.capital_tok": 150.0,
    "adversary.kind": "none",
    "adversary.assumed_impact": 0.01,
    "adversary.capital_usd": 400_000.0,
    "adversary.capital_tok": 200.0,
    "run.start_offset": 0,
    "run.window": 6000,
    "output.csv": "",
    "output.plot": "",
}

ENUMS = {
    "path.kind": ("gbm", "csv"),
    "strategy.kind": ("ideal", "buy_then_sell"),
    "strategy.schedule": ("fixed", "poisson"),
    "strategy.view": tuple(v.value for v in ViewKind),
    "strategy.covert_channel": ("off", "direction_bit"),
    "adversary.kind": ("none", "theft", "sandwich", "long_range", "covert"),
}

# Keys that only select outputs; excluded from the config hash.
_OUTPUT_KEYS = ("output.csv", "output.plot")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``errors`` lists every problem found."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat key/value experiment description (see ``DEFAULTS`` for the keys)."""

    values: Mapping[str, Any]

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        errors = []
        unknown = sorted(set(d) - set(DEFAULTS))
        if unknown:
            errors.append(f"unknown keys: {', '.join(unknown)}")
        v = dict(DEFAULTS)
        v.update({k: d[k] for k in d if k in DEFAULTS})
        if v["version"] != CONFIG_VERSION:
            errors.append(f"version must be {CONFIG_VERSION}, got {v['version']!r}")
        for k, default in DEFAULTS.items():
            if isinstance(default, bool) or k == "version":
                continue
            if isinstance(default, (int, float)) and not isinstance(v[k], (int, float)):
                errors.append(f"{k} must be numeric, got {v[k]!r}")
            if isinstance(default, str) and not isinstance(v[k], str):
                errors.append(f"{k} must be a string, got {v[k]!r}")
        for k, allowed in ENUMS.items():
            if v[k] not in allowed:
                errors.append(f"{k} must be one of {allowed}, got {v[k]!r}")
        if not errors:
            errors.extend(_range_errors(v))
        if errors:
            raise ConfigError(errors)
        return cls(v)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except OSError as exc:
            raise ConfigError([f"{path}: {exc.strerror}"]) from None
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
        if not isinstance(d, dict):
            raise ConfigError([f"{path}: expected a JSON object"])
        return cls.from_dict(d)

    def __getitem__(self, key: str):
        return self.values[key]

    def replace(self, **kw) -> "ExperimentConfig":
        """Copy with keys given as ``section__name`` or ``{"a.b": v}`` via ``with_values``."""
        return self.with_values({k.replace("__", "."): val for k, val in kw.items()})

    def with_values(self, updates: Mapping[str, Any]) -> "ExperimentConfig":
        d = dict(self.values)
        d.update(updates)
        return ExperimentConfig.from_dict(d)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.values)

    @property
    def hash(self) -> str:
        d = {k: v for k, v in sorted(self.values.items()) if k not in _OUTPUT_KEYS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def _range_errors(v) -> list[str]:
    errs = []
    checks = [
        ("path.p0", v["path.p0"] > 0, "must be positive"),
        ("path.volatility", v["path.volatility"] >= 0, "must be >= 0"),
        ("pool.reserve_tok", v["pool.reserve_tok"] > 0, "must be positive"),
        ("pool.fee_rate", 0 <= v["pool.fee_rate"] <= 0.1, "must lie in [0, 0.1]"),
        ("pool.tick", v["pool.tick"] > 0, "must be positive"),
        ("chain.tx_fee", v["chain.tx_fee"] >= 0, "must be >= 0"),
        ("strategy.interval_blocks", v["strategy.interval_blocks"] >= 1, "must be >= 1"),
        ("strategy.lambda_blocks", v["strategy.lambda_blocks"] > 0, "must be positive"),
        ("strategy.wrapper.jitter_blocks", v["strategy.wrapper.jitter_blocks"] >= 0, "must be >= 0"),
        ("coinalg.capital_usd", v["coinalg.capital_usd"] >= 0, "must be >= 0"),
        ("coinalg.capital_tok", v["coinalg.capital_tok"] >= 0, "must be >= 0"),
        ("adversary.capital_usd", v["adversary.capital_usd"] >= 0, "must be >= 0"),
        ("adversary.capital_tok", v["adversary.capital_tok"] >= 0, "must be >= 0"),
        ("adversary.assumed_impact", v["adversary.assumed_impact"] >= 0, "must be >= 0"),
        ("run.start_offset", v["run.start_offset"] >= 0, "must be >= 0"),
        ("run.window", v["run.window"] >= 1, "must be >= 1"),
    ]
    for key, ok, msg in checks:
        if not ok:
            errs.append(f"{key} {msg}, got {v[key]!r}")
    if v["path.kind"] == "csv" and not v["path.csv"]:
        errs.append("path.csv is required when path.kind is csv")
    return errs


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TradeEvent:
    block: int
    actor: str
    action: str
    amount_in: float = 0.0
    amount_out: float = 0.0


@dataclass
class RunResult:
    config: Optional[ExperimentConfig]
    blocks: np.ndarray
    spot: np.ndarray
    coinalg_profit: np.ndarray
    adversary_profit: np.ndarray
    baseline_profit: np.ndarray
    coinalg_traded: np.ndarray
    adversary_action: list
    events: list = field(default_factory=list)
    abstentions: int = 0
    audit_error: float = 0.0

    @classmethod
    def empty(cls) -> "RunResult":
        z = np.zeros(0)
        return cls(None, np.zeros(0, dtype=np.int64), z, z, z, z, np.zeros(0, dtype=bool), [])

    def __len__(self):
        return len(self.blocks)

    @property
    def final_coinalg(self) -> float:
        return float(self.coinalg_profit[-1]) if len(self) else 0.0

    @property
    def final_adversary(self) -> float:
        return float(self.adversary_profit[-1]) if len(self) else 0.0

    @property
    def final_baseline(self) -> float:
        return float(self.baseline_profit[-1]) if len(self) else 0.0

    @property
    def cost_of_transparency(self) -> float:
        return self.final_baseline - self.final_coinalg

    @property
    def profit_reduction(self) -> float:
        """Fraction of the baseline profit lost to the adversary."""
        b = self.final_baseline
        return self.cost_of_transparency / abs(b) if b != 0 else 0.0

    def summary(self) -> dict[str, Any]:
        return {
            "final_coinalg_profit": self.final_coinalg,
            "final_adversary_profit": self.final_adversary,
            "final_baseline_profit": self.final_baseline,
            "profit_reduction": self.profit_reduction,
            "cost_of_transparency": self.cost_of_transparency,
            "abstentions": self.abstentions,
            "coinalg_trades": int(np.count_nonzero(self.coinalg_traded)),
            "audit_error": self.audit_error,
        }


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _seeds(seed: int) -> tuple[int, int, int]:
    s = np.random.SeedSequence(seed).generate_state(3)
    return int(s[0]), int(s[1]), int(s[2])


def build_path(cfg: ExperimentConfig) -> PricePath:
    if cfg["path.kind"] == "csv":
        return load_csv_path(cfg["path.csv"])
    lookahead = (cfg["strategy.interval_blocks"] if cfg["strategy.schedule"] == "fixed"
                 else int(cfg["strategy.lambda_blocks"]) * 4)
    n = cfg["run.start_offset"] + cfg["run.window"] + lookahead + 1
    return gbm_generate(_seeds(cfg["seed"])[0], n, cfg["path.p0"], cfg["path.drift"],
                        cfg["path.volatility"])


def build_schedule(cfg: ExperimentConfig):
    if cfg["strategy.schedule"] == "fixed":
        return FixedSchedule(int(cfg["strategy.interval_blocks"]))
    return PoissonSchedule(float(cfg["strategy.lambda_blocks"]), _seeds(cfg["seed"])[1])


def decision_blocks(cfg: ExperimentConfig, path: PricePath) -> tuple[list[int], int, int]:
    """CoinAlg decision blocks in the window, plus the first one after it.

    Returns (decisions, start, stop) with the window ``[start, stop)``.
    """
    start = path.first_block + cfg["run.start_offset"]
    stop = min(start + cfg["run.window"], path.last_block + 1)
    if stop <= start:
        raise ConfigError(["run window lies outside the price path"])
    sched = build_schedule(cfg)
    times, t = [], start
    while True:
        t = next_trade_block(sched, t)
        times.append(t)
        if t >= stop:
            break
    return times, start, stop


def build_world(cfg: ExperimentConfig, price: float, adversary: bool = True) -> WorldState:
    pool = PoolState.at_price(price, cfg["pool.reserve_tok"], fee_rate=cfg["pool.fee_rate"],
                              tick=cfg["pool.tick"])
    bal = {COINALG: Balance(cfg["coinalg.capital_usd"], cfg["coinalg.capital_tok"])}
    if adversary:
        bal[ADVERSARY] = Balance(cfg["adversary.capital_usd"], cfg["adversary.capital_tok"])
    return WorldState(pool, bal, tx_fee=cfg["chain.tx_fee"])


@dataclass
class _Position:
    backrun: Trade
    deadline: Optional[int]
    waits_for_coinalg: bool


class _Simulation:
    def __init__(self, cfg: ExperimentConfig, path: PricePath, decisions: list[int],
                 start: int, stop: int, adversary_kind: str):
        self.cfg, self.path = cfg, path
        self.start, self.stop = start, stop
        self.kind = adversary_kind
        self.decisions = decisions
        self.next_decision = {d: n for d, n in zip(decisions, decisions[1:])}
        self.coinalg = CoinAlg(COINALG, cfg["strategy.kind"], cfg["strategy.view"],
                               base_tok=cfg["coinalg.capital_tok"])
        self.wrapper = RandomizingWrapper(_seeds(cfg["seed"])[2],
                                          int(cfg["strategy.wrapper.jitter_blocks"]))
        self.channel = CovertChannel() if cfg["strategy.covert_channel"] == "direction_bit" else None
        self.world = build_world(cfg, path.price_at(start))
        self.ratio = 1.0
        self.ghost_usd = self.ghost_tok = 0.0
        self.total0 = (self.world.total(Asset.USD), self.world.total(Asset.TOK))
        self.position: Optional[_Position] = None
        self.signal = None
        self.theft_pending = False
        self.tracker = LongRangeTracker(cfg["strategy.lambda_blocks"], start)
        self.abstentions = 0
        self.audit_error = 0.0
        self.events: list[TradeEvent] = []
        self.labels: dict[int, list[str]] = {}
        self.rows: list[tuple] = []
        self.pending_exec: dict[int, list[tuple[Trade, int]]] = {}
        self._heap: list[int] = []
        self._queued: set[int] = set()

    # -- scheduling ------------------------------------------------------
    def _queue(self, block: int):
        if self.start <= block < self.stop and block not in self._queued:
            self._queued.add(block)
            heapq.heappush(self._heap, block)

    def _prediction(self, d: int) -> Optional[Prediction]:
        target = min(self.next_decision.get(d, d + 1), self.path.last_block)
        if target <= d:
            return None
        return Prediction(d, target, self.path.price_at(target))

    # -- helpers ---------------------------------------------------------
    def _label(self, h: int, text: str):
        self.labels.setdefault(h, []).append(text)

    def _apply(self, h: int, trade: Trade, actor: str, action: str) -> bool:
        receipt = execute_block(self.world, [trade], advance=False)
        if receipt is None:
            self.events.append(TradeEvent(h, actor, action + "_invalid"))
            return False
        self.world = receipt.world
        f = receipt.fills[0]
        self.events.append(TradeEvent(h, actor, action, f.amount_in, f.amount_out))
        return f.filled

    def _adv_capital(self) -> AdversaryCapital:
        b = self.world.balance(ADVERSARY)
        return AdversaryCapital(b.usd, b.tok)

    def _repeg(self, h: int):
        target = self.path.price_at(h) * self.ratio
        pool, du, dt = repeg_pool(self.world.pool, target)
        self.ghost_usd += du
        self.ghost_tok += dt
        self.world = dataclasses.replace(self.world.with_pool(pool), block_height=h)

    def _close_position(self, h: int):
        if self.position is not None:
            if self._apply(h, self.position.backrun, ADVERSARY, "backrun"):
                self._label(h, "backrun")
            self.position = None

    # -- block ------------------------------------------------------------
    def run(self):
        for d in self.decisions:
            self._queue(d)
            if self.kind == "theft":
                self._queue(d - 1)
            if self.channel is not None:
                self._queue(d - 10)
        if self.kind == "long_range":
            self._queue(self.tracker.target_block)
        self._queue(self.start)
        while self._heap:
            h = heapq.heappop(self._heap)
            self._block(h)
        return self

    def _block(self, h: int):
        self._repeg(h)
        decision = h in self.next_decision
        # covert signal for the next decision
        if self.channel is not None and (h + 10) in self.next_decision:
            pred = self._prediction(h + 10)
            if pred is not None:
                plan = self.coinalg.dist(self.world, pred)
                sig = self.channel.emit(h + 10, plan, h)
                if sig is not None and self.kind == "covert":
                    self.signal = sig
        # covert position timeout
        if self.position is not None and self.position.deadline is not None and h >= self.position.deadline:
            self._close_position(h)
        # theft: copy the upcoming trade one block ahead
        if self.kind == "theft" and (h + 1) in self.next_decision:
            pred = self._prediction(h + 1)
            if pred is not None:
                dist = self.coinalg.dist(self.world, pred)
                copy = theft_trade(public_view(self.coinalg.view, dist), self._adv_capital())
                if copy is not None and self._apply(h, copy, ADVERSARY, "theft"):
                    self._label(h, "theft")
                    self.theft_pending = True
        # long-range frontrun of the trade expected at this block
        if (self.kind == "long_range" and self.position is None and h == self.tracker.target_block
                and self.coinalg.view is ViewKind.TRANSP):
            target = min(h + max(1, round(self.tracker.mean_gap)), self.path.last_block)
            guess = None
            if target > h:
                guess = self.coinalg.trade(self.world, Prediction(h, target, self.path.price_at(target)))
            if guess is not None:
                plan = plan_sandwich(self.world, guess, self._adv_capital())
                if abstain_check(plan, self.world.pool.fee_rate):
                    self.abstentions += 1
                    self._label(h, "abstain")
                elif self._apply(h, plan.frontrun, ADVERSARY, "frontrun"):
                    self._label(h, "frontrun")
                    self.position = _Position(plan.backrun, None, True)

        # CoinAlg decision and execution
        executions = list(self.pending_exec.pop(h, []))
        if decision:
            pred = self._prediction(h)
            dist = self.coinalg.dist(self.world, pred) if pred is not None else TradeDistribution.point(None)
            trade = self.wrapper.sample(dist)
            if trade is not None and trade.delay > 0:
                later = h + trade.delay
                self.pending_exec.setdefault(later, []).append((dataclasses.replace(trade, delay=0), h))
                self._queue(later)
            else:
                executions.append((trade, h))
        traded_any = False
        for trade, _ in executions:
            traded_any |= self._execute_coinalg(h, trade)
        self._measure(h, traded_any)

        if self.kind == "long_range":
            self._queue(self.tracker.target_block)
        # the adversary's impact persists while it waits for the CoinAlg
        waiting = self.theft_pending or (self.position is not None and self.position.waits_for_coinalg)
        self.ratio = self.world.spot / self.path.price_at(h) if waiting else 1.0

    def _execute_coinalg(self, h: int, trade: Optional[Trade]) -> bool:
        world = self.world
        plan = None
        if trade is not None and self.kind == "sandwich" and self.coinalg.view is ViewKind.TRANSP:
            plan = plan_sandwich(world, trade, self._adv_capital())
            if abstain_check(plan, world.pool.fee_rate):
                self.abstentions += 1
                self._label(h, "abstain")
                plan = None
            elif not self._apply(h, plan.frontrun, ADVERSARY, "frontrun"):
                plan = None
        if trade is not None and self.kind == "covert" and self.signal is not None and self.position is None:
            cplan = covert_sandwich(self.signal, world, self.cfg["adversary.assumed_impact"],
                                    self._adv_capital())
            self.signal = None
            if cplan.size > 0 and self._apply(h, cplan.frontrun, ADVERSARY, "frontrun"):
                self._label(h, "frontrun")
                self.position = _Position(cplan.backrun, h + COVERT_TIMEOUT_BLOCKS, False)
                self._queue(h + COVERT_TIMEOUT_BLOCKS)
        filled = False
        if trade is not None:
            filled = self._apply(h, trade, COINALG, "trade")
        self.theft_pending = False
        if plan is not None:
            self._apply(h, plan.backrun, ADVERSARY, "backrun")
            self._label(h, "sandwich")
        if filled:
            self.tracker.observe_trade(h)
            if self.position is not None:
                self._close_position(h)
        return filled

    def _measure(self, h: int, traded: bool):
        c, a = self.world.balance(COINALG), self.world.balance(ADVERSARY)
        self.rows.append((h, c.usd, c.tok, a.usd, a.tok, self.world.spot / self.path.price_at(h),
                          self.world.spot, traded))
        usd = self.world.total(Asset.USD) + self.ghost_usd
        tok = self.world.total(Asset.TOK) + self.ghost_tok
        err = abs(usd - self.total0[0]) + abs(tok - self.total0[1]) * self.world.spot
        scale = self.total0[0] + self.total0[1] * self.world.spot
        self.audit_error = max(self.audit_error, err / scale)

    # -- series -------------------------------------------------------------
    def series(self):
        rows = sorted(self.rows, key=lambda r: r[0])
        rb = np.array([r[0] for r in rows], dtype=np.int64)
        cols = np.array([r[1:7] for r in rows], dtype=float)
        blocks = np.arange(self.start, self.stop, dtype=np.int64)
        idx = np.searchsorted(rb, blocks, side="right") - 1
        price = self.path.prices_between(self.start, self.stop)
        cu, ct, au, at, ratio, spot_m = (cols[idx, j] for j in range(6))
        c0 = self.cfg["coinalg.capital_usd"], self.cfg["coinalg.capital_tok"]
        a0 = self.cfg["adversary.capital_usd"], self.cfg["adversary.capital_tok"]
        coin = (cu - c0[0]) + (ct - c0[1]) * price
        adv = (au - a0[0]) + (at - a0[1]) * price
        exact = rb[idx] == blocks
        spot = np.where(exact, spot_m, price * ratio)
        traded = np.zeros(len(blocks), dtype=bool)
        traded[rb - self.start] = [r[7] for r in rows]
        actions = ["-"] * len(blocks)
        for h, labels in self.labels.items():
            actions[h - self.start] = "+".join(labels)
        return blocks, spot, coin, adv, traded, actions


def run_scenario(config: Union[ExperimentConfig, Mapping[str, Any]], seed: Optional[int] = None,
                 path: Optional[PricePath] = None) -> RunResult:
    """Simulate the configured scenario and its adversary-free twin."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    if seed is not None:
        cfg = cfg.with_values({"seed": int(seed)})
    path = path or build_path(cfg)
    decisions, start, stop = decision_blocks(cfg, path)
    sim = _Simulation(cfg, path, decisions, start, stop, cfg["adversary.kind"]).run()
    blocks, spot, coin, adv, traded, actions = sim.series()
    if cfg["adversary.kind"] == "none":
        base = coin.copy()
        audit = sim.audit_error
    else:
        twin = _Simulation(cfg, path, decisions, start, stop, "none").run()
        base = twin.series()[2]
        audit = max(sim.audit_error, twin.audit_error)
    return RunResult(cfg, blocks, spot, coin, adv, base, traded, actions, sim.events,
                     sim.abstentions, audit)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass
class CellResult:
    values: dict
    config_hash: str
    seeds: list
    results: list = field(default_factory=list)
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


def expand_grid(base: Mapping[str, Any], axes: Mapping[str, Sequence[Any]]) -> list[dict]:
    """Cross product of ``axes`` over ``base``.

    A key naming several config keys separated by commas is a zipped axis:
    each of its values is a sequence assigning those keys together.
    """
    if any(len(v) == 0 for v in axes.values()):
        raise ConfigError(["every grid axis needs at least one value"])
    keys = list(axes)
    for k in keys:
        names = k.split(",")
        if len(names) > 1 and any(not isinstance(v, (list, tuple)) or len(v) != len(names)
                                  for v in axes[k]):
            raise ConfigError([f"zipped axis {k!r} needs {len(names)} values per entry"])
    cells = []
    for combo in itertools.product(*(axes[k] for k in keys)):
        d = dict(base)
        for k, v in zip(keys, combo):
            names = k.split(",")
            if len(names) == 1:
                d[k] = v
            else:
                d.update(zip(names, v))
        cells.append(d)
    return cells


def cell_seeds(cfg: ExperimentConfig) -> list[int]:
    s = int(cfg["seed"])
    if cfg["strategy.schedule"] == "poisson":
        return [s + i for i in range(POISSON_SEEDS)]
    return [s]


def _run_cell(args) -> tuple[list, str]:
    values, out_dir = args
    try:
        cfg = ExperimentConfig.from_dict(values)
        results = []
        for s in cell_seeds(cfg):
            r = run_scenario(cfg, seed=s)
            results.append(r)
            if out_dir is not None:
                emit_csv(r, Path(out_dir) / f"{cfg.hash}-seed{s}.csv")
        if out_dir is not None:
            summ = {"config": cfg.to_dict(), "runs": [r.summary() for r in results]}
            Path(out_dir, f"{cfg.hash}.json").write_text(json.dumps(summ, indent=1, sort_keys=True),
                                                         encoding="utf-8")
        return results, ""
    except Exception as exc:  # reported per cell
        return [], f"{type(exc).__name__}: {exc}"


def run_sweep(base: Mapping[str, Any], axes: Mapping[str, Sequence[Any]],
              out_dir: Optional[Union[str, Path]] = None, jobs: int = 1) -> list[CellResult]:
    """Run the cross product of ``axes`` over ``base``.

    With ``out_dir`` each finished cell leaves ``<hash>.json``; cells whose
    summary already exists are skipped, so an interrupted sweep resumes.
    """
    cells = []
    for values in expand_grid(base, axes):
        try:
            cfg = ExperimentConfig.from_dict(values)
            cells.append(CellResult(values, cfg.hash, cell_seeds(cfg)))
        except ConfigError as exc:
            cells.append(CellResult(values, "", [], error=str(exc)))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
    todo = [c for c in cells if c.ok and not (out_dir is not None
                                              and Path(out_dir, f"{c.config_hash}.json").exists())]
    args = [(c.values, None if out_dir is None else str(out_dir)) for c in todo]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outs = list(ex.map(_run_cell, args))
    else:
        outs = [_run_cell(a) for a in args]
    for c, (results, err) in zip(todo, outs):
        c.results, c.error = results, err
    return cells


DESK_CAPITALS = ((12, 8), (60, 40), (300, 200), (1500, 1000))
CAPITAL_AXIS = "coinalg.capital_tok,coinalg.capital_usd,adversary.capital_tok,adversary.capital_usd"


def desk_scale_axes(p0: float = 2000.0,
                    capitals: Sequence[tuple[float, float]] = DESK_CAPITALS) -> dict[str, list]:
    """Sweep axes: three CoinAlg types, two adversaries, rising and falling paths, capitals.

    ``capitals`` pairs a CoinAlg level with an adversary level, both in TOK
    units.  The CoinAlg holds half its capital in each asset; the adversary
    holds its level in TOK plus the same value in USD.
    """
    return {
        "strategy.kind,strategy.schedule": [["ideal", "fixed"], ["ideal", "poisson"],
                                            ["buy_then_sell", "fixed"]],
        "adversary.kind": ["theft", "sandwich"],
        "path.drift": [2e-5, -2e-5],
        CAPITAL_AXIS: [[c / 2, c / 2 * p0, a, a * p0] for c, a in capitals],
    }


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

CSV_HEADER = "block,spot,coinalg_profit,adversary_profit,baseline_profit,coinalg_traded,adversary_action"


def _g(x: float) -> str:
    return f"{x:.12g}"


def emit_csv(result: RunResult, path: Union[str, Path]) -> Path:
    path = Path(path)
    lines = [CSV_HEADER]
    for i in range(len(result)):
        lines.append(",".join((str(int(result.blocks[i])), _g(result.spot[i]),
                               _g(result.coinalg_profit[i]), _g(result.adversary_profit[i]),
                               _g(result.baseline_profit[i]), str(int(result.coinalg_traded[i])),
                               result.adversary_action[i])))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc
    return path


def emit_plot(results: Union[RunResult, Sequence[RunResult]], path: Union[str, Path]) -> Path:
    """SVG of CoinAlg, adversary and baseline profit; 10th-90th percentile bands for several runs."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    runs = [results] if isinstance(results, RunResult) else list(results)
    runs = [r for r in runs if len(r)]
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if runs:
        n = min(len(r) for r in runs)
        hours = (runs[0].blocks[:n] - runs[0].blocks[0]) * BLOCK_SECONDS / 3600.0
        for attr, label, color in (("coinalg_profit", "CoinAlg", "tab:blue"),
                                   ("adversary_profit", "Adversary", "tab:red"),
                                   ("baseline_profit", "CoinAlg without adversary", "tab:green")):
            ys = np.vstack([getattr(r, attr)[:n] for r in runs])
            ax.plot(hours, ys.mean(axis=0), color=color, label=label, lw=1.2)
            if len(runs) > 1:
                lo, hi = np.percentile(ys, [10, 90], axis=0)
                ax.fill_between(hours, lo, hi, color=color, alpha=0.2, lw=0)
    ax.set_xlabel("hours")
    ax.set_ylabel("profit (USD)")
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write plot to {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path


REFERENCE_OVERRIDES = {
    "path.drift": 2e-5,
    "path.volatility": 5e-4,
    "strategy.interval_blocks": 1800,
    "run.window": 36_000,
}


def reference_config(adversary_kind: str = "none", seed: int = 0) -> ExperimentConfig:
    """Rising-drift scenario: a trade every six hours for five days.

    The covert adversary is paired with a private CoinAlg that leaks one
    direction bit per trade; every other adversary sees a transparent one.
    """
    d = dict(DEFAULTS, **REFERENCE_OVERRIDES)
    d["adversary.kind"] = adversary_kind
    d["seed"] = seed
    if adversary_kind == "covert":
        d["strategy.view"] = "priv"
        d["strategy.covert_channel"] = "direction_bit"
    return ExperimentConfig.from_dict(d)
