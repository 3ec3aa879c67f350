"""Bug-bounty verification for claims of predicting the CoinAlg's trades.

A prover registers a predicate over trades and a threshold in bits, then
submits one prediction per epoch before that epoch's trade executes.  The
claim is accepted only if every prediction is right and the predicted
outcomes carried at least ``theta`` bits of min-entropy in total, measured
from the distributions recorded by the randomizing wrapper.
"""
from __future__ import annotations

import csv
import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from .coinalg import TradeDistribution, TradeGrid
from .market import Direction, Trade

NO_TRADE = "none"


class PredicateKind(str, enum.Enum):
    DIRECTION = "direction"
    SIZE_BUCKET = "size_bucket"
    ASSET_PAIR = "asset_pair"


@dataclass(frozen=True)
class Predicate:
    """A finite partition of trades.

    ``direction`` maps to "buy" / "sell", ``size_bucket`` to the grid cell
    index and ``asset_pair`` to "TOK/USD"; "no trade" maps to ``"none"``.
    """

    kind: PredicateKind
    grid: Optional[TradeGrid] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PredicateKind(self.kind))
        if self.kind is PredicateKind.SIZE_BUCKET and self.grid is None:
            raise ValueError("size-bucket predicates need a grid")

    def __call__(self, trade: Optional[Trade]):
        if trade is None or trade.is_empty:
            return NO_TRADE
        if self.kind is PredicateKind.DIRECTION:
            return trade.direction.value
        if self.kind is PredicateKind.SIZE_BUCKET:
            return self.grid.index_of(trade)
        bought, sold = trade.direction.assets
        return "/".join(sorted((bought.value, sold.value)))

    def codomain(self) -> tuple:
        if self.kind is PredicateKind.DIRECTION:
            return (Direction.BUY.value, Direction.SELL.value, NO_TRADE)
        if self.kind is PredicateKind.SIZE_BUCKET:
            return tuple(range(self.grid.size)) + (NO_TRADE,)
        return ("TOK/USD", NO_TRADE)

    def parse_value(self, text: str):
        text = text.strip()
        if self.kind is PredicateKind.SIZE_BUCKET and text != NO_TRADE:
            return int(text)
        return text


def outcome_distribution(F: Predicate, dist: TradeDistribution) -> dict:
    out: dict = {}
    for t, p in dist.items():
        v = F(t)
        out[v] = out.get(v, 0.0) + float(p)
    return out


def min_entropy(F: Predicate, dist: TradeDistribution) -> float:
    """``-log2`` of the most likely predicate value under ``dist``."""
    pmax = max(outcome_distribution(F, dist).values())
    return 0.0 if pmax >= 1.0 else -math.log2(pmax)


class ClaimStatus(str, enum.Enum):
    OPEN = "open"
    VOID = "void"


class BountyError(Exception):
    pass


class IncompleteClaim(BountyError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    epoch: int
    block: int
    value: object


@dataclass
class BountyClaim:
    claim_id: int
    predicate: Predicate
    theta: float
    predictions: dict = field(default_factory=dict)
    status: ClaimStatus = ClaimStatus.OPEN
    void_reason: str = ""

    @property
    def epochs(self) -> list[int]:
        return sorted(self.predictions)


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reason: str
    entropy_total: float
    ledger: tuple[float, ...]
    wrong_epochs: tuple[int, ...] = ()


class BountyBoard:
    """Registry of claims and the executed-trade heights used for the timing rule."""

    def __init__(self):
        self._claims: dict[int, BountyClaim] = {}
        self._executed: dict[int, int] = {}
        self._ids = itertools.count()

    def claim(self, claim_id: int) -> BountyClaim:
        try:
            return self._claims[claim_id]
        except KeyError:
            raise BountyError(f"unknown claim {claim_id}") from None

    def register_claim(self, predicate: Predicate, theta: float) -> int:
        if not isinstance(predicate, Predicate):
            raise BountyError("predicate must be a Predicate")
        if not theta > 0:
            raise BountyError("theta must be positive")
        cid = next(self._ids)
        self._claims[cid] = BountyClaim(cid, predicate, float(theta))
        return cid

    def mark_executed(self, epoch: int, block: int):
        self._executed[epoch] = block

    def submit_prediction(self, claim_id: int, epoch: int, x, block: int) -> bool:
        """Record a prediction made at ``block``; a late one voids the claim."""
        c = self.claim(claim_id)
        if c.status is ClaimStatus.VOID:
            raise BountyError(f"claim {claim_id} is void: {c.void_reason}")
        if epoch in c.predictions:
            raise BountyError(f"epoch {epoch} already has a prediction")
        executed = self._executed.get(epoch)
        if executed is not None and block >= executed:
            c.status = ClaimStatus.VOID
            c.void_reason = f"prediction for epoch {epoch} at block {block} is not before execution at {executed}"
            return False
        c.predictions[epoch] = PredictionRecord(epoch, block, x)
        return True

    def verify_claim(self, claim_id: int, executed_trades: Mapping[int, Optional[Trade]],
                     per_epoch_dists: Mapping[int, TradeDistribution]) -> Verdict:
        c = self.claim(claim_id)
        return verify_predictions(c, executed_trades, per_epoch_dists)


def verify_predictions(claim: BountyClaim, executed_trades: Mapping[int, Optional[Trade]],
                       per_epoch_dists: Mapping[int, TradeDistribution]) -> Verdict:
    if claim.status is ClaimStatus.VOID:
        return Verdict(False, f"void: {claim.void_reason}", 0.0, ())
    if not claim.predictions:
        raise IncompleteClaim("claim has no predictions")
    missing = [e for e in claim.epochs if e not in executed_trades or e not in per_epoch_dists]
    if missing:
        raise IncompleteClaim(f"epochs not executed or not audited: {missing}")
    F = claim.predicate
    ledger = tuple(min_entropy(F, per_epoch_dists[e]) for e in claim.epochs)
    total = math.fsum(ledger)
    wrong = tuple(e for e in claim.epochs
                  if claim.predictions[e].value != F(executed_trades[e]))
    if wrong:
        return Verdict(False, "correctness", total, ledger, wrong)
    if total < claim.theta:
        return Verdict(False, "entropy", total, ledger)
    return Verdict(True, "accepted", total, ledger)


def verify_many(predictions: np.ndarray, outcomes: np.ndarray,
                entropy_per_epoch: np.ndarray, theta: float) -> np.ndarray:
    """Accept/reject many claims at once.

    ``predictions`` and ``outcomes`` are (claims, epochs) arrays of coded
    predicate values; ``entropy_per_epoch`` has one entry per epoch.
    """
    correct = np.all(np.asarray(predictions) == np.asarray(outcomes), axis=1)
    return correct & (math.fsum(np.asarray(entropy_per_epoch, dtype=float)) >= theta)


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

CLAIM_LOG_HEADER = ("claim_id", "epoch", "block", "prediction")


def write_claim_log(claim: BountyClaim, path: Union[str, Path]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CLAIM_LOG_HEADER)
        for e in claim.epochs:
            r = claim.predictions[e]
            w.writerow((claim.claim_id, r.epoch, r.block, r.value))


def read_claim_log(path: Union[str, Path]) -> list[tuple[int, int, int, str]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and tuple(row) == CLAIM_LOG_HEADER):
                continue
            if len(row) != 4:
                raise BountyError(f"{path}:{lineno}: expected 4 fields")
            try:
                rows.append((int(row[0]), int(row[1]), int(row[2]), row[3]))
            except ValueError as exc:
                raise BountyError(f"{path}:{lineno}: {exc}") from None
    return rows


def _trade_to_json(t: Optional[Trade]):
    if t is None:
        return None
    return {"player": t.player, "direction": t.direction.value, "amount": t.amount,
            "price_limit": t.price_limit, "delay": t.delay}


def _trade_from_json(d) -> Optional[Trade]:
    if d is None:
        return None
    return Trade(d.get("player", ""), Direction(d["direction"]), float(d["amount"]),
                 d.get("price_limit"), delay=int(d.get("delay", 0)))


def write_audit(path: Union[str, Path], predicate: Predicate,
                executed: Mapping[int, tuple[int, Optional[Trade]]],
                dists: Mapping[int, TradeDistribution]):
    """Audit file: per epoch the execution block, executed trade and distribution."""
    if predicate.kind is PredicateKind.SIZE_BUCKET:
        raise BountyError("size-bucket audits need the grid; use the library API")
    epochs = []
    for e in sorted(dists):
        block, trade = executed[e]
        epochs.append({
            "epoch": e, "block": block, "executed": _trade_to_json(trade),
            "dist": [{"trade": _trade_to_json(t), "p": float(p)} for t, p in dists[e].items()],
        })
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"predicate": predicate.kind.value, "epochs": epochs}, fh, indent=1)


def read_audit(path: Union[str, Path]):
    """Returns (predicate, {epoch: (block, trade)}, {epoch: distribution})."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        F = Predicate(PredicateKind(doc["predicate"]))
        executed, dists = {}, {}
        for rec in doc["epochs"]:
            e = int(rec["epoch"])
            executed[e] = (int(rec["block"]), _trade_from_json(rec["executed"]))
            dists[e] = TradeDistribution(tuple(_trade_from_json(x["trade"]) for x in rec["dist"]),
                                         np.array([float(x["p"]) for x in rec["dist"]]))
    except (KeyError, TypeError, ValueError) as exc:
        raise BountyError(f"{path}: malformed audit file ({exc})") from None
    return F, executed, dists


def verify_files(claim_path: Union[str, Path], audit_path: Union[str, Path],
                 theta: float) -> dict[int, Verdict]:
    """Replay a claim log against an audit file; one verdict per claim id."""
    F, executed, dists = read_audit(audit_path)
    board = BountyBoard()
    for e, (block, _) in executed.items():
        board.mark_executed(e, block)
    ids: dict[int, int] = {}
    for cid, epoch, block, value in read_claim_log(claim_path):
        if cid not in ids:
            ids[cid] = board.register_claim(F, theta)
        c = board.claim(ids[cid])
        if c.status is ClaimStatus.VOID:
            continue
        board.submit_prediction(ids[cid], epoch, F.parse_value(value), block)
    trades = {e: t for e, (_, t) in executed.items()}
    return {cid: board.verify_claim(i, trades, dists) for cid, i in ids.items()}
