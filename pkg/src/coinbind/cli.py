"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 runtime error.
All commands print JSON on stdout.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _dump(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


# ---------------------------------------------------------------------------
# simulate / sweep
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .harness import ExperimentConfig, cell_seeds, emit_csv, emit_plot, run_scenario

    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = cfg.with_values({"seed": args.seed})
    result = run_scenario(cfg)
    csv_out = args.csv or cfg["output.csv"]
    plot_out = args.plot or cfg["output.plot"]
    if csv_out:
        emit_csv(result, csv_out)
    if plot_out:
        seeds = cell_seeds(cfg)
        runs = [result] + [run_scenario(cfg, seed=s) for s in seeds[1:]]
        emit_plot(runs, plot_out)
    _dump({"config_hash": cfg.hash, "seed": cfg["seed"], **result.summary()})
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import ConfigError, run_sweep

    try:
        with open(args.grid, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError([f"{args.grid}: {exc.strerror}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{args.grid}: invalid JSON ({exc})"]) from None
    if not isinstance(doc, dict) or "axes" not in doc:
        raise ConfigError([f"{args.grid}: expected an object with 'base' and 'axes'"])
    cells = run_sweep(doc.get("base", {}), doc["axes"], args.out, jobs=args.jobs)
    names = [n for k in doc["axes"] for n in k.split(",")]
    report = [{"values": {n: c.values.get(n) for n in names}, "config_hash": c.config_hash,
               "seeds": c.seeds, "runs": len(c.results), "error": c.error} for c in cells]
    _dump({"cells": report, "failed": sum(1 for c in cells if not c.ok)})
    return EXIT_OK if all(c.ok for c in cells) else EXIT_RUNTIME


# ---------------------------------------------------------------------------
# game
# ---------------------------------------------------------------------------

def cmd_game(args) -> int:
    from . import games
    from .market import Balance, PoolState, WorldState
    from .oracle import Prediction

    op = args.op
    if op in ("usdwch", "repeated", "grim", "gap"):
        params = games.UltimatumParams(args.s, args.c1, args.c2, args.z, args.fees,
                                       args.delta_c, args.delta_a)
    if op == "usdwch":
        pay = games.usdwch_payoffs(params, args.e, args.b)
        _dump({"pi_C": pay.pi_C, "pi_A": pay.pi_A})
    elif op == "repeated":
        pay = games.repeated_payoffs(params, args.e_star)
        _dump({"pi_C": pay.pi_C, "pi_A": pay.pi_A})
    elif op == "gap":
        _dump({"deviation_gap": games.deviation_gap(params, args.e_star)})
    elif op == "grim":
        policy = (games.cooperative_offer(args.e_star) if args.deviate_at is None
                  else games.single_deviation(args.e_star, args.deviate_at, args.deviate_offer))
        tr = games.grim_trigger_simulate(params, args.e_star, policy, args.rounds)
        _dump({"total_C": tr.total_C, "total_A": tr.total_A,
               "rounds_accepted": int(sum(tr.responses))})
    elif op == "invalidation-cost":
        _dump({"z": games.invalidation_bound_z(args.p, args.r0),
               "stylized_cost": games.stylized_cost(args.p, args.r0, args.e)})
    elif op == "single-shot":
        pool = PoolState.at_price(args.p0, args.reserve_tok, fee_rate=args.fee_rate)
        world = WorldState(pool, {"coinalg": Balance(args.capital, 0.0)}, tx_fee=args.tx_fee)
        res = games.sdwch_single_shot(world, Prediction(0, 1, args.p_hat))
        _dump({"p_lim": res.p_lim, "pi_C": res.payoffs.pi_C, "pi_A": res.payoffs.pi_A,
               "private_pi_C": res.private.pi_C, "abstained": res.abstained,
               "cost_of_transparency": res.cost_of_transparency})
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args) -> int:
    from . import metrics
    from .coinalg import CoinAlg, ViewKind
    from .oracle import Prediction

    coinalg = CoinAlg(view=ViewKind(args.view))
    params = metrics.FairGameParams(metrics.FairScenario(), duration=args.epochs,
                                    trials=args.trials, seed=args.seed)
    alpha = args.alpha if args.alpha is not None else metrics.calibrate_alpha(params, coinalg)
    params = replace(params, alpha=alpha)
    m = args.metric
    if m == "privacy":
        sc = params.scenario
        rng = np.random.default_rng(args.seed)
        states = []
        for _ in range(args.trials):
            w = sc.world()
            states.append((w, Prediction(0, sc.epoch_blocks,
                                         sc.p0 * float(np.exp(rng.normal(0, 0.02))))))
        coinalg.grid = sc.grid()
        rep = metrics.epsilon_privacy(coinalg, args.view, states)
        _dump({"metric": m, "view": args.view, "epsilon": rep.epsilon, "states": rep.n_states})
    elif m == "fairness":
        rep = metrics.fair_game_run(params, coinalg)
        _dump({"metric": m, "view": args.view, "alpha": alpha, "advantage": rep.advantage,
               "interval": rep.interval, "v_A_mean": rep.v_A_mean, "v_P_mean": rep.v_P_mean})
    elif m == "utility":
        _dump({"metric": m, "view": args.view,
               "utility": metrics.financial_utility(args.view, params, coinalg)})
    elif m == "distinguisher":
        rep = metrics.unfairness_distinguisher(coinalg, args.view, params)
        _dump({"metric": m, "view": args.view, "alpha": alpha, "advantage": rep.advantage,
               "p_real": rep.p_real, "p_ideal": rep.p_ideal})
    elif m == "cot":
        from .harness import ExperimentConfig, reference_config, run_scenario
        cfg = ExperimentConfig.load(args.config) if args.config else reference_config("sandwich")
        cfg = cfg.with_values({"seed": args.seed})
        r = run_scenario(cfg)
        _dump({"metric": m, "cost_of_transparency": r.cost_of_transparency,
               "profit_reduction": r.profit_reduction})
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounty-verify
# ---------------------------------------------------------------------------

def cmd_bounty_verify(args) -> int:
    from .bounty import verify_files

    verdicts = verify_files(args.claim, args.audit, args.theta)
    _dump({str(cid): {"accepted": v.accepted, "reason": v.reason,
                      "entropy_bits": v.entropy_total} for cid, v in verdicts.items()})
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="coinbind", description="CoinAlg privacy/arbitrage simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run one scenario and its adversary-free twin")
    s.add_argument("--config", required=True, type=Path)
    s.add_argument("--seed", type=int)
    s.add_argument("--csv", type=Path)
    s.add_argument("--plot", type=Path)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="run the cross product of a parameter grid")
    s.add_argument("--grid", required=True, type=Path)
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("game", help="game-theoretic payoffs and equilibria")
    s.add_argument("op", choices=("usdwch", "repeated", "grim", "gap", "invalidation-cost", "single-shot"))
    s.add_argument("--s", type=float, default=10.0)
    s.add_argument("--c1", type=float, default=2.0)
    s.add_argument("--c2", type=float, default=1.0)
    s.add_argument("--z", type=float, default=1.0)
    s.add_argument("--fees", type=float, default=0.0)
    s.add_argument("--delta-c", type=float, default=0.9)
    s.add_argument("--delta-a", type=float, default=0.9)
    s.add_argument("--e", type=float, default=0.0)
    s.add_argument("--b", type=int, default=1, choices=(0, 1))
    s.add_argument("--e-star", type=float, default=3.0)
    s.add_argument("--rounds", type=int, default=500)
    s.add_argument("--deviate-at", type=int)
    s.add_argument("--deviate-offer", type=float, default=0.0)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--r0", type=float, default=100.0)
    s.add_argument("--p0", type=float, default=2000.0)
    s.add_argument("--p-hat", type=float, default=2200.0)
    s.add_argument("--reserve-tok", type=float, default=5000.0)
    s.add_argument("--fee-rate", type=float, default=0.0005)
    s.add_argument("--tx-fee", type=float, default=1.0)
    s.add_argument("--capital", type=float, default=1e6)
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("analyze", help="privacy and fairness metrics")
    s.add_argument("--metric", required=True,
                   choices=("privacy", "fairness", "utility", "cot", "distinguisher"))
    s.add_argument("--view", default="priv", choices=("priv", "asset", "dir", "transp"))
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--epochs", type=int, default=3)
    s.add_argument("--alpha", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--config", type=Path, help="scenario for --metric cot")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("bounty-verify", help="verify a bounty claim log against an audit file")
    s.add_argument("--claim", required=True, type=Path)
    s.add_argument("--theta", required=True, type=float)
    s.add_argument("--audit", required=True, type=Path)
    s.set_defaults(func=cmd_bounty_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .bounty import BountyError
    from .harness import ConfigError
    from .oracle import PathFormatError

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, PathFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BountyError, ValueError, OSError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
