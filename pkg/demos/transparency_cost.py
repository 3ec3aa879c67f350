"""Run one transparent CoinAlg against each adversary and compare it with its private twin.

    python demos/transparency_cost.py [seed]
"""
import sys

from coinbind.harness import reference_config, run_scenario


def main(seed: int = 0) -> None:
    print(f"{'adversary':<11}{'coinalg':>14}{'private twin':>14}{'adversary':>12}{'trades':>8}")
    for kind in ("none", "theft", "sandwich", "covert", "long_range"):
        r = run_scenario(reference_config(kind, seed))
        print(f"{kind:<11}{r.final_coinalg:>14.2f}{r.final_baseline:>14.2f}"
              f"{r.final_adversary:>12.2f}{int(r.coinalg_traded.sum()):>8}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
