"""Independent reference computations used to derive expected test values.

These avoid the library's closed forms: swaps are evaluated from the raw
invariant in high precision, limit fills by bisection on the post-trade
price, and sandwiches by brute-force grids.
"""
from __future__ import annotations

import mpmath as mp
import numpy as np

mp.mp.dps = 50


def mp_swap_buy(usd, tok, mu, amount):
    """(tok_out, new_usd, new_tok) for a USD -> TOK swap, from k = x * y."""
    usd, tok, mu, amount = map(mp.mpf, (usd, tok, mu, amount))
    k = usd * tok
    new_tok = k / (usd + (1 - mu) * amount)
    return tok - new_tok, usd + amount, new_tok


def mp_swap_sell(usd, tok, mu, amount):
    usd, tok, mu, amount = map(mp.mpf, (usd, tok, mu, amount))
    k = usd * tok
    new_usd = k / (tok + (1 - mu) * amount)
    return usd - new_usd, new_usd, tok + amount


def mp_cost_to_reach_by_bisection(usd, tok, mu, target, iters=200):
    """USD input that lifts the spot to ``target``, by bisection on the swap."""
    usd, tok, target = mp.mpf(usd), mp.mpf(tok), mp.mpf(target)
    lo, hi = mp.mpf(0), mp.mpf(1)
    while True:
        _, u, t = mp_swap_buy(usd, tok, mu, hi)
        if u / t >= target:
            break
        hi *= 2
    for _ in range(iters):
        mid = (lo + hi) / 2
        _, u, t = mp_swap_buy(usd, tok, mu, mid)
        if u / t < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# ---------------------------------------------------------------------------
# Vectorised sandwich around a partial-fill limit buy
# ---------------------------------------------------------------------------

def _buy(usd, tok, mu, a):
    out = tok - usd * tok / (usd + (1 - mu) * a)
    return out, usd + a, tok - out


def _sell(usd, tok, mu, a):
    out = usd - usd * tok / (tok + (1 - mu) * a)
    return out, usd - out, tok + a


def _fill_to_limit(usd, tok, mu, budget, p_lim, iters=120):
    """USD a limit buy spends: bisection for the input that reaches ``p_lim``."""
    usd = np.asarray(usd, dtype=float)
    tok = np.asarray(tok, dtype=float)
    lo = np.zeros_like(usd)
    hi = np.full_like(usd, budget)
    _, u_hi, t_hi = _buy(usd, tok, mu, hi)
    reaches = u_hi / t_hi >= p_lim
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        _, u, t = _buy(usd, tok, mu, mid)
        below = u / t < p_lim
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    spend = np.where(reaches, 0.5 * (lo + hi), budget)
    return np.where(usd / tok >= p_lim, 0.0, spend)


def sandwich_grid(usd, tok, mu, c, victim_budget, p_lim, xs):
    """Net USD of buy(x) / limit-buy victim / sell-all for every x in ``xs``."""
    xs = np.asarray(xs, dtype=float)
    got, u1, t1 = _buy(usd, tok, mu, xs)
    spend = _fill_to_limit(u1, t1, mu, victim_budget, p_lim)
    _, u2, t2 = _buy(u1, t1, mu, spend)
    back, _, _ = _sell(u2, t2, mu, got)
    return np.where(xs > 0, back - xs - 2 * c, 0.0)
