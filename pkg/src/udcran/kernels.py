"""Hot per-subcarrier search kernels.

Everything in this module is written in loop-style Python that compiles
under numba's nopython mode.  When numba is importable (and not disabled
via ``UDCRAN_NUMBA=0``) the kernels are JIT compiled with the GIL
released; otherwise the same source runs as plain NumPy/Python.  The
``bench/compare_backends.py`` script times both paths.

Search modes share one integer encoding so the batched per-subcarrier
driver can dispatch without Python overhead:

* 0 -- exhaustive enumeration of RRH subsets
* 1 -- greedy subset growth, strict-improvement stopping rule
* 2 -- best single RRH
* 3 -- exhaustive enumeration with powers pinned to per-RRH budget / N
"""

from __future__ import annotations

import math
import os

import numpy as np

MODE_EXHAUSTIVE = 0
MODE_GREEDY = 1
MODE_SINGLE = 2
MODE_EQUAL_POWER = 3

MODE_NAMES = {
    MODE_EXHAUSTIVE: "exhaustive",
    MODE_GREEDY: "greedy",
    MODE_SINGLE: "single-rrh",
    MODE_EQUAL_POWER: "equal-power",
}

_ENV_FLAG = os.environ.get("UDCRAN_NUMBA", "1")

if _ENV_FLAG != "0":
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - exercised via subprocess test
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


def _jit(func):
    if NUMBA_ENABLED:
        return _njit(cache=True, nogil=True)(func)
    return func


@_jit
def _popcount(mask):
    c = 0
    while mask:
        mask &= mask - 1
        c += 1
    return c


@_jit
def _set_terms(mask, chan, inv_rate, omega, lam):
    """Weight term and channel term of a candidate RRH set.

    ``chan[m]`` must hold gain / (sigma2 * mu_m) for the (user, SC) pair
    under consideration; the weight term is omega minus the fronthaul
    charge lam * sum(1/R_m) over the set.
    """
    w = omega
    q = 0.0
    m = 0
    mm = mask
    while mm:
        if mm & 1:
            w -= lam * inv_rate[m]
            q += chan[m]
        mm >>= 1
        m += 1
    return w, q


@_jit
def _value_from_terms(w, q, snr_coef, rate_coef):
    # Value of serving the SC with this set at the closed-form optimal
    # power: rate term at the peak SNR minus the implied power cost.
    gam = snr_coef * w * q - 1.0
    if gam <= 0.0:
        return 0.0
    return rate_coef * w * math.log2(1.0 + gam) - gam / q


@_jit
def _exhaustive_search(chan, inv_rate, omega, lam, snr_coef, rate_coef):
    """Best subset over all 2^M masks.  Ties: smaller set, lower mask."""
    M = chan.shape[0]
    best_mask = 0
    best_val = 0.0
    best_size = 0
    n_evals = 0
    for mask in range(1 << M):
        w, q = _set_terms(mask, chan, inv_rate, omega, lam)
        val = _value_from_terms(w, q, snr_coef, rate_coef)
        n_evals += 1
        if val > best_val:
            best_val = val
            best_mask = mask
            best_size = _popcount(mask)
        elif val == best_val:
            size = _popcount(mask)
            if size < best_size:
                best_mask = mask
                best_size = size
    return best_mask, best_val, n_evals


@_jit
def _greedy_search(chan, inv_rate, omega, lam, snr_coef, rate_coef):
    """Grow the set one RRH at a time while the value strictly improves."""
    M = chan.shape[0]
    cur_mask = 0
    cur_val = 0.0
    n_evals = 0
    for _ in range(M):
        best_j = -1
        best_v = -np.inf
        for j in range(M):
            bit = 1 << j
            if cur_mask & bit:
                continue
            w, q = _set_terms(cur_mask | bit, chan, inv_rate, omega, lam)
            v = _value_from_terms(w, q, snr_coef, rate_coef)
            n_evals += 1
            if v > best_v:
                best_v = v
                best_j = j
        if best_j >= 0 and best_v > cur_val:
            cur_mask |= 1 << best_j
            cur_val = best_v
        else:
            break
    return cur_mask, cur_val, n_evals


@_jit
def _single_search(chan, inv_rate, omega, lam, snr_coef, rate_coef):
    M = chan.shape[0]
    best_mask = 0
    best_val = 0.0
    n_evals = 0
    for m in range(M):
        w, q = _set_terms(1 << m, chan, inv_rate, omega, lam)
        v = _value_from_terms(w, q, snr_coef, rate_coef)
        n_evals += 1
        if v > best_val:
            best_val = v
            best_mask = 1 << m
    return best_mask, best_val, n_evals


@_jit
def _equal_power_value(mask, amp, cost, inv_rate, omega, lam, rate_coef, sigma2):
    if mask == 0:
        return 0.0
    w = omega
    s = 0.0
    c = 0.0
    m = 0
    mm = mask
    while mm:
        if mm & 1:
            w -= lam * inv_rate[m]
            s += amp[m]
            c += cost[m]
        mm >>= 1
        m += 1
    snr = s * s / sigma2
    return w * rate_coef * math.log2(1.0 + snr) - c


@_jit
def _equal_power_search(amp, cost, inv_rate, omega, lam, rate_coef, sigma2):
    M = amp.shape[0]
    best_mask = 0
    best_val = 0.0
    best_size = 0
    n_evals = 0
    for mask in range(1 << M):
        v = _equal_power_value(mask, amp, cost, inv_rate, omega, lam, rate_coef, sigma2)
        n_evals += 1
        if v > best_val:
            best_val = v
            best_mask = mask
            best_size = _popcount(mask)
        elif v == best_val:
            size = _popcount(mask)
            if size < best_size:
                best_mask = mask
                best_size = size
    return best_mask, best_val, n_evals


@_jit
def _power_for_set(mask, chan, mu_eff, w, q, snr_coef, M):
    """Closed-form per-RRH powers for a chosen set (zero when below threshold)."""
    p = np.zeros(M)
    gam = snr_coef * w * q - 1.0
    if gam <= 0.0 or mask == 0:
        return p, 0.0
    for m in range(M):
        if mask & (1 << m):
            p[m] = chan[m] / (mu_eff[m] * q) * (gam / q)
    return p, gam


@_jit
def _solve_one_sc(
    gains_km,
    inv_rate,
    weights,
    lam,
    mu_eff,
    sigma2,
    snr_coef,
    rate_coef,
    pbar_per_sc,
    mode,
    include_power_cost,
):
    """Best (user, RRH set, power) for one subcarrier at a dual point.

    Candidate order is (no user, user 0, ..., user K-1) with strict
    improvement, so ties resolve to the empty association then the lowest
    user index.  Returns the per-SC value of the decomposed Lagrangian.
    """
    K, M = gains_km.shape
    best_user = -1
    best_mask = 0
    best_val = 0.0
    n_evals = 0
    n_calls = 0

    chan = np.zeros(M)
    amp = np.zeros(M)
    cost = np.zeros(M)

    for cand in range(-1, K):
        if cand < 0:
            omega = 0.0
            for m in range(M):
                chan[m] = 0.0
                amp[m] = 0.0
                cost[m] = 0.0
        else:
            omega = weights[cand]
            for m in range(M):
                g = gains_km[cand, m]
                chan[m] = g / (sigma2 * mu_eff[m])
                if mode == MODE_EQUAL_POWER:
                    amp[m] = math.sqrt(g * pbar_per_sc[m])
                    cost[m] = mu_eff[m] * pbar_per_sc[m] if include_power_cost else 0.0

        if mode == MODE_EXHAUSTIVE:
            mask, val, ev = _exhaustive_search(chan, inv_rate, omega, lam, snr_coef, rate_coef)
        elif mode == MODE_GREEDY:
            mask, val, ev = _greedy_search(chan, inv_rate, omega, lam, snr_coef, rate_coef)
        elif mode == MODE_SINGLE:
            mask, val, ev = _single_search(chan, inv_rate, omega, lam, snr_coef, rate_coef)
        else:
            mask, val, ev = _equal_power_search(amp, cost, inv_rate, omega, lam, rate_coef, sigma2)
        n_calls += 1
        n_evals += ev
        if val > best_val:
            best_val = val
            best_user = cand
            best_mask = mask

    # Recover powers and the rate for the winning candidate.
    power = np.zeros(M)
    rate = 0.0
    if best_user >= 0 and best_mask != 0:
        if mode == MODE_EQUAL_POWER:
            s = 0.0
            for m in range(M):
                if best_mask & (1 << m):
                    power[m] = pbar_per_sc[m]
                    s += math.sqrt(gains_km[best_user, m] * pbar_per_sc[m])
            rate = rate_coef * math.log2(1.0 + s * s / sigma2)
        else:
            for m in range(M):
                chan[m] = gains_km[best_user, m] / (sigma2 * mu_eff[m])
            w, q = _set_terms(best_mask, chan, inv_rate, weights[best_user], lam)
            power, gam = _power_for_set(best_mask, chan, mu_eff, w, q, snr_coef, M)
            if gam > 0.0:
                rate = rate_coef * math.log2(1.0 + gam)

    return best_user, best_mask, best_val, rate, power, n_evals, n_calls


@_jit
def solve_all_scs(
    gains_nkm,
    inv_rate,
    weights,
    lam,
    mu_eff,
    sigma2,
    snr_coef,
    rate_coef,
    pbar_per_sc,
    mode,
    include_power_cost,
):
    """Decomposed dual maximization over every subcarrier.

    Returns per-SC winners plus instrumentation counters (search calls and
    subset-value evaluations).
    """
    N, K, M = gains_nkm.shape
    users = np.full(N, -1, dtype=np.int64)
    masks = np.zeros(N, dtype=np.int64)
    values = np.zeros(N)
    rates = np.zeros(N)
    powers = np.zeros((N, M))
    n_evals = 0
    n_calls = 0
    for n in range(N):
        u, mask, val, rate, p, ev, ca = _solve_one_sc(
            gains_nkm[n],
            inv_rate,
            weights,
            lam,
            mu_eff,
            sigma2,
            snr_coef,
            rate_coef,
            pbar_per_sc,
            mode,
            include_power_cost,
        )
        users[n] = u
        masks[n] = mask
        values[n] = val
        rates[n] = rate
        for m in range(M):
            powers[n, m] = p[m]
        n_evals += ev
        n_calls += ca
    return users, masks, values, rates, powers, n_evals, n_calls


@_jit
def sc_rates_from_powers(amp_nm, masks, powers, sigma2, rate_coef):
    """Coherent-combining rate per SC from explicit powers.

    ``amp_nm[n, m]`` is the channel magnitude from RRH m to the user
    assigned on SC n (unused entries may hold anything).
    """
    N, M = amp_nm.shape
    rates = np.zeros(N)
    for n in range(N):
        mask = masks[n]
        if mask == 0:
            continue
        s = 0.0
        for m in range(M):
            if mask & (1 << m):
                s += amp_nm[n, m] * math.sqrt(powers[n, m])
        rates[n] = rate_coef * math.log2(1.0 + s * s / sigma2)
    return rates


@_jit
def repair_allocation(
    amp_nm,
    masks,
    powers,
    inv_rate,
    pbar,
    sigma2,
    rate_coef,
    feas_tol,
):
    """Make a primal candidate feasible in place (on copies).

    Step 1 rescales any RRH whose summed power exceeds its budget.  Step 2
    repeatedly drops the selected (RRH, SC) pair whose removal costs the
    least SC rate until the fronthaul load is within bounds.  Rates are
    recomputed from the surviving powers after every change.
    """
    N, M = amp_nm.shape
    masks = masks.copy()
    powers = powers.copy()

    for m in range(M):
        tot = 0.0
        for n in range(N):
            tot += powers[n, m]
        if tot > pbar[m]:
            scale = pbar[m] / tot
            for n in range(N):
                powers[n, m] *= scale

    rates = sc_rates_from_powers(amp_nm, masks, powers, sigma2, rate_coef)

    usage = 0.0
    for n in range(N):
        mask = masks[n]
        csum = 0.0
        for m in range(M):
            if mask & (1 << m):
                csum += inv_rate[m]
        usage += rates[n] * csum

    limit = 1.0 + feas_tol
    while usage > limit:
        # Pick the selected pair whose removal shrinks its SC rate least.
        best_n = -1
        best_m = -1
        best_drop = np.inf
        for n in range(N):
            mask = masks[n]
            if mask == 0:
                continue
            for m in range(M):
                if not (mask & (1 << m)):
                    continue
                s = 0.0
                for mm in range(M):
                    if (mask & (1 << mm)) and mm != m:
                        s += amp_nm[n, mm] * math.sqrt(powers[n, mm])
                r_without = rate_coef * math.log2(1.0 + s * s / sigma2)
                drop = rates[n] - r_without
                if drop < best_drop:
                    best_drop = drop
                    best_n = n
                    best_m = m
        if best_n < 0:
            break
        masks[best_n] &= ~(1 << best_m)
        powers[best_n, best_m] = 0.0
        s = 0.0
        for mm in range(M):
            if masks[best_n] & (1 << mm):
                s += amp_nm[best_n, mm] * math.sqrt(powers[best_n, mm])
        rates[best_n] = rate_coef * math.log2(1.0 + s * s / sigma2) if masks[best_n] else 0.0
        usage = 0.0
        for n in range(N):
            mask = masks[n]
            csum = 0.0
            for m in range(M):
                if mask & (1 << m):
                    csum += inv_rate[m]
            usage += rates[n] * csum

    return masks, powers, rates, usage


