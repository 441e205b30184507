"""Benchmark schemes sharing the dual-solver skeleton.

Three restricted solvers for comparison against the joint allocation:

* single-rrh: at most one RRH serves each subcarrier (no combining gain);
* equal-power: per-SC powers pinned to budget/N, only the fronthaul
  constraint is dualized and its multiplier found by bisection;
* conventional: static OFDMA -- contiguous SC blocks per RRH, nearest-RRH
  user association, equal fronthaul time shares, per-RRH water-filling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dualsolver import (
    PerScBatch,
    SolverOptions,
    SolveReport,
    assemble_allocation,
    dual_function,
    solve,
)
from .model import (
    Allocation,
    DualPoint,
    NetworkInstance,
    empty_allocation,
    weighted_sum_rate,
)

SCHEME_TAGS = (
    "proposed-exhaustive",
    "proposed-greedy",
    "single-rrh",
    "equal-power",
    "conventional",
)


@dataclass(frozen=True)
class BenchmarkMode:
    tag: str

    def __post_init__(self):
        if self.tag not in ("single-rrh", "equal-power", "conventional"):
            raise ValueError(f"unknown benchmark tag {self.tag!r}")


def solve_scheme(
    inst: NetworkInstance, tag: str, options: SolverOptions | None = None
) -> SolveReport:
    """Dispatch a scheme tag to its solver."""
    if tag == "proposed-exhaustive":
        return solve(inst, "exhaustive", options)
    if tag == "proposed-greedy":
        return solve(inst, "greedy", options)
    if tag == "single-rrh":
        return solve_single_rrh(inst, options)
    if tag == "equal-power":
        return solve_equal_power(inst, options)
    if tag == "conventional":
        return solve_conventional_ofdma(inst, options)
    raise ValueError(f"unknown scheme {tag!r}; expected one of {SCHEME_TAGS}")


def solve_single_rrh(inst: NetworkInstance, options: SolverOptions | None = None) -> SolveReport:
    """Dual pipeline with the best-single-RRH inner search."""
    report = solve(inst, "single-rrh", options)
    return report


def solve_equal_power(inst: NetworkInstance, options: SolverOptions | None = None) -> SolveReport:
    """Fixed powers budget/N; only the fronthaul multiplier is optimized.

    Power budgets hold by construction, so no power prices are needed; the
    fronthaul multiplier is bisected on the sign of the load slack (the
    per-SC load is non-increasing in the multiplier).  The best feasible
    candidate seen anywhere in the bisection is reported, including a
    repaired version of the last infeasible iterate.
    """
    opts = options or SolverOptions()
    d = inst.dims
    mu0 = np.zeros(d.M)
    wmax = float(inst.weight.max())
    lam_hi = wmax * float(inst.fronthaul_rate.max())

    best_wsr = -1.0
    best_alloc = empty_allocation(d)
    min_dual = math.inf
    n_evals = 0
    last_infeasible: PerScBatch | None = None

    def evaluate(lam: float):
        nonlocal min_dual, n_evals, best_wsr, best_alloc, last_infeasible
        val, batch = dual_function(
            inst, DualPoint(lam=lam, mu=mu0), "equal-power", options=opts
        )
        # mu is zero here: drop its floor contribution from the bound.
        val -= float(np.dot(np.maximum(mu0, opts.mu_floor), inst.max_power))
        n_evals += 1
        min_dual = min(min_dual, val)
        inv_r = 1.0 / inst.fronthaul_rate
        bits = (batch.masks[:, None] >> np.arange(d.M)[None, :]) & 1
        usage = float(np.dot(batch.rates, bits @ inv_r))
        if usage <= 1.0 + opts.feas_tol:
            alloc, wsr = assemble_allocation(inst, batch, repair=False)
            if wsr > best_wsr:
                best_wsr = wsr
                best_alloc = alloc
        else:
            last_infeasible = batch
        return usage

    usage0 = evaluate(0.0)
    lam_star = 0.0
    if usage0 > 1.0 + opts.feas_tol:
        lo, hi = 0.0, lam_hi
        if evaluate(hi) > 1.0 + opts.feas_tol:
            hi *= 4.0  # pathological weights; widen once
            evaluate(hi)
        for _ in range(200):
            if hi - lo <= 1e-6 * max(hi, 1.0):
                break
            mid = 0.5 * (lo + hi)
            if evaluate(mid) > 1.0 + opts.feas_tol:
                lo = mid
            else:
                hi = mid
        lam_star = hi
        if last_infeasible is not None:
            alloc, wsr = assemble_allocation(inst, last_infeasible, repair=True)
            if wsr > best_wsr:
                best_wsr = wsr
                best_alloc = alloc
    if best_wsr < 0.0:
        best_wsr = 0.0
    return SolveReport(
        wsr=best_wsr,
        dual_value=min_dual if math.isfinite(min_dual) else 0.0,
        gap=(min_dual if math.isfinite(min_dual) else 0.0) - best_wsr,
        allocation=best_alloc,
        iterations=n_evals,
        mode="equal-power",
        dual_point=DualPoint(lam=lam_star, mu=mu0),
        dual_evals=n_evals,
    )


# --------------------------------------------------------------------------
# Conventional OFDMA
# --------------------------------------------------------------------------


def _waterfill_block(
    weights: np.ndarray, gains: np.ndarray, sigma2: float, rate_coef: float, snr_coef: float,
    lam_over_r: float, mu: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-SC best user and water-filling power for one RRH block.

    gains has shape (n_sc, K_assoc); returns (user_idx, power) over the
    block for the given fronthaul multiplier (already divided by R_m) and
    power price mu.
    """
    n_sc, n_users = gains.shape
    users = np.full(n_sc, -1, dtype=np.int64)
    power = np.zeros(n_sc)
    for i in range(n_sc):
        best_val = 0.0
        best_u = -1
        best_p = 0.0
        for u in range(n_users):
            w = weights[u] - lam_over_r
            if w <= 0.0:
                continue
            g = gains[i, u]
            if g <= 0.0:
                continue
            p = snr_coef * w / mu - sigma2 / g
            if p <= 0.0:
                continue
            r = rate_coef * math.log2(1.0 + g * p / sigma2)
            val = w * r - mu * p
            if val > best_val:
                best_val = val
                best_u = u
                best_p = p
        if best_u >= 0:
            users[i] = best_u
            power[i] = best_p
    return users, power


def _block_rates(gains, users, power, sigma2, rate_coef):
    n_sc = gains.shape[0]
    rates = np.zeros(n_sc)
    for i in range(n_sc):
        if users[i] >= 0 and power[i] > 0:
            rates[i] = rate_coef * math.log2(1.0 + gains[i, users[i]] * power[i] / sigma2)
    return rates


def _solve_rrh_block(
    inst: NetworkInstance,
    m: int,
    sc_idx: np.ndarray,
    assoc_users: np.ndarray,
    opts: SolverOptions,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """One RRH's independent problem under its 1/M fronthaul share.

    Nested bisection: the outer loop prices the fronthaul share, the inner
    one the power budget.  A final refit with the user assignment frozen
    polishes the powers (that restricted problem is convex in the rates, so
    the bisection recovery is tight).  Returns (users, power, wsr, bound)
    over the block, users indexed into assoc_users.
    """
    d = inst.dims
    sigma2 = inst.noise_power
    rate_coef = inst.rate_coef
    snr_coef = inst.snr_coef
    R_m = float(inst.fronthaul_rate[m])
    budget = float(inst.max_power[m])
    share = 1.0 / d.M
    n_sc = sc_idx.shape[0]
    if n_sc == 0 or assoc_users.shape[0] == 0:
        return np.full(n_sc, -1, dtype=np.int64), np.zeros(n_sc), 0.0, 0.0

    weights = inst.weight[assoc_users]
    gains = np.ascontiguousarray(inst.gain[assoc_users][:, m, :][:, sc_idx].T)  # (n_sc, K_m)
    wmax = float(weights.max())
    mu_hi = d.B * max(wmax, 1e-30) / (budget * math.log(2.0))

    def inner(lam_over_r: float):
        """Best response at a fronthaul price: power bisected into budget."""
        mu_lo, mu_up = opts.mu_floor, mu_hi
        users, power = _waterfill_block(
            weights, gains, sigma2, rate_coef, snr_coef, lam_over_r, mu_up
        )
        if power.sum() > budget:  # pragma: no cover - mu_hi bound guarantees fit
            mu_up *= 4.0
        for _ in range(80):
            mid = 0.5 * (mu_lo + mu_up)
            users, power = _waterfill_block(
                weights, gains, sigma2, rate_coef, snr_coef, lam_over_r, mid
            )
            if power.sum() > budget:
                mu_lo = mid
            else:
                mu_up = mid
        users, power = _waterfill_block(
            weights, gains, sigma2, rate_coef, snr_coef, lam_over_r, mu_up
        )
        rates = _block_rates(gains, users, power, sigma2, rate_coef)
        return users, power, rates, mu_up

    best = (np.full(n_sc, -1, dtype=np.int64), np.zeros(n_sc), -1.0)
    bound = math.inf

    def consider(users, power, rates, lam_over_r, mu):
        nonlocal best, bound
        usage = rates.sum() / R_m
        wsr = float(np.dot(np.where(users >= 0, weights[np.maximum(users, 0)], 0.0), rates))
        dual_val = (
            float(
                sum(
                    (weights[users[i]] - lam_over_r) * rates[i] - mu * power[i]
                    for i in range(n_sc)
                    if users[i] >= 0
                )
            )
            + lam_over_r * R_m * share
            + mu * budget
        )
        bound = min(bound, dual_val)
        if usage <= share + opts.feas_tol and wsr > best[2]:
            best = (users.copy(), power.copy(), wsr)

    def consider_scaled(users, power, rates):
        """Rate-cap recovery from an infeasible point: power scaling hits any
        rate sum below the unscaled one (SNR is linear in the scale), and a
        ladder drops the lowest-weight SCs first when that is better."""
        nonlocal best
        if rates.sum() <= 0.0:
            return
        snrs = 2.0 ** (rates / rate_coef) - 1.0
        cap = R_m * share

        def try_subset(keep: np.ndarray):
            nonlocal best
            snr_kept = np.where(keep, snrs, 0.0)
            t_lo, t_hi = 0.0, 1.0
            for _ in range(60):
                t = 0.5 * (t_lo + t_hi)
                if (rate_coef * np.log2(1.0 + t * snr_kept)).sum() > cap:
                    t_hi = t
                else:
                    t_lo = t
            r_s = rate_coef * np.log2(1.0 + t_lo * snr_kept)
            u_s = np.where(keep & (r_s > 0), users, -1)
            wsr_s = float(np.dot(np.where(u_s >= 0, weights[np.maximum(u_s, 0)], 0.0), r_s))
            if wsr_s > best[2]:
                best = (u_s.astype(np.int64), np.where(keep, power * t_lo, 0.0), wsr_s)

        try_subset(np.ones(n_sc, dtype=bool))
        w_sc = np.where(users >= 0, weights[np.maximum(users, 0)], 0.0)
        order = np.argsort(w_sc, kind="stable")
        keep = np.ones(n_sc, dtype=bool)
        for j in order[: min(4, n_sc - 1)]:
            keep = keep.copy()
            keep[j] = False
            try_subset(keep)

    users, power, rates, mu = inner(0.0)
    consider(users, power, rates, 0.0, mu)
    if rates.sum() / R_m > share + opts.feas_tol:
        consider_scaled(users, power, rates)
        lo, hi = 0.0, wmax
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            users, power, rates, mu = inner(mid)
            consider(users, power, rates, mid, mu)
            if rates.sum() / R_m > share + opts.feas_tol:
                lo = mid
            else:
                hi = mid
        users, power, rates, mu = inner(hi)
        consider(users, power, rates, hi, mu)
        users_lo, power_lo, rates_lo, _ = inner(lo)
        consider_scaled(users_lo, power_lo, rates_lo)

    # Polish: freeze the best user assignment and refit powers exactly.
    users = best[0]
    if best[2] > 0.0 and np.any(users >= 0):
        users2, power2, rates2, lam2, mu2 = _refit_fixed_users(
            weights, gains, users, sigma2, rate_coef, snr_coef, R_m * share, budget, opts
        )
        consider(users2, power2, rates2, lam2, mu2)

    users, power, wsr = best
    if wsr < 0.0:
        return np.full(n_sc, -1, dtype=np.int64), np.zeros(n_sc), 0.0, max(bound, 0.0)
    return users, power, wsr, max(bound, 0.0)


def _refit_fixed_users(
    weights, gains, users, sigma2, rate_coef, snr_coef, rate_cap, budget, opts
):
    """Exact power refit for a frozen per-SC user assignment.

    In rate coordinates the restricted problem is convex (linear objective
    and rate cap, convex power cost), so nested bisection on the two prices
    recovers the optimum without a gap.
    """
    n_sc = gains.shape[0]
    g = np.array([gains[i, users[i]] if users[i] >= 0 else 0.0 for i in range(n_sc)])
    w = np.array([weights[users[i]] if users[i] >= 0 else 0.0 for i in range(n_sc)])
    wmax = float(w.max()) if n_sc else 0.0

    def powers_at(lam_rate: float, mu: float):
        # Per-SC water level from pricing both the rate cap and the power.
        p = np.zeros(n_sc)
        for i in range(n_sc):
            if users[i] < 0 or g[i] <= 0.0:
                continue
            coef = w[i] - lam_rate
            if coef <= 0.0:
                continue
            pi = snr_coef * coef / mu - sigma2 / g[i]
            p[i] = pi if pi > 0.0 else 0.0
        return p

    def rates_of(p):
        r = np.zeros(n_sc)
        for i in range(n_sc):
            if p[i] > 0.0:
                r[i] = rate_coef * math.log2(1.0 + g[i] * p[i] / sigma2)
        return r

    mu_hi0 = 4.0 * snr_coef * max(wmax, 1e-30) / max(budget, 1e-30)

    def inner(lam_rate: float):
        mu_lo, mu_up = opts.mu_floor, mu_hi0
        while powers_at(lam_rate, mu_up).sum() > budget:
            mu_up *= 4.0
        for _ in range(100):
            mid = 0.5 * (mu_lo + mu_up)
            if powers_at(lam_rate, mid).sum() > budget:
                mu_lo = mid
            else:
                mu_up = mid
        return mu_up

    lam_lo, lam_hi = 0.0, wmax
    mu = inner(0.0)
    p = powers_at(0.0, mu)
    if rates_of(p).sum() > rate_cap:
        for _ in range(100):
            mid = 0.5 * (lam_lo + lam_hi)
            mu = inner(mid)
            p = powers_at(mid, mu)
            if rates_of(p).sum() > rate_cap:
                lam_lo = mid
            else:
                lam_hi = mid
        mu = inner(lam_hi)
        p = powers_at(lam_hi, mu)
        lam_final = lam_hi
    else:
        lam_final = 0.0
    r = rates_of(p)
    out_users = users.copy()
    out_users[p <= 0.0] = -1
    return out_users, p, r, lam_final, mu


def solve_conventional_ofdma(
    inst: NetworkInstance, options: SolverOptions | None = None
) -> SolveReport:
    """Static OFDMA baseline: fixed SC blocks, nearest-RRH users, t = 1/M.

    The N - M*floor(N/M) remainder subcarriers stay unused.  Each RRH's
    block is solved independently under a 1/M fronthaul time share.
    """
    opts = options or SolverOptions()
    d = inst.dims
    if inst.user_rrh_distance is None:
        raise ValueError("conventional scheme needs user-RRH distances on the instance")
    block = d.N // d.M
    nearest = np.argmin(inst.user_rrh_distance, axis=1)  # ties -> lower RRH index

    users_sc = np.full(d.N, -1, dtype=np.int64)
    masks = np.zeros(d.N, dtype=np.int64)
    power = np.zeros((d.M, d.N))
    total_wsr = 0.0
    total_bound = 0.0
    for m in range(d.M):
        sc_idx = np.arange(m * block, (m + 1) * block)
        assoc = np.nonzero(nearest == m)[0]
        bu, bp, wsr, bound = _solve_rrh_block(inst, m, sc_idx, assoc, opts)
        total_wsr += wsr
        total_bound += bound
        for i, n in enumerate(sc_idx):
            if bu[i] >= 0 and bp[i] > 0.0:
                users_sc[n] = assoc[bu[i]]
                masks[n] = 1 << m
                power[m, n] = bp[i]

    alloc = Allocation(
        user_on_sc=users_sc,
        rrh_mask=masks,
        power=power,
        time_share=np.full(d.M, 1.0 / d.M),
    )
    wsr = weighted_sum_rate(inst, alloc)
    return SolveReport(
        wsr=wsr,
        dual_value=total_bound,
        gap=total_bound - wsr,
        allocation=alloc,
        iterations=1,
        mode="conventional",
        dual_point=DualPoint(lam=0.0, mu=np.zeros(d.M)),
    )
