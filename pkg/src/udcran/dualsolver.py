"""Dual decomposition outer loop.

The dual of the weighted-sum-rate problem is minimized with the ellipsoid
method over (lam, mu) >= 0.  Each evaluation decomposes into independent
per-SC searches; the maximizing primal at every iterate is repaired into a
feasible allocation and the best one seen is reported, which keeps the
output meaningful even when the greedy inner search breaks exact dual
convergence.

Dual variables are handled in scaled coordinates.  Exact bounds on the
minimizer make the initial ellipsoid a ball covering a 10x box:

* lam* <= max_k w_k * max_m R_m (beyond that every nonempty set has a
  nonpositive weight term, so the dual grows linearly in lam);
* mu*_m <= B * max_k w_k / (P_m ln 2) (beyond that RRH m's summed power is
  strictly below budget, so the dual grows in mu_m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import (
    FEAS_TOL,
    MU_FLOOR,
    Allocation,
    DualPoint,
    EllipsoidBreakdownError,
    NetworkInstance,
    empty_allocation,
)
from .subproblem import EXHAUSTIVE_M_LIMIT, SEARCH_MODES


@dataclass
class SolverOptions:
    max_iterations: int = 2000
    tolerance_rel: float = 1e-4
    box_mult: float = 10.0
    mu_floor: float = MU_FLOOR
    feas_tol: float = FEAS_TOL
    include_power_cost: bool = True
    repair_reoptimize_powers: bool = False
    keep_trace: bool = False
    # Single-move local search on the recovered allocation.  Small problems
    # benefit (near-ties between RRH sets that no single dual point breaks);
    # large ones are already in the regime where decomposition is tight.
    polish_rounds: int = 3
    polish_size_limit: int = 256  # applies when N * (M + K) is at most this


@dataclass
class SearchCounters:
    search_calls: int = 0
    subset_evals: int = 0

    def add(self, calls: int, evals: int) -> None:
        self.search_calls += calls
        self.subset_evals += evals


@dataclass
class PerScBatch:
    """Raw per-SC winners of one dual evaluation (pre-repair primal)."""

    users: np.ndarray
    masks: np.ndarray
    values: np.ndarray
    rates: np.ndarray
    powers: np.ndarray  # (N, M)

    @property
    def objective_sum(self) -> float:
        return float(self.values.sum())


@dataclass
class EllipsoidState:
    center: np.ndarray
    shape: np.ndarray
    iteration: int = 0
    best_feasible: tuple[Allocation, float] | None = None


@dataclass
class EllipsoidIterate:
    center: np.ndarray
    value: float | None
    cut: str
    metric: float


@dataclass
class SolveReport:
    wsr: float
    dual_value: float
    gap: float
    allocation: Allocation
    iterations: int
    mode: str
    dual_point: DualPoint
    dual_evals: int = 0
    search_calls: int = 0
    subset_evals: int = 0
    dual_is_upper_bound: bool = True

    @property
    def rel_gap(self) -> float:
        return self.gap / self.dual_value if self.dual_value > 0 else 0.0


def _prep_gains(inst: NetworkInstance) -> np.ndarray:
    # (N, K, M) layout so per-SC slices are contiguous in the kernels.
    return np.ascontiguousarray(np.transpose(inst.gain, (2, 0, 1)))


def dual_scales(inst: NetworkInstance) -> np.ndarray:
    """Per-coordinate magnitude bounds on the dual minimizer (lam, mu...)."""
    wmax = float(inst.weight.max())
    if wmax <= 0.0:
        wmax = 1.0
    lam_scale = wmax * float(inst.fronthaul_rate.max())
    mu_scale = inst.dims.B * wmax / (inst.max_power * math.log(2.0))
    return np.concatenate([[lam_scale], mu_scale])


def dual_function(
    inst: NetworkInstance,
    dual: DualPoint,
    search_mode: str = "exhaustive",
    *,
    options: SolverOptions | None = None,
    counters: SearchCounters | None = None,
    _gains_nkm: np.ndarray | None = None,
) -> tuple[float, PerScBatch]:
    """Dual value at (lam, mu) plus the maximizing per-SC solutions.

    mu components below the floor are lifted before evaluation, so the
    value returned is the dual at the nearby division-safe point.
    """
    opts = options or SolverOptions()
    mode = SEARCH_MODES[search_mode]
    if mode in (kernels.MODE_EXHAUSTIVE, kernels.MODE_EQUAL_POWER) and inst.dims.M > EXHAUSTIVE_M_LIMIT:
        raise ValueError(f"subset enumeration is limited to M <= {EXHAUSTIVE_M_LIMIT}")
    gains = _prep_gains(inst) if _gains_nkm is None else _gains_nkm
    mu_eff = np.maximum(dual.mu, opts.mu_floor)
    users, masks, values, rates, powers, n_evals, n_calls = kernels.solve_all_scs(
        gains,
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        inst.weight,
        float(dual.lam),
        mu_eff,
        inst.noise_power,
        inst.snr_coef,
        inst.rate_coef,
        np.ascontiguousarray(inst.max_power / inst.dims.N),
        mode,
        opts.include_power_cost,
    )
    if counters is not None:
        counters.add(int(n_calls), int(n_evals))
    batch = PerScBatch(users=users, masks=masks, values=values, rates=rates, powers=powers)
    value = batch.objective_sum + dual.lam + float(np.dot(mu_eff, inst.max_power))
    return value, batch


def batch_usage(inst: NetworkInstance, batch: PerScBatch) -> float:
    inv_r = 1.0 / inst.fronthaul_rate
    bits = (batch.masks[:, None] >> np.arange(inst.dims.M)[None, :]) & 1
    return float(np.dot(batch.rates, bits @ inv_r))


def dual_subgradient(
    inst: NetworkInstance, dual: DualPoint, batch: PerScBatch
) -> np.ndarray:
    """Subgradient of the dual at (lam, mu) from its maximizing primal.

    lam component: 1 - fronthaul load of the maximizer; mu_m component:
    budget minus the RRH's summed power.
    """
    g = np.empty(inst.dims.M + 1)
    g[0] = 1.0 - batch_usage(inst, batch)
    g[1:] = inst.max_power - batch.powers.sum(axis=0)
    return g


def ellipsoid_minimize(
    oracle,
    z0: np.ndarray,
    radius: float,
    *,
    max_iterations: int = 2000,
    tolerance: float = 0.0,
    tolerance_rel: float | None = None,
    nonneg: bool = True,
    keep_trace: bool = False,
):
    """Central-cut ellipsoid minimization of a convex function over z >= 0.

    ``oracle(z)`` returns (value, subgradient).  Iterates with a negative
    coordinate get a feasibility cut along that coordinate and are not
    evaluated.  Stops when sqrt(g' P g) of an objective cut falls below
    ``tolerance`` (or ``tolerance_rel`` times the running-minimum value).
    Returns (best_z, best_value, trace, final EllipsoidState).
    """
    n = z0.shape[0]
    state = EllipsoidState(center=z0.astype(np.float64).copy(), shape=np.eye(n) * (radius * radius))
    best_val = np.inf
    best_z = state.center.copy()
    trace: list[EllipsoidIterate] = []
    for it in range(1, max_iterations + 1):
        state.iteration = it
        z, P = state.center, state.shape
        if nonneg and np.any(z < 0.0):
            i = int(np.argmin(z))
            g = np.zeros(n)
            g[i] = -1.0
            val = None
            cut = "feasibility"
        else:
            val, g = oracle(z)
            cut = "objective"
            if val < best_val:
                best_val = val
                best_z = z.copy()
        Pg = P @ g
        gPg = float(g @ Pg)
        if not np.isfinite(gPg) or gPg < 0.0:
            raise EllipsoidBreakdownError(
                f"shape matrix lost positive definiteness at iteration {it} (g'Pg={gPg})"
            )
        metric = math.sqrt(max(gPg, 0.0))
        if keep_trace:
            trace.append(EllipsoidIterate(center=z.copy(), value=val, cut=cut, metric=metric))
        if cut == "objective":
            tol = tolerance
            if tolerance_rel is not None and np.isfinite(best_val):
                tol = max(tol, tolerance_rel * abs(best_val))
            if metric <= tol:
                break
        if metric == 0.0:
            break
        gn = g / metric
        Pgn = P @ gn
        state.center = z - Pgn / (n + 1.0)
        P = (n * n / (n * n - 1.0)) * (P - (2.0 / (n + 1.0)) * np.outer(Pgn, Pgn))
        state.shape = 0.5 * (P + P.T)
    return best_z, best_val, trace, state


def _batch_amplitudes(inst: NetworkInstance, users: np.ndarray) -> np.ndarray:
    d = inst.dims
    served = users >= 0
    k_idx = np.where(served, users, 0)
    amp = np.sqrt(inst.gain[k_idx, :, np.arange(d.N)])
    amp[~served] = 0.0
    return amp


def _sc_weights(inst: NetworkInstance, users: np.ndarray) -> np.ndarray:
    served = users >= 0
    return np.where(served, inst.weight[np.where(served, users, 0)], 0.0)


def _mask_bits(masks: np.ndarray, M: int) -> np.ndarray:
    return ((np.asarray(masks, dtype=np.int64)[:, None] >> np.arange(M)[None, :]) & 1).astype(
        np.float64
    )


def _finish_allocation(
    inst: NetworkInstance, users: np.ndarray, masks: np.ndarray, powers: np.ndarray,
    rates: np.ndarray,
) -> tuple[Allocation, float]:
    d = inst.dims
    users = users.copy()
    users[masks == 0] = -1
    wsr = 0.0
    t = np.zeros(d.M)
    for n in range(d.N):
        k = int(users[n])
        if k < 0:
            continue
        wsr += inst.weight[k] * rates[n]
        mask = int(masks[n])
        for m in range(d.M):
            if mask & (1 << m):
                t[m] += rates[n] / inst.fronthaul_rate[m]
    alloc = Allocation(
        user_on_sc=users, rrh_mask=masks, power=np.ascontiguousarray(powers.T), time_share=t
    )
    return alloc, float(wsr)


def assemble_allocation(
    inst: NetworkInstance, batch: PerScBatch, *, repair: bool = True, feas_tol: float = FEAS_TOL
) -> tuple[Allocation, float]:
    """Turn per-SC winners into a feasible Allocation; returns (alloc, wsr)."""
    amp = _batch_amplitudes(inst, batch.users)
    masks = batch.masks.astype(np.int64)
    powers = batch.powers
    if repair:
        masks, powers, rates, usage = kernels.repair_allocation(
            amp,
            masks,
            np.ascontiguousarray(powers),
            np.ascontiguousarray(1.0 / inst.fronthaul_rate),
            inst.max_power,
            inst.noise_power,
            inst.rate_coef,
            feas_tol,
        )
    else:
        rates = kernels.sc_rates_from_powers(
            amp, masks, np.ascontiguousarray(powers), inst.noise_power, inst.rate_coef
        )
    return _finish_allocation(inst, batch.users, masks, powers, rates)


def _candidate_pool(
    inst: NetworkInstance,
    users: np.ndarray,
    masks_in: np.ndarray,
    powers_in: np.ndarray,
    feas_tol: float,
    consider,
    *,
    ladder_candidates: int = 4,
    allow_scaling: bool = True,
) -> None:
    """Feed feasible variants of one per-SC winner table to ``consider``.

    Variants: budget-scaled as-is (when already fronthaul-feasible), the
    drop-based repair, a global power scaling that fills the fronthaul
    budget exactly, and a ladder that zeroes the worst weight-per-load SCs
    and scales the first that fits.  Scaling powers by t multiplies each
    SC's SNR by exactly t, so fill targets are hit in closed form; every
    variant only reduces powers, so budgets stay satisfied.
    """
    d = inst.dims
    amp = _batch_amplitudes(inst, users)
    masks = masks_in.astype(np.int64)
    inv_r = 1.0 / inst.fronthaul_rate

    powers = powers_in.copy()
    totals = powers.sum(axis=0)
    over = totals > inst.max_power
    if np.any(over):
        powers[:, over] *= inst.max_power[over] / totals[over]
    s = (amp * np.sqrt(powers)).sum(axis=1)
    snr = s * s / inst.noise_power
    rates = inst.rate_coef * np.log2(1.0 + snr)
    load = _mask_bits(masks, d.M) @ inv_r  # fronthaul charge per bit/s of SC rate
    usage = float(np.dot(rates, load))
    if usage <= 1.0 + feas_tol:
        consider(users, masks, powers, rates)
        return

    # Drop-based repair.
    masks_a, powers_a, rates_a, _ = kernels.repair_allocation(
        amp, masks, np.ascontiguousarray(powers_in), np.ascontiguousarray(inv_r),
        inst.max_power, inst.noise_power, inst.rate_coef, feas_tol,
    )
    consider(users, masks_a, powers_a, rates_a)
    if not allow_scaling:
        return

    # Global scale-to-fit.
    t_lo, t_hi = 0.0, 1.0
    for _ in range(70):
        t = 0.5 * (t_lo + t_hi)
        if np.dot(inst.rate_coef * np.log2(1.0 + t * snr), load) > 1.0:
            t_hi = t
        else:
            t_lo = t
    rates_b = inst.rate_coef * np.log2(1.0 + t_lo * snr)
    consider(users, masks.copy(), powers * t_lo, rates_b)

    # Ladder: zero the worst weight-per-load SCs in ratio order; at each
    # stage where the remainder fits, scale the next SC to fill the budget
    # exactly.  Zeroing an SC leaves other SCs' rates unchanged, so stage
    # loads come from prefix sums.
    w_sc = _sc_weights(inst, users)
    use_sc = load * rates
    active = (load > 0) & (snr > 0)
    if np.any(active):
        ratio = np.where(active, w_sc / np.maximum(load, 1e-300), np.inf)
        order = np.argsort(ratio, kind="stable")
        zeroed = np.zeros(d.N, dtype=bool)
        cum = 0.0
        emitted = 0
        for j in order:
            if not active[j] or emitted >= ladder_candidates:
                break
            usage_rest = usage - cum - use_sc[j]
            if usage_rest <= 1.0 + feas_tol:
                room = max(1.0 - usage_rest, 0.0)
                exponent = room / (load[j] * inst.rate_coef)
                snr_target = snr[j] if exponent > 60.0 else min(2.0**exponent - 1.0, snr[j])
                t_j = snr_target / snr[j]
                keep = ~zeroed
                masks_c = np.where(keep, masks, 0).astype(np.int64)
                powers_c = np.where(keep[:, None], powers, 0.0)
                rates_c = np.where(keep, rates, 0.0)
                if snr_target > 0.0:
                    powers_c[j] = powers[j] * t_j
                    rates_c[j] = inst.rate_coef * math.log2(1.0 + snr_target)
                else:
                    masks_c[j] = 0
                    powers_c[j] = 0.0
                    rates_c[j] = 0.0
                consider(users, masks_c, powers_c, rates_c)
                emitted += 1
            zeroed[j] = True
            cum += use_sc[j]


def _refit_budget_powers(
    inst: NetworkInstance,
    users: np.ndarray,
    masks: np.ndarray,
    lam: float,
    mu0: np.ndarray,
    *,
    iters: int = 40,
) -> np.ndarray:
    """Closed-form powers for a fixed selection with budget-seeking prices.

    Rebalances each RRH's power price multiplicatively until its summed
    power meets the budget (or the price floors out), so iterate winners
    are scored with their budgets actually spent.  The result is a
    candidate, not an exact solve; the caller's pool restores feasibility.
    """
    d = inst.dims
    mu = np.maximum(mu0.copy(), MU_FLOOR)
    bits = _mask_bits(masks, d.M)
    served = (np.asarray(users) >= 0) & (np.asarray(masks) != 0)
    k_idx = np.where(users >= 0, users, 0)
    g_nm = inst.gain[k_idx, :, np.arange(d.N)] * bits
    g_nm[~served] = 0.0
    inv_r = 1.0 / inst.fronthaul_rate
    w_sc = np.where(served, _sc_weights(inst, users) - lam * (bits @ inv_r), 0.0)

    powers = np.zeros((d.N, d.M))
    for _ in range(iters):
        chan = g_nm / (inst.noise_power * mu[None, :])
        q = chan.sum(axis=1)
        gam = inst.snr_coef * w_sc * q - 1.0
        live = (gam > 0.0) & (q > 0.0) & served
        q_safe = np.where(live, q, 1.0)
        scale = np.where(live, gam, 0.0) / (q_safe * q_safe)
        powers = chan / mu[None, :] * scale[:, None]
        totals = powers.sum(axis=0)
        used = totals > 0
        if not used.any():
            break
        ratio = np.where(used, totals / inst.max_power, 1.0)
        if np.all(np.abs(ratio - 1.0) < 1e-3):
            break
        mu = np.maximum(mu * np.clip(ratio**0.6, 0.2, 5.0), MU_FLOOR)
    return powers


def _mix_with_reference(
    inst: NetworkInstance,
    batch: PerScBatch,
    ref_users: np.ndarray,
    ref_masks: np.ndarray,
    ref_powers_nm: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Blend an infeasible iterate with a feasible reference per SC.

    Starting from the iterate's winners everywhere, SCs are downgraded to
    the reference's (cheaper) choice in increasing order of weighted-rate
    lost per unit fronthaul load freed -- the time-sharing mixture that a
    single decomposed dual point cannot express.  The result may still be
    slightly infeasible; callers pass it through the candidate pool.
    """
    d = inst.dims
    inv_r = 1.0 / inst.fronthaul_rate

    def per_sc(users, masks, powers):
        amp = _batch_amplitudes(inst, users)
        s = (amp * np.sqrt(powers)).sum(axis=1)
        snr = s * s / inst.noise_power
        rates = inst.rate_coef * np.log2(1.0 + snr)
        load = _mask_bits(masks, d.M) @ inv_r
        w = _sc_weights(inst, users)
        return rates, load * rates, w * rates

    hi_rates, hi_use, hi_val = per_sc(batch.users, batch.masks, batch.powers)
    lo_rates, lo_use, lo_val = per_sc(ref_users, ref_masks, ref_powers_nm)

    users = batch.users.copy()
    masks = batch.masks.astype(np.int64).copy()
    powers = batch.powers.copy()
    usage = float(hi_use.sum())
    gain_per_freed = np.where(
        hi_use - lo_use > 0, (hi_val - lo_val) / np.maximum(hi_use - lo_use, 1e-300), np.inf
    )
    for j in np.argsort(gain_per_freed, kind="stable"):
        if usage <= 1.0 or not np.isfinite(gain_per_freed[j]):
            break
        users[j] = ref_users[j]
        masks[j] = ref_masks[j]
        powers[j] = ref_powers_nm[j]
        usage += lo_use[j] - hi_use[j]
    return users, masks, powers


def best_feasible_candidate(
    inst: NetworkInstance,
    batch: PerScBatch,
    *,
    feas_tol: float = FEAS_TOL,
    reference: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    dual: DualPoint | None = None,
    fixed_powers: bool = False,
) -> tuple[Allocation, float]:
    """Best feasible allocation recoverable from one dual iterate's winners.

    With ``fixed_powers`` only selection-dropping variants are generated,
    preserving pinned power levels (the equal-power restriction).
    """
    best_wsr = -1.0
    best = None

    def consider(users_c, masks_c, powers_c, rates_c):
        nonlocal best_wsr, best
        w = float(
            np.dot(
                np.where(np.asarray(masks_c) != 0, _sc_weights(inst, users_c), 0.0), rates_c
            )
        )
        if w > best_wsr:
            best_wsr = w
            best = (
                users_c.copy(),
                np.asarray(masks_c, dtype=np.int64).copy(),
                powers_c.copy(),
                rates_c.copy(),
            )

    allow_scaling = not fixed_powers
    _candidate_pool(
        inst, batch.users, batch.masks, batch.powers, feas_tol, consider,
        allow_scaling=allow_scaling,
    )
    if dual is not None and not fixed_powers:
        refit = _refit_budget_powers(inst, batch.users, batch.masks, 0.0, dual.mu_effective())
        _candidate_pool(inst, batch.users, batch.masks, refit, feas_tol, consider)
    if reference is not None:
        mu_, mm_, mp_ = _mix_with_reference(inst, batch, *reference)
        _candidate_pool(
            inst, mu_, mm_, mp_, feas_tol, consider, allow_scaling=allow_scaling
        )
        if dual is not None and not fixed_powers:
            refit = _refit_budget_powers(inst, mu_, mm_, 0.0, dual.mu_effective())
            _candidate_pool(inst, mu_, mm_, refit, feas_tol, consider)

    users_f, masks_f, powers_f, rates_f = best
    return _finish_allocation(inst, users_f, masks_f, powers_f, rates_f)


def repair_feasibility(
    inst: NetworkInstance, alloc: Allocation, *, options: SolverOptions | None = None
) -> Allocation:
    """Scale over-budget RRH powers, then drop the cheapest (RRH, SC) pairs
    until the fronthaul load fits.

    Powers are kept as-is through the drops by default.  With
    ``repair_reoptimize_powers`` set, each SC whose set shrank gets its
    remaining per-SC power total redistributed proportionally to the
    surviving channel gains (the max-SNR split for a fixed total), followed
    by one more plain repair pass to restore feasibility.
    """
    opts = options or SolverOptions()
    repaired, _ = _repair_arrays(inst, alloc.user_on_sc, alloc.rrh_mask, alloc.power, opts)
    if opts.repair_reoptimize_powers:
        changed = repaired.rrh_mask != alloc.rrh_mask
        if np.any(changed):
            power = repaired.power.copy()
            for n in np.nonzero(changed)[0]:
                k = int(repaired.user_on_sc[n])
                mask = int(repaired.rrh_mask[n])
                total = power[:, n].sum()
                if k < 0 or mask == 0 or total <= 0:
                    continue
                sel = np.array(
                    [1.0 if mask & (1 << m) else 0.0 for m in range(inst.dims.M)]
                )
                g = inst.gain[k, :, n] * sel
                if g.sum() > 0:
                    power[:, n] = total * g / g.sum()
            repaired, _ = _repair_arrays(
                inst, repaired.user_on_sc, repaired.rrh_mask, power, opts
            )
    return repaired


def _repair_arrays(
    inst: NetworkInstance,
    users: np.ndarray,
    masks: np.ndarray,
    power_mn: np.ndarray,
    opts: SolverOptions,
) -> tuple[Allocation, float]:
    batch = PerScBatch(
        users=np.asarray(users, dtype=np.int64).copy(),
        masks=np.asarray(masks, dtype=np.int64).copy(),
        values=np.zeros(inst.dims.N),
        rates=np.zeros(inst.dims.N),
        powers=np.ascontiguousarray(np.asarray(power_mn, dtype=np.float64).T),
    )
    return assemble_allocation(inst, batch, repair=True, feas_tol=opts.feas_tol)


def _local_polish(
    inst: NetworkInstance,
    users0: np.ndarray,
    masks0: np.ndarray,
    wsr0: float,
    dual: DualPoint,
    opts: SolverOptions,
    *,
    singletons_only: bool = False,
) -> tuple[Allocation, float] | None:
    """Greedy single-move improvement over (user, RRH set) per SC.

    Moves: toggle one RRH on an occupied SC (replace the RRH when only
    singleton sets are allowed), switch the user keeping the set, open an
    empty SC with (user, single RRH), or shift one RRH's participation
    between two SCs.  Each move is scored with budget-refit powers passed
    through the feasibility pool, so accepted moves always correspond to
    feasible allocations.
    """
    d = inst.dims
    mu0 = dual.mu_effective()
    cur_users = users0.copy()
    cur_masks = masks0.astype(np.int64).copy()
    cur_wsr = wsr0
    cur_best: tuple[Allocation, float] | None = None

    def score(users_c, masks_c):
        powers = _refit_budget_powers(inst, users_c, masks_c, 0.0, mu0)
        best_wsr = -1.0
        best_fin = None

        def consider(u, mk, pw, rt):
            nonlocal best_wsr, best_fin
            w = float(np.dot(np.where(np.asarray(mk) != 0, _sc_weights(inst, u), 0.0), rt))
            if w > best_wsr:
                best_wsr = w
                best_fin = (u.copy(), np.asarray(mk, dtype=np.int64).copy(), pw.copy(), rt.copy())

        _candidate_pool(inst, users_c, masks_c, powers, opts.feas_tol, consider)
        if best_fin is None:
            return None, 0.0
        return best_fin, best_wsr

    for _ in range(max(opts.polish_rounds, 0)):
        improved = False
        for n in range(d.N):
            moves: list[tuple[int, int]] = []
            mask = int(cur_masks[n])
            user = int(cur_users[n])
            if mask:
                if singletons_only:
                    for m in range(d.M):
                        bit = 1 << m
                        moves.append((user, 0 if mask == bit else bit))
                else:
                    for m in range(d.M):
                        moves.append((user, mask ^ (1 << m)))
                for k in range(d.K):
                    if k != user:
                        moves.append((k, mask))
            else:
                for k in range(d.K):
                    for m in range(d.M):
                        moves.append((k, 1 << m))
            for k_new, mask_new in moves:
                users_c = cur_users.copy()
                masks_c = cur_masks.copy()
                if mask_new == 0:
                    users_c[n] = -1
                    masks_c[n] = 0
                else:
                    users_c[n] = k_new
                    masks_c[n] = mask_new
                fin, wsr_c = score(users_c, masks_c)
                if fin is not None and wsr_c > cur_wsr * (1.0 + 1e-9):
                    cur_users, cur_masks = fin[0], fin[1]
                    cur_wsr = wsr_c
                    cur_best = (_finish_allocation(inst, *fin)[0], wsr_c)
                    improved = True
        # Transfer moves: shift one RRH's participation between two SCs,
        # which single toggles cannot reach without a loss in between.
        for m in range(d.M if not singletons_only else 0):
            bit = 1 << m
            for n1 in range(d.N):
                if not (int(cur_masks[n1]) & bit):
                    continue
                for n2 in range(d.N):
                    if n2 == n1 or cur_users[n2] < 0 or (int(cur_masks[n2]) & bit):
                        continue
                    users_c = cur_users.copy()
                    masks_c = cur_masks.copy()
                    masks_c[n1] ^= bit
                    masks_c[n2] |= bit
                    if masks_c[n1] == 0:
                        users_c[n1] = -1
                    fin, wsr_c = score(users_c, masks_c)
                    if fin is not None and wsr_c > cur_wsr * (1.0 + 1e-9):
                        cur_users, cur_masks = fin[0], fin[1]
                        cur_wsr = wsr_c
                        cur_best = (_finish_allocation(inst, *fin)[0], wsr_c)
                        improved = True
        if not improved:
            break
    return cur_best


def recover_primal(
    inst: NetworkInstance,
    dual: DualPoint,
    search_mode: str = "exhaustive",
    *,
    options: SolverOptions | None = None,
) -> Allocation:
    """Per-SC solutions at the given dual point, repaired into feasibility."""
    opts = options or SolverOptions()
    _, batch = dual_function(inst, dual, search_mode, options=opts)
    alloc, _ = assemble_allocation(inst, batch, repair=True, feas_tol=opts.feas_tol)
    return alloc


def solve(
    inst: NetworkInstance,
    search_mode: str = "exhaustive",
    options: SolverOptions | None = None,
) -> SolveReport:
    """Full pipeline: ellipsoid dual minimization with best-feasible tracking.

    The reported WSR is the best feasible primal seen at any dual iterate
    (each iterate's maximizer is repaired and scored); the dual value is
    the running minimum of evaluated dual values.  For the greedy inner
    search the dual value is only approximate and is flagged as such.
    """
    opts = options or SolverOptions()
    if search_mode not in SEARCH_MODES:
        raise ValueError(f"unknown search mode {search_mode!r}")
    d = inst.dims
    gains_nkm = _prep_gains(inst)
    scales = dual_scales(inst)
    dim = d.M + 1

    counters = SearchCounters()
    best_wsr = 0.0
    best_alloc = empty_allocation(d)
    min_dual = math.inf
    n_evals = 0

    def oracle(z_scaled: np.ndarray):
        nonlocal best_wsr, best_alloc, min_dual, n_evals
        z = z_scaled * scales
        dual = DualPoint(lam=float(max(z[0], 0.0)), mu=np.maximum(z[1:], 0.0))
        val, batch = dual_function(
            inst, dual, search_mode, options=opts, counters=counters, _gains_nkm=gains_nkm
        )
        n_evals += 1
        min_dual = min(min_dual, val)
        reference = None
        if best_wsr > 0.0:
            reference = (
                best_alloc.user_on_sc,
                best_alloc.rrh_mask,
                np.ascontiguousarray(best_alloc.power.T),
            )
        alloc, wsr = best_feasible_candidate(
            inst,
            batch,
            feas_tol=opts.feas_tol,
            reference=reference,
            dual=dual,
            fixed_powers=(search_mode == "equal-power"),
        )
        if wsr > best_wsr:
            best_wsr = wsr
            best_alloc = alloc
        sg = dual_subgradient(inst, dual, batch)
        return val, sg * scales

    half = opts.box_mult / 2.0
    z0 = np.full(dim, half)
    radius = half * math.sqrt(dim)
    zbest, _, _trace, state = ellipsoid_minimize(
        oracle,
        z0,
        radius,
        max_iterations=opts.max_iterations,
        tolerance_rel=opts.tolerance_rel,
        keep_trace=opts.keep_trace,
    )
    zstar = np.maximum(zbest * scales, 0.0)
    dual_star = DualPoint(lam=float(zstar[0]), mu=zstar[1:])

    if (
        best_wsr > 0.0
        and opts.polish_rounds > 0
        and search_mode != "equal-power"
        and d.N * (d.M + d.K) <= opts.polish_size_limit
    ):
        polished = _local_polish(
            inst,
            best_alloc.user_on_sc,
            best_alloc.rrh_mask,
            best_wsr,
            dual_star,
            opts,
            singletons_only=(search_mode == "single-rrh"),
        )
        if polished is not None and polished[1] > best_wsr:
            best_alloc, best_wsr = polished
    state.best_feasible = (best_alloc, best_wsr)

    if not math.isfinite(min_dual):
        min_dual = 0.0
    return SolveReport(
        wsr=best_wsr,
        dual_value=min_dual,
        gap=min_dual - best_wsr,
        allocation=best_alloc,
        iterations=state.iteration,
        mode=search_mode,
        dual_point=dual_star,
        dual_evals=n_evals,
        search_calls=counters.search_calls,
        subset_evals=counters.subset_evals,
        dual_is_upper_bound=(search_mode != "greedy"),
    )
