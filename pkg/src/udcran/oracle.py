"""Independent reference implementations used by the test suite.

Nothing here reuses the production search or dual machinery for the
quantities it certifies: power splits come from projected-gradient ascent,
whole-problem optima from exhaustive assignment enumeration with an LP
relaxation bound for pruning, and set-function structure from direct
enumeration of the defining inequalities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import _jit
from .model import DualPoint, NetworkInstance, SystemDims, mask_to_set, weight_term


@dataclass(frozen=True)
class TinyInstanceSpec:
    """Size guard for full enumeration: dims and a hard assignment cap."""

    max_rrhs: int = 3
    max_users: int = 3
    max_scs: int = 6
    max_assignments: int = 2_000_000
    max_solved: int = 60_000

    def check(self, dims: SystemDims) -> int:
        if dims.M > self.max_rrhs or dims.K > self.max_users or dims.N > self.max_scs:
            raise ValueError(
                f"brute force refuses dims (M={dims.M}, K={dims.K}, N={dims.N}); "
                f"limit is ({self.max_rrhs}, {self.max_users}, {self.max_scs})"
            )
        n_opts = 1 + dims.K * ((1 << dims.M) - 1)
        count = n_opts**dims.N
        if count > self.max_assignments:
            raise ValueError(
                f"brute force refuses {count} assignments (cap {self.max_assignments})"
            )
        return count


# --------------------------------------------------------------------------
# Projected-gradient reference for a single SC with a fixed RRH set
# --------------------------------------------------------------------------


@_jit
def _pg_single_sc(amps, mu, weight, snr_coef, rate_coef, sigma2, q0, grad_tol, max_iter):
    """Ascent in amplitude coordinates q = sqrt(p), q clamped nonnegative."""
    M = amps.shape[0]
    q = q0.copy()
    step = 1.0

    s = 0.0
    cost = 0.0
    for m in range(M):
        s += amps[m] * q[m]
        cost += mu[m] * q[m] * q[m]
    cur = weight * rate_coef * math.log2(1.0 + s * s / sigma2) - cost

    grad = np.zeros(M)
    for _ in range(max_iter):
        s = 0.0
        for m in range(M):
            s += amps[m] * q[m]
        gam = s * s / sigma2
        gmax = 0.0
        for m in range(M):
            grad[m] = (
                2.0 * weight * snr_coef * amps[m] * s / (sigma2 * (1.0 + gam))
                - 2.0 * mu[m] * q[m]
            )
            if q[m] <= 0.0 and grad[m] < 0.0:
                grad[m] = 0.0
            a = abs(grad[m])
            if a > gmax:
                gmax = a
        if gmax <= grad_tol:
            break
        improved = False
        for _bt in range(70):
            trial = np.empty(M)
            for m in range(M):
                t = q[m] + step * grad[m]
                trial[m] = t if t > 0.0 else 0.0
            s2 = 0.0
            cost2 = 0.0
            for m in range(M):
                s2 += amps[m] * trial[m]
                cost2 += mu[m] * trial[m] * trial[m]
            val = weight * rate_coef * math.log2(1.0 + s2 * s2 / sigma2) - cost2
            if val > cur:
                q = trial
                cur = val
                step *= 1.7
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return q, cur


def concave_fixed_selection_max(
    inst: NetworkInstance,
    n: int,
    k: int,
    rrh_mask: int,
    dual: DualPoint,
    *,
    grad_tol_rel: float = 1e-8,
    max_iter: int = 6000,
) -> tuple[np.ndarray, float]:
    """Reference power split for a fixed user and RRH set.

    Requires a positive weight term (the concave regime).  Runs projected
    gradient ascent from several magnitudes around the water-level scale
    and keeps the best endpoint; the all-zero split is always a candidate.
    Returns (power vector, objective value).
    """
    w = weight_term(inst, n, k, rrh_mask, dual.lam)
    if w <= 0.0:
        raise ValueError("weight term must be positive for the concave reference")
    M = inst.dims.M
    mu_eff = dual.mu_effective()
    amps = np.zeros(M)
    for m in mask_to_set(rrh_mask):
        amps[m] = inst.amplitude(k, m, n)
    if rrh_mask == 0:
        return np.zeros(M), 0.0

    scale = np.zeros(M)
    for m in mask_to_set(rrh_mask):
        scale[m] = math.sqrt(inst.snr_coef * w / (M * mu_eff[m]))
    best_q = np.zeros(M)
    best_val = 0.0
    for factor in (1.0, 1e-2, 1e2):
        q0 = scale * factor
        g0 = np.abs(
            2.0 * w * inst.snr_coef * amps * float(amps @ q0)
            / (inst.noise_power * (1.0 + float(amps @ q0) ** 2 / inst.noise_power))
            - 2.0 * mu_eff * q0
        ).max()
        gtol = grad_tol_rel * max(1.0, g0)
        q, val = _pg_single_sc(
            amps, mu_eff, w, inst.snr_coef, inst.rate_coef, inst.noise_power, q0, gtol, max_iter
        )
        if val > best_val:
            best_val = val
            best_q = q
    return best_q * best_q, float(best_val)


# --------------------------------------------------------------------------
# Whole-problem brute force
# --------------------------------------------------------------------------


@_jit
def _knapsack_bound(w, c, rmax):
    """LP bound: max sum w*r, sum c*r <= 1, 0 <= r <= rmax (ratio greedy)."""
    n = w.shape[0]
    taken = np.zeros(n, dtype=np.bool_)
    budget = 1.0
    total = 0.0
    for _ in range(n):
        best = -1
        best_ratio = -1.0
        for i in range(n):
            if taken[i] or rmax[i] <= 0.0 or w[i] <= 0.0:
                continue
            ratio = w[i] / c[i] if c[i] > 0.0 else np.inf
            if ratio > best_ratio:
                best_ratio = ratio
                best = i
        if best < 0:
            break
        taken[best] = True
        if c[best] <= 0.0:
            total += w[best] * rmax[best]
            continue
        cost = c[best] * rmax[best]
        if cost <= budget:
            total += w[best] * rmax[best]
            budget -= cost
        else:
            total += w[best] * budget / c[best]
            budget = 0.0
            break
    return total


@_jit
def _concave_1d_max(wtilde, G, rate_coef, snr_coef):
    """max over gamma >= 0 of wtilde*rate_coef*log2(1+gamma) - gamma/G.

    The minimum mu-priced power cost of hitting SNR gamma on one SC is
    gamma / G (Cauchy-Schwarz over the amplitude split), so this is a valid
    per-SC cap of the power-priced value.  Solved by ternary search.
    """
    if wtilde <= 0.0 or G <= 0.0:
        return 0.0
    lo = 0.0
    hi = max(wtilde * snr_coef * G * 1.05 + 1.0, 1.0)
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = wtilde * rate_coef * math.log2(1.0 + m1) - m1 / G
        f2 = wtilde * rate_coef * math.log2(1.0 + m2) - m2 / G
        if f1 < f2:
            lo = m1
        else:
            hi = m2
    mid = 0.5 * (lo + hi)
    val = wtilde * rate_coef * math.log2(1.0 + mid) - mid / G
    return max(val, 0.0) * (1.0 + 1e-9) + 1e-12


@_jit
def _all_bounds(n_assign, n_sc, n_opts, w_opt, c_opt, rmax_no, lagr_tbl, lagr_const):
    """Per-assignment upper bound: min of the fronthaul knapsack relaxation
    and separable Lagrangian bounds at a few fixed price points."""
    n_pts = lagr_const.shape[0]
    bounds = np.zeros(n_assign)
    w = np.zeros(n_sc)
    c = np.zeros(n_sc)
    r = np.zeros(n_sc)
    for a in range(n_assign):
        rest = a
        for n in range(n_sc):
            opt = rest % n_opts
            rest //= n_opts
            w[n] = w_opt[opt]
            c[n] = c_opt[opt]
            r[n] = rmax_no[n, opt]
        b = _knapsack_bound(w, c, r)
        rest = a
        sums = np.zeros(n_pts)
        for n in range(n_sc):
            opt = rest % n_opts
            rest //= n_opts
            for t in range(n_pts):
                sums[t] += lagr_tbl[t, n, opt]
        for t in range(n_pts):
            lb = sums[t] + lagr_const[t]
            if lb < b:
                b = lb
        bounds[a] = b
    return bounds


@_jit
def _pg_assignment(amps_nm, wcoef, pbar, sigma2, rate_coef, snr_coef, q0, grad_tol, max_iter):
    """Multi-SC ascent under per-RRH power balls, strictly positive SC weights.

    SCs with nonpositive coefficient are pinned to zero.  Projection =
    clamp to the orthant then radial scaling of each RRH column.
    """
    N, M = amps_nm.shape
    q = q0.copy()
    for n in range(N):
        if wcoef[n] <= 0.0:
            for m in range(M):
                q[n, m] = 0.0

    def _project(x):
        for n in range(N):
            for m in range(M):
                if x[n, m] < 0.0 or wcoef[n] <= 0.0:
                    x[n, m] = 0.0
        for m in range(M):
            s = 0.0
            for n in range(N):
                s += x[n, m] * x[n, m]
            if s > pbar[m]:
                f = math.sqrt(pbar[m] / s)
                for n in range(N):
                    x[n, m] *= f
        return x

    def _value(x):
        tot = 0.0
        for n in range(N):
            if wcoef[n] <= 0.0:
                continue
            s = 0.0
            for m in range(M):
                s += amps_nm[n, m] * x[n, m]
            tot += wcoef[n] * rate_coef * math.log2(1.0 + s * s / sigma2)
        return tot

    q = _project(q)
    cur = _value(q)
    step = 1.0
    grad = np.zeros((N, M))
    for _ in range(max_iter):
        gmax = 0.0
        for n in range(N):
            if wcoef[n] <= 0.0:
                for m in range(M):
                    grad[n, m] = 0.0
                continue
            s = 0.0
            for m in range(M):
                s += amps_nm[n, m] * q[n, m]
            gam = s * s / sigma2
            for m in range(M):
                grad[n, m] = 2.0 * wcoef[n] * snr_coef * amps_nm[n, m] * s / (
                    sigma2 * (1.0 + gam)
                )
                a = abs(grad[n, m])
                if a > gmax:
                    gmax = a
        if gmax <= grad_tol:
            break
        improved = False
        for _bt in range(70):
            trial = _project(q + step * grad)
            val = _value(trial)
            if val > cur:
                q = trial
                cur = val
                step *= 1.7
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return q, cur


def _assignment_arrays(inst, digits, opt_user, opt_mask):
    N = inst.dims.N
    M = inst.dims.M
    amps = np.zeros((N, M))
    w = np.zeros(N)
    c = np.zeros(N)
    users = np.full(N, -1, dtype=np.int64)
    masks = np.zeros(N, dtype=np.int64)
    inv_r = 1.0 / inst.fronthaul_rate
    for n in range(N):
        opt = digits[n]
        k = opt_user[opt]
        mask = opt_mask[opt]
        users[n] = k
        masks[n] = mask
        if k < 0:
            continue
        w[n] = inst.weight[k]
        for m in mask_to_set(int(mask)):
            amps[n, m] = inst.amplitude(k, m, n)
            c[n] += inv_r[m]
    return amps, w, c, users, masks


def _gammas(amps, q, sigma2):
    s = (amps * q).sum(axis=1)
    return s * s / sigma2


def _usage_of(gam, c, rate_coef):
    return float(np.dot(c, rate_coef * np.log2(1.0 + gam)))


def _wsr_of(gam, w, rate_coef):
    return float(np.dot(w, rate_coef * np.log2(1.0 + gam)))


def _fixed_assignment_value(inst, amps, w, c, *, feas_tol=1e-9):
    """Best power split of one assignment: fronthaul multiplier bisection
    over projected-gradient inner solves, plus jump-recovery candidates."""
    N, M = amps.shape
    pbar = inst.max_power
    sigma2 = inst.noise_power
    rate_coef = inst.rate_coef
    snr_coef = inst.snr_coef

    col_users = np.maximum((amps > 0).sum(axis=0), 1)
    q_init = np.where(amps > 0, np.sqrt(pbar[None, :] / col_users[None, :]), 0.0)

    def inner(theta, q_start):
        wc = w - theta * c
        g0 = max(1.0, float(np.abs(wc).max()) * snr_coef * float(amps.max() or 1.0))
        q, _ = _pg_assignment(
            amps, wc, pbar, sigma2, rate_coef, snr_coef, q_start, 1e-10 * g0, 2500
        )
        return q

    best_val = 0.0
    best_q = np.zeros((N, M))

    def consider(q):
        nonlocal best_val, best_q
        gam = _gammas(amps, q, sigma2)
        if _usage_of(gam, c, rate_coef) <= 1.0 + feas_tol:
            v = _wsr_of(gam, w, rate_coef)
            if v > best_val:
                best_val = v
                best_q = q.copy()
            return True
        return False

    q = inner(0.0, q_init)
    if consider(q):
        return best_val, best_q

    q_inf = q.copy()
    active = (w > 0) & (c > 0)
    theta_hi = float((w[active] / c[active]).max()) if active.any() else 0.0
    lo, hi = 0.0, theta_hi
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        q = inner(mid, q)
        gam = _gammas(amps, q, sigma2)
        if _usage_of(gam, c, rate_coef) > 1.0 + feas_tol:
            lo = mid
            q_inf = q.copy()
        else:
            consider(q)
            hi = mid
        if hi - lo <= 1e-12 * max(theta_hi, 1.0):
            break
    consider(inner(hi, q))

    # Jump recovery from the infeasible side: global power scaling, then a
    # ladder that zeroes the worst weight-per-load SCs and scales the next.
    gam_inf = _gammas(amps, q_inf, sigma2)
    if gam_inf.sum() > 0.0:
        t_lo, t_hi = 0.0, 1.0
        for _ in range(80):
            t = 0.5 * (t_lo + t_hi)
            if _usage_of(t * gam_inf, c, rate_coef) > 1.0:
                t_hi = t
            else:
                t_lo = t
        consider(np.sqrt(t_lo) * q_inf)

        order = np.argsort(np.where(active, w / np.maximum(c, 1e-300), np.inf))
        gam_work = gam_inf.copy()
        for j in order:
            if not active[j]:
                continue
            rest = gam_work.copy()
            rest[j] = 0.0
            used_rest = _usage_of(rest, c, rate_coef)
            if used_rest <= 1.0 + feas_tol:
                room = max(1.0 - used_rest, 0.0)
                r_target = room / c[j]
                gam_target = 2.0 ** (r_target / rate_coef) - 1.0
                gj = min(gam_target, gam_inf[j])
                scaled = rest.copy()
                scaled[j] = gj
                qs = q_inf.copy()
                for i in range(N):
                    if scaled[i] <= 0.0:
                        qs[i, :] = 0.0
                    elif gam_inf[i] > 0.0:
                        qs[i, :] *= math.sqrt(scaled[i] / gam_inf[i])
                consider(qs)
            gam_work[j] = 0.0

    return best_val, best_q


def _slsqp_polish(inst, amps, w, c, q0, feas_tol=1e-9):
    """Local smooth refinement of a candidate split (safety net)."""
    from scipy.optimize import NonlinearConstraint, minimize

    N, M = amps.shape
    sel = np.argwhere(amps > 0)
    if sel.shape[0] == 0:
        return 0.0, q0
    idx = [(int(i), int(j)) for i, j in sel]
    rate_coef = inst.rate_coef
    sigma2 = inst.noise_power

    def unpack(x):
        q = np.zeros((N, M))
        for t, (i, j) in enumerate(idx):
            q[i, j] = x[t]
        return q

    def neg_wsr(x):
        gam = _gammas(amps, unpack(x), sigma2)
        return -_wsr_of(gam, w, rate_coef)

    def cons_fh(x):
        gam = _gammas(amps, unpack(x), sigma2)
        return 1.0 - _usage_of(gam, c, rate_coef)

    def cons_pow(x):
        q = unpack(x)
        return inst.max_power - (q * q).sum(axis=0)

    x0 = np.array([q0[i, j] for i, j in idx])
    try:
        res = minimize(
            neg_wsr,
            x0,
            method="SLSQP",
            bounds=[(0.0, None)] * len(idx),
            constraints=[
                NonlinearConstraint(cons_fh, 0.0, np.inf),
                NonlinearConstraint(cons_pow, 0.0, np.inf),
            ],
            options={"maxiter": 250, "ftol": 1e-12},
        )
    except Exception:
        return 0.0, q0
    if not np.all(np.isfinite(res.x)):
        return 0.0, q0
    q = unpack(np.maximum(res.x, 0.0))
    gam = _gammas(amps, q, sigma2)
    if _usage_of(gam, c, rate_coef) > 1.0 + 10 * feas_tol:
        return 0.0, q0
    tot = (q * q).sum(axis=0)
    if np.any(tot > inst.max_power * (1.0 + 10 * feas_tol)):
        return 0.0, q0
    return _wsr_of(gam, w, rate_coef), q


@dataclass
class BruteForceResult:
    wsr: float
    users: np.ndarray
    masks: np.ndarray
    power: np.ndarray  # (M, N)
    upper_bound: float
    solved_assignments: int


def brute_force_wsr(
    inst: NetworkInstance,
    grid_levels: int | None = None,
    *,
    spec: TinyInstanceSpec = TinyInstanceSpec(),
    polish_top: int = 8,
) -> BruteForceResult:
    """Certified optimum of a tiny instance by assignment enumeration.

    Every per-SC (user, RRH set) combination is bounded by the fronthaul
    knapsack relaxation; assignments are solved in descending-bound order
    until the bound drops to the incumbent, each by multiplier bisection
    over projected-gradient splits.  The top survivors get an SLSQP polish.
    ``grid_levels`` switches to a power-grid search (only for N <= 2,
    M <= 2 double-checking).
    """
    dims = inst.dims
    n_assign = spec.check(dims)
    if grid_levels is not None:
        return _grid_search(inst, grid_levels)

    M, K, N = dims.M, dims.K, dims.N
    n_masks = (1 << M) - 1
    n_opts = 1 + K * n_masks
    opt_user = np.full(n_opts, -1, dtype=np.int64)
    opt_mask = np.zeros(n_opts, dtype=np.int64)
    w_opt = np.zeros(n_opts)
    c_opt = np.zeros(n_opts)
    inv_r = 1.0 / inst.fronthaul_rate
    for opt in range(1, n_opts):
        k = (opt - 1) // n_masks
        mask = (opt - 1) % n_masks + 1
        opt_user[opt] = k
        opt_mask[opt] = mask
        w_opt[opt] = inst.weight[k]
        c_opt[opt] = sum(inv_r[m] for m in mask_to_set(mask))

    rmax_no = np.zeros((N, n_opts))
    for n in range(N):
        for opt in range(1, n_opts):
            k = opt_user[opt]
            s = sum(
                inst.amplitude(k, m, n) * math.sqrt(inst.max_power[m])
                for m in mask_to_set(int(opt_mask[opt]))
            )
            rmax_no[n, opt] = inst.rate_coef * math.log2(1.0 + s * s / inst.noise_power)

    # Separable Lagrangian bounds at a small grid of fixed price points.
    wmax = float(inst.weight.max())
    theta_scale = wmax * float(inst.fronthaul_rate.max())
    mu_scale = inst.dims.B * max(wmax, 1e-30) / (inst.max_power * math.log(2.0))
    price_points = [
        (0.0, 1.0), (0.0, 0.125), (0.0, 0.015625),
        (0.25, 1.0), (0.25, 0.125), (1.0, 0.25),
    ]
    n_pts = len(price_points)
    lagr_tbl = np.zeros((n_pts, N, n_opts))
    lagr_const = np.zeros(n_pts)
    for t, (tf, mf) in enumerate(price_points):
        theta = tf * theta_scale
        mu_hat = np.maximum(mf * mu_scale, 1e-300)
        lagr_const[t] = theta * 1.0 + float(np.dot(mu_hat, inst.max_power))
        for opt in range(1, n_opts):
            k = opt_user[opt]
            mask = int(opt_mask[opt])
            wt = w_opt[opt] - theta * c_opt[opt]
            if wt <= 0.0:
                continue
            for n in range(N):
                G = sum(
                    inst.gain[k, m, n] / (inst.noise_power * mu_hat[m])
                    for m in mask_to_set(mask)
                )
                lagr_tbl[t, n, opt] = _concave_1d_max(
                    wt, G, inst.rate_coef, inst.snr_coef
                )

    bounds = _all_bounds(n_assign, N, n_opts, w_opt, c_opt, rmax_no, lagr_tbl, lagr_const)
    order = np.argsort(-bounds, kind="stable")

    best_val = 0.0
    best = None
    candidates: list[tuple[float, np.ndarray, np.ndarray, tuple]] = []
    solved = 0
    for a in order:
        if bounds[a] <= best_val * (1.0 + 1e-12):
            break
        if solved >= spec.max_solved:
            raise RuntimeError(
                f"brute force pruning stalled after {solved} solves; instance too loose"
            )
        digits = []
        rest = int(a)
        for _ in range(N):
            digits.append(rest % n_opts)
            rest //= n_opts
        amps, w, c, users, masks = _assignment_arrays(inst, digits, opt_user, opt_mask)
        val, q = _fixed_assignment_value(inst, amps, w, c)
        solved += 1
        candidates.append((val, q, amps, (w, c, users, masks)))
        if val > best_val:
            best_val = val
            best = (q, amps, w, c, users, masks)

    candidates.sort(key=lambda t: -t[0])
    for val, q, amps, (w, c, users, masks) in candidates[:polish_top]:
        pv, pq = _slsqp_polish(inst, amps, w, c, q)
        if pv > best_val:
            best_val = pv
            best = (pq, amps, w, c, users, masks)

    if best is None:
        users = np.full(N, -1, dtype=np.int64)
        masks = np.zeros(N, dtype=np.int64)
        power = np.zeros((M, N))
    else:
        q, amps, w, c, users, masks = best
        power = (q * q).T.copy()
        users = users.copy()
        users[masks == 0] = -1
    return BruteForceResult(
        wsr=best_val,
        users=users,
        masks=masks,
        power=power,
        upper_bound=float(bounds.max(initial=0.0)),
        solved_assignments=solved,
    )


@_jit
def _grid_eval(amps_no_m, w_opt, c_opt, n_opts, pbar, sigma2, rate_coef, levels, n_sc, n_rrh):
    """Exhaustive power grid over all assignments for N <= 2, M <= 2."""
    best = 0.0
    p_steps = levels + 1
    # assignment digits and per-SC per-RRH power level indices, odometer style
    n_assign = n_opts**n_sc
    total_p = p_steps ** (n_sc * n_rrh)
    for a in range(n_assign):
        digits0 = a % n_opts
        digits1 = (a // n_opts) % n_opts if n_sc > 1 else 0
        for pc in range(total_p):
            rest = pc
            usage = 0.0
            val = 0.0
            ok = True
            tot0 = 0.0
            tot1 = 0.0
            for n in range(n_sc):
                opt = digits0 if n == 0 else digits1
                s = 0.0
                for m in range(n_rrh):
                    lvl = rest % p_steps
                    rest //= p_steps
                    p = pbar[m] * lvl / levels
                    if amps_no_m[n, opt, m] > 0.0:
                        s += amps_no_m[n, opt, m] * math.sqrt(p)
                    elif p > 0.0:
                        ok = False
                    if m == 0:
                        tot0 += p
                    else:
                        tot1 += p
                if not ok:
                    break
                r = rate_coef * math.log2(1.0 + s * s / sigma2)
                usage += c_opt[opt] * r
                val += w_opt[opt] * r
            if not ok:
                continue
            if tot0 > pbar[0] * (1 + 1e-12):
                continue
            if n_rrh > 1 and tot1 > pbar[1] * (1 + 1e-12):
                continue
            if usage > 1.0 + 1e-9:
                continue
            if val > best:
                best = val
    return best


def _grid_search(inst: NetworkInstance, levels: int) -> BruteForceResult:
    dims = inst.dims
    if dims.N > 2 or dims.M > 2:
        raise ValueError("grid mode is limited to N <= 2 and M <= 2")
    M, K, N = dims.M, dims.K, dims.N
    n_masks = (1 << M) - 1
    n_opts = 1 + K * n_masks
    w_opt = np.zeros(n_opts)
    c_opt = np.zeros(n_opts)
    amps_no_m = np.zeros((N, n_opts, M))
    inv_r = 1.0 / inst.fronthaul_rate
    for opt in range(1, n_opts):
        k = (opt - 1) // n_masks
        mask = (opt - 1) % n_masks + 1
        w_opt[opt] = inst.weight[k]
        c_opt[opt] = sum(inv_r[m] for m in mask_to_set(mask))
        for n in range(N):
            for m in mask_to_set(mask):
                amps_no_m[n, opt, m] = inst.amplitude(k, m, n)
    best = _grid_eval(
        amps_no_m, w_opt, c_opt, n_opts, inst.max_power, inst.noise_power,
        inst.rate_coef, levels, N, M,
    )
    return BruteForceResult(
        wsr=float(best),
        users=np.full(N, -1, dtype=np.int64),
        masks=np.zeros(N, dtype=np.int64),
        power=np.zeros((M, N)),
        upper_bound=float("inf"),
        solved_assignments=-1,
    )


def random_tiny_instance(
    seed: int,
    M: int = 2,
    K: int = 2,
    N: int = 4,
    *,
    fronthaul_tightness: float = 1.0,
    B_hz: float = 20e6,
) -> NetworkInstance:
    """Random enumeration-sized instance with a controlled fronthaul bite.

    Channels come from the standard generator at tiny dims; fronthaul rates
    are then rescaled so a full single-RRH allocation loads the fronthaul
    to roughly ``fronthaul_tightness`` (values above ~1 make it bind).
    """
    from .channel import FadingConfig, FronthaulConfig, LayoutConfig, build_instance

    dims = SystemDims(M=M, K=K, N=N, B=B_hz, W=50e6)
    # Force at least a few taps: tiny SC counts would otherwise give a flat
    # frequency response, which makes every SC tie and the decomposed dual
    # degenerate (recovery needs per-SC diversity, as the large-N regime has).
    inst = build_instance(
        dims,
        LayoutConfig(),
        FadingConfig(pdp_taps=max(2, (N + 1) // 2)),
        FronthaulConfig(),
        rrh_max_power_w=0.25,
        layout_seed=np.random.SeedSequence([seed, 101]),
        fading_seed=np.random.SeedSequence([seed, 202]),
    )
    rng = np.random.default_rng(np.random.SeedSequence([seed, 303]))
    r_full = np.zeros(N)
    for n in range(N):
        best = 0.0
        for k in range(K):
            s = sum(
                inst.amplitude(k, m, n) * math.sqrt(inst.max_power[m] / N) for m in range(M)
            )
            best = max(best, inst.rate_coef * math.log2(1.0 + s * s / inst.noise_power))
        r_full[n] = best
    total = max(r_full.sum(), 1.0)
    rates = total / max(fronthaul_tightness, 1e-3) * rng.uniform(0.6, 1.6, size=M)
    return NetworkInstance(
        dims=dims,
        gain=inst.gain.copy(),
        fronthaul_rate=rates,
        noise_power=inst.noise_power,
        max_power=inst.max_power.copy(),
        weight=inst.weight.copy(),
        user_rrh_distance=None
        if inst.user_rrh_distance is None
        else inst.user_rrh_distance.copy(),
        seeds=None,
    )


# --------------------------------------------------------------------------
# Set-function structure checks
# --------------------------------------------------------------------------


@dataclass
class SubmodularityReport:
    checked_triples: int
    max_inequality_violation: float
    max_identity_error: float
    passed: bool
    witness: tuple | None


def submodularity_check(
    inst: NetworkInstance,
    n: int,
    k: int,
    dual: DualPoint,
    *,
    slack: float = 1e-12,
) -> SubmodularityReport:
    """Exhaustively verify diminishing returns of the peak-SNR set function.

    Checks every (S, i, j) with i, j outside S: adding i to S must gain at
    least as much as adding i to S + j.  Also verifies the closed form of
    the one-element increment of the weight-channel product against direct
    evaluation.  The inequality is checked on the weight-channel product,
    whose positive affine map to the peak SNR preserves it exactly.
    """
    M = inst.dims.M
    if M > 8:
        raise ValueError("submodularity enumeration is limited to M <= 8")
    mu_eff = dual.mu_effective()
    g_over = inst.gain[k, :, n] / (inst.noise_power * mu_eff)
    inv_r = 1.0 / inst.fronthaul_rate
    w_k = float(inst.weight[k])
    lam = dual.lam

    def fg(mask: int) -> tuple[float, float]:
        w = w_k
        q = 0.0
        for m in mask_to_set(mask):
            w -= lam * inv_r[m]
            q += g_over[m]
        return w, q

    checked = 0
    max_viol = 0.0
    max_ident = 0.0
    witness = None
    for mask in range(1 << M):
        w_s, q_s = fg(mask)
        prod_s = w_s * q_s
        for i in range(M):
            if mask & (1 << i):
                continue
            w_si, q_si = fg(mask | (1 << i))
            inc_i = w_si * q_si - prod_s
            closed = g_over[i] * w_s - lam * inv_r[i] * q_s - lam * g_over[i] * inv_r[i]
            err = abs(inc_i - closed)
            if err > max_ident:
                max_ident = err
            for j in range(M):
                if j == i or mask & (1 << j):
                    continue
                w_sj, q_sj = fg(mask | (1 << j))
                w_sij, q_sij = fg(mask | (1 << i) | (1 << j))
                inc_i_after_j = w_sij * q_sij - w_sj * q_sj
                checked += 1
                viol = inc_i_after_j - inc_i
                if viol > max_viol:
                    max_viol = viol
                    if viol > slack:
                        witness = (mask, i, j, inc_i, inc_i_after_j)
    passed = max_viol <= slack and max_ident <= slack
    return SubmodularityReport(
        checked_triples=checked,
        max_inequality_violation=max_viol,
        max_identity_error=max_ident,
        passed=passed,
        witness=witness,
    )
