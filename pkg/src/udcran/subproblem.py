"""Per-subcarrier solvers: closed-form power, subset searches, user choice.

These are thin typed wrappers over the compiled kernels; the batched path
used by the dual solver lives in :mod:`udcran.kernels`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import DualPoint, NetworkInstance, mask_to_set, selection_terms

EXHAUSTIVE_M_LIMIT = 25

SEARCH_MODES = {
    "exhaustive": kernels.MODE_EXHAUSTIVE,
    "greedy": kernels.MODE_GREEDY,
    "single-rrh": kernels.MODE_SINGLE,
    "equal-power": kernels.MODE_EQUAL_POWER,
}


@dataclass
class ScSolution:
    """Winner of one per-SC search: user (-1 for none), set, powers, value."""

    user: int
    rrh_mask: int
    power: np.ndarray
    objective: float
    n_evals: int = 0

    def rrh_set(self) -> tuple[int, ...]:
        return mask_to_set(self.rrh_mask)


def optimal_power(
    inst: NetworkInstance, n: int, k: int, rrh_mask: int, dual: DualPoint
) -> np.ndarray:
    """Closed-form per-RRH powers for a fixed user and RRH set.

    All-zero whenever the weight-channel product is at or below the SNR
    threshold (in particular whenever the weight term is nonpositive);
    otherwise each selected RRH gets power proportional to its channel gain
    over the squared power price.
    """
    mu_eff = dual.mu_effective()
    terms = selection_terms(inst, n, k, rrh_mask, dual.lam, dual.mu)
    p = np.zeros(inst.dims.M)
    if terms.opt_snr <= 0.0 or rrh_mask == 0:
        return p
    q = terms.channel_term
    for m in mask_to_set(rrh_mask):
        chan = inst.gain[k, m, n] / (inst.noise_power * mu_eff[m])
        p[m] = chan / (mu_eff[m] * q) * (terms.opt_snr / q)
    return p


def subproblem_objective(
    inst: NetworkInstance,
    n: int,
    k: int,
    rrh_mask: int,
    power: np.ndarray,
    dual: DualPoint,
) -> float:
    """Per-SC Lagrangian at explicit powers: weight term * rate - power cost."""
    from .model import sc_rate, weight_term

    w = weight_term(inst, n, k, rrh_mask, dual.lam)
    r = sc_rate(inst, n, k, rrh_mask, power)
    cost = float(np.dot(dual.mu_effective(), np.asarray(power)))
    return w * r - cost


def _chan_vector(inst: NetworkInstance, n: int, k: int, mu_eff: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(inst.gain[k, :, n] / (inst.noise_power * mu_eff))


def exhaustive_rrh_search(
    inst: NetworkInstance, n: int, k: int, dual: DualPoint
) -> ScSolution:
    """Best RRH subset by full enumeration (guarded for tractable M)."""
    if inst.dims.M > EXHAUSTIVE_M_LIMIT:
        raise ValueError(
            f"exhaustive subset search is limited to M <= {EXHAUSTIVE_M_LIMIT}; "
            "use the greedy search instead"
        )
    mu_eff = dual.mu_effective()
    chan = _chan_vector(inst, n, k, mu_eff)
    mask, val, ev = kernels._exhaustive_search(
        chan,
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        float(inst.weight[k]),
        dual.lam,
        inst.snr_coef,
        inst.rate_coef,
    )
    return ScSolution(
        user=k, rrh_mask=int(mask), power=optimal_power(inst, n, k, int(mask), dual),
        objective=float(val), n_evals=int(ev),
    )


def greedy_rrh_search(inst: NetworkInstance, n: int, k: int, dual: DualPoint) -> ScSolution:
    """Greedy subset growth; stops at the first non-improving addition."""
    mu_eff = dual.mu_effective()
    chan = _chan_vector(inst, n, k, mu_eff)
    mask, val, ev = kernels._greedy_search(
        chan,
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        float(inst.weight[k]),
        dual.lam,
        inst.snr_coef,
        inst.rate_coef,
    )
    return ScSolution(
        user=k, rrh_mask=int(mask), power=optimal_power(inst, n, k, int(mask), dual),
        objective=float(val), n_evals=int(ev),
    )


def single_rrh_search(inst: NetworkInstance, n: int, k: int, dual: DualPoint) -> ScSolution:
    """Best single RRH under the scalar water-filling power."""
    mu_eff = dual.mu_effective()
    chan = _chan_vector(inst, n, k, mu_eff)
    mask, val, ev = kernels._single_search(
        chan,
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        float(inst.weight[k]),
        dual.lam,
        inst.snr_coef,
        inst.rate_coef,
    )
    return ScSolution(
        user=k, rrh_mask=int(mask), power=optimal_power(inst, n, k, int(mask), dual),
        objective=float(val), n_evals=int(ev),
    )


def equal_power_search(
    inst: NetworkInstance,
    n: int,
    k: int,
    dual: DualPoint,
    *,
    include_power_cost: bool = True,
) -> ScSolution:
    """Best subset with powers pinned to budget/N on selected RRHs.

    ``include_power_cost`` keeps the mu-priced power charge in the subset
    ranking (adding an RRH then costs mu_m * P_m / N); disabling it ranks
    by the weighted rate alone.  Both interpretations coincide at mu = 0.
    """
    if inst.dims.M > EXHAUSTIVE_M_LIMIT:
        raise ValueError(
            f"equal-power subset search is limited to M <= {EXHAUSTIVE_M_LIMIT}"
        )
    mu_eff = dual.mu_effective()
    per_sc = inst.max_power / inst.dims.N
    amp = np.sqrt(inst.gain[k, :, n] * per_sc)
    cost = mu_eff * per_sc if include_power_cost else np.zeros(inst.dims.M)
    mask, val, ev = kernels._equal_power_search(
        np.ascontiguousarray(amp),
        np.ascontiguousarray(cost),
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        float(inst.weight[k]),
        dual.lam,
        inst.rate_coef,
        inst.noise_power,
    )
    power = np.zeros(inst.dims.M)
    for m in mask_to_set(int(mask)):
        power[m] = per_sc[m]
    return ScSolution(
        user=k, rrh_mask=int(mask), power=power, objective=float(val), n_evals=int(ev)
    )


def best_user(
    inst: NetworkInstance,
    n: int,
    dual: DualPoint,
    search_mode: str = "exhaustive",
    *,
    include_power_cost: bool = True,
) -> ScSolution:
    """Best (user, RRH set) pair on SC n, empty association always a candidate.

    Ties resolve toward the empty association, then the lower user index.
    """
    mode = SEARCH_MODES[search_mode]
    if mode in (kernels.MODE_EXHAUSTIVE, kernels.MODE_EQUAL_POWER) and inst.dims.M > EXHAUSTIVE_M_LIMIT:
        raise ValueError(f"subset enumeration is limited to M <= {EXHAUSTIVE_M_LIMIT}")
    mu_eff = dual.mu_effective()
    u, mask, val, rate, power, ev, calls = kernels._solve_one_sc(
        np.ascontiguousarray(inst.gain[:, :, n]),
        np.ascontiguousarray(1.0 / inst.fronthaul_rate),
        inst.weight,
        dual.lam,
        mu_eff,
        inst.noise_power,
        inst.snr_coef,
        inst.rate_coef,
        np.ascontiguousarray(inst.max_power / inst.dims.N),
        mode,
        include_power_cost,
    )
    return ScSolution(
        user=int(u), rrh_mask=int(mask), power=np.asarray(power), objective=float(val),
        n_evals=int(ev),
    )
