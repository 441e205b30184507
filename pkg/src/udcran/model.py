"""Domain types and closed-form rate / SNR / set-function math.

All rates are kept in bit/s internally so the fronthaul load is
dimensionless; powers are in watts, channel gains are linear power gains.
RRH subsets are encoded as integer bitmasks (bit m set == RRH m selected),
which keeps exhaustive enumeration and greedy growth cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MU_FLOOR = 1e-12
FEAS_TOL = 1e-9
MAX_RRHS_FOR_BITMASK = 63


class UdcranError(Exception):
    """Base class for package errors."""


class InfeasibleAllocationError(UdcranError):
    """An allocation violates the fronthaul or power constraints."""


class EllipsoidBreakdownError(UdcranError):
    """The ellipsoid shape matrix lost positive definiteness."""


class ConfigError(UdcranError, ValueError):
    """Invalid experiment or solver configuration."""


def mask_to_set(mask: int) -> tuple[int, ...]:
    """Bitmask -> sorted tuple of RRH indices."""
    out = []
    m = 0
    while mask:
        if mask & 1:
            out.append(m)
        mask >>= 1
        m += 1
    return tuple(out)


def set_to_mask(rrhs) -> int:
    mask = 0
    for m in rrhs:
        mask |= 1 << int(m)
    return mask


@dataclass(frozen=True)
class SystemDims:
    """Network size and bandwidths.

    M RRHs, K users, N subcarriers over access bandwidth B (Hz); the
    fronthaul spectrum is W (Hz) wide.
    """

    M: int
    K: int
    N: int
    B: float
    W: float

    def __post_init__(self):
        if self.M < 1 or self.K < 1 or self.N < 1:
            raise ValueError(f"counts must be >= 1, got M={self.M} K={self.K} N={self.N}")
        if self.M > MAX_RRHS_FOR_BITMASK:
            raise ValueError(f"M={self.M} exceeds bitmask capacity {MAX_RRHS_FOR_BITMASK}")
        if self.B <= 0 or self.W <= 0:
            raise ValueError("bandwidths must be positive")

    @property
    def sc_bandwidth(self) -> float:
        return self.B / self.N


@dataclass
class NetworkInstance:
    """One realization of the network: geometry-derived gains and budgets.

    gain[k, m, n] is the linear access power gain from RRH m to user k on
    subcarrier n; fronthaul_rate[m] is the peak CP->RRH rate in bit/s;
    noise_power is the per-SC receiver noise in watts.
    """

    dims: SystemDims
    gain: np.ndarray
    fronthaul_rate: np.ndarray
    noise_power: float
    max_power: np.ndarray
    weight: np.ndarray
    user_rrh_distance: np.ndarray | None = None
    seeds: tuple[int, int] | None = None

    def __post_init__(self):
        d = self.dims
        self.gain = np.ascontiguousarray(np.asarray(self.gain, dtype=np.float64))
        self.fronthaul_rate = np.asarray(self.fronthaul_rate, dtype=np.float64)
        self.max_power = np.asarray(self.max_power, dtype=np.float64)
        self.weight = np.asarray(self.weight, dtype=np.float64)
        if self.gain.shape != (d.K, d.M, d.N):
            raise ValueError(f"gain shape {self.gain.shape} != {(d.K, d.M, d.N)}")
        if self.fronthaul_rate.shape != (d.M,) or self.max_power.shape != (d.M,):
            raise ValueError("fronthaul_rate and max_power must have shape (M,)")
        if self.weight.shape != (d.K,):
            raise ValueError("weight must have shape (K,)")
        if np.any(self.gain < 0) or not np.all(np.isfinite(self.gain)):
            raise ValueError("gains must be finite and nonnegative")
        if np.any(self.fronthaul_rate <= 0):
            raise ValueError("fronthaul rates must be positive")
        if self.noise_power <= 0:
            raise ValueError("noise power must be positive")
        if np.any(self.max_power <= 0):
            raise ValueError("power budgets must be positive")
        if np.any(self.weight < 0):
            raise ValueError("user weights must be nonnegative")
        if self.user_rrh_distance is not None:
            self.user_rrh_distance = np.asarray(self.user_rrh_distance, dtype=np.float64)
            if self.user_rrh_distance.shape != (d.K, d.M):
                raise ValueError("user_rrh_distance must have shape (K, M)")
        for arr in (self.gain, self.fronthaul_rate, self.max_power, self.weight):
            arr.flags.writeable = False

    @property
    def snr_coef(self) -> float:
        """B / (N ln 2): converts a weight-channel product to a peak SNR."""
        return self.dims.B / (self.dims.N * math.log(2.0))

    @property
    def rate_coef(self) -> float:
        """Per-SC bandwidth B / N, the prefactor of log2(1 + SNR)."""
        return self.dims.B / self.dims.N

    def amplitude(self, k: int, m: int, n: int) -> float:
        return math.sqrt(self.gain[k, m, n])


@dataclass
class Allocation:
    """Full primal solution.

    user_on_sc[n] is the served user index or -1; rrh_mask[n] the selected
    RRH bitmask; power has shape (M, N); time_share the per-RRH fronthaul
    time fractions.
    """

    user_on_sc: np.ndarray
    rrh_mask: np.ndarray
    power: np.ndarray
    time_share: np.ndarray

    def __post_init__(self):
        self.user_on_sc = np.asarray(self.user_on_sc, dtype=np.int64)
        self.rrh_mask = np.asarray(self.rrh_mask, dtype=np.int64)
        self.power = np.asarray(self.power, dtype=np.float64)
        self.time_share = np.asarray(self.time_share, dtype=np.float64)

    def rrh_sets(self) -> list[tuple[int, ...]]:
        return [mask_to_set(int(m)) for m in self.rrh_mask]

    def validate(self, inst: NetworkInstance, tol: float = FEAS_TOL) -> None:
        """Raise if any structural or feasibility invariant is violated."""
        d = inst.dims
        if self.power.shape != (d.M, d.N):
            raise InfeasibleAllocationError("power must have shape (M, N)")
        for n in range(d.N):
            mask = int(self.rrh_mask[n])
            if mask and self.user_on_sc[n] < 0:
                raise InfeasibleAllocationError(f"SC {n}: RRHs selected but no user")
            for m in range(d.M):
                if self.power[m, n] < 0:
                    raise InfeasibleAllocationError(f"negative power at ({m},{n})")
                if self.power[m, n] > 0 and not (mask & (1 << m)):
                    raise InfeasibleAllocationError(f"power on unselected RRH ({m},{n})")
        totals = self.power.sum(axis=1)
        if np.any(totals > inst.max_power * (1.0 + tol)):
            raise InfeasibleAllocationError("per-RRH power budget exceeded")
        usage = fronthaul_usage(inst, self)
        if usage > 1.0 + tol:
            raise InfeasibleAllocationError(f"fronthaul load {usage} exceeds 1")
        if self.time_share.sum() > 1.0 + tol or np.any(self.time_share < -tol):
            raise InfeasibleAllocationError("time shares out of range")


def empty_allocation(dims: SystemDims) -> Allocation:
    return Allocation(
        user_on_sc=np.full(dims.N, -1, dtype=np.int64),
        rrh_mask=np.zeros(dims.N, dtype=np.int64),
        power=np.zeros((dims.M, dims.N)),
        time_share=np.zeros(dims.M),
    )


@dataclass(frozen=True)
class DualPoint:
    """Nonnegative multipliers: lam for the fronthaul budget, mu per RRH power budget."""

    lam: float
    mu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=np.float64))
        if self.lam < 0 or np.any(self.mu < 0):
            raise ValueError("dual variables must be nonnegative")

    def mu_effective(self, floor: float = MU_FLOOR) -> np.ndarray:
        """mu with tiny components lifted to the division-safe floor."""
        return np.maximum(self.mu, floor)


@dataclass(frozen=True)
class SelectionTerms:
    """Cached per-set quantities: weight term, channel term, peak SNR, value."""

    weight_term: float
    channel_term: float
    opt_snr: float
    value: float


# --------------------------------------------------------------------------
# Closed-form operations
# --------------------------------------------------------------------------


def snr(inst: NetworkInstance, n: int, k: int, rrh_mask: int, power: np.ndarray) -> float:
    """Coherent-combining SNR on SC n for user k.

    Amplitudes of the selected RRHs add before squaring; powers outside the
    set do not contribute.
    """
    power = np.asarray(power, dtype=np.float64)
    if np.any(power < 0):
        raise ValueError("powers must be nonnegative")
    s = 0.0
    for m in mask_to_set(rrh_mask):
        s += inst.amplitude(k, m, n) * math.sqrt(power[m])
    return s * s / inst.noise_power


def sc_rate(inst: NetworkInstance, n: int, k: int, rrh_mask: int, power: np.ndarray) -> float:
    """Achievable rate (bit/s) on SC n: (B/N) log2(1 + SNR)."""
    return inst.rate_coef * math.log2(1.0 + snr(inst, n, k, rrh_mask, power))


def allocation_rates(inst: NetworkInstance, alloc: Allocation) -> np.ndarray:
    """Per-SC rates implied by an allocation (0 where no user is served)."""
    rates = np.zeros(inst.dims.N)
    for n in range(inst.dims.N):
        k = int(alloc.user_on_sc[n])
        if k >= 0:
            rates[n] = sc_rate(inst, n, k, int(alloc.rrh_mask[n]), alloc.power[:, n])
    return rates


def fronthaul_usage(inst: NetworkInstance, alloc: Allocation) -> float:
    """Total fronthaul load: sum over selected (RRH, SC) pairs of rate/R_m.

    Joint transmission charges every selected RRH with the full SC rate;
    the allocation is feasible iff the result is <= 1.
    """
    rates = allocation_rates(inst, alloc)
    usage = 0.0
    for n in range(inst.dims.N):
        for m in mask_to_set(int(alloc.rrh_mask[n])):
            usage += rates[n] / inst.fronthaul_rate[m]
    return usage


def time_shares(inst: NetworkInstance, alloc: Allocation) -> np.ndarray:
    """Per-RRH fronthaul time fractions needed to carry the access rates."""
    usage = fronthaul_usage(inst, alloc)
    if usage > 1.0 + FEAS_TOL:
        raise InfeasibleAllocationError(
            f"fronthaul load {usage:.6g} exceeds 1; repair the allocation first"
        )
    rates = allocation_rates(inst, alloc)
    t = np.zeros(inst.dims.M)
    for n in range(inst.dims.N):
        for m in mask_to_set(int(alloc.rrh_mask[n])):
            t[m] += rates[n] / inst.fronthaul_rate[m]
    return t


def weighted_sum_rate(inst: NetworkInstance, alloc: Allocation) -> float:
    """Objective value of an allocation in bit/s."""
    rates = allocation_rates(inst, alloc)
    wsr = 0.0
    for n in range(inst.dims.N):
        k = int(alloc.user_on_sc[n])
        if k >= 0:
            wsr += inst.weight[k] * rates[n]
    return wsr


def weight_term(inst: NetworkInstance, n: int, k: int, rrh_mask: int, lam: float) -> float:
    """User weight net of the fronthaul charge: omega_k - lam * sum 1/R_m."""
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    w = inst.weight[k]
    for m in mask_to_set(rrh_mask):
        w -= lam / inst.fronthaul_rate[m]
    return float(w)


def channel_term(
    inst: NetworkInstance, n: int, k: int, rrh_mask: int, mu: np.ndarray, mu_floor: float = MU_FLOOR
) -> float:
    """Power-price-weighted channel sum: sum gain / (sigma2 * mu_m) over the set.

    Additive in the set; mu components below the floor are lifted so
    boundary dual iterates stay division-safe.
    """
    mu = np.maximum(np.asarray(mu, dtype=np.float64), mu_floor)
    q = 0.0
    for m in mask_to_set(rrh_mask):
        q += inst.gain[k, m, n] / (inst.noise_power * mu[m])
    return q


def optimal_snr_for_set(
    inst: NetworkInstance, n: int, k: int, rrh_mask: int, lam: float, mu: np.ndarray
) -> float:
    """Peak SNR of a candidate set under its best power split (may be < 0)."""
    w = weight_term(inst, n, k, rrh_mask, lam)
    q = channel_term(inst, n, k, rrh_mask, mu)
    return inst.snr_coef * w * q - 1.0


def selection_terms(
    inst: NetworkInstance, n: int, k: int, rrh_mask: int, lam: float, mu: np.ndarray
) -> SelectionTerms:
    """All cached per-set quantities for a candidate (user, RRH set) pair."""
    w = weight_term(inst, n, k, rrh_mask, lam)
    q = channel_term(inst, n, k, rrh_mask, mu)
    gam = inst.snr_coef * w * q - 1.0
    if gam <= 0.0:
        value = 0.0
    else:
        value = inst.rate_coef * w * math.log2(1.0 + gam) - gam / q
    return SelectionTerms(weight_term=w, channel_term=q, opt_snr=gam, value=value)


def selection_objective(
    inst: NetworkInstance, n: int, k: int, rrh_mask: int, lam: float, mu: np.ndarray
) -> float:
    """Per-SC Lagrangian value of a set at its closed-form optimal power.

    Zero for the empty set and whenever the peak SNR clamps to zero (no
    power is worth spending).
    """
    return selection_terms(inst, n, k, rrh_mask, lam, mu).value
