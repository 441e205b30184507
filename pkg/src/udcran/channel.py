"""Random network layouts, access-channel gains, and fronthaul link rates.

Geometry: RRHs and users fall i.i.d. uniform on a disk; the central
processor sits on the x-axis at a fixed distance from the disk center.
Access links combine log-distance path loss, log-normal shadowing and a
frequency-selective Rayleigh multipath profile; the CP-to-RRH links are
line-of-sight with a Shannon-capacity rate model over the shared fronthaul
spectrum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .model import NetworkInstance, SystemDims


@dataclass(frozen=True)
class LayoutConfig:
    cluster_radius_m: float = 500.0
    cp_distance_m: float = 2000.0

    def __post_init__(self):
        if self.cluster_radius_m <= 0 or self.cp_distance_m <= 0:
            raise ValueError("layout distances must be positive")


@dataclass(frozen=True)
class FadingConfig:
    """Access-link large/small-scale fading parameters.

    Path loss is ``path_loss_ref_db + path_loss_slope_db * log10(d_m)`` dB;
    shadowing is zero-mean Gaussian in dB.  The multipath profile has
    ``pdp_taps`` taps (ceil(N/4) when None) with exponentially decaying
    powers and Rayleigh per-tap fading.
    """

    shadowing_std_db: float = 6.0
    pdp_taps: int | None = None
    path_loss_ref_db: float = 38.0
    path_loss_slope_db: float = 30.0
    rrh_antenna_gain_db: float = 2.0
    noise_density_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0

    def __post_init__(self):
        if self.shadowing_std_db < 0:
            raise ValueError("shadowing std must be nonnegative")
        if self.pdp_taps is not None and self.pdp_taps < 1:
            raise ValueError("tap count must be >= 1")

    def taps_for(self, n_sc: int) -> int:
        return self.pdp_taps if self.pdp_taps is not None else math.ceil(n_sc / 4)


@dataclass(frozen=True)
class FronthaulConfig:
    """CP-to-RRH line-of-sight link budget.

    Only the CP-side antenna gain enters the budget; the receive-side gain
    at the RRH is not modeled (recorded here so the omission is explicit).
    """

    carrier_hz: float = 73e9
    cp_tx_power_dbm: float = 46.0
    cp_antenna_gain_db: float = 27.0
    path_loss_ref_db: float = 69.7
    path_loss_slope_db: float = 24.0
    noise_figure_db: float = 7.0


@dataclass(frozen=True)
class Layout:
    rrh_xy: np.ndarray
    user_xy: np.ndarray
    cp_xy: np.ndarray

    @property
    def cp_rrh_distance(self) -> np.ndarray:
        return np.linalg.norm(self.rrh_xy - self.cp_xy[None, :], axis=1)

    @property
    def user_rrh_distance(self) -> np.ndarray:
        diff = self.user_xy[:, None, :] - self.rrh_xy[None, :, :]
        return np.linalg.norm(diff, axis=2)


def _uniform_disk(radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    theta = 2.0 * np.pi * rng.random(count)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def generate_layout(cfg: LayoutConfig, dims: SystemDims, rng: np.random.Generator) -> Layout:
    """Draw RRH then user positions uniformly on the disk; CP on the x-axis.

    The draw order (RRHs first, then users) is part of the reproducibility
    contract for a given generator state.
    """
    rrh_xy = _uniform_disk(cfg.cluster_radius_m, dims.M, rng)
    user_xy = _uniform_disk(cfg.cluster_radius_m, dims.K, rng)
    cp_xy = np.array([cfg.cp_distance_m, 0.0])
    return Layout(rrh_xy=rrh_xy, user_xy=user_xy, cp_xy=cp_xy)


def los_path_loss_db(distance_m, *, cfg: FronthaulConfig = FronthaulConfig()):
    """Free-space LoS path loss of the fronthaul band at the given distance."""
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = cfg.path_loss_ref_db + cfg.path_loss_slope_db * np.log10(d)
    return float(out) if out.ndim == 0 else out


def access_path_loss_db(distance_m, cfg: FadingConfig):
    d = np.asarray(distance_m, dtype=np.float64)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    return cfg.path_loss_ref_db + cfg.path_loss_slope_db * np.log10(d)


def large_scale_gain(
    distance_m: np.ndarray, shadowing_db: np.ndarray, cfg: FadingConfig
) -> np.ndarray:
    """Linear access power gain from path loss, shadowing and antenna gain."""
    loss_db = access_path_loss_db(distance_m, cfg) + shadowing_db - cfg.rrh_antenna_gain_db
    return 10.0 ** (-loss_db / 10.0)


def pdp_tap_powers(n_taps: int) -> np.ndarray:
    """Exponential power-delay profile, decay constant L/4, normalized to 1."""
    tau = max(n_taps / 4.0, 1e-9)
    p = np.exp(-np.arange(n_taps) / tau)
    return p / p.sum()


def fronthaul_snr_db(cfg: FronthaulConfig, W_hz: float, distance_m) -> np.ndarray:
    noise_dbm = -174.0 + cfg.noise_figure_db + 10.0 * np.log10(W_hz)
    return (
        cfg.cp_tx_power_dbm
        + cfg.cp_antenna_gain_db
        - np.asarray(los_path_loss_db(distance_m, cfg=cfg))
        - noise_dbm
    )


def fronthaul_rates(cfg: FronthaulConfig, W_hz: float, distance_m) -> np.ndarray:
    """Peak per-RRH fronthaul rate: W log2(1 + link SNR) in bit/s.

    The link SNR uses the CP transmit power and antenna gain against LoS
    path loss and thermal noise over the full fronthaul bandwidth.
    """
    if W_hz <= 0:
        raise ValueError("fronthaul bandwidth must be positive")
    snr = 10.0 ** (fronthaul_snr_db(cfg, W_hz, distance_m) / 10.0)
    return W_hz * np.log2(1.0 + snr)


def noise_power_per_sc(cfg: FadingConfig, B_hz: float, n_sc: int) -> float:
    """Receiver noise per subcarrier in watts (density + noise figure over B/N)."""
    if B_hz <= 0 or n_sc <= 0:
        raise ValueError("bandwidth and SC count must be positive")
    density_w_hz = 10.0 ** ((cfg.noise_density_dbm_hz + cfg.noise_figure_db - 30.0) / 10.0)
    return density_w_hz * (B_hz / n_sc)


def access_channels(
    cfg: FadingConfig, layout: Layout, dims: SystemDims, rng: np.random.Generator
) -> np.ndarray:
    """Per-(user, RRH, SC) linear power gains.

    Large scale: log-distance path loss + i.i.d. log-normal shadowing per
    link + RRH antenna gain.  Small scale: Rayleigh taps on the exponential
    delay profile, transformed to per-SC responses; tap powers sum to one so
    the small-scale gain has unit mean on every subcarrier.

    Draw order (shadowing block first, then the tap block) is fixed for
    reproducibility.
    """
    K, M, N = dims.K, dims.M, dims.N
    L = cfg.taps_for(N)
    shadowing = rng.standard_normal((K, M)) * cfg.shadowing_std_db
    taps_re = rng.standard_normal((K, M, L))
    taps_im = rng.standard_normal((K, M, L))

    tap_pow = pdp_tap_powers(L)
    taps = (taps_re + 1j * taps_im) * np.sqrt(tap_pow / 2.0)
    # Per-SC frequency response of the tapped delay line.
    freq = np.fft.fft(taps, n=N, axis=2)
    small = np.abs(freq) ** 2

    dist = layout.user_rrh_distance
    large = large_scale_gain(dist, shadowing, cfg)
    return large[:, :, None] * small


def build_instance(
    dims: SystemDims,
    layout_cfg: LayoutConfig,
    fading_cfg: FadingConfig,
    fronthaul_cfg: FronthaulConfig,
    rrh_max_power_w,
    weights=None,
    *,
    layout_seed: int | np.random.SeedSequence = 0,
    fading_seed: int | np.random.SeedSequence = 1,
) -> NetworkInstance:
    """Generate one reproducible NetworkInstance from the two seeds."""
    layout_rng = np.random.default_rng(layout_seed)
    fading_rng = np.random.default_rng(fading_seed)
    layout = generate_layout(layout_cfg, dims, layout_rng)
    gains = access_channels(fading_cfg, layout, dims, fading_rng)
    rates = fronthaul_rates(fronthaul_cfg, dims.W, layout.cp_rrh_distance)
    sigma2 = noise_power_per_sc(fading_cfg, dims.B, dims.N)
    pbar = np.broadcast_to(np.asarray(rrh_max_power_w, dtype=np.float64), (dims.M,)).copy()
    w = np.ones(dims.K) if weights is None else np.asarray(weights, dtype=np.float64)
    seed_pair = None
    if isinstance(layout_seed, (int, np.integer)) and isinstance(fading_seed, (int, np.integer)):
        seed_pair = (int(layout_seed), int(fading_seed))
    return NetworkInstance(
        dims=dims,
        gain=gains,
        fronthaul_rate=rates,
        noise_power=sigma2,
        max_power=pbar,
        weight=w,
        user_rrh_distance=layout.user_rrh_distance,
        seeds=seed_pair,
    )


# --------------------------------------------------------------------------
# Instance dump / load for regression fixtures
# --------------------------------------------------------------------------


def instance_to_json(inst: NetworkInstance) -> str:
    """Serialize an instance (gains in dB, rates in bit/s)."""
    gain_db = 10.0 * np.log10(np.maximum(inst.gain, 1e-300))
    gain_db_list = [
        [[None if inst.gain[k, m, n] <= 0 else float(gain_db[k, m, n]) for n in range(inst.dims.N)]
         for m in range(inst.dims.M)]
        for k in range(inst.dims.K)
    ]
    payload = {
        "dims": {
            "M": inst.dims.M,
            "K": inst.dims.K,
            "N": inst.dims.N,
            "B_hz": inst.dims.B,
            "W_hz": inst.dims.W,
        },
        "gain_db": gain_db_list,
        "fronthaul_rate_bps": inst.fronthaul_rate.tolist(),
        "noise_power_w": inst.noise_power,
        "max_power_w": inst.max_power.tolist(),
        "weight": inst.weight.tolist(),
        "user_rrh_distance_m": None
        if inst.user_rrh_distance is None
        else inst.user_rrh_distance.tolist(),
        "seeds": None if inst.seeds is None else list(inst.seeds),
    }
    return json.dumps(payload, indent=1)


def instance_from_json(text: str) -> NetworkInstance:
    payload = json.loads(text)
    d = payload["dims"]
    dims = SystemDims(M=d["M"], K=d["K"], N=d["N"], B=d["B_hz"], W=d["W_hz"])
    gain = np.zeros((dims.K, dims.M, dims.N))
    for k in range(dims.K):
        for m in range(dims.M):
            for n in range(dims.N):
                v = payload["gain_db"][k][m][n]
                gain[k, m, n] = 0.0 if v is None else 10.0 ** (v / 10.0)
    dist = payload.get("user_rrh_distance_m")
    seeds = payload.get("seeds")
    return NetworkInstance(
        dims=dims,
        gain=gain,
        fronthaul_rate=np.asarray(payload["fronthaul_rate_bps"]),
        noise_power=payload["noise_power_w"],
        max_power=np.asarray(payload["max_power_w"]),
        weight=np.asarray(payload["weight"]),
        user_rrh_distance=None if dist is None else np.asarray(dist),
        seeds=None if seeds is None else (int(seeds[0]), int(seeds[1])),
    )
