"""Joint TDMA-fronthaul / OFDMA-access resource allocation for UD-CRAN downlinks.

Solves joint user-subcarrier association, RRH selection, transmit power and
fronthaul time-share allocation for weighted sum-rate maximization, via dual
decomposition with exhaustive or greedy per-subcarrier search, plus the
benchmark schemes and a reproducible Monte-Carlo experiment harness.
"""

from .channel import (
    FadingConfig,
    FronthaulConfig,
    Layout,
    LayoutConfig,
    access_channels,
    build_instance,
    fronthaul_rates,
    generate_layout,
    instance_from_json,
    instance_to_json,
    los_path_loss_db,
    noise_power_per_sc,
)
from .dualsolver import (
    SolveReport,
    SolverOptions,
    dual_function,
    dual_subgradient,
    ellipsoid_minimize,
    recover_primal,
    repair_feasibility,
    solve,
)
from .model import (
    Allocation,
    DualPoint,
    NetworkInstance,
    SystemDims,
    fronthaul_usage,
    sc_rate,
    snr,
    time_shares,
    weighted_sum_rate,
)
from .schemes import SCHEME_TAGS, solve_conventional_ofdma, solve_equal_power, solve_scheme, solve_single_rrh
from .subproblem import (
    ScSolution,
    best_user,
    equal_power_search,
    exhaustive_rrh_search,
    greedy_rrh_search,
    optimal_power,
    single_rrh_search,
)

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "DualPoint",
    "FadingConfig",
    "FronthaulConfig",
    "Layout",
    "LayoutConfig",
    "NetworkInstance",
    "SCHEME_TAGS",
    "ScSolution",
    "SolveReport",
    "SolverOptions",
    "SystemDims",
    "access_channels",
    "best_user",
    "build_instance",
    "dual_function",
    "dual_subgradient",
    "ellipsoid_minimize",
    "equal_power_search",
    "exhaustive_rrh_search",
    "fronthaul_rates",
    "fronthaul_usage",
    "generate_layout",
    "greedy_rrh_search",
    "instance_from_json",
    "instance_to_json",
    "los_path_loss_db",
    "noise_power_per_sc",
    "optimal_power",
    "recover_primal",
    "repair_feasibility",
    "sc_rate",
    "single_rrh_search",
    "snr",
    "solve",
    "solve_conventional_ofdma",
    "solve_equal_power",
    "solve_scheme",
    "solve_single_rrh",
    "time_shares",
    "weighted_sum_rate",
]
