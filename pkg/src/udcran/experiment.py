"""Monte-Carlo experiment driver: config, sweeps, aggregation, emission.

A run is keyed by (sweep value, layout index, realization index, scheme).
Layout geometry is seeded per (base_seed, layout); fading per (base_seed,
layout, realization) -- so sweeps over the fronthaul bandwidth reuse the
same channels at every point and curves are paired.  Results are plain
tables (CSV or JSON) keyed by (sweep_value, scheme).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import FadingConfig, FronthaulConfig, LayoutConfig, build_instance
from .dualsolver import SolverOptions
from .model import ConfigError, SystemDims
from .schemes import SCHEME_TAGS, solve_scheme
from .subproblem import EXHAUSTIVE_M_LIMIT

RESULT_COLUMNS = (
    "sweep_value",
    "scheme",
    "mean_wsr_mbps",
    "std_wsr_mbps",
    "mean_dual_gap",
    "mean_runtime_s",
    "n_runs",
)

RUN_COLUMNS = (
    "sweep_value",
    "scheme",
    "layout",
    "realization",
    "wsr_mbps",
    "dual_value_mbps",
    "rel_gap",
    "runtime_s",
    "error",
)

CSV_HEADER_COMMENT = (
    "# mean_wsr_mbps/std_wsr_mbps in Mbps; mean_dual_gap is (dual-wsr)/dual; runtime in seconds"
)

PROFILES = ("desk", "paper")


@dataclass
class ExperimentConfig:
    """Full experiment description with simulation-campaign defaults.

    The default field values reproduce the standard campaign setup
    (M=6, K=8, B=20 MHz, N=128, 24 dBm RRHs, 5 layouts x 20 realizations);
    the desk profile shrinks it for quick runs.
    """

    M: int = 6
    K: int = 8
    N: int = 128
    B_hz: float = 20e6
    W_hz: float = 100e6
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    fading: FadingConfig = field(default_factory=FadingConfig)
    fronthaul: FronthaulConfig = field(default_factory=FronthaulConfig)
    rrh_max_power_dbm: float = 24.0
    weights: list[float] | None = None
    sweep_variable: str = "W"
    sweep_values: list[float] = field(
        default_factory=lambda: [10e6, 20e6, 30e6, 50e6, 75e6, 100e6, 150e6, 200e6]
    )
    n_layouts: int = 5
    realizations_per_layout: int = 20
    schemes: list[str] = field(default_factory=lambda: list(SCHEME_TAGS))
    solver: SolverOptions = field(default_factory=SolverOptions)
    base_seed: int = 12345
    profile: str = "paper"

    @property
    def rrh_max_power_w(self) -> float:
        return 10.0 ** ((self.rrh_max_power_dbm - 30.0) / 10.0)

    def validate(self) -> None:
        if self.sweep_variable not in ("W", "K", "M"):
            raise ConfigError(f"sweep variable must be W, K or M, got {self.sweep_variable!r}")
        if not self.sweep_values:
            raise ConfigError("sweep value list must be nonempty")
        if self.n_layouts < 1 or self.realizations_per_layout < 1:
            raise ConfigError("layout and realization counts must be >= 1")
        if self.M < 1 or self.K < 1 or self.N < 1:
            raise ConfigError("M, K, N must be >= 1")
        if self.B_hz <= 0 or self.W_hz <= 0:
            raise ConfigError("bandwidths must be positive")
        for tag in self.schemes:
            if tag not in SCHEME_TAGS:
                raise ConfigError(f"unknown scheme {tag!r}; expected one of {SCHEME_TAGS}")
        max_m = max(
            [self.M] + [int(v) for v in self.sweep_values if self.sweep_variable == "M"]
        )
        needs_enumeration = any(
            tag in ("proposed-exhaustive", "equal-power") for tag in self.schemes
        )
        if needs_enumeration and max_m > EXHAUSTIVE_M_LIMIT:
            raise ConfigError(
                f"M={max_m} is too large for subset enumeration (limit {EXHAUSTIVE_M_LIMIT}); "
                "drop proposed-exhaustive/equal-power or use proposed-greedy"
            )
        if self.weights is not None and len(self.weights) != self.K:
            raise ConfigError("weights must have length K")


def apply_profile(cfg: ExperimentConfig, profile: str) -> ExperimentConfig:
    """Desk profile: shrunk counts and looser solver caps for quick sweeps."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; expected one of {PROFILES}")
    if profile == "paper":
        return replace(cfg, profile="paper")
    return replace(
        cfg,
        N=64,
        n_layouts=2,
        realizations_per_layout=5,
        sweep_values=[10e6, 20e6, 50e6, 100e6, 200e6]
        if cfg.sweep_variable == "W"
        else cfg.sweep_values,
        schemes=[t for t in cfg.schemes if t != "proposed-exhaustive"] or ["proposed-greedy"],
        solver=replace(cfg.solver, max_iterations=900, tolerance_rel=3e-4),
        profile="desk",
    )


_CONFIG_KEYS = {
    "M", "K", "N", "B_hz", "W_hz", "layout", "fading", "fronthaul",
    "rrh_max_power_dbm", "weights", "sweep", "n_layouts",
    "realizations_per_layout", "schemes", "solver", "base_seed",
}


def validate_config(raw_text: str, profile: str = "paper") -> ExperimentConfig:
    """Parse a JSON config; absent fields fall back to campaign defaults.

    The profile supplies the default bundle (counts, N, solver caps); keys
    present in the config text override it.
    """
    raw_text = raw_text.strip()
    if not raw_text:
        data = {}
    else:
        try:
            data = json.loads(raw_text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    cfg = apply_profile(ExperimentConfig(), profile)
    try:
        if "layout" in data:
            cfg = replace(cfg, layout=LayoutConfig(**data["layout"]))
        if "fading" in data:
            cfg = replace(cfg, fading=FadingConfig(**data["fading"]))
        if "fronthaul" in data:
            cfg = replace(cfg, fronthaul=FronthaulConfig(**data["fronthaul"]))
        if "solver" in data:
            cfg = replace(cfg, solver=SolverOptions(**data["solver"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad nested config section: {exc}") from exc
    if "sweep" in data:
        sweep = data["sweep"]
        if not isinstance(sweep, dict) or "variable" not in sweep:
            raise ConfigError("sweep must be an object with 'variable' and 'values'")
        cfg = replace(
            cfg,
            sweep_variable=sweep["variable"],
            sweep_values=list(sweep.get("values", [])),
        )
    for key in (
        "M", "K", "N", "B_hz", "W_hz", "rrh_max_power_dbm", "weights",
        "n_layouts", "realizations_per_layout", "schemes", "base_seed",
    ):
        if key in data:
            cfg = replace(cfg, **{key: data[key]})
    cfg.validate()
    return cfg


@dataclass
class ResultRow:
    sweep_value: float
    scheme: str
    mean_wsr: float  # bit/s
    std_wsr: float
    mean_dual_gap: float  # relative
    mean_runtime_s: float
    n_runs: int
    seeds_used: str = ""


@dataclass
class RunRecord:
    sweep_value: float
    scheme: str
    layout: int
    realization: int
    wsr: float
    dual_value: float
    rel_gap: float
    runtime_s: float
    error: str = ""


def _dims_for(cfg: ExperimentConfig, sweep_value: float) -> tuple[SystemDims, float]:
    M, K, W = cfg.M, cfg.K, cfg.W_hz
    if cfg.sweep_variable == "W":
        W = float(sweep_value)
    elif cfg.sweep_variable == "K":
        K = int(sweep_value)
    else:
        M = int(sweep_value)
    return SystemDims(M=M, K=K, N=cfg.N, B=cfg.B_hz, W=W), W


def build_run_instance(cfg: ExperimentConfig, sweep_value: float, layout: int, realization: int):
    """Deterministic instance for one run: seeds hash (base, layout[, run])."""
    dims, _ = _dims_for(cfg, sweep_value)
    layout_seed = np.random.SeedSequence([cfg.base_seed, layout])
    fading_seed = np.random.SeedSequence([cfg.base_seed, layout, realization])
    return build_instance(
        dims,
        cfg.layout,
        cfg.fading,
        cfg.fronthaul,
        rrh_max_power_w=cfg.rrh_max_power_w,
        weights=cfg.weights,
        layout_seed=layout_seed,
        fading_seed=fading_seed,
    )


def _one_run(cfg: ExperimentConfig, sweep_value, layout, realization, scheme) -> RunRecord:
    try:
        inst = build_run_instance(cfg, sweep_value, layout, realization)
        t0 = time.perf_counter()
        report = solve_scheme(inst, scheme, cfg.solver)
        dt = time.perf_counter() - t0
        return RunRecord(
            sweep_value=float(sweep_value),
            scheme=scheme,
            layout=layout,
            realization=realization,
            wsr=report.wsr,
            dual_value=report.dual_value,
            rel_gap=report.rel_gap,
            runtime_s=dt,
        )
    except Exception as exc:  # noqa: BLE001 - recorded per-row, run continues
        return RunRecord(
            sweep_value=float(sweep_value),
            scheme=scheme,
            layout=layout,
            realization=realization,
            wsr=0.0,
            dual_value=0.0,
            rel_gap=0.0,
            runtime_s=0.0,
            error=f"{type(exc).__name__}: {exc}",
        )


def run_experiment(
    cfg: ExperimentConfig, *, jobs: int = 1, omit_timing: bool = False
) -> tuple[list[ResultRow], list[RunRecord]]:
    """Execute the sweep; returns (aggregated rows, per-run log).

    Runs are independent jobs; aggregation is a keyed merge over the sorted
    run list, so the output is identical for any worker count.
    """
    cfg.validate()
    tasks = [
        (sv, l, r, scheme)
        for sv in cfg.sweep_values
        for l in range(cfg.n_layouts)
        for r in range(cfg.realizations_per_layout)
        for scheme in cfg.schemes
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda t: _one_run(cfg, *t), tasks))
    else:
        records = [_one_run(cfg, *t) for t in tasks]
    if omit_timing:
        for rec in records:
            rec.runtime_s = 0.0

    rows: list[ResultRow] = []
    seeds_note = (
        f"base={cfg.base_seed};layout_seed=[base,layout];fading_seed=[base,layout,realization]"
    )
    for sv in cfg.sweep_values:
        for scheme in cfg.schemes:
            group = [
                rec
                for rec in records
                if rec.sweep_value == float(sv) and rec.scheme == scheme and not rec.error
            ]
            wsr = np.array([rec.wsr for rec in group])
            gaps = np.array([rec.rel_gap for rec in group])
            times = np.array([rec.runtime_s for rec in group])
            rows.append(
                ResultRow(
                    sweep_value=float(sv),
                    scheme=scheme,
                    mean_wsr=float(wsr.mean()) if wsr.size else 0.0,
                    std_wsr=float(wsr.std(ddof=1)) if wsr.size > 1 else 0.0,
                    mean_dual_gap=float(gaps.mean()) if gaps.size else 0.0,
                    mean_runtime_s=float(times.mean()) if times.size else 0.0,
                    n_runs=len(group),
                    seeds_used=seeds_note,
                )
            )
    return rows, records


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def emit_results(rows: list[ResultRow], fmt: str, path) -> None:
    """Write the aggregate table; schema is stable across releases."""
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    try:
        if fmt == "csv":
            lines = [CSV_HEADER_COMMENT, ",".join(RESULT_COLUMNS)]
            for row in rows:
                lines.append(
                    ",".join(
                        [
                            _fmt(row.sweep_value),
                            row.scheme,
                            _fmt(row.mean_wsr / 1e6),
                            _fmt(row.std_wsr / 1e6),
                            _fmt(row.mean_dual_gap),
                            f"{row.mean_runtime_s:.6f}",
                            str(row.n_runs),
                        ]
                    )
                )
            text = "\n".join(lines) + "\n"
        else:
            payload = {
                "columns": list(RESULT_COLUMNS),
                "rows": [
                    {
                        "sweep_value": row.sweep_value,
                        "scheme": row.scheme,
                        "mean_wsr_mbps": row.mean_wsr / 1e6,
                        "std_wsr_mbps": row.std_wsr / 1e6,
                        "mean_dual_gap": row.mean_dual_gap,
                        "mean_runtime_s": row.mean_runtime_s,
                        "n_runs": row.n_runs,
                    }
                    for row in rows
                ],
            }
            text = json.dumps(payload, indent=1) + "\n"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write results to {path}: {exc}") from exc


def parse_results_json(text: str) -> list[dict]:
    payload = json.loads(text)
    return payload["rows"]


def emit_run_log(records: list[RunRecord], fmt: str, path) -> None:
    """Per-run log; the aggregate means are recomputable from this file."""
    if fmt == "csv":
        lines = [",".join(RUN_COLUMNS)]
        for rec in records:
            lines.append(
                ",".join(
                    [
                        _fmt(rec.sweep_value),
                        rec.scheme,
                        str(rec.layout),
                        str(rec.realization),
                        _fmt(rec.wsr / 1e6),
                        _fmt(rec.dual_value / 1e6),
                        _fmt(rec.rel_gap),
                        f"{rec.runtime_s:.6f}",
                        rec.error.replace(",", ";"),
                    ]
                )
            )
        text = "\n".join(lines) + "\n"
    else:
        payload = {
            "columns": list(RUN_COLUMNS),
            "rows": [
                {
                    "sweep_value": rec.sweep_value,
                    "scheme": rec.scheme,
                    "layout": rec.layout,
                    "realization": rec.realization,
                    "wsr_mbps": rec.wsr / 1e6,
                    "dual_value_mbps": rec.dual_value / 1e6,
                    "rel_gap": rec.rel_gap,
                    "runtime_s": rec.runtime_s,
                    "error": rec.error,
                }
                for rec in records
            ],
        }
        text = json.dumps(payload, indent=1) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
