#!/usr/bin/env python3
"""Time the hot per-SC search kernels: JIT backend vs plain-Python fallback.

The backend is fixed at import time by the UDCRAN_NUMBA environment flag,
so this script re-runs itself in a worker subprocess per backend and
collates the timings.

Usage: python bench/compare_backends.py [--repeats 5]
"""

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    # (M, K, N, label)
    (4, 3, 16, "small"),
    (5, 4, 32, "medium"),
    (6, 8, 64, "desk"),
]


def _worker(repeats: int) -> None:
    import udcran.kernels as kernels
    from udcran.dualsolver import dual_function, dual_scales
    from udcran.model import DualPoint

    sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tests"))
    from conftest import make_instance  # noqa: E402

    out = {"numba": kernels.NUMBA_ENABLED, "cases": []}
    for M, K, N, label in CASES:
        inst = make_instance(1234, M=M, K=K, N=N)
        scales = dual_scales(inst)
        dual = DualPoint(lam=0.1 * scales[0], mu=0.3 * scales[1:])
        results = {}
        for mode in ("exhaustive", "greedy"):
            dual_function(inst, dual, mode)  # compile / warm
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                val, _ = dual_function(inst, dual, mode)
                times.append(time.perf_counter() - t0)
            results[mode] = {"best_s": min(times), "value": val}
        out["cases"].append({"label": label, "dims": [M, K, N], "modes": results})
    print(json.dumps(out))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.worker:
        _worker(args.repeats)
        return 0

    runs = {}
    for flag, name in (("1", "numba"), ("0", "numpy")):
        env = dict(os.environ, UDCRAN_NUMBA=flag)
        proc = subprocess.run(
            [sys.executable, __file__, "--worker", "--repeats", str(args.repeats)],
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            print(proc.stderr, file=sys.stderr)
            return proc.returncode
        runs[name] = json.loads(proc.stdout.strip().splitlines()[-1])

    print(f"{'case':8s} {'mode':12s} {'numba (ms)':>12s} {'numpy (ms)':>12s} {'speedup':>9s}")
    for i, case in enumerate(runs["numba"]["cases"]):
        for mode in ("exhaustive", "greedy"):
            jit_t = case["modes"][mode]["best_s"]
            py_t = runs["numpy"]["cases"][i]["modes"][mode]["best_s"]
            v_jit = case["modes"][mode]["value"]
            v_py = runs["numpy"]["cases"][i]["modes"][mode]["value"]
            rel = abs(v_jit - v_py) / max(abs(v_py), 1e-30)
            tag = "" if rel < 1e-9 else f"  (value mismatch {rel:.1e})"
            print(
                f"{case['label']:8s} {mode:12s} {jit_t * 1e3:12.3f} {py_t * 1e3:12.3f} "
                f"{py_t / jit_t:8.1f}x{tag}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
