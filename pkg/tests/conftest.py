import numpy as np
import pytest

from udcran.channel import FadingConfig, FronthaulConfig, LayoutConfig, build_instance
from udcran.model import NetworkInstance, SystemDims


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger JIT compilation once so timed tests measure computation only."""
    from udcran import oracle, solve

    inst = oracle.random_tiny_instance(0, M=2, K=2, N=3)
    solve(inst, "exhaustive")
    solve(inst, "greedy")
    solve(inst, "single-rrh")
    oracle.brute_force_wsr(inst)


def make_instance(
    seed: int,
    M: int = 3,
    K: int = 2,
    N: int = 8,
    B: float = 20e6,
    W: float = 50e6,
    taps: int | None = None,
) -> NetworkInstance:
    dims = SystemDims(M=M, K=K, N=N, B=B, W=W)
    return build_instance(
        dims,
        LayoutConfig(),
        FadingConfig(pdp_taps=taps),
        FronthaulConfig(),
        rrh_max_power_w=0.25,
        layout_seed=np.random.SeedSequence([seed, 1]),
        fading_seed=np.random.SeedSequence([seed, 2]),
    )


@pytest.fixture
def small_instance():
    return make_instance(42)


@pytest.fixture
def desk_instance():
    return make_instance(7, M=6, K=8, N=64)
