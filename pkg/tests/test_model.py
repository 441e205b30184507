import math

import numpy as np
import pytest

from udcran.model import (
    Allocation,
    DualPoint,
    InfeasibleAllocationError,
    NetworkInstance,
    SystemDims,
    channel_term,
    empty_allocation,
    fronthaul_usage,
    mask_to_set,
    optimal_snr_for_set,
    sc_rate,
    selection_objective,
    selection_terms,
    set_to_mask,
    snr,
    time_shares,
    weight_term,
    weighted_sum_rate,
)

from conftest import make_instance


def hand_instance(M=2, K=1, N=1, gains=None, R=None, sigma2=1.0, pbar=None, weights=None, B=None, W=50e6):
    """Small instance with hand-set numbers (gains indexed [k][m][n])."""
    B = B if B is not None else float(N)  # default: B/N = 1
    dims = SystemDims(M=M, K=K, N=N, B=B, W=W)
    g = np.ones((K, M, N)) if gains is None else np.asarray(gains, dtype=float)
    return NetworkInstance(
        dims=dims,
        gain=g,
        fronthaul_rate=np.full(M, 8.0) if R is None else np.asarray(R, dtype=float),
        noise_power=sigma2,
        max_power=np.full(M, 10.0) if pbar is None else np.asarray(pbar, dtype=float),
        weight=np.ones(K) if weights is None else np.asarray(weights, dtype=float),
    )


class TestSnr:
    def test_empty_set_is_zero(self):
        inst = hand_instance()
        assert snr(inst, 0, 0, 0, np.zeros(2)) == 0.0

    def test_two_rrh_hand_value(self):
        # |h| = [1, 2], p = [4, 9], sigma2 = 1 -> (1*2 + 2*3)^2 = 64
        inst = hand_instance(gains=[[[1.0], [4.0]]])
        val = snr(inst, 0, 0, 0b11, np.array([4.0, 9.0]))
        assert val == pytest.approx(64.0, rel=1e-12)

    def test_single_rrh_reduces_to_gp_over_sigma2(self):
        g, p, s2 = 3.7, 0.8, 2.3
        inst = hand_instance(M=1, gains=[[[g]]], sigma2=s2)
        assert snr(inst, 0, 0, 0b1, np.array([p])) == pytest.approx(g * p / s2, rel=1e-12)

    def test_negative_power_rejected(self):
        inst = hand_instance()
        with pytest.raises(ValueError):
            snr(inst, 0, 0, 0b1, np.array([-1.0, 0.0]))

    def test_pure_function_identical_outputs(self):
        inst = make_instance(3)
        p = np.full(3, 0.01)
        a = snr(inst, 2, 1, 0b101, p)
        b = snr(inst, 2, 1, 0b101, p)
        assert a == b


class TestScRate:
    def test_zero_snr_zero_rate(self):
        inst = hand_instance()
        assert sc_rate(inst, 0, 0, 0, np.zeros(2)) == 0.0

    def test_unit_bandwidth_log(self):
        # B/N = 1 and SNR = 3 -> log2(4) = 2
        inst = hand_instance(M=1, gains=[[[3.0]]])
        assert sc_rate(inst, 0, 0, 0b1, np.array([1.0])) == pytest.approx(2.0, rel=1e-12)

    def test_lte_scale_value(self):
        # B = 20 MHz, N = 128, SNR = 63 -> (20e6/128) * 6 bit/s
        inst = hand_instance(M=1, N=128, B=20e6, gains=[[[63.0] * 128]])
        p = np.array([1.0])
        assert sc_rate(inst, 5, 0, 0b1, p) == pytest.approx(937500.0, rel=1e-12)


class TestFronthaulMath:
    def test_all_zero_powers(self):
        inst = make_instance(1)
        assert fronthaul_usage(inst, empty_allocation(inst.dims)) == 0.0

    def test_single_pair_is_rate_over_capacity(self):
        inst = hand_instance(M=1, N=1, gains=[[[3.0]]], R=[8.0])
        alloc = Allocation(
            user_on_sc=[0], rrh_mask=[0b1], power=np.array([[1.0]]), time_share=[0.0]
        )
        # rate = log2(4) = 2, usage = 2/8
        assert fronthaul_usage(inst, alloc) == pytest.approx(0.25, rel=1e-12)

    def test_joint_transmission_charges_every_rrh(self):
        inst = hand_instance(M=2, gains=[[[1.0], [4.0]]], R=[4.0, 16.0])
        alloc = Allocation(
            user_on_sc=[0], rrh_mask=[0b11], power=np.array([[4.0], [9.0]]), time_share=[0.0, 0.0]
        )
        r = sc_rate(inst, 0, 0, 0b11, np.array([4.0, 9.0]))
        expect = r / 4.0 + r / 16.0
        assert fronthaul_usage(inst, alloc) == pytest.approx(expect, rel=1e-12)

    def test_time_share_zero_rates(self):
        inst = make_instance(2)
        t = time_shares(inst, empty_allocation(inst.dims))
        assert np.all(t == 0.0)

    def test_time_share_half_capacity(self):
        inst = hand_instance(M=1, N=1, gains=[[[3.0]]], R=[4.0])
        alloc = Allocation(
            user_on_sc=[0], rrh_mask=[0b1], power=np.array([[1.0]]), time_share=[0.0]
        )
        # rate = 2 bit/s against R = 4 bit/s
        assert time_shares(inst, alloc)[0] == pytest.approx(0.5, rel=1e-12)

    def test_time_share_sum_equals_usage(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            inst = make_instance(seed, M=3, K=2, N=6)
            alloc = _random_feasible_allocation(inst, rng)
            lhs = time_shares(inst, alloc).sum()
            rhs = fronthaul_usage(inst, alloc)
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_infeasible_raises(self):
        inst = hand_instance(M=1, N=1, gains=[[[1e6]]], R=[1.0])
        alloc = Allocation(
            user_on_sc=[0], rrh_mask=[0b1], power=np.array([[10.0]]), time_share=[0.0]
        )
        with pytest.raises(InfeasibleAllocationError):
            time_shares(inst, alloc)


class TestSetFunctions:
    def test_weight_term_empty_set(self):
        inst = hand_instance(weights=[0.7])
        assert weight_term(inst, 0, 0, 0, lam=5.0) == pytest.approx(0.7)

    def test_weight_term_zero_price(self):
        inst = make_instance(4)
        assert weight_term(inst, 0, 1, 0b111, lam=0.0) == inst.weight[1]

    def test_weight_term_hand_value(self):
        inst = hand_instance(M=2, R=[4.0, 4.0])
        assert weight_term(inst, 0, 0, 0b11, lam=2.0) == pytest.approx(0.0, abs=1e-15)

    def test_weight_term_increment_is_modular(self):
        inst = make_instance(6, M=5)
        lam = 3e7
        for i in range(5):
            expect = -lam / inst.fronthaul_rate[i]
            for mask in range(1 << 5):
                if mask & (1 << i):
                    continue
                inc = weight_term(inst, 0, 0, mask | (1 << i), lam) - weight_term(
                    inst, 0, 0, mask, lam
                )
                assert inc == pytest.approx(expect, rel=1e-12)

    def test_channel_term_empty_and_single(self):
        inst = hand_instance(M=1, gains=[[[2.0]]], sigma2=1.0)
        assert channel_term(inst, 0, 0, 0, np.array([4.0])) == 0.0
        assert channel_term(inst, 0, 0, 0b1, np.array([4.0])) == pytest.approx(0.5)

    def test_channel_term_increment_independent_of_set(self):
        inst = make_instance(8, M=4)
        mu = np.random.default_rng(0).uniform(1e6, 1e9, 4)
        for i in range(4):
            incs = []
            for mask in range(16):
                if mask & (1 << i):
                    continue
                incs.append(
                    channel_term(inst, 0, 0, mask | (1 << i), mu)
                    - channel_term(inst, 0, 0, mask, mu)
                )
            assert np.ptp(incs) <= 1e-12 * max(abs(v) for v in incs)

    def test_channel_term_mu_floor(self):
        inst = hand_instance(M=1, gains=[[[2.0]]], sigma2=1.0)
        val = channel_term(inst, 0, 0, 0b1, np.array([0.0]))
        assert val == pytest.approx(2.0 / 1e-12, rel=1e-9)

    def test_opt_snr_empty_set(self):
        inst = make_instance(9)
        assert optimal_snr_for_set(inst, 0, 0, 0, 0.0, np.ones(3)) == pytest.approx(-1.0)

    def test_opt_snr_hand_value(self):
        # pick B = N ln2 so the SNR coefficient is exactly 1; F = 2, G = 3
        inst = hand_instance(
            M=1, K=1, N=1, B=math.log(2.0), gains=[[[3.0]]], sigma2=1.0, weights=[2.0]
        )
        val = optimal_snr_for_set(inst, 0, 0, 0b1, 0.0, np.array([1.0]))
        assert val == pytest.approx(5.0, rel=1e-12)

    def test_nonpositive_weight_term_clamps(self):
        inst = hand_instance(M=1, R=[1.0], weights=[0.5])
        t = selection_terms(inst, 0, 0, 0b1, lam=2.0, mu=np.array([1.0]))
        assert t.weight_term < 0
        assert t.opt_snr <= -1.0
        assert t.value == 0.0

    def test_selection_objective_empty_is_zero(self):
        inst = make_instance(10)
        assert selection_objective(inst, 0, 0, 0, 1.0, np.ones(3)) == 0.0


def _random_feasible_allocation(inst: NetworkInstance, rng: np.random.Generator) -> Allocation:
    """Random users/sets with powers scaled into both constraint families."""
    d = inst.dims
    users = rng.integers(-1, d.K, size=d.N)
    masks = rng.integers(0, 1 << d.M, size=d.N)
    masks[users < 0] = 0
    users[masks == 0] = -1
    power = rng.uniform(0.0, 1.0, size=(d.M, d.N))
    for n in range(d.N):
        for m in range(d.M):
            if not (int(masks[n]) >> m) & 1:
                power[m, n] = 0.0
    tot = power.sum(axis=1)
    scale = np.where(tot > 0, np.minimum(1.0, inst.max_power / np.maximum(tot, 1e-300)), 1.0)
    power *= scale[:, None]
    alloc = Allocation(user_on_sc=users, rrh_mask=masks, power=power, time_share=np.zeros(d.M))
    # fronthaul fit by global power scaling
    for _ in range(60):
        if fronthaul_usage(inst, alloc) <= 1.0:
            break
        power *= 0.5
        alloc = Allocation(user_on_sc=users, rrh_mask=masks, power=power, time_share=np.zeros(d.M))
    alloc.time_share = time_shares(inst, alloc)
    return alloc


class TestConcavity:
    def test_rate_concave_along_segments(self):
        rng = np.random.default_rng(12)
        inst = make_instance(13, M=4, K=2, N=4)
        for _ in range(200):
            n = int(rng.integers(inst.dims.N))
            k = int(rng.integers(inst.dims.K))
            mask = int(rng.integers(1, 16))
            p1 = rng.uniform(1e-4, 0.3, 4)
            p2 = rng.uniform(1e-4, 0.3, 4)
            r1 = sc_rate(inst, n, k, mask, p1)
            r2 = sc_rate(inst, n, k, mask, p2)
            for theta in np.arange(0.1, 0.95, 0.1):
                mid = sc_rate(inst, n, k, mask, theta * p1 + (1 - theta) * p2)
                lower = theta * r1 + (1 - theta) * r2
                assert mid >= lower - 1e-9 * abs(lower)

    def test_amplitude_sum_square_hessian_nsd(self):
        # f(p) = (sum sqrt(p))^2; its Hessian (off-diag 1/(2 sqrt(pi pj)),
        # diag 1/(2 pi) - sum(sqrt(p))/(2 pi^{3/2})) must be negative
        # semidefinite at interior points.
        rng = np.random.default_rng(21)
        for _ in range(100):
            M = int(rng.integers(2, 7))
            p = rng.uniform(0.1, 10.0, M)
            sq = np.sqrt(p)
            H = 1.0 / (2.0 * np.outer(sq, sq))
            H[np.diag_indices(M)] = 1.0 / (2.0 * p) - sq.sum() / (2.0 * p**1.5)
            assert np.linalg.eigvalsh(H).max() <= 1e-8


class TestAllocationValidation:
    def test_power_outside_set_rejected(self):
        inst = hand_instance(M=2, N=1)
        alloc = Allocation(
            user_on_sc=[0], rrh_mask=[0b01], power=np.array([[0.1], [0.1]]), time_share=[0.0, 0.0]
        )
        with pytest.raises(InfeasibleAllocationError):
            alloc.validate(inst)

    def test_rrhs_without_user_rejected(self):
        inst = hand_instance(M=2, N=1)
        alloc = Allocation(
            user_on_sc=[-1], rrh_mask=[0b01], power=np.zeros((2, 1)), time_share=[0.0, 0.0]
        )
        with pytest.raises(InfeasibleAllocationError):
            alloc.validate(inst)

    def test_mask_roundtrip(self):
        assert mask_to_set(set_to_mask([0, 3, 5])) == (0, 3, 5)
        assert mask_to_set(0) == ()

    def test_wsr_of_empty_allocation(self):
        inst = make_instance(30)
        assert weighted_sum_rate(inst, empty_allocation(inst.dims)) == 0.0


class TestDualPoint:
    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            DualPoint(lam=-1.0, mu=np.zeros(2))
        with pytest.raises(ValueError):
            DualPoint(lam=0.0, mu=np.array([-1e-9]))

    def test_mu_floor(self):
        dp = DualPoint(lam=0.0, mu=np.array([0.0, 1.0]))
        assert dp.mu_effective()[0] == 1e-12
        assert dp.mu_effective()[1] == 1.0
