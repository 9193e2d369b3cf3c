import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecsim.config import SimConfig
from mecsim import phy
from mecsim.env import MtLocalState


CFG = SimConfig().validate()


class TestChannelGain:
    def test_reference_point(self):
        # cell 0 center is (250, 250); put a BS right there -> d floored at 1 m
        cfg = SimConfig(bs_positions=((250.0, 250.0),), path_ref_gain=1e-3)
        g = phy.channel_gain(0, 0, 2, cfg)  # fading level 1.0
        assert g == pytest.approx(1e-3)

    def test_1km_cubic_path_loss(self):
        # BS 1000 m east of cell 0 center
        cfg = SimConfig(
            bs_positions=((1250.0, 250.0),), path_ref_gain=1e-3, path_exp=3.0
        )
        assert phy.channel_gain(0, 0, 2, cfg) == pytest.approx(1e-12)

    def test_doubling_distance_divides_by_eight(self):
        near = SimConfig(bs_positions=((750.0, 250.0),))  # 500 m
        far = SimConfig(bs_positions=((1250.0, 250.0),))  # 1000 m
        assert phy.channel_gain(0, 0, 2, near) / phy.channel_gain(0, 0, 2, far) == (
            pytest.approx(8.0)
        )


class TestRequiredTxPower:
    def test_zero_bits(self):
        assert phy.required_tx_power(0.0, CFG, 1e-12) == 0.0

    def test_closed_form_18000_bits(self):
        # R/W = 18000 / (0.01 * 5e5) = 3.6
        p = phy.required_tx_power(18000, CFG, gain=1e-12)
        expected = (2**3.6 - 1) * 2e-15 / 1e-12
        assert p == pytest.approx(expected, rel=1e-12)
        assert p == pytest.approx(0.022251, rel=1e-4)

    @given(
        b1=st.floats(1.0, 30000.0),
        b2=st.floats(1.0, 30000.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_superadditive_in_bits(self, b1, b2):
        g = 1e-12
        total = phy.required_tx_power(b1 + b2, CFG, g)
        assert total >= phy.required_tx_power(b1, CFG, g) + phy.required_tx_power(
            b2, CFG, g
        ) * (1 - 1e-12)

    def test_monotone(self):
        assert phy.required_tx_power(20000, CFG, 1e-12) > phy.required_tx_power(
            10000, CFG, 1e-12
        )
        assert phy.required_tx_power(10000, CFG, 1e-12) > phy.required_tx_power(
            10000, CFG, 2e-12
        )


class TestEnergies:
    def test_tx_zero(self):
        assert phy.tx_energy(0.0, CFG) == 0.0

    def test_tx_at_cap(self):
        assert phy.tx_energy(3.0, CFG) == pytest.approx(0.03)

    def test_tx_above_cap_rejected(self):
        with pytest.raises(phy.InfeasibleActionError):
            phy.tx_energy(3.1, CFG)

    def test_cpu_zero_tasks(self):
        assert phy.cpu_energy(0, CFG) == 0.0

    def test_cpu_one_task(self):
        # 5000 bits * 737.5 cycles/bit = 3,687,500 cycles -> 1.84375 ms
        assert phy.local_compute_seconds(1, CFG) == pytest.approx(1.84375e-3)
        assert phy.cpu_energy(1, CFG) == pytest.approx(1e-27 * 3.6875e6 * (2e9) ** 2)
        assert phy.cpu_energy(1, CFG) == pytest.approx(0.01475)

    def test_five_tasks_feasible_six_not(self):
        assert phy.local_compute_seconds(5, CFG) == pytest.approx(9.21875e-3)
        assert phy.cpu_energy(5, CFG) > 0
        with pytest.raises(phy.InfeasibleActionError):
            phy.cpu_energy(6, CFG)

    def test_cpu_linear_in_tasks(self):
        assert phy.cpu_energy(4, CFG) == pytest.approx(4 * phy.cpu_energy(1, CFG))


class TestFeasibleActions:
    def test_ungranted_only_idle(self):
        s = MtLocalState(cell=0, fading_state=3, queue_len=9, task_arrivals=5, associated_bs=0)
        acts = phy.feasible_actions(s, granted=False, config=CFG)
        assert acts == [phy.MtAction(0, 0, granted=False)]

    def test_empty_state_only_idle(self):
        s = MtLocalState(cell=0, fading_state=0, queue_len=0, task_arrivals=0, associated_bs=0)
        acts = phy.feasible_actions(s, granted=True, config=CFG)
        assert [(a.scheduled, a.offloaded) for a in acts] == [(0, 0)]

    def test_generous_gain_full_grid(self):
        s = MtLocalState(cell=0, fading_state=3, queue_len=3, task_arrivals=2, associated_bs=0)
        acts = phy.feasible_actions(s, granted=True, config=CFG, gain=1.0)
        assert len(acts) == 4 * 3  # all (r, m) pairs

    def test_brute_force_power_check(self):
        s = MtLocalState(cell=5, fading_state=0, queue_len=10, task_arrivals=5, associated_bs=0)
        gain = 2e-13
        acts = phy.feasible_actions(s, granted=True, config=CFG, gain=gain)
        got = {(a.scheduled, a.offloaded) for a in acts}
        expected = {(0, 0)}
        for r in range(11):
            for m in range(6):
                bits = r * CFG.packet_bits + m * CFG.task_bits
                if phy.required_tx_power(bits, CFG, gain) <= CFG.max_tx_power_w:
                    expected.add((r, m))
        assert got == expected

    @given(
        q=st.integers(0, 10),
        t=st.integers(0, 5),
        log_gain=st.floats(-14, -9),
    )
    @settings(max_examples=60, deadline=None)
    def test_never_empty_and_revalidates(self, q, t, log_gain):
        gain = 10.0**log_gain
        s = MtLocalState(cell=0, fading_state=0, queue_len=q, task_arrivals=t, associated_bs=0)
        acts = phy.feasible_actions(s, granted=True, config=CFG, gain=gain)
        assert phy.MtAction(0, 0, granted=True) in acts
        for a in acts:
            assert a.scheduled <= q and a.offloaded <= t
            bits = a.scheduled * CFG.packet_bits + a.offloaded * CFG.task_bits
            power = phy.required_tx_power(bits, CFG, gain)
            assert power <= CFG.max_tx_power_w * (1 + 1e-9) or (
                a.scheduled == 0 and a.offloaded == 0
            )


class TestUtility:
    def test_all_zero_inputs(self):
        assert phy.utility(0, 0, 0.0, 0.0, CFG) == pytest.approx(4.0)

    def test_closed_form(self):
        # q'=5 with rho_q=5 -> e^-1; the other three terms are 1
        cfg = SimConfig(utility_scales=(5.0, 2.0, 0.01, 0.05))
        assert phy.utility(5, 0, 0.0, 0.0, cfg) == pytest.approx(math.exp(-1) + 3)

    @given(
        q=st.floats(0, 10),
        d=st.floats(0, 10),
        etx=st.floats(0, 0.03),
        ecpu=st.floats(0, 0.08),
    )
    @settings(max_examples=80, deadline=None)
    def test_bounded(self, q, d, etx, ecpu):
        u = phy.utility(q, d, etx, ecpu, CFG)
        assert 0 < u <= sum(CFG.utility_weights)

    def test_monotone_decreasing_each_argument(self):
        base = phy.utility(3, 1, 0.005, 0.01, CFG)
        assert phy.utility(4, 1, 0.005, 0.01, CFG) < base
        assert phy.utility(3, 2, 0.005, 0.01, CFG) < base
        assert phy.utility(3, 1, 0.006, 0.01, CFG) < base
        assert phy.utility(3, 1, 0.005, 0.02, CFG) < base
