"""Benchmark policies: channel-aware and queue-aware band allocation with a
shared greedy transmit-then-offload terminal behavior."""
from __future__ import annotations

import numpy as np

from . import phy
from .auction import AuctionResult, Bid, allocate_bands
from .config import SimConfig
from .env import GlobalState, MtLocalState, wsp_of_mt


def greedy_action(
    s: MtLocalState, granted: bool, config: SimConfig, gain: float | None = None
) -> phy.MtAction:
    """Max feasible packet count first, then max feasible offload count."""
    if not granted:
        return phy.MtAction(0, 0, granted=False)
    if gain is None:
        gain = phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
    local_cap = phy.max_local_tasks(config)

    best_r = 0
    for r in range(min(s.queue_len, config.r_max), -1, -1):
        if phy.required_tx_power(r * config.packet_bits, config, gain) <= config.max_tx_power_w:
            best_r = r
            break
    best_m = 0
    for m in range(s.task_arrivals, -1, -1):
        if s.task_arrivals - m > local_cap:
            continue
        bits = best_r * config.packet_bits + m * config.task_bits
        if phy.required_tx_power(bits, config, gain) <= config.max_tx_power_w:
            best_m = m
            break
    return phy.MtAction(best_r, best_m, granted=True)


def channel_aware_allocate(state: GlobalState, config: SimConfig) -> AuctionResult:
    """Operator-free allocation to the best channels; nobody pays."""
    gains = [
        phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
        for s in state.mt_states
    ]
    order = sorted(range(len(gains)), key=lambda k: (-gains[k], k))
    winners = order[: min(config.num_bands, len(order))]
    grants = {mt: band for band, mt in enumerate(winners)}
    payments = {j: 0.0 for j in range(config.num_wsps)}
    return AuctionResult(grants=grants, payments=payments, clearing_price=0.0)


def queue_aware_valuation(s: MtLocalState, config: SimConfig) -> float:
    """Queue length plus the expected overflow beyond capacity."""
    lam = config.poisson_mean
    return s.queue_len + max(s.queue_len + lam - config.queue_capacity, 0.0)


def queue_aware_allocate(
    state: GlobalState, config: SimConfig, rng: np.random.Generator
) -> AuctionResult:
    bids = [
        Bid(wsp=wsp_of_mt(k, config), mt=k, valuation=queue_aware_valuation(s, config))
        for k, s in enumerate(state.mt_states)
    ]
    return allocate_bands(bids, config.num_bands, rng)
