"""Physical-layer and computation-energy math.

Channel gain, minimum transmit power for a chosen bit load (Shannon inverse
over one band), transmit/CPU energy, per-terminal action feasibility, and the
bounded utility signal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .config import TASK_STATES, SimConfig


class InfeasibleActionError(ValueError):
    pass


@dataclass(frozen=True)
class MtAction:
    """One terminal's slot decision: r packets transmitted, m tasks offloaded."""

    scheduled: int
    offloaded: int
    granted: bool

    def __post_init__(self):
        if not self.granted and (self.scheduled or self.offloaded):
            raise InfeasibleActionError(
                "ungranted terminal must stay idle (r=0, m=0)"
            )


IDLE_INDEX = 0


def action_index(r: int, m: int) -> int:
    return r * TASK_STATES + m


def action_from_index(idx: int) -> tuple[int, int]:
    return divmod(idx, TASK_STATES)


@lru_cache(maxsize=4096)
def channel_gain(cell: int, bs: int, fading_state: int, config: SimConfig) -> float:
    """Power gain from a cell center to a base station under the given fading."""
    cx, cy = config.cell_center(cell)
    bx, by = config.bs_positions[bs]
    d = max(math.hypot(cx - bx, cy - by), 1.0)
    return config.path_ref_gain * d ** (-config.path_exp) * config.fading_levels[fading_state]


def required_tx_power(bits: float, config: SimConfig, gain: float) -> float:
    """Minimum power sustaining `bits` within one slot over one band."""
    if bits <= 0:
        return 0.0
    rate = bits / config.slot_seconds
    return (2.0 ** (rate / config.bandwidth_hz) - 1.0) * config.noise_w / gain


def tx_energy(power: float, config: SimConfig) -> float:
    if power < 0 or power > config.max_tx_power_w * (1 + 1e-12):
        raise InfeasibleActionError(
            f"transmit power {power} W outside [0, {config.max_tx_power_w}] W"
        )
    return power * config.slot_seconds


def local_compute_seconds(local_tasks: int, config: SimConfig) -> float:
    return local_tasks * config.task_bits * config.cycles_per_bit / config.cpu_hz


def max_local_tasks(config: SimConfig) -> int:
    """Largest task count computable locally within one slot."""
    per_task = config.task_bits * config.cycles_per_bit / config.cpu_hz
    return int(math.floor(config.slot_seconds / per_task + 1e-12))


def cpu_energy(local_tasks: int, config: SimConfig) -> float:
    if local_compute_seconds(local_tasks, config) > config.slot_seconds * (1 + 1e-12):
        raise InfeasibleActionError(
            f"{local_tasks} local tasks miss the {config.slot_seconds}s deadline"
        )
    cycles = local_tasks * config.task_bits * config.cycles_per_bit
    return config.kappa * cycles * config.cpu_hz ** 2


@lru_cache(maxsize=8)
def _action_grid(config: SimConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-action-index (r, m, bits) arrays over the (r_max+1)*6 grid."""
    idx = np.arange(config.num_actions)
    r = idx // TASK_STATES
    m = idx % TASK_STATES
    bits = r * config.packet_bits + m * config.task_bits
    return r, m, bits


def max_bits(gain: float, config: SimConfig) -> float:
    """Bit load sustainable at the power cap (Shannon forward direction)."""
    snr = config.max_tx_power_w * gain / config.noise_w
    return config.bandwidth_hz * config.slot_seconds * math.log2(1.0 + snr)


def feasible_mask(
    queue_len: int,
    task_arrivals: int,
    granted: bool,
    gain: float,
    config: SimConfig,
) -> np.ndarray:
    """Boolean mask over the (r_max+1)*6 action grid.

    Idle (0, 0) is always feasible; an ungranted terminal gets nothing else.
    """
    mask = np.zeros(config.num_actions, dtype=bool)
    mask[IDLE_INDEX] = True
    if not granted:
        return mask
    r, m, bits = _action_grid(config)
    local_cap = max_local_tasks(config)
    feasible = (
        (r <= min(queue_len, config.r_max))
        & (m <= task_arrivals)
        & (task_arrivals - m <= local_cap)
        & (bits <= max_bits(gain, config))
    )
    return mask | feasible


def feasible_actions(state, granted: bool, config: SimConfig, gain: float | None = None):
    """Enumerate feasible MtActions for one local state."""
    if gain is None:
        gain = channel_gain(state.cell, state.associated_bs, state.fading_state, config)
    mask = feasible_mask(state.queue_len, state.task_arrivals, granted, gain, config)
    return [
        MtAction(*action_from_index(i), granted=granted) for i in np.flatnonzero(mask)
    ]


def utility(
    queue_len_after: float,
    drops: float,
    e_tx: float,
    e_cpu: float,
    config: SimConfig,
) -> float:
    """Reward in (0, sum(weights)]: decaying exponentials of the four costs."""
    w = config.utility_weights
    rho = config.utility_scales
    return (
        w[0] * math.exp(-queue_len_after / rho[0])
        + w[1] * math.exp(-drops / rho[1])
        + w[2] * math.exp(-e_tx / rho[2])
        + w[3] * math.exp(-e_cpu / rho[3])
    )
