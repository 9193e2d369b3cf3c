"""World model and the one-slot transition.

Owns mobility on the cell grid, finite-state fading, Poisson packet arrivals,
Markov task arrivals, queue dynamics with overflow drops, and best-gain base
station association.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import phy
from .auction import AuctionResult
from .config import TASK_STATES, SimConfig


class TransitionError(ValueError):
    pass


@dataclass(frozen=True)
class MtLocalState:
    cell: int
    fading_state: int
    queue_len: int
    task_arrivals: int
    associated_bs: int


@dataclass(frozen=True)
class GlobalState:
    slot: int
    mt_states: tuple[MtLocalState, ...]
    last_auction: AuctionResult | None = None


@dataclass(frozen=True)
class SlotOutcome:
    """Everything realized in one slot; feeds both learning and metrics."""

    scheduled: np.ndarray  # packets per MT
    offloaded: np.ndarray  # tasks per MT
    arrivals: np.ndarray  # packets per MT
    drops: np.ndarray  # packets per MT
    tx_energy: np.ndarray  # J per MT
    cpu_energy: np.ndarray  # J per MT
    utilities: np.ndarray  # per MT
    payments: np.ndarray  # per WSP
    payoffs: np.ndarray  # per WSP
    handover: np.ndarray  # bool per MT (association changed at slot end)


@dataclass(frozen=True)
class JointAction:
    """Per-terminal actions plus the auction result they must be consistent with."""

    mt_actions: tuple[phy.MtAction, ...]
    auction: AuctionResult


def stationary_distribution(matrix: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Stationary row vector of a row-stochastic matrix by power iteration."""
    n = matrix.shape[0]
    p = np.full(n, 1.0 / n)
    for _ in range(100000):
        nxt = p @ matrix
        if np.abs(nxt - p).max() < tol:
            return nxt / nxt.sum()
        p = nxt
    return p / p.sum()


def mobility_row(cell: int, config: SimConfig) -> tuple[list[int], list[float]]:
    """Support and probabilities of one mobility step from `cell`."""
    side = config.grid_side
    row, col = divmod(cell, side)
    neighbors = []
    if row > 0:
        neighbors.append(cell - side)
    if row < side - 1:
        neighbors.append(cell + side)
    if col > 0:
        neighbors.append(cell - 1)
    if col < side - 1:
        neighbors.append(cell + 1)
    if not neighbors:
        return [cell], [1.0]
    move = (1.0 - config.mobility_stay) / len(neighbors)
    return [cell] + neighbors, [config.mobility_stay] + [move] * len(neighbors)


@lru_cache(maxsize=4096)
def _mobility_cum(cell: int, config: SimConfig) -> tuple[tuple[int, ...], np.ndarray]:
    support, probs = mobility_row(cell, config)
    return tuple(support), np.cumsum(probs)


@lru_cache(maxsize=8)
def _task_cum(config: SimConfig) -> np.ndarray:
    return np.cumsum(config.task_chain_array(), axis=1)


@lru_cache(maxsize=8)
def _fading_cum(config: SimConfig) -> np.ndarray:
    return np.cumsum(config.fading_chain_array(), axis=1)


def _draw(cum_row: np.ndarray, rng: np.random.Generator) -> int:
    return int(np.searchsorted(cum_row, rng.random(), side="right").clip(0, len(cum_row) - 1))


def step_mobility(cell: int, config: SimConfig, rng: np.random.Generator) -> int:
    support, cum = _mobility_cum(cell, config)
    return support[_draw(cum, rng)]


@lru_cache(maxsize=4096)
def _best_bs(cell: int, config: SimConfig) -> int:
    gains = [
        phy.channel_gain(cell, b, 0, config) for b in range(len(config.bs_positions))
    ]
    return int(np.argmax(gains))


def associate_bs(cell: int, config: SimConfig, prev_bs: int | None = None) -> tuple[int, bool]:
    """Best mean-path-gain base station for the cell; ties to the lowest index."""
    bs = _best_bs(cell, config)
    return bs, prev_bs is not None and bs != prev_bs


def update_queue(q: int, scheduled: int, arrivals: int, capacity: int) -> tuple[int, int]:
    if scheduled > q:
        raise TransitionError(f"scheduled {scheduled} packets from a queue of {q}")
    backlog = q - scheduled + arrivals
    return min(backlog, capacity), max(backlog - capacity, 0)


def sample_arrivals(
    state: GlobalState, config: SimConfig, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Packet arrivals (Poisson) and next task-arrival states (Markov chain)."""
    n = config.num_mts
    lam = config.poisson_mean
    packets = rng.poisson(lam, n) if lam > 0 else np.zeros(n, dtype=np.int64)
    cum = _task_cum(config)
    next_tasks = np.empty(n, dtype=np.int64)
    for k, mt in enumerate(state.mt_states):
        next_tasks[k] = _draw(cum[mt.task_arrivals], rng)
    return packets, next_tasks


def init_world(config: SimConfig, seed: int) -> GlobalState:
    """Fresh world at slot 1: uniform cells, empty queues, stationary fading."""
    config.validate()
    rng = np.random.default_rng(seed)
    fading_pi = stationary_distribution(config.fading_chain_array())
    task_chain = config.task_chain_array()
    task_pi = stationary_distribution(task_chain)
    states = []
    for _ in range(config.num_mts):
        cell = int(rng.integers(config.num_cells))
        fading = int(rng.choice(len(config.fading_levels), p=fading_pi))
        tasks = int(rng.choice(TASK_STATES, p=task_pi))
        bs, _ = associate_bs(cell, config)
        states.append(
            MtLocalState(
                cell=cell,
                fading_state=fading,
                queue_len=0,
                task_arrivals=tasks,
                associated_bs=bs,
            )
        )
    return GlobalState(slot=1, mt_states=tuple(states), last_auction=None)


def _validate_joint_action(state: GlobalState, joint: JointAction, config: SimConfig) -> None:
    if len(joint.mt_actions) != config.num_mts:
        raise TransitionError(
            f"expected {config.num_mts} MT actions, got {len(joint.mt_actions)}"
        )
    local_cap = phy.max_local_tasks(config)
    for k, (s, a) in enumerate(zip(state.mt_states, joint.mt_actions)):
        granted = joint.auction.granted(k)
        if a.granted != granted:
            raise TransitionError(f"MT {k}: action grant flag disagrees with auction")
        if not granted and (a.scheduled or a.offloaded):
            raise TransitionError(f"MT {k}: ungranted but r={a.scheduled}, m={a.offloaded}")
        if a.scheduled > s.queue_len:
            raise TransitionError(
                f"MT {k}: scheduled {a.scheduled} > queue {s.queue_len}"
            )
        if a.offloaded > s.task_arrivals:
            raise TransitionError(
                f"MT {k}: offloaded {a.offloaded} > arrivals {s.task_arrivals}"
            )
        if s.task_arrivals - a.offloaded > local_cap:
            raise TransitionError(
                f"MT {k}: {s.task_arrivals - a.offloaded} local tasks miss the slot deadline"
            )
        bits = a.scheduled * config.packet_bits + a.offloaded * config.task_bits
        gain = phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
        power = phy.required_tx_power(bits, config, gain)
        if power > config.max_tx_power_w * (1 + 1e-12):
            raise TransitionError(
                f"MT {k}: required power {power:.4g} W exceeds cap {config.max_tx_power_w} W"
            )


def advance_slot(
    state: GlobalState,
    joint: JointAction,
    config: SimConfig,
    rng: np.random.Generator,
) -> tuple[GlobalState, SlotOutcome]:
    """Apply one slot: energies, queue update, utilities, payoffs, then the
    mobility/fading/arrival transitions that produce the next state."""
    _validate_joint_action(state, joint, config)
    n = config.num_mts

    scheduled = np.array([a.scheduled for a in joint.mt_actions], dtype=np.int64)
    offloaded = np.array([a.offloaded for a in joint.mt_actions], dtype=np.int64)

    e_tx = np.zeros(n)
    e_cpu = np.zeros(n)
    for k, (s, a) in enumerate(zip(state.mt_states, joint.mt_actions)):
        gain = phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
        bits = a.scheduled * config.packet_bits + a.offloaded * config.task_bits
        power = phy.required_tx_power(bits, config, gain)
        e_tx[k] = phy.tx_energy(min(power, config.max_tx_power_w), config)
        e_cpu[k] = phy.cpu_energy(s.task_arrivals - a.offloaded, config)

    packets, next_tasks = sample_arrivals(state, config, rng)

    new_queues = np.empty(n, dtype=np.int64)
    drops = np.empty(n, dtype=np.int64)
    utilities = np.empty(n)
    for k, s in enumerate(state.mt_states):
        new_queues[k], drops[k] = update_queue(
            s.queue_len, int(scheduled[k]), int(packets[k]), config.queue_capacity
        )
        utilities[k] = phy.utility(new_queues[k], drops[k], e_tx[k], e_cpu[k], config)

    payments = np.zeros(config.num_wsps)
    for j, p in joint.auction.payments.items():
        payments[j] = p
    payoffs = np.empty(config.num_wsps)
    for j in range(config.num_wsps):
        lo = j * config.mts_per_wsp
        hi = lo + config.mts_per_wsp
        payoffs[j] = config.mt_weight * utilities[lo:hi].sum() - payments[j]

    fading_cum = _fading_cum(config)
    new_states = []
    handover = np.zeros(n, dtype=bool)
    for k, s in enumerate(state.mt_states):
        cell = step_mobility(s.cell, config, rng)
        fading = _draw(fading_cum[s.fading_state], rng)
        bs, moved = associate_bs(cell, config, prev_bs=s.associated_bs)
        handover[k] = moved
        new_states.append(
            MtLocalState(
                cell=cell,
                fading_state=fading,
                queue_len=int(new_queues[k]),
                task_arrivals=int(next_tasks[k]),
                associated_bs=bs,
            )
        )

    outcome = SlotOutcome(
        scheduled=scheduled,
        offloaded=offloaded,
        arrivals=packets,
        drops=drops,
        tx_energy=e_tx,
        cpu_energy=e_cpu,
        utilities=utilities,
        payments=payments,
        payoffs=payoffs,
        handover=handover,
    )
    next_state = GlobalState(
        slot=state.slot + 1, mt_states=tuple(new_states), last_auction=joint.auction
    )
    return next_state, outcome


def wsp_of_mt(mt: int, config: SimConfig) -> int:
    return mt // config.mts_per_wsp
