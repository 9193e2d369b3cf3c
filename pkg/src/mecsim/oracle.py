"""Exact value iteration on tiny always-granted single-terminal instances.

Enumerates (cell, fading, queue, task) states, assembles exact transition and
expected-reward tables from the same environment and physical-layer
primitives used by the simulator, and iterates to sup-norm convergence.
Used to validate the deep Q-learner end to end.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import phy
from .config import TASK_STATES, SimConfig
from .env import MtLocalState, associate_bs, mobility_row

# arrivals beyond this many per slot are lumped into the last bucket
_ARRIVAL_TAIL = 40


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    config: SimConfig
    values: np.ndarray  # [cells, fading, queue+1, tasks]
    policy: np.ndarray  # greedy action index per state, same shape
    gamma: float
    iterations: int

    def state_index(self, s: MtLocalState) -> tuple[int, int, int, int]:
        return (s.cell, s.fading_state, s.queue_len, s.task_arrivals)

    def value(self, s: MtLocalState) -> float:
        return float(self.values[self.state_index(s)])

    def action(self, s: MtLocalState) -> int:
        return int(self.policy[self.state_index(s)])


def _arrival_pmf(lam: float, n: int) -> np.ndarray:
    """Poisson pmf over 0..n-1 with the tail mass folded into the last entry."""
    k = np.arange(n)
    if lam == 0:
        pmf = np.zeros(n)
        pmf[0] = 1.0
        return pmf
    log_pmf = -lam + k * math.log(lam) - np.array([math.lgamma(i + 1) for i in k])
    pmf = np.exp(log_pmf)
    pmf[-1] = max(1.0 - pmf[:-1].sum(), 0.0)
    return pmf


def value_iteration_oracle(
    config: SimConfig,
    gamma: float = 0.9,
    tol: float = 1e-9,
    max_states: int = 10_000,
    max_iter: int = 100_000,
) -> OracleSolution:
    """Optimal discounted values for one always-granted terminal."""
    config.validate()
    cells = config.num_cells
    fades = len(config.fading_levels)
    queues = config.queue_capacity + 1
    n_states = cells * fades * queues * TASK_STATES
    if n_states > max_states:
        raise OracleError(f"state space has {n_states} states > limit {max_states}")

    lam = config.poisson_mean
    arr_n = config.queue_capacity + _ARRIVAL_TAIL
    arr_pmf = _arrival_pmf(lam, arr_n)
    arrivals = np.arange(arr_n)

    # component transition matrices
    cell_t = np.zeros((cells, cells))
    for c in range(cells):
        support, probs = mobility_row(c, config)
        for s, p in zip(support, probs):
            cell_t[c, s] += p
    fade_t = config.fading_chain_array()
    task_t = config.task_chain_array()

    w = config.utility_weights
    rho = config.utility_scales
    local_cap = phy.max_local_tasks(config)
    bs_of = [associate_bs(c, config)[0] for c in range(cells)]

    # queue kernel Pq[q, r, q'] and expected queue/drop utility Rq[q, r]
    cap = config.queue_capacity
    pq = np.zeros((queues, config.r_max + 1, queues))
    rq = np.zeros((queues, config.r_max + 1))
    for q in range(queues):
        for r in range(min(q, config.r_max) + 1):
            backlog = q - r + arrivals
            q_next = np.minimum(backlog, cap)
            drops = np.maximum(backlog - cap, 0)
            np.add.at(pq[q, r], q_next, arr_pmf)
            rq[q, r] = float(
                np.sum(arr_pmf * (w[0] * np.exp(-q_next / rho[0]) + w[1] * np.exp(-drops / rho[1])))
            )

    # per-state-action feasibility and the deterministic energy reward part
    feasible = np.zeros((cells, fades, queues, TASK_STATES, config.num_actions), dtype=bool)
    energy_reward = np.zeros_like(feasible, dtype=float)
    for c in range(cells):
        for f in range(fades):
            gain = phy.channel_gain(c, bs_of[c], f, config)
            for q in range(queues):
                for t in range(TASK_STATES):
                    mask = phy.feasible_mask(q, t, True, gain, config)
                    feasible[c, f, q, t] = mask
                    for a in np.flatnonzero(mask):
                        r, m = phy.action_from_index(int(a))
                        bits = r * config.packet_bits + m * config.task_bits
                        p = phy.required_tx_power(bits, config, gain)
                        e_tx = p * config.slot_seconds
                        e_cpu = phy.cpu_energy(t - m, config)
                        energy_reward[c, f, q, t, a] = w[2] * math.exp(
                            -e_tx / rho[2]
                        ) + w[3] * math.exp(-e_cpu / rho[3])

    values = np.zeros((cells, fades, queues, TASK_STATES))
    policy = np.zeros_like(values, dtype=np.int64)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        # contract the independent coordinates: t3[c,f,q',t] = E[V(next) | q' fixed]
        t3 = np.einsum(
            "ca,fb,td,abqd->cfqt", cell_t, fade_t, task_t, values, optimize=True
        )

        new_values = np.empty_like(values)
        for c in range(cells):
            for f in range(fades):
                for q in range(queues):
                    for t in range(TASK_STATES):
                        acts = np.flatnonzero(feasible[c, f, q, t])
                        best = -np.inf
                        best_a = acts[0]
                        for a in acts:
                            r, _ = phy.action_from_index(int(a))
                            ev = float(pq[q, r] @ t3[c, f, :, t])
                            val = rq[q, r] + energy_reward[c, f, q, t, a] + gamma * ev
                            if val > best:
                                best = val
                                best_a = a
                        new_values[c, f, q, t] = best
                        policy[c, f, q, t] = best_a
        delta = float(np.abs(new_values - values).max())
        values = new_values
        if delta < tol:
            break
    return OracleSolution(
        config=config, values=values, policy=policy, gamma=gamma, iterations=iterations
    )
