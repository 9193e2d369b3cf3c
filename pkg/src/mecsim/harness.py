"""Experiment orchestration: seeded episodes, metric series, load sweeps, CSV."""
from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace

import numpy as np

from . import baselines, phy
from .auction import AuctionResult, Bid, allocate_bands
from .config import SimConfig
from .env import GlobalState, JointAction, advance_slot, init_world, wsp_of_mt
from .learning import LearningParams, MtAgent, WspAgent

log = logging.getLogger("mecsim")
log.setLevel(os.environ.get("MECSIM_LOG", "WARNING").upper())

POLICIES = ("drl", "channel", "queue")

SLOT_COLUMNS = (
    "slot",
    "queue",
    "drops",
    "tx_energy",
    "cpu_energy",
    "utility",
    "payment",
    "payoff",
    "scheduled",
    "offloaded",
    "loss",
    "wsp_value",
    "grants",
)


@dataclass
class MetricsSeries:
    """Per-slot averages across terminals (and operators where noted)."""

    columns: dict[str, list[float]] = field(
        default_factory=lambda: {c: [] for c in SLOT_COLUMNS}
    )

    def append(self, **kwargs) -> None:
        for name, value in kwargs.items():
            self.columns[name].append(float(value))

    def __len__(self) -> int:
        return len(self.columns["slot"])

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    def moving_average(self, name: str, window: int) -> np.ndarray:
        x = self.array(name)
        if len(x) < window:
            return np.array([])
        kernel = np.full(window, 1.0 / window)
        return np.convolve(x, kernel, mode="valid")

    def post_warmup_mean(self, name: str, warmup: int) -> float:
        x = self.array(name)[warmup:]
        return float(np.nanmean(x)) if x.size else float("nan")


def _spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(c) for c in children]


def run_episode(
    config: SimConfig,
    policy: str,
    seed: int,
    slots: int,
    params: LearningParams | None = None,
    always_grant: bool = False,
) -> MetricsSeries:
    """Execute the full observe/bid/auction/act/outcome/learn loop.

    `always_grant` bypasses the band competition and grants every terminal,
    used for tiny single-terminal oracle comparisons.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    config.validate()
    params = params or LearningParams()
    n = config.num_mts

    rngs = _spawn_rngs(seed, 3 + n)
    init_rng, env_rng, auction_rng = rngs[0], rngs[1], rngs[2]
    agent_rngs = rngs[3:]

    state = init_world(config, init_rng.integers(2**63))
    series = MetricsSeries()

    agents: list[MtAgent] = []
    wsps: list[WspAgent] = []
    if policy == "drl":
        agents = [MtAgent(config, params, agent_rngs[k]) for k in range(n)]
        wsps = [WspAgent(config, params) for _ in range(config.num_wsps)]

    for _ in range(slots):
        gains = [
            phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
            for s in state.mt_states
        ]

        if policy == "drl":
            for k, agent in enumerate(agents):
                agent.observe(state.mt_states[k], gains[k])

        if always_grant:
            auction = AuctionResult(
                grants={k: k for k in range(n)},
                payments={j: 0.0 for j in range(config.num_wsps)},
            )
        elif policy == "drl":
            bids = [
                Bid(wsp=wsp_of_mt(k, config), mt=k, valuation=agents[k].bid())
                for k in range(n)
            ]
            auction = allocate_bands(bids, config.num_bands, auction_rng)
        elif policy == "channel":
            auction = baselines.channel_aware_allocate(state, config)
        else:
            auction = baselines.queue_aware_allocate(state, config, auction_rng)

        actions = []
        if policy == "drl":
            for k, agent in enumerate(agents):
                granted = auction.granted(k)
                agent.slot_update(granted)
                a_idx = agent.act(granted)
                r, m = phy.action_from_index(a_idx)
                actions.append(phy.MtAction(r, m, granted=granted))
            for j, wsp in enumerate(wsps):
                wsp.observe_payment(auction.payments.get(j, 0.0), params.gamma)
        else:
            for k, s in enumerate(state.mt_states):
                actions.append(
                    baselines.greedy_action(s, auction.granted(k), config, gains[k])
                )

        joint = JointAction(mt_actions=tuple(actions), auction=auction)
        state, outcome = advance_slot(state, joint, config, env_rng)

        if policy == "drl":
            for k, agent in enumerate(agents):
                agent.record_reward(outcome.utilities[k])
            losses = [a.last_loss for a in agents if a.last_loss is not None]
            loss = float(np.mean(losses)) if losses else float("nan")
            wsp_value = float(np.mean([w.payment_value() for w in wsps]))
        else:
            loss = float("nan")
            wsp_value = float("nan")

        series.append(
            slot=len(series) + 1,
            queue=np.mean([s.queue_len for s in state.mt_states]),
            drops=outcome.drops.mean(),
            tx_energy=outcome.tx_energy.mean(),
            cpu_energy=outcome.cpu_energy.mean(),
            utility=outcome.utilities.mean(),
            payment=outcome.payments.mean(),
            payoff=outcome.payoffs.mean(),
            scheduled=outcome.scheduled.mean(),
            offloaded=outcome.offloaded.mean(),
            loss=loss,
            wsp_value=wsp_value,
            grants=len(auction.grants),
        )
    return series


# -- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    rates_bps: tuple[float, ...] = (1.2e6, 1.5e6, 1.8e6, 2.1e6)
    slots: int = 13_000
    seeds: int = 3
    policies: tuple[str, ...] = POLICIES
    warmup_drl: int = 10_000
    warmup_baseline: int = 1_000
    base_seed: int = 1

    def validate(self) -> "SweepSpec":
        if not self.rates_bps or self.seeds < 1 or not self.policies:
            raise ValueError("sweep needs at least one rate, seed, and policy")
        if self.slots <= max(self.warmup_drl if "drl" in self.policies else 0,
                             self.warmup_baseline):
            raise ValueError("slots must exceed the warmup")
        return self

    def warmup(self, policy: str) -> int:
        return self.warmup_drl if policy == "drl" else self.warmup_baseline


SWEEP_METRICS = ("queue", "drops", "tx_energy", "cpu_energy", "utility", "payment")


def _sweep_point(args):
    config, spec, policy, rate, seed = args
    cfg = replace(config, packet_rate_bps=rate)
    series = run_episode(cfg, policy, seed, spec.slots)
    warmup = spec.warmup(policy)
    return {m: series.post_warmup_mean(m, warmup) for m in SWEEP_METRICS}


def sweep(spec: SweepSpec, config: SimConfig, workers: int = 1) -> list[dict]:
    """One aggregated row per (policy, rate): seed-mean and seed-std per metric."""
    spec.validate()
    jobs = [
        (config, spec, policy, rate, spec.base_seed + i)
        for policy in spec.policies
        for rate in spec.rates_bps
        for i in range(spec.seeds)
    ]
    if workers > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(workers) as pool:
            results = pool.map(_sweep_point, jobs)
    else:
        results = [_sweep_point(j) for j in jobs]

    rows = []
    idx = 0
    for policy in spec.policies:
        for rate in spec.rates_bps:
            per_seed = results[idx : idx + spec.seeds]
            idx += spec.seeds
            row = {"policy": policy, "rate_bps": rate, "seeds": spec.seeds}
            for m in SWEEP_METRICS:
                vals = np.array([r[m] for r in per_seed])
                row[f"{m}_mean"] = float(vals.mean())
                row[f"{m}_std"] = float(vals.std(ddof=1)) if spec.seeds > 1 else 0.0
            rows.append(row)
    rows.sort(key=lambda r: (r["policy"], r["rate_bps"]))
    return rows


# -- CSV -------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_metrics_csv(data, path: str) -> None:
    """Write a MetricsSeries (per-slot rows) or a sweep table (list of dicts)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if isinstance(data, MetricsSeries):
            writer.writerow(SLOT_COLUMNS)
            for i in range(len(data)):
                writer.writerow(_fmt(data.columns[c][i]) for c in SLOT_COLUMNS)
        else:
            if not data:
                return
            header = list(data[0].keys())
            writer.writerow(header)
            for row in data:
                writer.writerow(_fmt(row[c]) for c in header)


# -- tiny-instance helpers -------------------------------------------------


def tiny_config(seed: int = 0) -> SimConfig:
    """Single terminal on a 2x2 grid with 2 fading levels and a 4-packet queue."""
    from .config import birth_death_chain

    return SimConfig(
        num_wsps=1,
        mts_per_wsp=1,
        num_bands=1,
        grid_side=2,
        queue_capacity=4,
        fading_levels=(0.4, 1.2),
        fading_chain=birth_death_chain(2, 0.4, 0.3),
        packet_rate_bps=6.0e5,
        seed=seed,
    )


def train_always_granted(
    config: SimConfig, params: LearningParams, slots: int, seed: int
) -> MtAgent:
    """Train the single terminal's network with the band always granted."""
    if config.num_mts != 1:
        raise ValueError("always-granted training expects exactly one terminal")
    rngs = _spawn_rngs(seed, 4)
    state = init_world(config, rngs[0].integers(2**63))
    env_rng = rngs[1]
    agent = MtAgent(config, params, rngs[3])
    auction = AuctionResult(grants={0: 0}, payments={0: 0.0})
    for _ in range(slots):
        s = state.mt_states[0]
        gain = phy.channel_gain(s.cell, s.associated_bs, s.fading_state, config)
        agent.observe(s, gain)
        agent.slot_update(granted=True)
        a_idx = agent.act(granted=True)
        r, m = phy.action_from_index(a_idx)
        joint = JointAction(
            mt_actions=(phy.MtAction(r, m, granted=True),), auction=auction
        )
        state, outcome = advance_slot(state, joint, config, env_rng)
        agent.record_reward(outcome.utilities[0])
    return agent


def rollout_return(
    config: SimConfig,
    choose_action,
    slots: int,
    seed: int,
    gamma: float,
) -> tuple[float, GlobalState]:
    """Discounted return of `choose_action(local_state) -> action index` with the
    band always granted; returns (return, initial state)."""
    rngs = _spawn_rngs(seed, 2)
    initial = init_world(config, rngs[0].integers(2**63))
    env_rng = rngs[1]
    state = initial
    auction = AuctionResult(grants={0: 0}, payments={0: 0.0})
    total = 0.0
    discount = 1.0
    for _ in range(slots):
        s = state.mt_states[0]
        r, m = phy.action_from_index(int(choose_action(s)))
        joint = JointAction(
            mt_actions=(phy.MtAction(r, m, granted=True),), auction=auction
        )
        state, outcome = advance_slot(state, joint, config, env_rng)
        total += discount * float(outcome.utilities[0])
        discount *= gamma
    return total, initial
