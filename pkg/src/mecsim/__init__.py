"""Discrete-time simulator for multi-operator edge offloading with a
distributed deep Q-learning stack, band auction, and benchmark policies."""

from .auction import AuctionResult, Bid, allocate_bands, wsp_payoff
from .config import SimConfig, ConfigError, load_config
from .env import (
    GlobalState,
    JointAction,
    MtLocalState,
    SlotOutcome,
    advance_slot,
    init_world,
)
from .harness import MetricsSeries, SweepSpec, run_episode, sweep, write_metrics_csv
from .learning import LearningParams, MtAgent, QNetwork, WspAgent
from .oracle import value_iteration_oracle
from .phy import MtAction

__all__ = [
    "AuctionResult",
    "Bid",
    "ConfigError",
    "GlobalState",
    "JointAction",
    "LearningParams",
    "MetricsSeries",
    "MtAction",
    "MtAgent",
    "MtLocalState",
    "QNetwork",
    "SimConfig",
    "SlotOutcome",
    "SweepSpec",
    "WspAgent",
    "advance_slot",
    "allocate_bands",
    "init_world",
    "load_config",
    "run_episode",
    "sweep",
    "value_iteration_oracle",
    "write_metrics_csv",
    "wsp_payoff",
]
