"""Simulation configuration: defaults, validation, and INI-file loading."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

# Task arrivals per slot take integer values 0..5.
TASK_STATES = 6


class ConfigError(ValueError):
    """Raised when a configuration value fails validation; names the field."""

    def __init__(self, field_name: str, reason: str):
        self.field_name = field_name
        super().__init__(f"config field '{field_name}': {reason}")


def birth_death_chain(n: int, stay: float, step: float) -> tuple[tuple[float, ...], ...]:
    """Row-stochastic birth-death chain; lost edge mass folded into staying."""
    rows = []
    for i in range(n):
        row = [0.0] * n
        row[i] = stay
        extra = 0.0
        for j in (i - 1, i + 1):
            if 0 <= j < n:
                row[j] = step
            else:
                extra += step
        row[i] += extra
        rows.append(tuple(row))
    return tuple(rows)


@dataclass(frozen=True)
class SimConfig:
    """All parameters of one simulation instance.

    Defaults reproduce the case-study setup: 3 operators x 6 terminals,
    11 shared 500 kHz bands, 10 ms slots, 3000-bit packets, 5000-bit tasks,
    737.5 cycles/bit at 2 GHz, 3 W transmit cap, unit terminal weights.
    """

    num_wsps: int = 3
    mts_per_wsp: int = 6
    num_bands: int = 11
    bandwidth_hz: float = 5.0e5
    slot_seconds: float = 0.01
    packet_bits: float = 3000.0
    task_bits: float = 5000.0
    cycles_per_bit: float = 737.5
    cpu_hz: float = 2.0e9
    max_tx_power_w: float = 3.0
    queue_capacity: int = 10
    packet_rate_bps: float = 1.8e6
    task_chain: tuple[tuple[float, ...], ...] = field(
        default_factory=lambda: birth_death_chain(TASK_STATES, 0.5, 0.25)
    )
    grid_side: int = 4
    region_meters: float = 2000.0
    bs_positions: tuple[tuple[float, float], ...] = (
        (500.0, 500.0),
        (1500.0, 500.0),
        (500.0, 1500.0),
        (1500.0, 1500.0),
    )
    mobility_stay: float = 0.6
    fading_levels: tuple[float, ...] = (0.2, 0.6, 1.0, 1.4)
    fading_chain: tuple[tuple[float, ...], ...] = field(
        default_factory=lambda: birth_death_chain(4, 0.6, 0.2)
    )
    noise_w: float = 2.0e-15
    path_ref_gain: float = 1.0e-4
    path_exp: float = 3.0
    kappa: float = 1.0e-27
    mt_weight: float = 1.0
    # (queue, drops, tx energy, cpu energy) weights and exponential decay scales
    utility_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    utility_scales: tuple[float, float, float, float] = (5.0, 2.0, 0.01, 0.05)
    r_max: int = 10
    seed: int = 0

    # -- derived quantities ------------------------------------------------

    @property
    def num_mts(self) -> int:
        return self.num_wsps * self.mts_per_wsp

    @property
    def num_cells(self) -> int:
        return self.grid_side * self.grid_side

    @property
    def cell_meters(self) -> float:
        return self.region_meters / self.grid_side

    @property
    def poisson_mean(self) -> float:
        """Mean packet arrivals per slot."""
        return self.packet_rate_bps * self.slot_seconds / self.packet_bits

    @property
    def num_actions(self) -> int:
        return (self.r_max + 1) * TASK_STATES

    def cell_center(self, cell: int) -> tuple[float, float]:
        row, col = divmod(cell, self.grid_side)
        half = self.cell_meters / 2.0
        return (col * self.cell_meters + half, row * self.cell_meters + half)

    def task_chain_array(self) -> np.ndarray:
        return np.asarray(self.task_chain, dtype=float)

    def fading_chain_array(self) -> np.ndarray:
        return np.asarray(self.fading_chain, dtype=float)

    # -- validation --------------------------------------------------------

    def validate(self) -> "SimConfig":
        pos = {
            "num_wsps": self.num_wsps,
            "mts_per_wsp": self.mts_per_wsp,
            "num_bands": self.num_bands,
            "bandwidth_hz": self.bandwidth_hz,
            "slot_seconds": self.slot_seconds,
            "packet_bits": self.packet_bits,
            "task_bits": self.task_bits,
            "cycles_per_bit": self.cycles_per_bit,
            "cpu_hz": self.cpu_hz,
            "max_tx_power_w": self.max_tx_power_w,
            "queue_capacity": self.queue_capacity,
            "grid_side": self.grid_side,
            "region_meters": self.region_meters,
            "noise_w": self.noise_w,
            "path_ref_gain": self.path_ref_gain,
            "path_exp": self.path_exp,
            "kappa": self.kappa,
            "mt_weight": self.mt_weight,
            "r_max": self.r_max,
        }
        for name, value in pos.items():
            if not (value > 0):
                raise ConfigError(name, f"must be strictly positive, got {value}")
        if self.packet_rate_bps < 0:
            raise ConfigError("packet_rate_bps", "must be >= 0")
        if not (0.0 <= self.mobility_stay <= 1.0):
            raise ConfigError("mobility_stay", "must lie in [0, 1]")
        if not math.isfinite(self.poisson_mean):
            raise ConfigError("packet_rate_bps", "derived arrival mean is not finite")
        if len(self.fading_levels) == 0 or any(g <= 0 for g in self.fading_levels):
            raise ConfigError("fading_levels", "must be nonempty and strictly positive")
        if len(self.bs_positions) == 0:
            raise ConfigError("bs_positions", "at least one base station required")
        self._check_stochastic("task_chain", self.task_chain_array(), TASK_STATES)
        self._check_stochastic(
            "fading_chain", self.fading_chain_array(), len(self.fading_levels)
        )
        if any(w < 0 for w in self.utility_weights):
            raise ConfigError("utility_weights", "must be nonnegative")
        if any(s <= 0 for s in self.utility_scales):
            raise ConfigError("utility_scales", "must be strictly positive")
        return self

    @staticmethod
    def _check_stochastic(name: str, matrix: np.ndarray, size: int) -> None:
        if matrix.shape != (size, size):
            raise ConfigError(name, f"expected a {size}x{size} matrix, got {matrix.shape}")
        if (matrix < 0).any():
            raise ConfigError(name, "entries must be nonnegative")
        sums = matrix.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9, rtol=0.0):
            raise ConfigError(name, f"rows must sum to 1 within 1e-9, got {sums}")


# -- INI loading -----------------------------------------------------------

# section -> {key: field name}; keys not listed here are rejected.
_SCHEMA = {
    "network": {
        "num_wsps": "num_wsps",
        "mts_per_wsp": "mts_per_wsp",
        "num_bands": "num_bands",
        "bandwidth_hz": "bandwidth_hz",
        "slot_seconds": "slot_seconds",
        "grid_side": "grid_side",
        "region_meters": "region_meters",
        "bs_positions": "bs_positions",
        "mobility_stay": "mobility_stay",
        "seed": "seed",
    },
    "traffic": {
        "packet_bits": "packet_bits",
        "packet_rate_bps": "packet_rate_bps",
        "queue_capacity": "queue_capacity",
        "task_bits": "task_bits",
        "task_chain": "task_chain",
    },
    "radio": {
        "max_tx_power_w": "max_tx_power_w",
        "noise_w": "noise_w",
        "path_ref_gain": "path_ref_gain",
        "path_exp": "path_exp",
        "fading_levels": "fading_levels",
        "fading_chain": "fading_chain",
    },
    "compute": {
        "cycles_per_bit": "cycles_per_bit",
        "cpu_hz": "cpu_hz",
        "kappa": "kappa",
    },
    "utility": {
        "mt_weight": "mt_weight",
        "utility_weights": "utility_weights",
        "utility_scales": "utility_scales",
        "r_max": "r_max",
    },
}

_INT_FIELDS = {
    "num_wsps", "mts_per_wsp", "num_bands", "queue_capacity",
    "grid_side", "r_max", "seed",
}
_MATRIX_FIELDS = {"task_chain", "fading_chain"}
_PAIR_LIST_FIELDS = {"bs_positions"}
_TUPLE_FIELDS = {"fading_levels", "utility_weights", "utility_scales"}


def _parse_matrix(text: str) -> tuple[tuple[float, ...], ...]:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return tuple(tuple(float(v) for v in row.split(",")) for row in rows)


def _parse_pairs(text: str) -> tuple[tuple[float, float], ...]:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    out = []
    for row in rows:
        parts = [float(v) for v in row.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected 'x,y' pair, got {row!r}")
        out.append((parts[0], parts[1]))
    return tuple(out)


def load_config(path: str) -> SimConfig:
    """Load a SimConfig from an INI file, rejecting unknown sections/keys.

    Values not present keep their defaults; the shipped configs/default.ini
    spells out the full parameter set.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError("path", f"cannot read config file {path!r}")

    overrides = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(section, "unknown section")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            name = _SCHEMA[section][key]
            try:
                if name in _INT_FIELDS:
                    overrides[name] = int(raw)
                elif name in _MATRIX_FIELDS:
                    overrides[name] = _parse_matrix(raw)
                elif name in _PAIR_LIST_FIELDS:
                    overrides[name] = _parse_pairs(raw)
                elif name in _TUPLE_FIELDS:
                    overrides[name] = tuple(float(v) for v in raw.split(","))
                else:
                    overrides[name] = float(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}: {exc}") from exc

    return SimConfig(**overrides).validate()


def format_matrix(matrix) -> str:
    return "; ".join(",".join(f"{v:g}" for v in row) for row in matrix)
