"""Distributed learning stack.

One small deep Q-network per mobile terminal (written directly on numpy, with
hand-derived backpropagation), a tabular discounted-payment value per operator
over discretized payment classes, bid derivation from the network, and the
linear value decomposition tying the two together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import phy
from .config import TASK_STATES, SimConfig
from .env import MtLocalState


# -- state encoding --------------------------------------------------------


def input_dim(config: SimConfig) -> int:
    return config.num_cells + len(config.fading_levels) + 1 + TASK_STATES


def encode_state(s: MtLocalState, config: SimConfig) -> np.ndarray:
    """[one-hot cell | one-hot fading | queue/capacity | one-hot task arrivals]."""
    x = np.zeros(input_dim(config))
    x[s.cell] = 1.0
    off = config.num_cells
    x[off + s.fading_state] = 1.0
    off += len(config.fading_levels)
    x[off] = s.queue_len / config.queue_capacity
    x[off + 1 + s.task_arrivals] = 1.0
    return x


# -- Q-network -------------------------------------------------------------


class QNetwork:
    """Feedforward approximator, layout in->16->16->|A|, ReLU hidden, linear out."""

    HIDDEN = 16

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.shapes = [in_dim, self.HIDDEN, self.HIDDEN, out_dim]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.shapes[:-1], self.shapes[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for a single state (1-d input) or a batch (2-d input)."""
        if x.shape[-1] != self.shapes[0]:
            raise ValueError(
                f"input dimension {x.shape[-1]} != expected {self.shapes[0]}"
            )
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def copy_from(self, other: "QNetwork") -> None:
        for i in range(len(self.weights)):
            self.weights[i] = other.weights[i].copy()
            self.biases[i] = other.biases[i].copy()

    def clone(self) -> "QNetwork":
        out = QNetwork(self.shapes[0], self.shapes[-1])
        out.copy_from(self)
        return out

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def loss_and_gradients(
    net: QNetwork, xs: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """MSE between Q(s, a) and the targets, plus its parameter gradients.

    Returns (loss, grads) with grads ordered like net.parameters().
    """
    batch = xs.shape[0]
    pre = []
    acts = [xs]
    h = xs
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    q = h @ net.weights[-1] + net.biases[-1]

    idx = np.arange(batch)
    err = q[idx, actions] - targets
    loss = float(np.mean(err**2))

    dq = np.zeros_like(q)
    dq[idx, actions] = 2.0 * err / batch

    grads_w: list[np.ndarray] = [None] * len(net.weights)
    grads_b: list[np.ndarray] = [None] * len(net.biases)
    delta = dq
    for layer in reversed(range(len(net.weights))):
        grads_w[layer] = acts[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.weights[layer].T) * (pre[layer - 1] > 0.0)

    grads = []
    for gw, gb in zip(grads_w, grads_b):
        grads.append(gw)
        grads.append(gb)
    return loss, grads


def td_targets(
    target_net: QNetwork,
    rewards: np.ndarray,
    next_xs: np.ndarray,
    next_masks: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """y = u + gamma * max over next-feasible actions of the target network."""
    q_next = target_net.forward(next_xs)
    q_next = np.where(next_masks, q_next, -np.inf)
    return rewards + gamma * q_next.max(axis=1)


def train_step(
    net: QNetwork,
    target_net: QNetwork,
    batch: "TransitionBatch",
    gamma: float,
    learning_rate: float,
) -> float:
    """One SGD step on the TD squared error; returns the pre-step loss."""
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    ys = td_targets(target_net, batch.rewards, batch.next_xs, batch.next_masks, gamma)
    loss, grads = loss_and_gradients(net, batch.xs, batch.actions, ys)
    for p, g in zip(net.parameters(), grads):
        p -= learning_rate * g
    return loss


# -- replay buffer ---------------------------------------------------------


@dataclass(frozen=True)
class TransitionBatch:
    xs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_xs: np.ndarray
    next_masks: np.ndarray


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions with uniform sampling."""

    def __init__(self, capacity: int, in_dim: int, num_actions: int):
        self.capacity = capacity
        self.xs = np.zeros((capacity, in_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_xs = np.zeros((capacity, in_dim))
        self.next_masks = np.zeros((capacity, num_actions), dtype=bool)
        self.size = 0
        self.head = 0

    def __len__(self) -> int:
        return self.size

    def push(self, x, action, reward, next_x, next_mask) -> None:
        i = self.head
        self.xs[i] = x
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_xs[i] = next_x
        self.next_masks[i] = next_mask
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} < batch {batch_size}")
        idx = rng.integers(self.size, size=batch_size)
        return TransitionBatch(
            xs=self.xs[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            next_xs=self.next_xs[idx],
            next_masks=self.next_masks[idx],
        )


# -- action selection and bidding -----------------------------------------


def select_action(
    q_values: np.ndarray,
    feasible: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
) -> int:
    """Epsilon-greedy over the feasible actions; greedy ties go to the lowest index."""
    options = np.flatnonzero(feasible)
    if options.size == 0:
        raise ValueError("no feasible action to select")
    if epsilon > 0 and rng.random() < epsilon:
        return int(options[rng.integers(options.size)])
    masked = np.where(feasible, q_values, -np.inf)
    return int(np.argmax(masked))


def compute_bid(q_values: np.ndarray, granted_mask: np.ndarray) -> float:
    """Marginal value of holding a band: best granted Q minus the idle Q, floored at 0."""
    best = np.where(granted_mask, q_values, -np.inf).max()
    return max(0.0, float(best - q_values[phy.IDLE_INDEX]))


# -- payment abstraction ---------------------------------------------------


@dataclass
class AbstractionTable:
    """Discounted-payment value per payment class over fixed interval bounds."""

    bounds: np.ndarray  # C+1 increasing thresholds
    values: np.ndarray  # C reals
    alpha: float = 0.1

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.bounds.ndim != 1 or self.bounds.size != self.values.size + 1:
            raise ValueError("need C+1 bounds for C values")
        if not (np.diff(self.bounds) > 0).all():
            raise ValueError("class bounds must be strictly increasing")

    @property
    def num_classes(self) -> int:
        return self.values.size

    @staticmethod
    def uniform(cap: float, num_classes: int = 10, alpha: float = 0.1) -> "AbstractionTable":
        bounds = np.linspace(0.0, max(cap, 1e-9), num_classes + 1)
        return AbstractionTable(bounds=bounds, values=np.zeros(num_classes), alpha=alpha)


def classify_payment(p: float, table: AbstractionTable) -> int:
    """Index of the half-open interval [b_c, b_{c+1}) holding p; saturates at C-1."""
    if p < 0:
        raise ValueError(f"payment must be nonnegative, got {p}")
    c = int(np.searchsorted(table.bounds, p, side="right")) - 1
    return min(max(c, 0), table.num_classes - 1)


def update_abstraction_value(
    table: AbstractionTable, c: int, payment: float, c_next: int, gamma: float
) -> AbstractionTable:
    """One temporal-difference step on the discounted payment stream."""
    a = table.alpha
    table.values[c] = (1 - a) * table.values[c] + a * (payment + gamma * table.values[c_next])
    return table


def decomposed_value(per_mt_values, wsp_payment_value: float) -> float:
    """Operator value: sum of terminal long-term utilities minus the payment value."""
    return float(np.sum(per_mt_values)) - wsp_payment_value


# -- agents ----------------------------------------------------------------


@dataclass(frozen=True)
class LearningParams:
    gamma: float = 0.9
    learning_rate: float = 0.01
    replay_capacity: int = 10_000
    batch_size: int = 32
    target_sync_period: int = 200
    train_steps_per_slot: int = 1
    eps_start: float = 1.0
    eps_end: float = 0.05
    anneal_slots: int = 10_000
    abstraction_classes: int = 10
    abstraction_alpha: float = 0.1
    # slots of payment observation before the class bounds are frozen
    abstraction_warmup: int = 1_000


class MtAgent:
    """One terminal's learner: network, target network, replay, exploration."""

    def __init__(self, config: SimConfig, params: LearningParams, rng: np.random.Generator):
        self.config = config
        self.params = params
        self.rng = rng
        dim = input_dim(config)
        self.net = QNetwork(dim, config.num_actions, rng)
        self.target_net = self.net.clone()
        self.buffer = ReplayBuffer(params.replay_capacity, dim, config.num_actions)
        self.slot = 0
        self.pending: tuple[np.ndarray, int, float] | None = None
        self.last_loss: float | None = None
        # cached per-slot quantities set by observe()
        self._x: np.ndarray | None = None
        self._q: np.ndarray | None = None
        self._granted_mask: np.ndarray | None = None

    def epsilon(self) -> float:
        p = self.params
        frac = min(self.slot / p.anneal_slots, 1.0) if p.anneal_slots > 0 else 1.0
        return p.eps_start + (p.eps_end - p.eps_start) * frac

    def observe(self, s: MtLocalState, gain: float) -> None:
        """Encode the current local state and cache Q-values and feasibility."""
        self._x = encode_state(s, self.config)
        self._q = self.net.forward(self._x)
        self._granted_mask = phy.feasible_mask(
            s.queue_len, s.task_arrivals, True, gain, self.config
        )

    def bid(self) -> float:
        """Band valuation; explores with a random positive bid while annealing."""
        eps = self.epsilon()
        if eps > 0 and self.rng.random() < eps:
            return float(self.rng.uniform(0.0, 1.0))
        return compute_bid(self._q, self._granted_mask)

    def feasible(self, granted: bool) -> np.ndarray:
        if granted:
            return self._granted_mask
        mask = np.zeros(self.config.num_actions, dtype=bool)
        mask[phy.IDLE_INDEX] = True
        return mask

    def slot_update(self, granted: bool) -> None:
        """Complete last slot's transition now that this slot's grant is known,
        then train, sync the target network, and advance the epsilon schedule."""
        mask = self.feasible(granted)
        if self.pending is not None:
            x, a, u = self.pending
            self.buffer.push(x, a, u, self._x, mask)
            self.pending = None
        self.last_loss = None
        if len(self.buffer) >= self.params.batch_size:
            for _ in range(self.params.train_steps_per_slot):
                batch = self.buffer.sample(self.params.batch_size, self.rng)
                loss = train_step(
                    self.net, self.target_net, batch,
                    self.params.gamma, self.params.learning_rate,
                )
                if self.last_loss is None:
                    self.last_loss = loss
        self.slot += 1
        if self.slot % self.params.target_sync_period == 0:
            self.target_net.copy_from(self.net)

    def act(self, granted: bool) -> int:
        a = select_action(self._q, self.feasible(granted), self.epsilon(), self.rng)
        self._last_action = a
        return a

    def record_reward(self, reward: float) -> None:
        self.pending = (self._x, self._last_action, reward)

    def state_value(self) -> float:
        """Long-term utility estimate U(s) = max feasible Q under a grant."""
        return float(np.where(self._granted_mask, self._q, -np.inf).max())


class WspAgent:
    """Operator-side learner: payment classification and its tabular value."""

    def __init__(self, config: SimConfig, params: LearningParams):
        self.config = config
        self.params = params
        self.table = AbstractionTable.uniform(
            cap=1.0, num_classes=params.abstraction_classes, alpha=params.abstraction_alpha
        )
        self._warmup_payments: list[float] = []
        self.frozen = False
        self.prev: tuple[int, float] | None = None  # (class, payment) of last slot
        self.current_class = 0

    def observe_payment(self, payment: float, gamma: float) -> None:
        if not self.frozen:
            self._warmup_payments.append(payment)
            cap = max(max(self._warmup_payments), 1e-9)
            self.table.bounds = np.linspace(0.0, cap, self.table.num_classes + 1)
            if len(self._warmup_payments) >= self.params.abstraction_warmup:
                # freeze bounds at the 99th-percentile payment seen during warmup
                cap = max(float(np.percentile(self._warmup_payments, 99.0)), 1e-9)
                self.table.bounds = np.linspace(0.0, cap, self.table.num_classes + 1)
                self.frozen = True
        c = classify_payment(payment, self.table)
        if self.prev is not None:
            prev_c, prev_p = self.prev
            update_abstraction_value(self.table, prev_c, prev_p, c, gamma)
        self.prev = (c, payment)
        self.current_class = c

    def payment_value(self) -> float:
        """Current long-term payment estimate U_j(c_j)."""
        return float(self.table.values[self.current_class])
