"""Feed-forward Q-network, experience replay and epsilon-greedy selection.

The network maps an encoded state to one Q-value per hardware
configuration. Hidden layers use ReLU; the output layer is linear.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from phasesched.core import STATE_FEATURES, State, encode_state, n_configs

AGENT_SCHEMA = "phasesched.agent/v1"


class NoActionError(ValueError):
    pass


@dataclass
class Network:
    weights: list[np.ndarray]  # weights[k] has shape (fan_in, fan_out)
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> Network:
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def __eq__(self, other):
        if not isinstance(other, Network) or self.layer_sizes != other.layer_sizes:
            return NotImplemented if not isinstance(other, Network) else False
        return all(np.array_equal(a, b) for a, b in zip(self.weights + self.biases,
                                                        other.weights + other.biases))

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])


def nn_init(layer_sizes: Sequence[int], seed: int) -> Network:
    """Glorot-uniform weights, zero biases; deterministic in ``seed``."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"need at least two positive layer sizes, got {list(layer_sizes)}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def _forward_all(net: Network, x: np.ndarray):
    acts = [x]
    pre = []
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if k == last else np.maximum(z, 0.0)
        acts.append(a)
    return pre, acts


def forward(net: Network, x) -> np.ndarray:
    """Q-values for one input vector, or for a batch of row vectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.weights[0].shape[0]:
        raise ValueError(f"input length {x.shape[-1]} != {net.weights[0].shape[0]}")
    return _forward_all(net, x)[1][-1]


def loss_and_grads(net: Network, x: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean squared error on the taken actions, with targets held fixed.

    Returns ``(loss, grad_weights, grad_biases)``.
    """
    n = x.shape[0]
    pre, acts = _forward_all(net, x)
    q = acts[-1]
    rows = np.arange(n)
    err = q[rows, actions] - targets
    loss = float(np.mean(err ** 2))
    delta = np.zeros_like(q)
    delta[rows, actions] = 2.0 * err / n
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for k in range(len(net.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0)
    return loss, gw, gb


@dataclass(frozen=True)
class AgentParams:
    learning_rate: float = 0.01
    discount: float = 0.9
    epsilon_initial: float = 1.0
    epsilon_decay: float = 0.995
    epsilon_floor: float = 0.05
    replay_capacity: int = 1000
    batch_size: int = 32
    hidden: tuple[int, ...] = (32,)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must lie in [0, 1)")
        for name in ("epsilon_initial", "epsilon_floor", "epsilon_decay"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.replay_capacity < 1 or self.batch_size < 1:
            raise ValueError("replay_capacity and batch_size must be positive")


@dataclass(frozen=True)
class ExperienceTriple:
    """(state, adopted action, reward), plus the successor state.

    ``next_state`` is None at the end of an episode; the target is then the
    bare reward.
    """

    state: State
    action: int
    reward: float
    next_state: State | None = None


def _batch_arrays(net: Network, batch: Sequence[ExperienceTriple], discount: float, n_cfg: int):
    x = np.stack([encode_state(t.state, n_cfg) for t in batch])
    actions = np.array([t.action for t in batch], dtype=int)
    targets = np.array([t.reward for t in batch], dtype=float)
    if discount > 0:
        nxt = [i for i, t in enumerate(batch) if t.next_state is not None]
        if nxt:
            xn = np.stack([encode_state(batch[i].next_state, n_cfg) for i in nxt])
            targets[nxt] += discount * forward(net, xn).max(axis=1)
    return x, actions, targets


def train_step(net: Network, batch: Sequence[ExperienceTriple], params: AgentParams,
               reward_scale: float = 1.0) -> float:
    """One gradient-descent step in place; returns the loss before the step.

    Rewards are divided by ``reward_scale`` before forming targets.
    """
    if not batch:
        raise ValueError("empty batch")
    n_cfg = net.weights[0].shape[0] - STATE_FEATURES
    if reward_scale != 1.0:
        batch = [ExperienceTriple(t.state, t.action, t.reward / reward_scale, t.next_state)
                 for t in batch]
    x, actions, targets = _batch_arrays(net, batch, params.discount, n_cfg)
    loss, gw, gb = loss_and_grads(net, x, actions, targets)
    lr = params.learning_rate
    for k in range(len(net.weights)):
        net.weights[k] -= lr * gw[k]
        net.biases[k] -= lr * gb[k]
    return loss


def epsilon_greedy(qvec, epsilon: float, available, rng: np.random.Generator) -> tuple[int, bool]:
    """Like :func:`select_action`, also reporting whether the pick was exploratory."""
    q = np.asarray(qvec, dtype=float)
    mask = np.ones(q.shape, dtype=bool) if available is None else np.asarray(available, dtype=bool)
    ids = np.flatnonzero(mask)
    if ids.size == 0:
        raise NoActionError("no available action")
    if epsilon > 0 and rng.random() < epsilon:
        return int(ids[rng.integers(ids.size)]), True
    return int(ids[np.argmax(q[ids])]), False


def select_action(qvec, epsilon: float, available, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice over the available actions; greedy ties go to the lowest id."""
    return epsilon_greedy(qvec, epsilon, available, rng)[0]


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self._items: deque[ExperienceTriple] = deque(maxlen=capacity)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]

    def __iter__(self):
        return iter(self._items)

    def sample(self, k: int, rng: np.random.Generator) -> list[ExperienceTriple]:
        idx = rng.choice(len(self._items), size=min(k, len(self._items)), replace=False)
        return [self._items[i] for i in idx]


def record_experience(buffer: ReplayBuffer, triple: ExperienceTriple) -> None:
    buffer._items.append(triple)


@dataclass(eq=False)
class Agent:
    """A Q-network together with its exploration and replay state.

    Rewards are normalized by the largest magnitude seen so far, so Q-values
    stay O(1) whatever the reward exponent.
    """

    n_big_max: int
    n_little_max: int
    params: AgentParams = field(default_factory=AgentParams)
    net: Network | None = None
    epsilon: float | None = None
    reward_scale: float = 0.0
    steps: int = 0

    def __post_init__(self):
        self.n_configs = n_configs(self.n_big_max, self.n_little_max)
        if self.net is None:
            sizes = [self.n_configs + STATE_FEATURES, *self.params.hidden, self.n_configs]
            self.net = nn_init(sizes, self.params.seed)
        if self.epsilon is None:
            self.epsilon = self.params.epsilon_initial
        self.rng = np.random.default_rng(self.params.seed)
        self.buffer = ReplayBuffer(self.params.replay_capacity)
        self.losses: list[float] = []

    def q_values(self, state: State) -> np.ndarray:
        return forward(self.net, encode_state(state, self.n_configs))

    def act(self, state: State, available=None, greedy: bool = False) -> tuple[int, bool]:
        eps = 0.0 if greedy else self.epsilon
        return epsilon_greedy(self.q_values(state), eps, available, self.rng)

    def decay_epsilon(self) -> None:
        p = self.params
        self.epsilon = max(p.epsilon_floor, self.epsilon * p.epsilon_decay)

    def observe(self, triple: ExperienceTriple) -> float | None:
        """Store one experience and train once the buffer holds a batch."""
        self.reward_scale = max(self.reward_scale, abs(triple.reward))
        record_experience(self.buffer, triple)
        self.steps += 1
        if len(self.buffer) < self.params.batch_size:
            return None
        batch = self.buffer.sample(self.params.batch_size, self.rng)
        loss = train_step(self.net, batch, self.params, self.reward_scale or 1.0)
        self.losses.append(loss)
        return loss

    def to_json(self) -> dict:
        return {
            "schema": AGENT_SCHEMA,
            "topology": {"B": self.n_big_max, "L": self.n_little_max},
            "layer_sizes": self.net.layer_sizes,
            "weights": [w.ravel(order="C").tolist() for w in self.net.weights],
            "biases": [b.tolist() for b in self.net.biases],
            "params": {**asdict(self.params), "hidden": list(self.params.hidden)},
            "epsilon": self.epsilon,
            "reward_scale": self.reward_scale,
            "steps": self.steps,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> Agent:
        if doc.get("schema") != AGENT_SCHEMA:
            raise ValueError(f"not an agent document (schema {doc.get('schema')!r})")
        sizes = doc["layer_sizes"]
        weights = [np.array(w, dtype=float).reshape(fi, fo)
                   for w, fi, fo in zip(doc["weights"], sizes[:-1], sizes[1:])]
        biases = [np.array(b, dtype=float) for b in doc["biases"]]
        return cls(doc["topology"]["B"], doc["topology"]["L"], AgentParams(**doc["params"]),
                   Network(weights, biases), epsilon=doc["epsilon"],
                   reward_scale=doc["reward_scale"], steps=doc.get("steps", 0))

    @classmethod
    def loads(cls, text: str) -> Agent:
        return cls.from_json(json.loads(text))
