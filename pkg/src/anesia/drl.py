"""Actor-critic (DDPG) learning of the dynamic threshold utility, in plain numpy."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .protocol import AgentState

N_FEATURES = 9
CHECKPOINT_VERSION = 1

_ACTIVATIONS = {"tanh", "relu", "sigmoid", "linear"}


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


class Mlp:
    """Fully connected network; ``activations[k]`` applies after layer ``k``."""

    def __init__(self, sizes: Sequence[int], activations: Sequence[str], rng: np.random.Generator | None = None, zero: bool = False):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        if not set(activations) <= _ACTIVATIONS:
            raise ValueError(f"unknown activation in {activations}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                limit = math.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        k = 0
        for p in self.params:
            p[...] = flat[k : k + p.size].reshape(p.shape)
            k += p.size
        if k != len(flat):
            raise ValueError("flat parameter vector has the wrong length")

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        a = np.atleast_2d(np.asarray(x, dtype=float))
        cache = []
        for w, b, name in zip(self.weights, self.biases, self.activations):
            z = a @ w + b
            out = _act(name, z)
            cache.append((a, z, out))
            a = out
        return a, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients of sum(grad_out * output) w.r.t. params (in ``params`` order) and input."""
        grads: list[np.ndarray] = []
        g = grad_out
        for (a_in, z, out), w, name in reversed(list(zip(cache, self.weights, self.activations))):
            g = g * _act_grad(name, z, out)
            grads = [a_in.T @ g, g.sum(axis=0)] + grads
            g = g @ w.T
        return grads, g

    def to_dict(self) -> dict:
        return {"sizes": self.sizes, "activations": self.activations, "params": self.flat().tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> Mlp:
        net = cls(data["sizes"], data["activations"], zero=True)
        net.set_flat(np.asarray(data["params"]))
        return net


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8, clip: float = 5.0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.clip = clip
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads))
        if not math.isfinite(norm):
            return
        scale = min(1.0, self.clip / norm) if norm > 0 else 1.0
        self.t += 1
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            g = g * scale
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            m_hat = m / (1 - self.b1**self.t)
            v_hat = v / (1 - self.b2**self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


# -- rewards and features ----------------------------------------------------


@dataclass(frozen=True)
class Agreed:
    utility: float


@dataclass(frozen=True)
class Received:
    utility: float


@dataclass(frozen=True)
class Otherwise:
    pass


def compute_reward(event: Agreed | Received | Otherwise, t: float, d: float) -> float:
    if isinstance(event, (Agreed, Received)):
        return float(event.utility) * d**t
    return -1.0


def featurize(state: AgentState) -> np.ndarray:
    omega = max(state.omega_size, 1)
    raw = np.array(
        [
            state.o_best,
            state.o_avg,
            state.o_sd,
            state.b_count / omega,
            state.discount,
            state.reservation,
            math.log10(omega) / 6.0,
            state.n_issues / 10.0,
            state.t,
        ],
        dtype=float,
    )
    return np.clip(raw, 0.0, 1.0)


@dataclass(frozen=True)
class Experience:
    state: np.ndarray
    action: float
    reward: float
    next_state: np.ndarray
    terminal: bool

    def __post_init__(self):
        if not -1.0 <= self.reward <= 1.0:
            raise ValueError(f"reward {self.reward} outside [-1, 1]")


class ReplayBuffer:
    def __init__(self, capacity: int, n_features: int = N_FEATURES):
        self.capacity = capacity
        self.states = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, n_features))
        self.terminals = np.zeros(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, exp: Experience) -> None:
        i = self.pos
        self.states[i] = exp.state
        self.actions[i] = exp.action
        self.rewards[i] = exp.reward
        self.next_states[i] = exp.next_state
        self.terminals[i] = float(exp.terminal)
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, k: int, rng: np.random.Generator):
        if self.size < k:
            raise ValueError(f"replay holds {self.size} experiences, need {k}")
        idx = rng.integers(0, self.size, size=k)
        return (
            self.states[idx],
            self.actions[idx, None],
            self.rewards[idx, None],
            self.next_states[idx],
            self.terminals[idx, None],
        )


# -- the agent's learner -------------------------------------------------------


@dataclass
class DdpgConfig:
    n_features: int = N_FEATURES
    hidden: tuple[int, ...] = (64, 64)
    gamma: float = 0.99
    tau: float = 0.005
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    capacity: int = 50_000
    batch: int = 64
    noise: float = 0.1
    activation: str = "tanh"

    def __post_init__(self):
        if not self.batch < self.capacity:
            raise ValueError("batch size must be smaller than replay capacity")


class DdpgModel:
    """Actor maps agent features to a threshold in [0, 1]; critic scores (features, threshold)."""

    def __init__(self, config: DdpgConfig | None = None, seed: int = 0, zero_actor: bool = False):
        self.config = cfg = config or DdpgConfig()
        self.rng = np.random.default_rng(seed)
        hidden = list(cfg.hidden)
        acts = [cfg.activation] * len(hidden)
        self.actor = Mlp([cfg.n_features, *hidden, 1], acts + ["sigmoid"], self.rng, zero=zero_actor)
        self.critic = Mlp([cfg.n_features + 1, *hidden, 1], acts + ["linear"], self.rng)
        self.target_actor = copy.deepcopy(self.actor)
        self.target_critic = copy.deepcopy(self.critic)
        self.actor_opt = Adam(self.actor.params, cfg.actor_lr)
        self.critic_opt = Adam(self.critic.params, cfg.critic_lr)
        self.replay = ReplayBuffer(cfg.capacity, cfg.n_features)

    def _features(self, state) -> np.ndarray:
        x = featurize(state) if isinstance(state, AgentState) else np.asarray(state, dtype=float)
        if not np.all(np.isfinite(x)):
            raise ValueError(f"non-finite state features {x}")
        return x

    def threshold(self, state) -> float:
        return float(self.actor(self._features(state))[0, 0])

    def explore(self, state, rng: np.random.Generator | None = None) -> float:
        rng = rng or self.rng
        a = self.threshold(state) + rng.normal(0.0, self.config.noise)
        return float(np.clip(a, 0.0, 1.0))

    def remember(self, exp: Experience) -> None:
        self.replay.add(exp)

    def critic_grads(self, s, a, y):
        """Loss 0.5·mean((Q(s,a) - y)^2) and its gradients w.r.t. critic params."""
        q, cache = self.critic.forward(np.hstack([s, a]))
        err = q - y
        loss = 0.5 * float((err**2).mean())
        grads, _ = self.critic.backward(cache, err / len(s))
        return loss, grads

    def actor_grads(self, s):
        """Objective mean Q(s, actor(s)) and the gradients of its negation w.r.t. actor params."""
        a, a_cache = self.actor.forward(s)
        q, q_cache = self.critic.forward(np.hstack([s, a]))
        _, dq_dx = self.critic.backward(q_cache, np.full_like(q, 1.0 / len(s)))
        dq_da = dq_dx[:, -1:]
        grads, _ = self.actor.backward(a_cache, -dq_da)
        return float(q.mean()), grads

    def train_step(self, seed: int | None = None) -> dict:
        cfg = self.config
        if len(self.replay) < cfg.batch:
            return {"trained": False, "critic_loss": math.nan, "actor_objective": math.nan}
        rng = np.random.default_rng(seed) if seed is not None else self.rng
        s, a, r, s2, done = self.replay.sample(cfg.batch, rng)
        a2 = self.target_actor(s2)
        q2 = self.target_critic(np.hstack([s2, a2]))
        y = r + cfg.gamma * (1.0 - done) * q2
        critic_loss, cgrads = self.critic_grads(s, a, y)
        self.critic_opt.step(cgrads)
        objective, agrads = self.actor_grads(s)
        self.actor_opt.step(agrads)
        self.soft_update()
        return {"trained": True, "critic_loss": critic_loss, "actor_objective": objective}

    def soft_update(self, tau: float | None = None) -> None:
        tau = self.config.tau if tau is None else tau
        for net, target in ((self.actor, self.target_actor), (self.critic, self.target_critic)):
            for p, tp in zip(net.params, target.params):
                tp *= 1.0 - tau
                tp += tau * p

    def parameters_finite(self) -> bool:
        nets = (self.actor, self.critic, self.target_actor, self.target_critic)
        return all(np.all(np.isfinite(net.flat())) for net in nets)

    # -- persistence --

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "version": CHECKPOINT_VERSION,
            "config": {**cfg.__dict__, "hidden": list(cfg.hidden)},
            "actor": self.actor.to_dict(),
            "critic": self.critic.to_dict(),
            "target_actor": self.target_actor.to_dict(),
            "target_critic": self.target_critic.to_dict(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> DdpgModel:
        if data.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {data.get('version')}")
        cfg = dict(data["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        model = cls(DdpgConfig(**cfg))
        for name in ("actor", "critic", "target_actor", "target_critic"):
            getattr(model, name).set_flat(np.asarray(data[name]["params"]))
        return model

    @classmethod
    def load(cls, path: str | Path) -> DdpgModel:
        return cls.from_dict(json.loads(Path(path).read_text()))


def threshold(model: DdpgModel, state) -> float:
    return model.threshold(state)


def train_step(model: DdpgModel, seed: int | None = None) -> dict:
    return model.train_step(seed)


def pretrain_supervised(
    model: DdpgModel,
    dataset: Sequence[tuple[Sequence[float], float]],
    epochs: int,
    batch_size: int = 64,
    seed: int = 0,
    lr: float | None = None,
) -> list[float]:
    """Regress the actor onto target thresholds; returns full-data MSE before and after each epoch.

    The target actor is synced to the trained actor at the end.
    """
    if not dataset:
        raise ValueError("pretraining needs a nonempty dataset")
    x = np.array([np.asarray(s, dtype=float) for s, _ in dataset])
    y = np.array([[float(t)] for _, t in dataset])
    rng = np.random.default_rng(seed)
    opt = Adam(model.actor.params, lr or model.config.actor_lr)

    def mse() -> float:
        return float(((model.actor(x) - y) ** 2).mean())

    curve = [mse()]
    for _ in range(epochs):
        order = rng.permutation(len(x))
        for start in range(0, len(x), batch_size):
            idx = order[start : start + batch_size]
            out, cache = model.actor.forward(x[idx])
            grads, _ = model.actor.backward(cache, 2.0 * (out - y[idx]) / len(idx))
            opt.step(grads)
        curve.append(mse())
    if epochs:
        model.target_actor.set_flat(model.actor.flat())
    return curve
