"""RBF-DQN and RBF-DDPG agents built on :mod:`rbvf.rbvf`."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .envs import Env
from .nn import Mlp, MlpSpec, NonFiniteError, ParamStore, RMSProp, polyak_update
from .rbvf import RbvfModel


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    terminals: np.ndarray

    def __len__(self):
        return len(self.rewards)


class ReplayBuffer:
    """Fixed-capacity ring of transitions, sampled uniformly with replacement."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int, rng: np.random.Generator):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.rng = rng
        self.obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.terminals = np.zeros(self.capacity, dtype=bool)
        self.size = 0
        self.cursor = 0
        self.inserted = 0

    def __len__(self):
        return self.size

    def add(self, s, a, r, s_next, terminal: bool):
        i = self.cursor
        self.obs[i] = s
        self.actions[i] = a
        self.rewards[i] = r
        self.next_obs[i] = s_next
        self.terminals[i] = terminal
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.inserted += 1

    def sample_indices(self, k: int) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        return self.rng.integers(0, self.size, size=k)

    def sample(self, k: int) -> Batch:
        idx = self.sample_indices(k)
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx], self.terminals[idx])


@dataclass
class AgentConfig:
    n_centroids: int = 20
    beta: float = 1.0
    gamma: float = 0.99
    batch_size: int = 64
    target_rate: float = 0.005
    updates_per_episode: int = 200
    learning_rate: float = 3e-4
    rms_decay: float = 0.99
    rms_epsilon: float = 1e-8
    eps_start: float = 0.5
    eps_decay: float = 0.99
    eps_min: float = 0.05
    reward_clip: float = 20.0
    buffer_size: int = 500_000
    value_hidden: tuple = (128, 128)
    centroid_hidden: tuple = (128,)
    hidden_activation: str = "relu"
    actor_hidden: tuple = (128, 128)
    actor_learning_rate: float = 1e-4
    noise_scale: float = 0.1

    def validate(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.target_rate <= 1.0:
            raise ValueError(f"target_rate must lie in (0, 1], got {self.target_rate}")
        for name in ("eps_start", "eps_min"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if not 0.0 < self.eps_decay <= 1.0:
            raise ValueError(f"eps_decay must lie in (0, 1], got {self.eps_decay}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        for name in ("n_centroids", "batch_size", "buffer_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.updates_per_episode < 0:
            raise ValueError("updates_per_episode must be nonnegative")
        for name in ("learning_rate", "actor_learning_rate", "reward_clip"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        return self

    def epsilon(self, episode: int) -> float:
        return max(self.eps_min, self.eps_start * self.eps_decay ** episode)


def make_model(cfg: AgentConfig, env_spec) -> RbvfModel:
    return RbvfModel(
        env_spec.obs_dim, env_spec.action_dim, cfg.n_centroids, cfg.beta,
        env_spec.action_low, env_spec.action_high,
        value_hidden=cfg.value_hidden, centroid_hidden=cfg.centroid_hidden,
        hidden_activation=cfg.hidden_activation,
    )


def epsilon_greedy_action(model: RbvfModel, params: ParamStore, s, epsilon: float,
                          rng: np.random.Generator) -> np.ndarray:
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return rng.uniform(model.action_low, model.action_high)
    _, action, _ = model.max_over_centroids(params, np.asarray(s, dtype=np.float64)[None])
    return action[0]


def qlearning_targets(rewards, next_obs, terminals, model: RbvfModel, target_params: ParamStore,
                      gamma: float) -> np.ndarray:
    """r + gamma * max_i Q(s', a_i(s'; theta-); theta-), or r at terminal states."""
    rewards = np.asarray(rewards, dtype=np.float64)
    best, _, _ = model.max_over_centroids(target_params, next_obs)
    return rewards + gamma * np.where(terminals, 0.0, best)


def qlearning_target(r: float, s_next, terminal: bool, model: RbvfModel, target_params: ParamStore,
                     gamma: float) -> float:
    return float(qlearning_targets([r], np.asarray(s_next)[None], np.array([terminal]),
                                   model, target_params, gamma)[0])


def dqn_update(batch: Batch, model: RbvfModel, params: ParamStore, target_params: ParamStore,
               opt: RMSProp, gamma: float) -> float:
    """One RMSProp step on the mean squared TD error; returns the pre-step loss."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    y = qlearning_targets(batch.rewards, batch.next_obs, batch.terminals, model, target_params, gamma)
    q, cache = model.q_values(params, batch.obs, batch.actions)
    td = y - q
    loss = float(np.mean(td * td))
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite TD loss; update aborted")
    params.zero_grad()
    model.backward(params, cache, -2.0 * td / len(td))
    opt.step(params)
    return loss


@dataclass
class EpisodeLog:
    episode: int
    steps: int
    ret: float
    mean_loss: float
    epsilon: float
    wall_ms: float

    def row(self) -> dict:
        return {
            "episode": self.episode,
            "steps": self.steps,
            "return": self.ret,
            "mean_loss": self.mean_loss,
            "epsilon": self.epsilon,
            "wall_ms": self.wall_ms,
        }


TRAINING_LOG_COLUMNS = ["episode", "steps", "return", "mean_loss", "epsilon", "wall_ms"]


@dataclass
class TrainResult:
    log: list[EpisodeLog]
    model: RbvfModel
    params: ParamStore
    target_params: ParamStore
    config: AgentConfig
    actor: "Actor | None" = None
    actor_params: ParamStore | None = None
    extra: dict = field(default_factory=dict)


def _rngs(seed: int):
    init, explore, replay, env = np.random.SeedSequence(seed).spawn(4)
    return (np.random.default_rng(init), np.random.default_rng(explore),
            np.random.default_rng(replay), np.random.default_rng(env))


def _store(buffer: ReplayBuffer, cfg: AgentConfig, s, a, step):
    r = float(np.clip(step.reward, -cfg.reward_clip, cfg.reward_clip))
    # step-cap truncation still bootstraps; only true termination does not
    buffer.add(s, a, r, step.next_obs, step.terminal)


def run_rbf_dqn(cfg: AgentConfig, env: Env, episodes: int, seed: int = 0, callback=None) -> TrainResult:
    cfg.validate()
    init_rng, explore_rng, replay_rng, env_rng = _rngs(seed)
    model = make_model(cfg, env.spec)
    params = model.init_params(init_rng)
    target_params = params.copy()
    opt = RMSProp(cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon)
    buffer = ReplayBuffer(cfg.buffer_size, env.spec.obs_dim, env.spec.action_dim, replay_rng)
    log = []
    for episode in range(episodes):
        t0 = time.perf_counter()
        eps = cfg.epsilon(episode)
        s = env.reset(int(env_rng.integers(2**31)))
        ret, steps, done = 0.0, 0, False
        while not done:
            a = epsilon_greedy_action(model, params, s, eps, explore_rng)
            step = env.step(a)
            _store(buffer, cfg, s, a, step)
            ret += step.reward
            steps += 1
            s, done = step.next_obs, step.done
        losses = []
        for _ in range(cfg.updates_per_episode):
            losses.append(dqn_update(buffer.sample(cfg.batch_size), model, params, target_params, opt, cfg.gamma))
            polyak_update(target_params, params, cfg.target_rate)
        entry = EpisodeLog(episode, steps, ret, float(np.mean(losses)) if losses else float("nan"), eps,
                           1000.0 * (time.perf_counter() - t0))
        log.append(entry)
        if callback is not None:
            callback(entry)
    return TrainResult(log, model, params, target_params, cfg)


class Actor:
    """Deterministic policy: tanh network rescaled onto the action box."""

    def __init__(self, obs_dim: int, action_dim: int, low, high, hidden=(128, 128), activation="relu"):
        self.net = Mlp(MlpSpec(obs_dim, tuple(hidden), action_dim, activation, "tanh"), "actor")
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.mid = 0.5 * (self.low + self.high)
        self.half = 0.5 * (self.high - self.low)

    def init_params(self, rng) -> ParamStore:
        params = ParamStore()
        self.net.init_params(params, rng)
        return params

    def forward(self, params: ParamStore, obs):
        t, cache = self.net.forward(params, np.atleast_2d(obs))
        return self.mid + self.half * t, cache

    def backward(self, params: ParamStore, cache, grad_actions):
        return self.net.backward(params, cache, grad_actions * self.half)


def qlearning_delta(batch: Batch, critic: RbvfModel, critic_params: ParamStore,
                    bootstrap_params: ParamStore, gamma: float) -> np.ndarray:
    """r + gamma * max_i Q(s', a_i(s')) - Q(s, a)."""
    y = qlearning_targets(batch.rewards, batch.next_obs, batch.terminals, critic, bootstrap_params, gamma)
    q, _ = critic.q_values(critic_params, batch.obs, batch.actions)
    return y - q


def sarsa_targets(batch: Batch, critic: RbvfModel, bootstrap_params: ParamStore, actor: Actor,
                  actor_params: ParamStore, gamma: float) -> np.ndarray:
    a_next, _ = actor.forward(actor_params, batch.next_obs)
    q_next, _ = critic.q_values(bootstrap_params, batch.next_obs, a_next)
    return batch.rewards + gamma * np.where(batch.terminals, 0.0, q_next)


def sarsa_delta(batch: Batch, critic: RbvfModel, critic_params: ParamStore, bootstrap_params: ParamStore,
                actor: Actor, actor_params: ParamStore, gamma: float) -> np.ndarray:
    """r + gamma * Q(s', pi(s')) - Q(s, a)."""
    y = sarsa_targets(batch, critic, bootstrap_params, actor, actor_params, gamma)
    q, _ = critic.q_values(critic_params, batch.obs, batch.actions)
    return y - q


def actor_objective_backward(batch_obs, critic: RbvfModel, critic_params: ParamStore, actor: Actor,
                             actor_params: ParamStore) -> float:
    """Accumulate d(-mean Q(s, pi(s)))/d(actor params); critic grads are left untouched."""
    a, acache = actor.forward(actor_params, batch_obs)
    q, ccache = critic.q_values(critic_params, batch_obs, a)
    saved = {k: g.copy() for k, g in critic_params.grads.items()}
    g_act = critic.backward(critic_params, ccache, -np.ones(len(q)) / len(q))
    for k, g in saved.items():
        critic_params.grads[k][...] = g
    actor.backward(actor_params, acache, g_act)
    return float(-q.mean())


def ddpg_update(batch: Batch, critic: RbvfModel, critic_params: ParamStore, critic_target: ParamStore,
                actor: Actor, actor_params: ParamStore, actor_target: ParamStore,
                critic_opt: RMSProp, actor_opt: RMSProp, gamma: float, critic_delta: str) -> float:
    if critic_delta == "qlearning":
        y = qlearning_targets(batch.rewards, batch.next_obs, batch.terminals, critic, critic_target, gamma)
    elif critic_delta == "sarsa":
        y = sarsa_targets(batch, critic, critic_target, actor, actor_target, gamma)
    else:
        raise ValueError(f"critic_delta must be 'qlearning' or 'sarsa', got {critic_delta!r}")
    q, cache = critic.q_values(critic_params, batch.obs, batch.actions)
    td = y - q
    loss = float(np.mean(td * td))
    if not np.isfinite(loss):
        raise NonFiniteError("non-finite critic loss; update aborted")
    critic_params.zero_grad()
    critic.backward(critic_params, cache, -2.0 * td / len(td))
    critic_opt.step(critic_params)
    actor_params.zero_grad()
    actor_objective_backward(batch.obs, critic, critic_params, actor, actor_params)
    critic_params.zero_grad()
    actor_opt.step(actor_params)
    return loss


def run_rbf_ddpg(cfg: AgentConfig, env: Env, episodes: int, seed: int = 0,
                 critic_delta: str = "qlearning", callback=None) -> TrainResult:
    cfg.validate()
    if critic_delta not in ("qlearning", "sarsa"):
        raise ValueError(f"critic_delta must be 'qlearning' or 'sarsa', got {critic_delta!r}")
    init_rng, explore_rng, replay_rng, env_rng = _rngs(seed)
    critic = make_model(cfg, env.spec)
    critic_params = critic.init_params(init_rng)
    critic_target = critic_params.copy()
    actor = Actor(env.spec.obs_dim, env.spec.action_dim, env.spec.action_low, env.spec.action_high,
                  cfg.actor_hidden, cfg.hidden_activation)
    actor_params = actor.init_params(init_rng)
    actor_target = actor_params.copy()
    critic_opt = RMSProp(cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon)
    actor_opt = RMSProp(cfg.actor_learning_rate, cfg.rms_decay, cfg.rms_epsilon)
    buffer = ReplayBuffer(cfg.buffer_size, env.spec.obs_dim, env.spec.action_dim, replay_rng)
    sigma = cfg.noise_scale * actor.half
    log = []
    for episode in range(episodes):
        t0 = time.perf_counter()
        s = env.reset(int(env_rng.integers(2**31)))
        ret, steps, done = 0.0, 0, False
        while not done:
            a, _ = actor.forward(actor_params, s)
            a = np.clip(a[0] + explore_rng.normal(0.0, sigma), actor.low, actor.high)
            step = env.step(a)
            _store(buffer, cfg, s, a, step)
            ret += step.reward
            steps += 1
            s, done = step.next_obs, step.done
        losses = []
        for _ in range(cfg.updates_per_episode):
            losses.append(ddpg_update(buffer.sample(cfg.batch_size), critic, critic_params, critic_target,
                                      actor, actor_params, actor_target, critic_opt, actor_opt,
                                      cfg.gamma, critic_delta))
            polyak_update(critic_target, critic_params, cfg.target_rate)
            polyak_update(actor_target, actor_params, cfg.target_rate)
        entry = EpisodeLog(episode, steps, ret, float(np.mean(losses)) if losses else float("nan"),
                           cfg.noise_scale, 1000.0 * (time.perf_counter() - t0))
        log.append(entry)
        if callback is not None:
            callback(entry)
    return TrainResult(log, critic, critic_params, critic_target, cfg, actor, actor_params,
                       {"actor_target": actor_target, "critic_delta": critic_delta})


def greedy_rollout(model: RbvfModel, params: ParamStore, env: Env, seed: int) -> float:
    """Return of one episode acting greedily w.r.t. the best centroid."""
    s = env.reset(seed)
    ret, done = 0.0, False
    while not done:
        _, a, _ = model.max_over_centroids(params, s[None])
        step = env.step(a[0])
        ret += step.reward
        s, done = step.next_obs, step.done
    return ret


def config_dict(cfg: AgentConfig) -> dict:
    return asdict(cfg)
