"""Small continuous-control environments with an episodic reset/step API."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int

    def __post_init__(self):
        if not np.all(np.asarray(self.action_low) < np.asarray(self.action_high)):
            raise ValueError("action_low must be strictly below action_high")


@dataclass
class StepResult:
    next_obs: np.ndarray
    reward: float
    done: bool
    terminal: bool = False  # true termination; ``done`` also covers the step cap


class EpisodeFinished(RuntimeError):
    pass


def angle_normalize(x: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    y = float(np.mod(x + np.pi, 2.0 * np.pi) - np.pi)
    return np.pi if y == -np.pi else y


class Env:
    spec: EnvSpec

    def __init__(self):
        self.steps = 0
        self.done = True
        self.rng = np.random.default_rng()

    def clip_action(self, action) -> np.ndarray:
        a = np.asarray(action, dtype=np.float64).reshape(self.spec.action_dim)
        return np.clip(a, self.spec.action_low, self.spec.action_high)

    def reset(self, seed: int | None = None) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.steps = 0
        self.done = False
        self._reset_state()
        return self.observe()

    def step(self, action) -> StepResult:
        if self.done:
            raise EpisodeFinished("step() called on a finished episode; call reset()")
        reward, terminal = self._advance(self.clip_action(action))
        self.steps += 1
        self.done = terminal or self.steps >= self.spec.max_episode_steps
        return StepResult(self.observe(), float(reward), self.done, terminal)

    def _reset_state(self):
        raise NotImplementedError

    def _advance(self, action: np.ndarray) -> tuple[float, bool]:
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError


class Pendulum(Env):
    """Torque-limited pendulum swing-up; angle 0 is upright.

    Constants and reward follow the common reference swing-up benchmark.
    """

    max_speed = 8.0
    max_torque = 2.0
    dt = 0.05
    g = 10.0
    m = 1.0
    l = 1.0

    spec = EnvSpec(3, 1, np.array([-2.0]), np.array([2.0]), 200)

    def __init__(self):
        super().__init__()
        self.theta = 0.0
        self.theta_dot = 0.0

    def _reset_state(self):
        self.theta = float(self.rng.uniform(-np.pi, np.pi))
        self.theta_dot = float(self.rng.uniform(-1.0, 1.0))

    def set_state(self, theta: float, theta_dot: float):
        self.theta, self.theta_dot = float(theta), float(theta_dot)
        self.done = False
        self.steps = 0

    def _advance(self, action):
        u = float(action[0])
        th, thdot = self.theta, self.theta_dot
        cost = angle_normalize(th) ** 2 + 0.1 * thdot ** 2 + 0.001 * u ** 2
        thdot = thdot + (3.0 * self.g / (2.0 * self.l) * np.sin(th) + 3.0 / (self.m * self.l ** 2) * u) * self.dt
        thdot = float(np.clip(thdot, -self.max_speed, self.max_speed))
        self.theta = th + thdot * self.dt
        self.theta_dot = thdot
        return -cost, False

    def observe(self):
        return np.array([np.cos(self.theta), np.sin(self.theta), self.theta_dot])

    def energy(self) -> float:
        """Kinetic plus potential energy of the uniform rod (zero at the pivot height)."""
        inertia = self.m * self.l ** 2 / 3.0
        return 0.5 * inertia * self.theta_dot ** 2 + 0.5 * self.m * self.g * self.l * np.cos(self.theta)


class PointMass2D(Env):
    """Point mass on [-1, 1]^2 driven by an acceleration; the goal is the origin."""

    dt = 0.1
    goal = np.zeros(2)
    goal_radius = 0.05

    spec = EnvSpec(4, 2, np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 100)

    def __init__(self):
        super().__init__()
        self.pos = np.zeros(2)
        self.vel = np.zeros(2)

    def _reset_state(self):
        while True:
            self.pos = self.rng.uniform(-1.0, 1.0, size=2)
            if np.linalg.norm(self.pos - self.goal) >= self.goal_radius:
                break
        self.vel = np.zeros(2)

    def set_state(self, pos, vel):
        self.pos = np.array(pos, dtype=np.float64)
        self.vel = np.array(vel, dtype=np.float64)
        self.done = False
        self.steps = 0

    def _advance(self, action):
        self.vel = np.clip(self.vel + action * self.dt, -1.0, 1.0)
        self.pos = self.pos + self.vel * self.dt
        hit_wall = np.abs(self.pos) > 1.0
        self.pos = np.clip(self.pos, -1.0, 1.0)
        self.vel = np.where(hit_wall, 0.0, self.vel)
        dist = float(np.linalg.norm(self.pos - self.goal))
        reward = -dist - 0.01 * float(action @ action)
        return reward, dist < self.goal_radius

    def observe(self):
        return np.concatenate([self.pos, self.vel])


ENVIRONMENTS = {"pendulum": Pendulum, "pointmass2d": PointMass2D}


def make_env(name: str) -> Env:
    try:
        return ENVIRONMENTS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
